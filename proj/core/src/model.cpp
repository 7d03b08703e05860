#include "refvos/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "refvos/expression.hpp"

namespace refvos {

using json = nlohmann::ordered_json;

const Vocabulary& Vocabulary::get() {
  static const Vocabulary vocab = [] {
    Vocabulary v;
    v.words = {"<pad>", "<bos>", "<eos>", "<seg>", "<score>"};
    for (const auto& w : lang::all_words()) v.words.push_back(w);
    for (size_t i = 0; i < v.words.size(); ++i) v.ids[v.words[i]] = static_cast<int>(i);
    v.pad = v.ids.at("<pad>");
    v.bos = v.ids.at("<bos>");
    v.eos = v.ids.at("<eos>");
    v.seg = v.ids.at("<seg>");
    v.score = v.ids.at("<score>");
    return v;
  }();
  return vocab;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> out;
  std::string word;
  std::stringstream ss(text);
  while (ss >> word) {
    auto it = ids.find(word);
    if (it == ids.end()) throw DataError("word '" + word + "' is not in the vocabulary");
    out.push_back(it->second);
  }
  return out;
}

void ModelConfig::validate() const {
  if (patch <= 0 || resolution % patch != 0)
    throw ConfigError("model config: patch must divide resolution");
  if (tokens_per_frame() != 64)
    throw ConfigError("model config: (resolution/patch)^2 must equal 64");
  if (d_model < 8 || d_model % heads != 0)
    throw ConfigError("model config: d_model must be >= 8 and divisible by heads");
  if (layers < 2) throw ConfigError("model config: layers must be >= 2");
  if (n_context < 0 || n_query < 1)
    throw ConfigError("model config: need n_context >= 0 and n_query >= 1");
  if (max_frames < 1 || max_text < 8) throw ConfigError("model config: table sizes too small");
}

Mat image_to_patches(const Image& img, int patch) {
  int grid = img.h / patch;
  Mat out(grid * grid, patch * patch * 3);
  for (int py = 0; py < grid; ++py)
    for (int px = 0; px < grid; ++px) {
      int p = py * grid + px;
      for (int iy = 0; iy < patch; ++iy)
        for (int ix = 0; ix < patch; ++ix)
          for (int c = 0; c < 3; ++c)
            out(p, (iy * patch + ix) * 3 + c) =
                static_cast<real>(img.at(py * patch + iy, px * patch + ix, c));
    }
  return out;
}

Mask mask_from_logits(const Mat& logits, int h, int w) {
  if (logits.rows() != h * w || logits.cols() != 1)
    throw ShapeError("mask_from_logits: expected HW x 1 logits");
  Mask m(h, w);
  for (int i = 0; i < h * w; ++i) m.v[i] = logits(i, 0) > 0 ? 1 : 0;
  return m;
}

Mat mask_to_column(const Mask& m) {
  Mat out(m.h * m.w, 1);
  for (size_t i = 0; i < m.v.size(); ++i) out(static_cast<int>(i), 0) = m.v[i] ? 1.0 : 0.0;
  return out;
}

FrameEncoder FrameEncoder::create(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  FrameEncoder e;
  e.patch_embed = Linear::create(ps, "vb.patch", cfg.patch * cfg.patch * 3, cfg.d_model, rng);
  e.patch_pos = ps.add("vb.pos", cfg.tokens_per_frame(), cfg.d_model, 0.02, rng);
  e.block = TransformerBlock::create(ps, "vb.block", cfg.d_model, cfg.heads, rng);
  return e;
}

NodeRef FrameEncoder::encode(Graph& g, const Image& img, const ModelConfig& cfg) const {
  if (img.h != cfg.resolution || img.w != cfg.resolution)
    throw ShapeError("encode_frame: image is " + std::to_string(img.h) + "x" +
                     std::to_string(img.w) + ", model expects " +
                     std::to_string(cfg.resolution) + "x" + std::to_string(cfg.resolution));
  NodeRef patches = make_const(image_to_patches(img, cfg.patch));
  NodeRef x = add(g, patch_embed(g, patches), patch_pos);
  return block(g, x, /*causal=*/false);
}

SequenceCore SequenceCore::create(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  SequenceCore c;
  int V = Vocabulary::get().size();
  c.tok_embed = ps.add("core.tok", V, cfg.d_model, 0.02, rng);
  c.seq_pos = ps.add("core.pos", cfg.max_seq(), cfg.d_model, 0.02, rng);
  c.frame_embed = ps.add("core.frame", cfg.max_frames, cfg.d_model, 0.02, rng);
  c.type_embed = ps.add("core.type", 3, cfg.d_model, 0.02, rng);
  c.v2l = Linear::create(ps, "core.v2l", cfg.d_model, cfg.d_model, rng);
  for (int l = 0; l < cfg.layers; ++l)
    c.blocks.push_back(
        TransformerBlock::create(ps, "core.block" + std::to_string(l), cfg.d_model, cfg.heads, rng));
  c.final_ln = LayerNormParams::create(ps, "core.final_ln", cfg.d_model, rng);
  c.lm_head = Linear::create(ps, "core.lm", cfg.d_model, V, rng);
  return c;
}

NodeRef SequenceCore::embed_tokens(Graph& g, const std::vector<int>& ids) const {
  return gather_rows(g, tok_embed, ids);
}

NodeRef SequenceCore::type_row(Graph& g, int type) const {
  return slice_rows(g, type_embed, type, 1);
}

NodeRef SequenceCore::frame_row(Graph& g, int frame_index, const ModelConfig& cfg) const {
  if (frame_index < 0 || frame_index >= cfg.max_frames)
    throw ShapeError("frame index " + std::to_string(frame_index) +
                     " outside the embedding table (max_frames=" +
                     std::to_string(cfg.max_frames) + ")");
  return slice_rows(g, frame_embed, frame_index, 1);
}

SequenceCore::RunResult SequenceCore::run(Graph& g, const std::vector<NodeRef>& pieces,
                                          const ModelConfig& cfg) const {
  NodeRef x = concat_rows(g, pieces);
  if (x->rows() > cfg.max_seq())
    throw ShapeError("sequence length " + std::to_string(x->rows()) +
                     " exceeds max_seq " + std::to_string(cfg.max_seq()));
  x = add(g, x, slice_rows(g, seq_pos, 0, x->rows()));
  RunResult r;
  for (size_t l = 0; l < blocks.size(); ++l) {
    x = blocks[l](g, x, /*causal=*/true);
    if (l + 2 == blocks.size()) r.penultimate = x;
  }
  r.last = x;
  if (!r.penultimate) r.penultimate = x;  // layers == 1 fallback (blocked by validate)
  return r;
}

MaskDecoder MaskDecoder::create(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  MaskDecoder d;
  d.l2v = Linear::create(ps, "dec.l2v", cfg.d_model, cfg.d_model, rng);
  for (int b = 0; b < cfg.decoder_blocks; ++b) {
    std::string p = "dec.block" + std::to_string(b);
    MaskDecoder::Block blk;
    blk.ln_p1 = LayerNormParams::create(ps, p + ".ln_p1", cfg.d_model, rng);
    blk.ln_p2 = LayerNormParams::create(ps, p + ".ln_p2", cfg.d_model, rng);
    blk.ln_f = LayerNormParams::create(ps, p + ".ln_f", cfg.d_model, rng);
    blk.prompt_to_frame = Attention::create(ps, p + ".p2f", cfg.d_model, cfg.heads, rng);
    blk.prompt_mlp = Mlp::create(ps, p + ".pmlp", cfg.d_model, 2 * cfg.d_model, rng);
    blk.frame_to_prompt = Attention::create(ps, p + ".f2p", cfg.d_model, cfg.heads, rng);
    d.blocks.push_back(std::move(blk));
  }
  d.affinity_f = Linear::create(ps, "dec.aff_f", cfg.d_model, cfg.d_model, rng);
  d.affinity_p = Linear::create(ps, "dec.aff_p", cfg.d_model, cfg.d_model, rng);
  d.pixel_profile = ps.add("dec.profile", 1, cfg.patch * cfg.patch, -1.0, rng);
  d.upsample = Linear::create(ps, "dec.up", cfg.d_model, cfg.patch * cfg.patch * cfg.mask_channels,
                              rng);
  d.head1 = Linear::create(ps, "dec.head1", cfg.d_model, cfg.d_model, rng);
  d.head2 = Linear::create(ps, "dec.head2", cfg.d_model, cfg.mask_channels, rng);
  d.bias = ps.add("dec.bias", 1, 1, 0.0, rng);
  return d;
}

NodeRef MaskDecoder::decode(Graph& g, const NodeRef& cond_tokens, const NodeRef& seg_hidden,
                            const ModelConfig& cfg) const {
  if (cond_tokens->rows() != cfg.tokens_per_frame() || cond_tokens->cols() != cfg.d_model)
    throw ShapeError("decode_mask: conditioned tokens have wrong shape");
  if (seg_hidden->rows() != 1 || seg_hidden->cols() != cfg.d_model)
    throw ShapeError("decode_mask: seg hidden must be 1 x d_model");
  NodeRef p = l2v(g, seg_hidden);
  NodeRef f = cond_tokens;
  for (const auto& blk : blocks) {
    p = add(g, p, blk.prompt_to_frame(g, blk.ln_p1(g, p), f, false));
    p = add(g, p, blk.prompt_mlp(g, blk.ln_p2(g, p)));
    f = add(g, f, blk.frame_to_prompt(g, blk.ln_f(g, f), p, false));
  }
  // Which patches: scaled affinity between projected tokens and the prompt,
  // spread over each patch by a learned intra-patch profile.
  real att_scale = 1.0 / std::sqrt(static_cast<real>(cfg.d_model));
  NodeRef aff = scale(g, matmul_nt(g, affinity_f(g, f), affinity_p(g, p)), att_scale);
  NodeRef coarse = patches_to_pixels(g, matmul(g, aff, pixel_profile), cfg.grid(), cfg.patch, 1);
  // Per-pixel detail from the upsampled tokens against the mask vector.
  NodeRef up = upsample(g, f);  // 64 x patch^2*c
  NodeRef pix = patches_to_pixels(g, up, cfg.grid(), cfg.patch, cfg.mask_channels);
  NodeRef w = head2(g, gelu(g, head1(g, p)));  // 1 x c
  NodeRef logits = add(g, coarse, matmul_nt(g, pix, w));  // HW x 1
  return add_rowvec(g, logits, bias);
}

Segmenter::Segmenter(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed, 0x5E6'0001);
  encoder_ = FrameEncoder::create(params_, cfg_, rng);
  core_ = SequenceCore::create(params_, cfg_, rng);
  decoder_ = MaskDecoder::create(params_, cfg_, rng);
  memory_ = MemoryModule::create(params_, cfg_, rng);
}

NodeRef Segmenter::encode_frame(Graph& g, const Image& img) const {
  return encoder_.encode(g, img, cfg_);
}

Segmenter::SequenceOutput Segmenter::forward_sequence(
    Graph& g, const std::vector<int>& expression_ids, const std::vector<NodeRef>& context_feats,
    const std::vector<int>& context_frames, const std::vector<NodeRef>& query_feats,
    const std::vector<int>& query_frames) const {
  const Vocabulary& vocab = Vocabulary::get();
  if (static_cast<int>(context_feats.size()) != cfg_.n_context ||
      context_feats.size() != context_frames.size())
    throw ShapeError("forward_sequence: expected " + std::to_string(cfg_.n_context) +
                     " context frames, got " + std::to_string(context_feats.size()));
  if (static_cast<int>(query_feats.size()) != cfg_.n_query ||
      query_feats.size() != query_frames.size())
    throw ShapeError("forward_sequence: expected " + std::to_string(cfg_.n_query) +
                     " query frames, got " + std::to_string(query_feats.size()));
  if (static_cast<int>(expression_ids.size()) + 1 > cfg_.max_text)
    throw ShapeError("forward_sequence: expression too long");

  int tpf = cfg_.tokens_per_frame();
  std::vector<NodeRef> pieces;
  std::vector<int> text_ids;
  text_ids.push_back(vocab.bos);
  text_ids.insert(text_ids.end(), expression_ids.begin(), expression_ids.end());
  NodeRef text = add_rowvec(g, core_.embed_tokens(g, text_ids), core_.type_row(g, 0));
  pieces.push_back(text);
  int cursor = static_cast<int>(text_ids.size());

  for (size_t i = 0; i < context_feats.size(); ++i) {
    NodeRef f = core_.v2l(g, context_feats[i]);
    f = add_rowvec(g, f, core_.type_row(g, 1));
    f = add_rowvec(g, f, core_.frame_row(g, context_frames[i], cfg_));
    pieces.push_back(f);
    cursor += tpf;
  }

  std::vector<int> seg_positions;
  std::vector<int> sup_positions;  // positions whose next token is supervised
  for (size_t i = 0; i < query_feats.size(); ++i) {
    NodeRef f = core_.v2l(g, query_feats[i]);
    f = add_rowvec(g, f, core_.type_row(g, 2));
    f = add_rowvec(g, f, core_.frame_row(g, query_frames[i], cfg_));
    pieces.push_back(f);
    cursor += tpf;
    sup_positions.push_back(cursor - 1);  // last visual token predicts [SEG]
    NodeRef seg_tok = core_.embed_tokens(g, {vocab.seg});
    seg_tok = add_rowvec(g, seg_tok, core_.type_row(g, 0));
    seg_tok = add_rowvec(g, seg_tok, core_.frame_row(g, query_frames[i], cfg_));
    pieces.push_back(seg_tok);
    seg_positions.push_back(cursor);
    cursor += 1;
  }
  sup_positions.push_back(seg_positions.back());  // final [SEG] predicts [EOS]

  SequenceCore::RunResult run = core_.run(g, pieces, cfg_);

  SequenceOutput out;
  for (int pos : seg_positions) out.seg_hidden.push_back(slice_rows(g, run.penultimate, pos, 1));
  NodeRef sup_hidden = gather_rows(g, run.last, sup_positions);
  out.answer_logits = core_.lm_head(g, core_.final_ln(g, sup_hidden));
  out.answer_targets.assign(query_feats.size(), vocab.seg);
  out.answer_targets.push_back(vocab.eos);
  return out;
}

NodeRef Segmenter::decode_mask(Graph& g, const NodeRef& cond_tokens,
                               const NodeRef& seg_hidden) const {
  return decoder_.decode(g, cond_tokens, seg_hidden, cfg_);
}

// ---- checkpoint container --------------------------------------------------

namespace {
constexpr char kMagic[4] = {'R', 'V', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},
              {"layers", c.layers},
              {"heads", c.heads},
              {"resolution", c.resolution},
              {"patch", c.patch},
              {"n_context", c.n_context},
              {"n_query", c.n_query},
              {"max_frames", c.max_frames},
              {"max_text", c.max_text},
              {"mask_channels", c.mask_channels},
              {"decoder_blocks", c.decoder_blocks},
              {"mem_channels", c.mem_channels},
              {"max_mem_age", c.max_mem_age},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.resolution = j.at("resolution");
  c.patch = j.at("patch");
  c.n_context = j.at("n_context");
  c.n_query = j.at("n_query");
  c.max_frames = j.at("max_frames");
  c.max_text = j.at("max_text");
  c.mask_channels = j.at("mask_channels");
  c.decoder_blocks = j.at("decoder_blocks");
  c.mem_channels = j.at("mem_channels");
  c.max_mem_age = j.at("max_mem_age");
  c.seed = j.at("seed");
  return c;
}
}  // namespace

void save_params(const std::filesystem::path& path, const std::string& kind,
                 const ModelConfig& cfg, const ParamStore& params) {
  json header;
  header["kind"] = kind;
  header["config"] = config_to_json(cfg);
  header["params"] = json::array();
  for (const auto& [name, p] : params.items())
    header["params"].push_back(
        {{"name", name}, {"rows", p->val.rows()}, {"cols", p->val.cols()}});
  std::string hs = header.dump();

  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic, 4);
    std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [_, p] : params.items())
      out.write(reinterpret_cast<const char*>(p->val.data()),
                static_cast<std::streamsize>(sizeof(real) * p->val.size()));
    if (!out) throw IoError("short write for checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

namespace {
json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("'" + path.string() + "' is not a checkpoint file");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw IoError("checkpoint version " + std::to_string(version) + " unsupported");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IoError("truncated checkpoint header in '" + path.string() + "'");
  return json::parse(hs);
}
}  // namespace

ModelConfig load_params_header(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  json header = read_header(in, path);
  if (header.at("kind").get<std::string>() != kind)
    throw IoError("checkpoint kind '" + header.at("kind").get<std::string>() +
                  "' does not match expected '" + kind + "'");
  return config_from_json(header.at("config"));
}

void load_params_data(const std::filesystem::path& path, ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  json header = read_header(in, path);
  const auto& plist = header.at("params");
  if (plist.size() != params.count())
    throw IoError("checkpoint parameter count mismatch");
  size_t i = 0;
  for (auto& [name, p] : params.items()) {
    const auto& meta = plist[i++];
    if (meta.at("name").get<std::string>() != name ||
        meta.at("rows").get<int>() != p->val.rows() ||
        meta.at("cols").get<int>() != p->val.cols())
      throw IoError("checkpoint parameter layout mismatch at '" + name + "'");
    in.read(reinterpret_cast<char*>(p->val.data()),
            static_cast<std::streamsize>(sizeof(real) * p->val.size()));
  }
  if (!in) throw IoError("truncated checkpoint data in '" + path.string() + "'");
}

void Segmenter::save_checkpoint(const std::filesystem::path& path) const {
  save_params(path, "segmenter", cfg_, params_);
}

Segmenter Segmenter::load_checkpoint(const std::filesystem::path& path) {
  ModelConfig cfg = load_params_header(path, "segmenter");
  Segmenter model(cfg);
  load_params_data(path, model.params_);
  return model;
}

}  // namespace refvos
