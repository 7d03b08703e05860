#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "refvos/image.hpp"
#include "refvos/memory.hpp"
#include "refvos/nn.hpp"

namespace refvos {

/// Closed vocabulary: mini-language words plus special tokens.
struct Vocabulary {
  std::vector<std::string> words;
  std::map<std::string, int> ids;
  int pad = 0, bos = 0, eos = 0, seg = 0, score = 0;

  static const Vocabulary& get();
  int size() const { return static_cast<int>(words.size()); }
  std::vector<int> encode(const std::string& text) const;
};

struct ModelConfig {
  int d_model = 128;
  int layers = 4;
  int heads = 4;
  int resolution = 64;
  int patch = 8;
  int n_context = 4;
  int n_query = 4;
  int max_frames = 64;
  int max_text = 24;
  int mask_channels = 8;
  int decoder_blocks = 2;
  int mem_channels = 8;
  int max_mem_age = 32;
  std::uint64_t seed = 0;

  void validate() const;
  int grid() const { return resolution / patch; }
  int tokens_per_frame() const { return grid() * grid(); }
  int max_seq() const {
    return max_text + (n_context + n_query) * (tokens_per_frame() + 1) + 2;
  }
};

/// Pixels of one frame rearranged into patch rows: (grid^2) x (patch^2 * 3).
Mat image_to_patches(const Image& img, int patch);
/// Binary mask from dense logits (HW x 1, raster order) at threshold 0.
Mask mask_from_logits(const Mat& logits, int h, int w);
/// Ground-truth mask as an HW x 1 raster column.
Mat mask_to_column(const Mask& m);

/// Vision backbone: patch embedding + one full-attention block per frame.
struct FrameEncoder {
  Linear patch_embed;
  NodeRef patch_pos;
  TransformerBlock block;

  static FrameEncoder create(ParamStore& ps, const ModelConfig& cfg, Rng& rng);
  NodeRef encode(Graph& g, const Image& img, const ModelConfig& cfg) const;
};

/// Embedding tables plus the causal transformer stack, shared between the
/// segmenter and the key-frame selector.
struct SequenceCore {
  NodeRef tok_embed;    // vocab x d
  NodeRef seq_pos;      // max_seq x d
  NodeRef frame_embed;  // max_frames x d
  NodeRef type_embed;   // rows: 0 text, 1 context frame, 2 query frame
  Linear v2l;           // vision-to-language projection
  std::vector<TransformerBlock> blocks;
  LayerNormParams final_ln;
  Linear lm_head;

  static SequenceCore create(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  struct Piece {
    NodeRef rows;  // k x d, already carrying frame/type embeddings
  };
  struct RunResult {
    NodeRef penultimate;  // L x d, output of the next-to-last block
    NodeRef last;         // L x d, after the final block (pre final_ln)
  };
  /// Concatenate pieces, add sequence-position embeddings, run the causal
  /// stack.
  RunResult run(Graph& g, const std::vector<NodeRef>& pieces, const ModelConfig& cfg) const;

  NodeRef embed_tokens(Graph& g, const std::vector<int>& ids) const;
  NodeRef type_row(Graph& g, int type) const;
  NodeRef frame_row(Graph& g, int frame_index, const ModelConfig& cfg) const;
};

/// SAM-style prompt-conditioned decoder: two two-way cross-attention blocks
/// between the prompt and the frame tokens, then mask logits assembled from
/// (a) a prompt-token affinity map deciding which patches light up and (b) a
/// learned 8x upsampler carving per-pixel detail via a dot product with the
/// prompt-derived mask vector.
struct MaskDecoder {
  Linear l2v;  // language-to-vision projection of the SEG hidden
  struct Block {
    LayerNormParams ln_p1, ln_p2, ln_f;
    Attention prompt_to_frame;
    Mlp prompt_mlp;
    Attention frame_to_prompt;
  };
  std::vector<Block> blocks;
  Linear affinity_f, affinity_p;  // token/prompt projections for the match
  NodeRef pixel_profile;          // 1 x patch^2 intra-patch affinity profile
  Linear upsample;                // d -> patch^2 * mask_channels
  Linear head1, head2;
  NodeRef bias;

  static MaskDecoder create(ParamStore& ps, const ModelConfig& cfg, Rng& rng);
  NodeRef decode(Graph& g, const NodeRef& cond_tokens, const NodeRef& seg_hidden,
                 const ModelConfig& cfg) const;
};

/// The global-local unified segmenter.
class Segmenter {
 public:
  explicit Segmenter(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// 64 visual tokens for one frame; deterministic given parameters.
  NodeRef encode_frame(Graph& g, const Image& img) const;

  struct SequenceOutput {
    std::vector<NodeRef> seg_hidden;  // one 1 x d row per query frame (penultimate layer)
    NodeRef answer_logits;            // (n_query + 1) x vocab at supervised positions
    std::vector<int> answer_targets;  // [SEG] ... [SEG] [EOS]
  };
  /// Causal pass over [R, F^C, (F^Q_t, SEG_t)...]. Arity must match the
  /// configured n_context / n_query.
  SequenceOutput forward_sequence(Graph& g, const std::vector<int>& expression_ids,
                                  const std::vector<NodeRef>& context_feats,
                                  const std::vector<int>& context_frames,
                                  const std::vector<NodeRef>& query_feats,
                                  const std::vector<int>& query_frames) const;

  /// Dense mask logits (HW x 1) from memory-conditioned tokens and one SEG
  /// hidden state.
  NodeRef decode_mask(Graph& g, const NodeRef& cond_tokens, const NodeRef& seg_hidden) const;

  const MemoryModule& memory() const { return memory_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Segmenter load_checkpoint(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  ParamStore params_;
  FrameEncoder encoder_;
  SequenceCore core_;
  MaskDecoder decoder_;
  MemoryModule memory_;
};

/// Shared checkpoint container helpers (also used by the selector).
void save_params(const std::filesystem::path& path, const std::string& kind,
                 const ModelConfig& cfg, const ParamStore& params);
ModelConfig load_params_header(const std::filesystem::path& path, const std::string& kind);
void load_params_data(const std::filesystem::path& path, ParamStore& params);

}  // namespace refvos
