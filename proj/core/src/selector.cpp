#include "refvos/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "refvos/sampling.hpp"

namespace refvos {

std::vector<FrameScoreLabel> annotate_pseudo_labels(const Segmenter& annotating_model,
                                                    const Dataset& ds, real fraction,
                                                    const InferOptions& opts) {
  if (fraction <= 0 || fraction > 1)
    throw ConfigError("selector.label_fraction must be in (0,1]");
  int covered = static_cast<int>(std::llround(fraction * static_cast<real>(ds.videos.size())));
  covered = std::max(1, std::min(covered, static_cast<int>(ds.videos.size())));
  std::vector<std::string> covered_ids;
  for (int i = 0; i < covered; ++i) covered_ids.push_back(ds.videos[i].video_id);

  struct Job {
    size_t sample_idx;
    int expression_index;
  };
  std::vector<Job> jobs;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    if (std::find(covered_ids.begin(), covered_ids.end(), ds.samples[i].video_id) ==
        covered_ids.end())
      continue;
    jobs.push_back({i, ds.expression_index(i)});
  }

  std::vector<std::vector<FrameScoreLabel>> per_job(jobs.size());
  int threads = std::max(1, opts.threads);
  std::vector<std::string> failures(threads);
  auto body = [&](int tid) {
    try {
      for (size_t j = tid; j < jobs.size(); j += threads) {
        const auto& sample = ds.samples[jobs[j].sample_idx];
        const VideoClip& clip = ds.video(sample.video_id);
        auto masks =
            infer_sample(annotating_model, clip, sample.expression, opts,
                         WindowMode::kGlobalLocal);
        const auto& gt = clip.objects.at(sample.target_object_id);
        for (size_t f = 0; f < masks.size(); ++f)
          per_job[j].push_back({sample.video_id, jobs[j].expression_index, static_cast<int>(f),
                                region_j_frame(masks[f], gt[f])});
      }
    } catch (const std::exception& e) {
      failures[tid] = e.what();
    }
  };
  {
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(body, t);
    body(0);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures)
    if (!f.empty()) throw TrainError("annotate_pseudo_labels: " + f);

  std::vector<FrameScoreLabel> labels;
  for (auto& part : per_job)
    for (auto& l : part) labels.push_back(std::move(l));
  return labels;
}

void write_labels(const std::filesystem::path& path,
                  const std::vector<FrameScoreLabel>& labels) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write labels file '" + path.string() + "'");
  for (const auto& l : labels) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%d\t%d\t%.9f\n", l.video_id.c_str(),
                  l.expression_index, l.frame_index, l.iou);
    out << buf;
  }
}

std::vector<FrameScoreLabel> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read labels file '" + path.string() + "'");
  std::vector<FrameScoreLabel> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    FrameScoreLabel l;
    if (!(ss >> l.video_id >> l.expression_index >> l.frame_index >> l.iou))
      throw DataError("malformed label line '" + line + "'");
    labels.push_back(std::move(l));
  }
  return labels;
}

Selector::Selector(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg_.n_query != 1) throw ConfigError("selector model requires n_query = 1");
  cfg_.validate();
  Rng rng(cfg_.seed, 0x5E1'EC70);
  encoder_ = FrameEncoder::create(params_, cfg_, rng);
  core_ = SequenceCore::create(params_, cfg_, rng);
  score1_ = Linear::create(params_, "score.fc1", cfg_.d_model, cfg_.d_model, rng);
  score2_ = Linear::create(params_, "score.fc2", cfg_.d_model, cfg_.d_model, rng);
  score3_ = Linear::create(params_, "score.fc3", cfg_.d_model, 1, rng);
}

NodeRef Selector::encode_frame(Graph& g, const Image& img) const {
  return encoder_.encode(g, img, cfg_);
}

std::vector<int> Selector::prompt_for(const std::string& expression) {
  const Vocabulary& vocab = Vocabulary::get();
  return vocab.encode("when does " + expression + " best match a visible object ?");
}

Selector::Output Selector::forward(Graph& g, const std::vector<int>& prompt_ids,
                                   const std::vector<NodeRef>& context_feats,
                                   const std::vector<int>& context_frames,
                                   const NodeRef& query_feat, int query_frame) const {
  const Vocabulary& vocab = Vocabulary::get();
  if (static_cast<int>(context_feats.size()) != cfg_.n_context ||
      context_feats.size() != context_frames.size())
    throw ShapeError("selector_forward: expected " + std::to_string(cfg_.n_context) +
                     " context frames, got " + std::to_string(context_feats.size()));
  if (static_cast<int>(prompt_ids.size()) + 1 > cfg_.max_text)
    throw ShapeError("selector_forward: prompt too long");

  int tpf = cfg_.tokens_per_frame();
  std::vector<NodeRef> pieces;
  std::vector<int> text_ids;
  text_ids.push_back(vocab.bos);
  text_ids.insert(text_ids.end(), prompt_ids.begin(), prompt_ids.end());
  pieces.push_back(add_rowvec(g, core_.embed_tokens(g, text_ids), core_.type_row(g, 0)));
  int cursor = static_cast<int>(text_ids.size());

  for (size_t i = 0; i < context_feats.size(); ++i) {
    NodeRef f = core_.v2l(g, context_feats[i]);
    f = add_rowvec(g, f, core_.type_row(g, 1));
    f = add_rowvec(g, f, core_.frame_row(g, context_frames[i], cfg_));
    pieces.push_back(f);
    cursor += tpf;
  }
  NodeRef q = core_.v2l(g, query_feat);
  q = add_rowvec(g, q, core_.type_row(g, 2));
  q = add_rowvec(g, q, core_.frame_row(g, query_frame, cfg_));
  pieces.push_back(q);
  cursor += tpf;
  int last_query_pos = cursor - 1;

  NodeRef score_tok = core_.embed_tokens(g, {vocab.score});
  score_tok = add_rowvec(g, score_tok, core_.type_row(g, 0));
  score_tok = add_rowvec(g, score_tok, core_.frame_row(g, query_frame, cfg_));
  pieces.push_back(score_tok);
  int score_pos = cursor;

  SequenceCore::RunResult run = core_.run(g, pieces, cfg_);

  Output out;
  NodeRef h = slice_rows(g, run.penultimate, score_pos, 1);
  out.score = score3_(g, gelu(g, score2_(g, gelu(g, score1_(g, h)))));
  NodeRef sup = gather_rows(g, run.last, {last_query_pos, score_pos});
  out.answer_logits = core_.lm_head(g, core_.final_ln(g, sup));
  out.answer_targets = {vocab.score, vocab.eos};
  return out;
}

std::vector<real> Selector::score_video(const VideoClip& clip,
                                        const std::string& expression) const {
  int T = clip.length();
  auto prompt = prompt_for(expression);
  auto ctx_ids = inference_context(T, cfg_.n_context);
  Graph feat_graph(false);
  std::vector<NodeRef> all_feats;
  for (int f = 0; f < T; ++f)
    all_feats.push_back(encoder_.encode(feat_graph, clip.frames[f], cfg_));
  std::vector<NodeRef> ctx_feats;
  for (int f : ctx_ids) ctx_feats.push_back(all_feats[f]);
  std::vector<real> scores(T);
  for (int f = 0; f < T; ++f) {
    Graph g(false);
    auto out = forward(g, prompt, ctx_feats, ctx_ids, all_feats[f], f);
    scores[f] = out.score->val(0, 0);
  }
  return scores;
}

void Selector::save_checkpoint(const std::filesystem::path& path) const {
  save_params(path, "selector", cfg_, params_);
}

Selector Selector::load_checkpoint(const std::filesystem::path& path) {
  ModelConfig cfg = load_params_header(path, "selector");
  Selector s(cfg);
  load_params_data(path, s.params_);
  return s;
}

NodeRef selector_loss(Graph& g, const NodeRef& score, real iou_label,
                      const NodeRef& answer_logits, const std::vector<int>& answer_targets,
                      real lambda_s) {
  if (iou_label < 0 || iou_label > 1)
    throw ConfigError("selector_loss: IoU label must be in [0,1]");
  NodeRef l_s = abs_diff(g, score, iou_label);
  NodeRef l_txt = text_ce(g, answer_logits, answer_targets);
  return weighted_sum(g, {{l_txt, 1.0}, {l_s, lambda_s}});
}

int select_key_frame(const std::vector<real>& scores) {
  if (scores.empty()) throw DataError("select_key_frame: no scores");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

void SelectorTrainConfig::validate() const {
  if (steps < 1 || batch_size < 1) throw ConfigError("selector train config invalid");
  if (lr <= 0) throw ConfigError("selector.lr must be > 0");
  if (threads < 1) throw ConfigError("selector.threads must be >= 1");
}

SelectorTrainResult train_selector(Selector& selector, const Dataset& ds,
                                   const std::vector<FrameScoreLabel>& labels,
                                   const SelectorTrainConfig& tc) {
  tc.validate();
  if (labels.empty()) throw ConfigError("train_selector: no pseudo-labels");
  const ModelConfig& cfg = selector.config();
  Rng rng(tc.seed, 0x5E1'7171);
  AdamOptimizer opt(tc.lr, tc.beta1, tc.beta2, tc.weight_decay, tc.warmup_steps);

  int threads = std::max(1, tc.threads);
  std::vector<std::unique_ptr<Selector>> workers;
  for (int t = 0; t < threads; ++t) workers.push_back(std::make_unique<Selector>(cfg));

  // Per-sample expression lookup: (video, expression_index) -> expression.
  std::map<std::pair<std::string, int>, std::string> expressions;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    expressions[{ds.samples[i].video_id, ds.expression_index(i)}] = ds.samples[i].expression;

  SelectorTrainResult result;
  for (int step = 1; step <= tc.steps; ++step) {
    for (auto& w : workers) {
      for (size_t i = 0; i < selector.params().count(); ++i)
        w->params().items()[i].second->val = selector.params().items()[i].second->val;
    }
    std::vector<const FrameScoreLabel*> batch;
    for (int b = 0; b < tc.batch_size; ++b)
      batch.push_back(&labels[rng.uniform_int(0, static_cast<int>(labels.size()) - 1)]);
    std::vector<std::vector<int>> ctx_choices(batch.size());
    for (size_t b = 0; b < batch.size(); ++b) {
      const VideoClip& clip = ds.video(batch[b]->video_id);
      // Random context frames during training, one per span.
      FrameWindow w = sample_train_window(clip.length(), cfg.n_context, 1, rng);
      ctx_choices[b] = w.context_ids;
    }

    std::vector<real> losses(batch.size(), 0);
    std::vector<std::string> failures(threads);
    auto body = [&](int tid) {
      try {
        for (size_t b = tid; b < batch.size(); b += threads) {
          const FrameScoreLabel& lab = *batch[b];
          const VideoClip& clip = ds.video(lab.video_id);
          const std::string& expr = expressions.at({lab.video_id, lab.expression_index});
          Graph g(true);
          Selector& w = *workers[tid];
          std::vector<NodeRef> ctx_feats;
          for (int f : ctx_choices[b]) ctx_feats.push_back(w.encode_frame(g, clip.frames[f]));
          NodeRef q = w.encode_frame(g, clip.frames[lab.frame_index]);
          auto out = w.forward(g, Selector::prompt_for(expr), ctx_feats, ctx_choices[b], q,
                               lab.frame_index);
          NodeRef loss = selector_loss(g, out.score, lab.iou, out.answer_logits,
                                       out.answer_targets, tc.lambda_s);
          losses[b] = loss->val(0, 0);
          if (!std::isfinite(losses[b]))
            throw TrainError("selector training diverged at step " + std::to_string(step));
          g.backward_seeded(
              {{loss, Mat::Constant(1, 1, 1.0 / static_cast<real>(batch.size()))}});
        }
      } catch (const std::exception& e) {
        failures[tid] = e.what();
      }
    };
    {
      std::vector<std::thread> pool;
      for (int t = 1; t < threads; ++t) pool.emplace_back(body, t);
      body(0);
      for (auto& th : pool) th.join();
    }
    for (const auto& f : failures)
      if (!f.empty()) throw TrainError(f);

    for (auto& w : workers) {
      for (size_t i = 0; i < selector.params().count(); ++i) {
        auto& wp = w->params().items()[i].second;
        if (wp->grad_ready) selector.params().items()[i].second->accumulate(wp->grad);
        wp->zero_grad();
      }
    }
    opt.step(selector.params());
    real mean = 0;
    for (real l : losses) mean += l;
    result.loss_trajectory.push_back(mean / static_cast<real>(losses.size()));
  }
  return result;
}

std::vector<Mask> propagate_from_key(const Segmenter& model, const VideoClip& clip,
                                     const std::string& expression, int key_frame,
                                     const InferOptions& opts) {
  int T = clip.length();
  if (key_frame < 0 || key_frame >= T)
    throw DataError("propagate_from_key: key frame out of range");
  const ModelConfig& cfg = model.config();
  auto expr_ids = Vocabulary::get().encode(expression);
  auto ctx_ids = inference_context(T, cfg.n_context);

  // Forward run over [key, T): the key frame is the first query frame and
  // keeps true frame-index embeddings.
  std::vector<int> fwd_order, fwd_emb;
  for (int f = key_frame; f < T; ++f) {
    fwd_order.push_back(f);
    fwd_emb.push_back(f);
  }
  auto fwd_masks = run_sliding(model, clip, expr_ids, fwd_order, fwd_emb, ctx_ids, opts);

  std::vector<Mask> out(T);
  for (size_t i = 0; i < fwd_order.size(); ++i) out[fwd_order[i]] = std::move(fwd_masks[i]);

  // Backward run over the reversed prefix [key, 0]: the window machinery sees
  // a fresh video, so embeddings follow the traversal order. The key frame's
  // mask stays the forward one.
  if (key_frame > 0) {
    std::vector<int> bwd_order, bwd_emb;
    for (int f = key_frame; f >= 0; --f) {
      bwd_order.push_back(f);
      bwd_emb.push_back(key_frame - f);
    }
    auto bwd_masks = run_sliding(model, clip, expr_ids, bwd_order, bwd_emb, ctx_ids, opts);
    for (size_t i = 1; i < bwd_order.size(); ++i) out[bwd_order[i]] = std::move(bwd_masks[i]);
  }
  return out;
}

}  // namespace refvos
