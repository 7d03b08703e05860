#include <cstdio>
#include <map>
#include <numeric>
#include <thread>

#include "refvos/sampling.hpp"
#include "refvos/selector.hpp"
#include "refvos/trainer.hpp"

namespace refvos {

std::vector<Mask> run_sliding(const Segmenter& model, const VideoClip& clip,
                              const std::vector<int>& expression_ids,
                              const std::vector<int>& order, const std::vector<int>& emb_ids,
                              const std::vector<int>& context_ids, const InferOptions& opts) {
  const ModelConfig& cfg = model.config();
  if (order.empty()) throw ShapeError("run_sliding: empty frame order");
  if (order.size() != emb_ids.size())
    throw ShapeError("run_sliding: order/emb_ids length mismatch");

  // Frame features are deterministic per frame; encode each real frame once.
  Graph feat_graph(false);
  std::map<int, NodeRef> feats;
  auto feat = [&](int f) {
    auto it = feats.find(f);
    if (it == feats.end())
      it = feats.emplace(f, model.encode_frame(feat_graph, clip.frames[f])).first;
    return it->second;
  };

  std::vector<NodeRef> ctx_feats;
  for (int f : context_ids) ctx_feats.push_back(feat(f));

  int n = static_cast<int>(order.size());
  std::vector<Mask> out(n);
  MemoryBank bank;
  for (const QueryWindow& w : sliding_query_windows(n, cfg.n_query)) {
    Graph g(false);
    std::vector<NodeRef> q_feats;
    std::vector<int> q_emb;
    for (int pos : w.frames) {
      q_feats.push_back(feat(order[pos]));
      q_emb.push_back(emb_ids[pos]);
    }
    auto seq = model.forward_sequence(g, expression_ids, ctx_feats, context_ids, q_feats, q_emb);
    for (int local : w.emit_at) {
      int pos = w.frames[local];
      NodeRef cond = q_feats[local];
      if (opts.use_memory) {
        auto sel = bank.select(pos, opts.memory_stride, opts.max_entries);
        cond = model.memory().read(g, q_feats[local], sel, pos, cfg);
      }
      NodeRef logits = model.decode_mask(g, cond, seq.seg_hidden[local]);
      out[pos] = mask_from_logits(logits->val, cfg.resolution, cfg.resolution);
      if (opts.use_memory) {
        MemoryEntry entry;
        entry.feature = model.memory().encode(g, logits, q_feats[local], cfg);
        entry.frame_index = pos;
        bank.push(std::move(entry));
      }
    }
  }
  return out;
}

namespace {

std::vector<Mask> infer_global_folds(const Segmenter& model, const VideoClip& clip,
                                     const std::vector<int>& expression_ids) {
  const ModelConfig& cfg = model.config();
  int T = clip.length();
  std::vector<Mask> out(T);
  Graph feat_graph(false);
  std::map<int, NodeRef> feats;
  auto feat = [&](int f) {
    auto it = feats.find(f);
    if (it == feats.end())
      it = feats.emplace(f, model.encode_frame(feat_graph, clip.frames[f])).first;
    return it->second;
  };
  for (const auto& fold : uniform_folds(T, cfg.n_query)) {
    Graph g(false);
    std::vector<int> frames = fold;
    while (static_cast<int>(frames.size()) < cfg.n_query) frames.push_back(frames.back());
    std::vector<NodeRef> q_feats;
    for (int f : frames) q_feats.push_back(feat(f));
    auto seq = model.forward_sequence(g, expression_ids, {}, {}, q_feats, frames);
    for (size_t i = 0; i < fold.size(); ++i) {
      NodeRef logits = model.decode_mask(g, q_feats[i], seq.seg_hidden[i]);
      out[fold[i]] = mask_from_logits(logits->val, cfg.resolution, cfg.resolution);
    }
  }
  return out;
}

}  // namespace

std::vector<Mask> infer_sample(const Segmenter& model, const VideoClip& clip,
                               const std::string& expression, const InferOptions& opts,
                               WindowMode mode) {
  const ModelConfig& cfg = model.config();
  auto expr_ids = Vocabulary::get().encode(expression);
  int T = clip.length();
  if (mode == WindowMode::kGlobalOnly) {
    if (cfg.n_context != 0)
      throw ConfigError("global-only inference requires an n_context = 0 model");
    return infer_global_folds(model, clip, expr_ids);
  }
  std::vector<int> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> context_ids;
  if (mode == WindowMode::kGlobalLocal)
    context_ids = inference_context(T, cfg.n_context);
  else if (cfg.n_context != 0)
    throw ConfigError("local-only inference requires an n_context = 0 model");
  return run_sliding(model, clip, expr_ids, order, order, context_ids, opts);
}

namespace {

struct SampleJob {
  const ReferringSample* sample;
  const VideoClip* clip;
  int expression_index;
};

std::vector<SampleJob> collect_jobs(const Dataset& ds, int max_samples) {
  std::vector<SampleJob> jobs;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    if (max_samples > 0 && static_cast<int>(jobs.size()) >= max_samples) break;
    jobs.push_back({&ds.samples[i], &ds.video(ds.samples[i].video_id), ds.expression_index(i)});
  }
  return jobs;
}

std::vector<Mask> predict_one(const Segmenter& model, const SampleJob& job,
                              const InferOptions& opts, WindowMode mode,
                              const Selector* selector) {
  if (selector) {
    auto scores = selector->score_video(*job.clip, job.sample->expression);
    int key = select_key_frame(scores);
    return propagate_from_key(model, *job.clip, job.sample->expression, key, opts);
  }
  return infer_sample(model, *job.clip, job.sample->expression, opts, mode);
}

template <typename Fn>
void parallel_over(size_t count, int threads, Fn&& fn) {
  threads = std::max(1, threads);
  std::vector<std::string> failures(threads);
  auto body = [&](int tid) {
    try {
      for (size_t i = tid; i < count; i += threads) fn(i);
    } catch (const std::exception& e) {
      failures[tid] = e.what();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(body, t);
  body(0);
  for (auto& th : pool) th.join();
  for (const auto& f : failures)
    if (!f.empty()) throw TrainError(f);
}

}  // namespace

void infer_dataset(const Segmenter& model, const Dataset& ds, const InferOptions& opts,
                   WindowMode mode, const std::filesystem::path& pred_dir,
                   const Selector* selector) {
  auto jobs = collect_jobs(ds, 0);
  for (const auto& job : jobs)
    std::filesystem::create_directories(pred_dir / job.sample->video_id /
                                        std::to_string(job.expression_index));
  parallel_over(jobs.size(), opts.threads, [&](size_t i) {
    auto masks = predict_one(model, jobs[i], opts, mode, selector);
    auto dir = pred_dir / jobs[i].sample->video_id / std::to_string(jobs[i].expression_index);
    for (size_t f = 0; f < masks.size(); ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05zu.png", f);
      write_png_mask(dir / name, masks[f]);
    }
  });
}

MetricReport evaluate_in_memory(const Segmenter& model, const Dataset& ds,
                                const InferOptions& opts, WindowMode mode, int max_samples,
                                const Selector* selector) {
  auto jobs = collect_jobs(ds, max_samples);
  std::vector<SampleMetrics> metrics(jobs.size());
  parallel_over(jobs.size(), opts.threads, [&](size_t i) {
    auto masks = predict_one(model, jobs[i], opts, mode, selector);
    const auto& gt = jobs[i].clip->objects.at(jobs[i].sample->target_object_id);
    int tol = boundary_tolerance(jobs[i].clip->frames[0].h, jobs[i].clip->frames[0].w);
    metrics[i] = {jobs[i].sample->video_id, jobs[i].expression_index, region_j(masks, gt),
                  boundary_f(masks, gt, tol)};
  });
  return MetricReport::from_samples(std::move(metrics));
}

}  // namespace refvos
