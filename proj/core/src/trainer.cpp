#include "refvos/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

#include "refvos/sampling.hpp"

namespace refvos {

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train.steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (grad_accum_steps < 1) throw ConfigError("train.grad_accum_steps must be >= 1");
  if (lr <= 0) throw ConfigError("train.lr must be > 0");
  if (warmup_steps < 0) throw ConfigError("train.warmup_steps must be >= 0");
  if (global_only && local_only)
    throw ConfigError("train.global_only and train.local_only are mutually exclusive");
  if (pair_fraction < 0 || pair_fraction > 1)
    throw ConfigError("train.pair_fraction must be in [0,1]");
  if (threads < 1) throw ConfigError("train.threads must be >= 1");
  if (early_stop_fraction <= 0 || early_stop_fraction > 1)
    throw ConfigError("train.early_stop_fraction must be in (0,1]");
}

namespace {

struct TrainItem {
  const Dataset* source = nullptr;
  size_t sample_idx = 0;
  std::vector<int> context_ids;
  std::vector<int> query_ids;
  std::int64_t uid = 0;
};

// Frame plan per training mode. Global-only draws every frame uniformly (one
// per span, no continuity); local-only draws one consecutive run; the default
// draws context spans plus a consecutive query run.
void plan_frames(WindowMode mode, int T, int n_context, int n_query, Rng& rng,
                 std::vector<int>& context_ids, std::vector<int>& query_ids) {
  if (mode == WindowMode::kGlobalLocal) {
    FrameWindow w = sample_train_window(T, n_context, n_query, rng);
    context_ids = std::move(w.context_ids);
    query_ids = std::move(w.query_ids);
    return;
  }
  context_ids.clear();
  if (mode == WindowMode::kGlobalOnly) {
    query_ids.clear();
    for (auto [a, b] : split_spans(T, n_query))
      query_ids.push_back(a < 0 ? T - 1 : rng.uniform_int(a, b));
  } else {
    FrameWindow w = sample_train_window(T, 0, n_query, rng);
    query_ids = std::move(w.query_ids);
  }
}

struct ItemForward {
  NodeRef ce, bce, dice;
  std::vector<ContrastiveToken> tokens;
};

ItemForward forward_item(Graph& g, const Segmenter& model, const Dataset& ds,
                         const TrainItem& item, bool use_memory, const MemoryBankConfig& mc) {
  const ModelConfig& cfg = model.config();
  const ReferringSample& sample = ds.samples[item.sample_idx];
  const VideoClip& clip = ds.video(sample.video_id);
  const auto& gt_masks = clip.objects.at(sample.target_object_id);

  std::vector<NodeRef> ctx_feats, q_feats;
  for (int f : item.context_ids) ctx_feats.push_back(model.encode_frame(g, clip.frames[f]));
  for (int f : item.query_ids) q_feats.push_back(model.encode_frame(g, clip.frames[f]));

  auto expr_ids = Vocabulary::get().encode(sample.expression);
  auto seq = model.forward_sequence(g, expr_ids, ctx_feats, item.context_ids, q_feats,
                                    item.query_ids);

  ItemForward out;
  out.ce = text_ce(g, seq.answer_logits, seq.answer_targets);

  MemoryBank bank;
  std::vector<std::pair<NodeRef, real>> bces, dices;
  real inv_q = 1.0 / static_cast<real>(item.query_ids.size());
  for (size_t t = 0; t < item.query_ids.size(); ++t) {
    NodeRef cond = q_feats[t];
    if (use_memory) {
      auto sel = bank.select(static_cast<int>(t), mc.train_stride, mc.max_entries);
      cond = model.memory().read(g, q_feats[t], sel, static_cast<int>(t), cfg);
    }
    NodeRef logits = model.decode_mask(g, cond, seq.seg_hidden[t]);
    const Mask& gt = gt_masks[item.query_ids[t]];
    bces.emplace_back(mask_bce(g, logits, gt), inv_q);
    dices.emplace_back(mask_dice(g, logits, gt), inv_q);
    if (use_memory && t + 1 < item.query_ids.size()) {
      MemoryEntry entry;
      entry.feature = model.memory().encode(g, logits, q_feats[t], cfg);
      entry.frame_index = static_cast<int>(t);
      bank.push(std::move(entry));
    }
  }
  out.bce = weighted_sum(g, bces);
  out.dice = weighted_sum(g, dices);

  std::string object_key = sample.video_id + "/" + sample.target_object_id;
  for (size_t t = 0; t < seq.seg_hidden.size(); ++t)
    out.tokens.push_back({seq.seg_hidden[t], object_key, item.uid});
  return out;
}

class BatchSampler {
 public:
  BatchSampler(const std::vector<const Dataset*>& sources, std::vector<real> weights,
               real pair_fraction)
      : sources_(sources), weights_(std::move(weights)), pair_fraction_(pair_fraction) {
    if (weights_.empty()) weights_.assign(sources_.size(), 1.0);
    if (weights_.size() != sources_.size())
      throw ConfigError("train.source_weights length must match the number of sources");
    real total = 0;
    for (real w : weights_) {
      if (w < 0) throw ConfigError("train.source_weights must be >= 0");
      total += w;
    }
    if (total <= 0) throw ConfigError("train.source_weights must not all be zero");
    for (size_t s = 0; s < sources_.size(); ++s) {
      if (sources_[s]->samples.empty()) throw ConfigError("dataset source has no samples");
      std::map<std::string, std::vector<size_t>> by_object;
      for (size_t i = 0; i < sources_[s]->samples.size(); ++i) {
        const auto& smp = sources_[s]->samples[i];
        by_object[smp.video_id + "/" + smp.target_object_id].push_back(i);
      }
      object_groups_.emplace_back(by_object.begin(), by_object.end());
    }
  }

  int pick_source(Rng& rng) const {
    real total = 0;
    for (real w : weights_) total += w;
    real r = rng.uniform() * total;
    for (size_t i = 0; i < weights_.size(); ++i) {
      if (r < weights_[i]) return static_cast<int>(i);
      r -= weights_[i];
    }
    return static_cast<int>(weights_.size()) - 1;
  }

  // Fill a batch; paired slots draw two expressions of one object so that
  // contrastive positives are present with a configurable probability.
  std::vector<std::pair<int, size_t>> draw(int batch, Rng& rng) const {
    std::vector<std::pair<int, size_t>> picks;
    while (static_cast<int>(picks.size()) < batch) {
      int s = pick_source(rng);
      bool pair_slot = batch - static_cast<int>(picks.size()) >= 2 &&
                       rng.chance(pair_fraction_);
      if (pair_slot) {
        const auto& groups = object_groups_[s];
        const auto& group = groups[rng.uniform_int(0, static_cast<int>(groups.size()) - 1)];
        if (group.second.size() >= 2) {
          int a = rng.uniform_int(0, static_cast<int>(group.second.size()) - 1);
          int b = rng.uniform_int(0, static_cast<int>(group.second.size()) - 2);
          if (b >= a) ++b;
          picks.emplace_back(s, group.second[a]);
          picks.emplace_back(s, group.second[b]);
          continue;
        }
      }
      size_t n = sources_[s]->samples.size();
      picks.emplace_back(s, static_cast<size_t>(rng.uniform_int(0, static_cast<int>(n) - 1)));
    }
    return picks;
  }

 private:
  std::vector<const Dataset*> sources_;
  std::vector<real> weights_;
  real pair_fraction_;
  std::vector<std::vector<std::pair<std::string, std::vector<size_t>>>> object_groups_;
};

void copy_param_values(const ParamStore& from, ParamStore& to) {
  if (from.count() != to.count()) throw TrainError("parameter store mismatch");
  for (size_t i = 0; i < from.count(); ++i) to.items()[i].second->val = from.items()[i].second->val;
}

void reduce_grads(ParamStore& worker, ParamStore& main) {
  for (size_t i = 0; i < main.count(); ++i) {
    auto& wp = worker.items()[i].second;
    if (wp->grad_ready) main.items()[i].second->accumulate(wp->grad);
    wp->zero_grad();
  }
}

}  // namespace

std::vector<std::pair<int, size_t>> sample_training_batch(
    const std::vector<const Dataset*>& sources, const std::vector<real>& source_weights,
    real pair_fraction, int batch_size, Rng& rng) {
  BatchSampler sampler(sources, source_weights, pair_fraction);
  return sampler.draw(batch_size, rng);
}

TrainResult train(Segmenter& model, const std::vector<const Dataset*>& sources,
                  const TrainConfig& tc, const LossWeights& lw, const MemoryBankConfig& mc,
                  const std::filesystem::path& run_dir, const Dataset* val_set,
                  WindowMode mode) {
  tc.validate();
  lw.validate();
  if (sources.empty()) throw ConfigError("train: need at least one dataset source");
  if (mode != WindowMode::kGlobalLocal && model.config().n_context != 0)
    throw ConfigError("train: global-only / local-only models must use n_context = 0");

  std::filesystem::create_directories(run_dir);
  std::ofstream log_file(run_dir / "train_log.txt");

  BatchSampler sampler(sources, tc.source_weights, tc.pair_fraction);
  Rng rng(tc.seed, 0x7121A11);
  AdamOptimizer opt(tc.lr, tc.beta1, tc.beta2, tc.weight_decay, tc.warmup_steps);
  TokenBank token_bank(static_cast<size_t>(tc.token_bank_capacity));

  // Worker models hold value copies of the parameters so per-item backward
  // passes never race on shared gradient buffers.
  int threads = std::max(1, tc.threads);
  std::vector<std::unique_ptr<Segmenter>> workers;
  for (int t = 0; t < threads; ++t) workers.push_back(std::make_unique<Segmenter>(model.config()));

  TrainResult result;
  int early_step = std::max(1, static_cast<int>(std::llround(tc.steps * tc.early_stop_fraction)));
  const ModelConfig& cfg = model.config();
  std::int64_t uid_counter = 0;

  for (int step = 1; step <= tc.steps; ++step) {
    for (auto& w : workers) copy_param_values(model.params(), w->params());

    real sum_ce = 0, sum_bce = 0, sum_dice = 0, sum_ct = 0;
    int total_items = tc.batch_size * tc.grad_accum_steps;

    for (int micro = 0; micro < tc.grad_accum_steps; ++micro) {
      auto picks = sampler.draw(tc.batch_size, rng);
      std::vector<TrainItem> items(picks.size());
      for (size_t i = 0; i < picks.size(); ++i) {
        items[i].source = sources[picks[i].first];
        items[i].sample_idx = picks[i].second;
        items[i].uid = ++uid_counter;
        const auto& sample = items[i].source->samples[items[i].sample_idx];
        int T = items[i].source->video(sample.video_id).length();
        plan_frames(mode, T, cfg.n_context, cfg.n_query, rng, items[i].context_ids,
                    items[i].query_ids);
      }

      std::vector<std::unique_ptr<Graph>> graphs(items.size());
      std::vector<ItemForward> fwd(items.size());
      std::vector<std::string> failures(threads);

      auto run_forward = [&](int tid) {
        try {
          for (size_t i = tid; i < items.size(); i += threads) {
            graphs[i] = std::make_unique<Graph>(true);
            fwd[i] = forward_item(*graphs[i], *workers[tid], *items[i].source, items[i],
                                  tc.use_memory, mc);
          }
        } catch (const std::exception& e) {
          failures[tid] = e.what();
        }
      };
      {
        std::vector<std::thread> pool;
        for (int t = 1; t < threads; ++t) pool.emplace_back(run_forward, t);
        run_forward(0);
        for (auto& th : pool) th.join();
      }
      for (const auto& f : failures)
        if (!f.empty()) throw TrainError("training step " + std::to_string(step) + ": " + f);

      // Contrastive loss couples the whole micro-batch through one graph.
      Graph ct_graph(true);
      NodeRef ct;
      if (tc.use_contrastive) {
        std::vector<ContrastiveToken> pool_tokens;
        for (const auto& f : fwd)
          pool_tokens.insert(pool_tokens.end(), f.tokens.begin(), f.tokens.end());
        ct = object_contrastive(ct_graph, pool_tokens, token_bank, lw.tau);
      } else {
        ct = ct_graph.make(Mat::Zero(1, 1), false);
      }

      for (size_t i = 0; i < items.size(); ++i) {
        auto check = [&](const NodeRef& part, const char* name) {
          if (!std::isfinite(part->val(0, 0)))
            throw TrainError("training diverged at step " + std::to_string(step) +
                             ": non-finite " + std::string(name));
        };
        check(fwd[i].ce, "ce");
        check(fwd[i].bce, "bce");
        check(fwd[i].dice, "dice");
        sum_ce += fwd[i].ce->val(0, 0);
        sum_bce += fwd[i].bce->val(0, 0);
        sum_dice += fwd[i].dice->val(0, 0);
      }
      if (!std::isfinite(ct->val(0, 0)))
        throw TrainError("training diverged at step " + std::to_string(step) +
                         ": non-finite ct");
      sum_ct += ct->val(0, 0);

      real item_w = 1.0 / static_cast<real>(total_items);
      real ct_w = lw.lambda_ct / static_cast<real>(tc.grad_accum_steps);
      if (ct->requires_grad) ct_graph.backward_seeded({{ct, Mat::Constant(1, 1, ct_w)}});

      auto run_backward = [&](int tid) {
        try {
          for (size_t i = tid; i < items.size(); i += threads) {
            Graph& g = *graphs[i];
            std::vector<std::pair<NodeRef, Mat>> seeds = {
                {fwd[i].ce, Mat::Constant(1, 1, item_w * lw.lambda_ce)},
                {fwd[i].bce, Mat::Constant(1, 1, item_w * lw.lambda_bce)},
                {fwd[i].dice, Mat::Constant(1, 1, item_w * lw.lambda_dice)}};
            g.backward_seeded(seeds);
            graphs[i].reset();
          }
        } catch (const std::exception& e) {
          failures[tid] = e.what();
        }
      };
      {
        std::vector<std::thread> pool;
        for (int t = 1; t < threads; ++t) pool.emplace_back(run_backward, t);
        run_backward(0);
        for (auto& th : pool) th.join();
      }
      for (const auto& f : failures)
        if (!f.empty()) throw TrainError("training step " + std::to_string(step) + ": " + f);
    }

    for (auto& w : workers) reduce_grads(w->params(), model.params());
    real lr_used = opt.step(model.params());

    StepLog log;
    log.step = step;
    log.lr = lr_used;
    log.ce = sum_ce / total_items;
    log.bce = sum_bce / total_items;
    log.dice = sum_dice / total_items;
    log.ct = sum_ct / tc.grad_accum_steps;
    log.total = lw.lambda_ce * log.ce + lw.lambda_bce * log.bce + lw.lambda_dice * log.dice +
                lw.lambda_ct * log.ct;
    result.logs.push_back(log);
    if (log_file) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "step=%d lr=%.6e ce=%.6f bce=%.6f dice=%.6f ct=%.6f total=%.6f\n", step,
                    log.lr, log.ce, log.bce, log.dice, log.ct, log.total);
      log_file << buf;
    }

    bool checkpoint_now = step == tc.steps || step == early_step ||
                          (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0);
    if (checkpoint_now) {
      auto dir = run_dir / ("step_" + std::to_string(step));
      model.save_checkpoint(dir / "checkpoint.bin");
      if (step == early_step) result.early_checkpoint = dir / "checkpoint.bin";
      if (step == tc.steps) result.final_checkpoint = dir / "checkpoint.bin";
    }
    if (val_set && tc.eval_every > 0 && (step % tc.eval_every == 0 || step == tc.steps)) {
      InferOptions io;
      io.use_memory = tc.use_memory;
      io.memory_stride = mc.infer_stride;
      io.max_entries = mc.max_entries;
      io.threads = tc.threads;
      MetricReport rep = evaluate_in_memory(model, *val_set, io, mode, tc.eval_max_samples);
      result.snapshots.emplace_back(step, rep.mean_jf);
    }
  }
  return result;
}

}  // namespace refvos
