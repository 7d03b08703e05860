#pragma once

#include <filesystem>
#include <optional>

#include "refvos/dataset.hpp"
#include "refvos/losses.hpp"
#include "refvos/metrics.hpp"
#include "refvos/model.hpp"

namespace refvos {

class Selector;

struct TrainConfig {
  int steps = 2000;
  int batch_size = 8;
  int grad_accum_steps = 1;
  real lr = 3e-4;
  int warmup_steps = 100;
  real beta1 = 0.9;
  real beta2 = 0.95;
  real weight_decay = 0.0;
  bool global_only = false;
  bool local_only = false;
  bool use_memory = true;
  bool use_contrastive = true;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  /// Fraction of total steps at which the selector-annotation checkpoint is
  /// written (early-stop model).
  real early_stop_fraction = 1.0 / 6.0;
  /// Probability that a batch slot pair is filled with two expressions of the
  /// same object, securing contrastive positives.
  real pair_fraction = 0.5;
  int threads = 2;
  int eval_every = 0;  // 0 disables validation snapshots
  int eval_max_samples = 32;
  std::vector<real> source_weights;  // one per dataset source; default uniform
  int token_bank_capacity = 256;

  void validate() const;
};

struct StepLog {
  int step = 0;
  real lr = 0, ce = 0, bce = 0, dice = 0, ct = 0, total = 0;
};

struct TrainResult {
  std::vector<StepLog> logs;
  std::vector<std::pair<int, real>> snapshots;  // (step, validation J&F)
  std::filesystem::path final_checkpoint;
  std::filesystem::path early_checkpoint;
};

enum class WindowMode { kGlobalLocal, kGlobalOnly, kLocalOnly };

struct InferOptions {
  bool use_memory = true;
  int memory_stride = 3;
  int max_entries = 7;
  int threads = 2;
};

/// One batch of (source index, sample index) picks, as drawn by the trainer:
/// paired slots co-sample two expressions of one object with probability
/// pair_fraction so contrastive positives are available.
std::vector<std::pair<int, size_t>> sample_training_batch(
    const std::vector<const Dataset*>& sources, const std::vector<real>& source_weights,
    real pair_fraction, int batch_size, Rng& rng);

/// Optimize the model on one or more dataset sources. Checkpoints land under
/// run_dir ("step_<k>/checkpoint.bin"); the per-step loss breakdown is logged
/// to run_dir/train_log.txt and returned.
TrainResult train(Segmenter& model, const std::vector<const Dataset*>& sources,
                  const TrainConfig& tc, const LossWeights& lw, const MemoryBankConfig& mc,
                  const std::filesystem::path& run_dir, const Dataset* val_set = nullptr,
                  WindowMode mode = WindowMode::kGlobalLocal);

/// Masks for every frame of one sample.
std::vector<Mask> infer_sample(const Segmenter& model, const VideoClip& clip,
                               const std::string& expression, const InferOptions& opts,
                               WindowMode mode);

/// Sliding-window inference over an explicit frame order (a "virtual video"):
/// order[k] is the real frame shown at traversal position k and emb_ids[k]
/// the frame-index embedding it carries. Context features stay fixed for the
/// whole run; the memory bank is fresh and indexed by traversal position.
std::vector<Mask> run_sliding(const Segmenter& model, const VideoClip& clip,
                              const std::vector<int>& expression_ids,
                              const std::vector<int>& order, const std::vector<int>& emb_ids,
                              const std::vector<int>& context_ids, const InferOptions& opts);

/// Run inference for every sample and write one mask PNG per frame under
/// <pred_dir>/<video_id>/<exp_idx>/%05d.png. With a selector, key-frame
/// selection plus bidirectional propagation replaces plain inference.
void infer_dataset(const Segmenter& model, const Dataset& ds, const InferOptions& opts,
                   WindowMode mode, const std::filesystem::path& pred_dir,
                   const Selector* selector = nullptr);

/// Same inference path without touching disk; optionally capped to the first
/// max_samples samples.
MetricReport evaluate_in_memory(const Segmenter& model, const Dataset& ds,
                                const InferOptions& opts, WindowMode mode,
                                int max_samples = 0, const Selector* selector = nullptr);

}  // namespace refvos
