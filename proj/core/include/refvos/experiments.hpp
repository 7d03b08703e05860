#pragma once

#include "refvos/selector.hpp"
#include "refvos/trainer.hpp"

namespace refvos {

/// One ablation-table row: which training/inference ingredients are on.
struct RowSpec {
  std::string name;
  bool global_only = false;
  bool local_only = false;
  bool use_memory = false;
  bool use_contrastive = false;
  bool use_selector = false;
};

/// The full comparison sequence: global-only, local-only, unified, unified +
/// memory bank, + object contrastive, + key-frame selection.
const std::vector<RowSpec>& ablation_rows();

struct ExperimentConfig {
  WorldConfig world;
  int val_videos = 16;  // tail clips held out for validation
  ModelConfig model;    // unified-model settings; baseline rows adapt arity
  TrainConfig train;
  LossWeights loss;
  MemoryBankConfig memory;
  SelectorTrainConfig selector;
  real selector_label_fraction = 0.5;
  int eval_max_samples = 0;  // 0 = all validation samples
  int eval_threads = 2;
};

struct RowResult {
  std::string name;
  real j = 0, f = 0, jf = 0;
};

/// Model/window configuration for a row (baselines fold all frames into
/// queries; the unified rows keep the context/query split).
ModelConfig row_model_config(const RowSpec& row, const ModelConfig& base);
WindowMode row_window_mode(const RowSpec& row);

/// Train (or reuse a cached run under work_dir) and evaluate one row.
RowResult run_ablation_row(const RowSpec& row, const Dataset& train_ds, const Dataset& val_ds,
                           const ExperimentConfig& cfg, std::uint64_t seed,
                           const std::filesystem::path& work_dir, bool reuse_cached);

std::string format_ablation_table(const std::vector<RowResult>& rows);

}  // namespace refvos
