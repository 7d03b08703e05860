#include "refvos/experiments.hpp"

#include <cstdio>
#include <sstream>

namespace refvos {

const std::vector<RowSpec>& ablation_rows() {
  static const std::vector<RowSpec> rows = {
      {"global-only", true, false, false, false, false},
      {"local-only", false, true, false, false, false},
      {"glu", false, false, false, false, false},
      {"glu+mb", false, false, true, false, false},
      {"glu+mb+oc", false, false, true, true, false},
      {"glu+mb+oc+kfs", false, false, true, true, true},
  };
  return rows;
}

ModelConfig row_model_config(const RowSpec& row, const ModelConfig& base) {
  ModelConfig cfg = base;
  if (row.global_only || row.local_only) {
    // Baselines spend the whole window on query frames.
    cfg.n_query = base.n_context + base.n_query;
    cfg.n_context = 0;
  }
  return cfg;
}

WindowMode row_window_mode(const RowSpec& row) {
  if (row.global_only) return WindowMode::kGlobalOnly;
  if (row.local_only) return WindowMode::kLocalOnly;
  return WindowMode::kGlobalLocal;
}

RowResult run_ablation_row(const RowSpec& row, const Dataset& train_ds, const Dataset& val_ds,
                           const ExperimentConfig& cfg, std::uint64_t seed,
                           const std::filesystem::path& work_dir, bool reuse_cached) {
  ModelConfig model_cfg = row_model_config(row, cfg.model);
  model_cfg.seed = seed;
  WindowMode mode = row_window_mode(row);

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.global_only = row.global_only;
  tc.local_only = row.local_only;
  tc.use_memory = row.use_memory;
  tc.use_contrastive = row.use_contrastive;

  // The selector row shares the contrastive row's segmenter; only the
  // key-frame machinery differs.
  std::string train_key = row.use_selector ? "glu+mb+oc" : row.name;
  auto run_dir = work_dir / (train_key + "_seed" + std::to_string(seed));
  auto final_ckpt = run_dir / ("step_" + std::to_string(tc.steps)) / "checkpoint.bin";
  int early_step =
      std::max(1, static_cast<int>(std::llround(tc.steps * tc.early_stop_fraction)));
  auto early_ckpt = run_dir / ("step_" + std::to_string(early_step)) / "checkpoint.bin";

  if (!(reuse_cached && std::filesystem::exists(final_ckpt))) {
    Segmenter model(model_cfg);
    const Dataset* val = tc.eval_every > 0 ? &val_ds : nullptr;
    TrainResult res = train(model, {&train_ds}, tc, cfg.loss, cfg.memory, run_dir, val, mode);
    if (res.snapshots.size() >= 2) emit_curve(res.snapshots, run_dir / "curve.csv");
  }
  Segmenter model = Segmenter::load_checkpoint(final_ckpt);

  InferOptions io;
  io.use_memory = row.use_memory;
  io.memory_stride = cfg.memory.infer_stride;
  io.max_entries = cfg.memory.max_entries;
  io.threads = cfg.eval_threads;

  std::unique_ptr<Selector> selector;
  if (row.use_selector) {
    auto sel_ckpt = run_dir / "selector" / "checkpoint.bin";
    if (!(reuse_cached && std::filesystem::exists(sel_ckpt))) {
      Segmenter annotator = Segmenter::load_checkpoint(early_ckpt);
      auto labels =
          annotate_pseudo_labels(annotator, train_ds, cfg.selector_label_fraction, io);
      write_labels(run_dir / "selector" / "pseudo_labels.tsv", labels);
      ModelConfig sel_cfg = model_cfg;
      sel_cfg.n_context = 8;
      sel_cfg.n_query = 1;
      sel_cfg.seed = seed;
      Selector sel(sel_cfg);
      SelectorTrainConfig stc = cfg.selector;
      stc.seed = seed;
      train_selector(sel, train_ds, labels, stc);
      sel.save_checkpoint(sel_ckpt);
    }
    selector = std::make_unique<Selector>(Selector::load_checkpoint(sel_ckpt));
  }

  MetricReport rep = evaluate_in_memory(model, val_ds, io, mode, cfg.eval_max_samples,
                                        selector.get());
  return {row.name, rep.mean_j, rep.mean_f, rep.mean_jf};
}

std::string format_ablation_table(const std::vector<RowResult>& rows) {
  std::ostringstream out;
  out << "method                     J       F     J&F\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-22s %7.3f %7.3f %7.3f\n", r.name.c_str(), r.j, r.f,
                  r.jf);
    out << buf;
  }
  return out.str();
}

}  // namespace refvos
