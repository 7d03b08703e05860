// Command-line entry point: generate / train / infer / eval / annotate /
// train-selector / ablate over the synthetic referring-VOS corpus.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "refvos/config.hpp"
#include "refvos/experiments.hpp"
#include "refvos/metrics.hpp"
#include "refvos/sampling.hpp"

namespace {

using namespace refvos;

const std::vector<std::string> kWorldKeys = {
    "world.num_videos",   "world.frames_per_video",      "world.canvas_size",
    "world.shapes_per_video", "world.expressions_per_object", "world.motion_vocabulary",
    "world.seed"};
const std::vector<std::string> kModelKeys = {
    "model.d_model", "model.layers",        "model.heads",          "model.resolution",
    "model.patch",   "model.n_context",     "model.n_query",        "model.max_frames",
    "model.max_text", "model.mask_channels", "model.decoder_blocks", "model.mem_channels",
    "model.max_mem_age", "model.seed"};
const std::vector<std::string> kLossKeys = {
    "loss.lambda_ce", "loss.lambda_bce", "loss.lambda_dice", "loss.lambda_ct", "loss.tau",
    "loss.token_bank_capacity"};
const std::vector<std::string> kMemoryKeys = {"memory.train_stride", "memory.infer_stride",
                                              "memory.max_entries"};
const std::vector<std::string> kTrainKeys = {
    "train.steps",        "train.batch_size",     "train.grad_accum_steps",
    "train.lr",           "train.warmup_steps",   "train.beta1",
    "train.beta2",        "train.weight_decay",   "train.global_only",
    "train.local_only",   "train.use_memory",     "train.use_contrastive",
    "train.seed",         "train.checkpoint_every", "train.early_stop_fraction",
    "train.pair_fraction", "train.threads",       "train.eval_every",
    "train.eval_max_samples", "train.source_weights"};
const std::vector<std::string> kSelectorKeys = {
    "selector.steps",  "selector.batch_size", "selector.lr",       "selector.warmup_steps",
    "selector.beta1",  "selector.beta2",      "selector.lambda_s", "selector.label_fraction",
    "selector.seed",   "selector.threads"};
const std::vector<std::string> kEvalKeys = {"eval.max_samples", "eval.threads"};
const std::vector<std::string> kAblateKeys = {"ablate.seed", "ablate.val_videos",
                                              "ablate.reuse_cached"};

std::vector<std::string> keys_for(const std::vector<std::vector<std::string>>& groups) {
  std::vector<std::string> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  return all;
}

std::string key_footer(const std::vector<std::string>& keys) {
  std::string s = "\nConfig keys honored (file or key=value override):\n";
  for (const auto& k : keys) s += "  " + k + "\n";
  return s;
}

WorldConfig world_from(const Config& c) {
  WorldConfig w;
  w.num_videos = c.get_int("world.num_videos", w.num_videos);
  w.frames_per_video = c.get_int("world.frames_per_video", w.frames_per_video);
  w.canvas_size = c.get_int("world.canvas_size", w.canvas_size);
  w.shapes_per_video = c.get_int("world.shapes_per_video", w.shapes_per_video);
  w.expressions_per_object = c.get_int("world.expressions_per_object", w.expressions_per_object);
  w.motion_vocabulary = c.get_list("world.motion_vocabulary", w.motion_vocabulary);
  w.seed = static_cast<std::uint64_t>(c.get_i64("world.seed", 0));
  return w;
}

ModelConfig model_from(const Config& c) {
  ModelConfig m;
  m.d_model = c.get_int("model.d_model", m.d_model);
  m.layers = c.get_int("model.layers", m.layers);
  m.heads = c.get_int("model.heads", m.heads);
  m.resolution = c.get_int("model.resolution", m.resolution);
  m.patch = c.get_int("model.patch", m.patch);
  m.n_context = c.get_int("model.n_context", m.n_context);
  m.n_query = c.get_int("model.n_query", m.n_query);
  m.max_frames = c.get_int("model.max_frames", m.max_frames);
  m.max_text = c.get_int("model.max_text", m.max_text);
  m.mask_channels = c.get_int("model.mask_channels", m.mask_channels);
  m.decoder_blocks = c.get_int("model.decoder_blocks", m.decoder_blocks);
  m.mem_channels = c.get_int("model.mem_channels", m.mem_channels);
  m.max_mem_age = c.get_int("model.max_mem_age", m.max_mem_age);
  m.seed = static_cast<std::uint64_t>(c.get_i64("model.seed", 0));
  return m;
}

LossWeights loss_from(const Config& c) {
  LossWeights w;
  w.lambda_ce = c.get_real("loss.lambda_ce", w.lambda_ce);
  w.lambda_bce = c.get_real("loss.lambda_bce", w.lambda_bce);
  w.lambda_dice = c.get_real("loss.lambda_dice", w.lambda_dice);
  w.lambda_ct = c.get_real("loss.lambda_ct", w.lambda_ct);
  w.tau = c.get_real("loss.tau", w.tau);
  return w;
}

MemoryBankConfig memory_from(const Config& c) {
  MemoryBankConfig m;
  m.train_stride = c.get_int("memory.train_stride", m.train_stride);
  m.infer_stride = c.get_int("memory.infer_stride", m.infer_stride);
  m.max_entries = c.get_int("memory.max_entries", m.max_entries);
  return m;
}

TrainConfig train_from(const Config& c) {
  TrainConfig t;
  t.steps = c.get_int("train.steps", t.steps);
  t.batch_size = c.get_int("train.batch_size", t.batch_size);
  t.grad_accum_steps = c.get_int("train.grad_accum_steps", t.grad_accum_steps);
  t.lr = c.get_real("train.lr", t.lr);
  t.warmup_steps = c.get_int("train.warmup_steps", t.warmup_steps);
  t.beta1 = c.get_real("train.beta1", t.beta1);
  t.beta2 = c.get_real("train.beta2", t.beta2);
  t.weight_decay = c.get_real("train.weight_decay", t.weight_decay);
  t.global_only = c.get_bool("train.global_only", t.global_only);
  t.local_only = c.get_bool("train.local_only", t.local_only);
  t.use_memory = c.get_bool("train.use_memory", t.use_memory);
  t.use_contrastive = c.get_bool("train.use_contrastive", t.use_contrastive);
  t.seed = static_cast<std::uint64_t>(c.get_i64("train.seed", 0));
  t.checkpoint_every = c.get_int("train.checkpoint_every", t.checkpoint_every);
  t.early_stop_fraction = c.get_real("train.early_stop_fraction", t.early_stop_fraction);
  t.pair_fraction = c.get_real("train.pair_fraction", t.pair_fraction);
  t.threads = c.get_int("train.threads", t.threads);
  t.eval_every = c.get_int("train.eval_every", t.eval_every);
  t.eval_max_samples = c.get_int("train.eval_max_samples", t.eval_max_samples);
  t.token_bank_capacity = c.get_int("loss.token_bank_capacity", t.token_bank_capacity);
  for (const auto& w : c.get_list("train.source_weights", {}))
    t.source_weights.push_back(std::stod(w));
  return t;
}

SelectorTrainConfig selector_from(const Config& c) {
  SelectorTrainConfig s;
  s.steps = c.get_int("selector.steps", s.steps);
  s.batch_size = c.get_int("selector.batch_size", s.batch_size);
  s.lr = c.get_real("selector.lr", s.lr);
  s.warmup_steps = c.get_int("selector.warmup_steps", s.warmup_steps);
  s.beta1 = c.get_real("selector.beta1", s.beta1);
  s.beta2 = c.get_real("selector.beta2", s.beta2);
  s.lambda_s = c.get_real("selector.lambda_s", s.lambda_s);
  s.seed = static_cast<std::uint64_t>(c.get_i64("selector.seed", 0));
  s.threads = c.get_int("selector.threads", s.threads);
  return s;
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

Config load_config(const CommonArgs& args, const std::vector<std::string>& known) {
  Config cfg;
  if (!args.config_path.empty()) cfg = Config::from_file(args.config_path);
  for (const auto& kv : args.overrides) cfg.apply_override(kv);
  cfg.require_known(known);
  return cfg;
}

WindowMode mode_from_train(const TrainConfig& t) {
  if (t.global_only) return WindowMode::kGlobalOnly;
  if (t.local_only) return WindowMode::kLocalOnly;
  return WindowMode::kGlobalLocal;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Referring video object segmentation on a synthetic moving-shapes corpus"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  CommonArgs gen_args;
  std::string gen_out;
  bool gen_force = false;
  gen->add_option("--config", gen_args.config_path, "Config file (key = value lines)");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_flag("--force", gen_force, "Overwrite a non-empty output directory");
  gen->add_option("overrides", gen_args.overrides, "key=value overrides");
  gen->footer(key_footer(kWorldKeys));
  gen->callback([&] {
    Config cfg = load_config(gen_args, kWorldKeys);
    Dataset ds = generate_world(world_from(cfg));
    write_dataset(ds, gen_out, gen_force);
    std::cout << "wrote " << ds.videos.size() << " videos, " << ds.samples.size()
              << " samples to " << gen_out << "\n";
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train the segmenter");
  CommonArgs tr_args;
  std::vector<std::string> tr_data;
  std::string tr_val, tr_out;
  tr->add_option("--config", tr_args.config_path, "Config file");
  tr->add_option("--data", tr_data, "Training dataset directory (repeatable)")->required();
  tr->add_option("--val-data", tr_val, "Validation dataset for snapshot curves");
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("overrides", tr_args.overrides, "key=value overrides");
  tr->footer(key_footer(keys_for({kModelKeys, kTrainKeys, kLossKeys, kMemoryKeys})));
  tr->callback([&] {
    Config cfg = load_config(tr_args, keys_for({kModelKeys, kTrainKeys, kLossKeys, kMemoryKeys}));
    TrainConfig tc = train_from(cfg);
    ModelConfig mc = model_from(cfg);
    WindowMode mode = mode_from_train(tc);
    if (mode != WindowMode::kGlobalLocal) {
      mc.n_query = mc.n_context + mc.n_query;
      mc.n_context = 0;
    }
    std::vector<Dataset> sources;
    for (const auto& d : tr_data) sources.push_back(load_dataset(d));
    std::vector<const Dataset*> source_ptrs;
    for (const auto& d : sources) source_ptrs.push_back(&d);
    std::optional<Dataset> val;
    if (!tr_val.empty()) val = load_dataset(tr_val);
    Segmenter model(mc);
    TrainResult res = train(model, source_ptrs, tc, loss_from(cfg), memory_from(cfg), tr_out,
                            val ? &*val : nullptr, mode);
    if (res.snapshots.size() >= 2)
      emit_curve(res.snapshots, std::filesystem::path(tr_out) / "curve.csv");
    std::cout << "final checkpoint: " << res.final_checkpoint.string() << "\n";
  });

  // ---- infer ----
  auto* in = app.add_subcommand("infer", "Write predicted masks for a dataset");
  CommonArgs in_args;
  std::string in_ckpt, in_data, in_out, in_selector_ckpt;
  bool in_use_selector = false;
  in->add_option("--checkpoint", in_ckpt, "Segmenter checkpoint")->required();
  in->add_option("--data", in_data, "Dataset directory")->required();
  in->add_option("--out", in_out, "Predictions directory")->required();
  in->add_flag("--use-selector", in_use_selector, "Key-frame selection + propagation");
  in->add_option("--selector-checkpoint", in_selector_ckpt, "Selector checkpoint");
  in->add_option("overrides", in_args.overrides, "key=value overrides");
  in->add_option("--config", in_args.config_path, "Config file");
  in->footer(key_footer(keys_for({kMemoryKeys, kEvalKeys, {"train.global_only",
                                                           "train.local_only",
                                                           "train.use_memory"}})));
  in->callback([&] {
    auto known = keys_for({kMemoryKeys, kEvalKeys,
                           {"train.global_only", "train.local_only", "train.use_memory"}});
    Config cfg = load_config(in_args, known);
    Dataset ds = load_dataset(in_data);
    Segmenter model = Segmenter::load_checkpoint(in_ckpt);
    MemoryBankConfig mc = memory_from(cfg);
    InferOptions opts;
    opts.use_memory = cfg.get_bool("train.use_memory", true);
    opts.memory_stride = mc.infer_stride;
    opts.max_entries = mc.max_entries;
    opts.threads = cfg.get_int("eval.threads", 2);
    TrainConfig flags;
    flags.global_only = cfg.get_bool("train.global_only", false);
    flags.local_only = cfg.get_bool("train.local_only", false);
    std::unique_ptr<Selector> selector;
    if (in_use_selector) {
      if (in_selector_ckpt.empty())
        throw ConfigError("--use-selector requires --selector-checkpoint");
      selector = std::make_unique<Selector>(Selector::load_checkpoint(in_selector_ckpt));
    }
    infer_dataset(model, ds, opts, mode_from_train(flags), in_out, selector.get());
    std::cout << "wrote predictions to " << in_out << "\n";
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
  CommonArgs ev_args;
  std::string ev_pred, ev_data, ev_name = "dataset", ev_out;
  ev->add_option("--pred", ev_pred, "Predictions directory")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--name", ev_name, "Row label");
  ev->add_option("--out", ev_out, "Also write the report to this file");
  ev->add_option("--config", ev_args.config_path, "Config file");
  ev->add_option("overrides", ev_args.overrides, "key=value overrides");
  ev->footer(key_footer({}));
  ev->callback([&] {
    load_config(ev_args, {});
    Dataset ds = load_dataset(ev_data);
    MetricReport rep = evaluate_dataset(ev_pred, ds);
    std::string row = format_report_row(ev_name, rep);
    std::cout << row << "\n";
    if (!ev_out.empty()) {
      std::ofstream f(ev_out);
      f << "sample,j,f,jandf\n";
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", ev_name.c_str(), rep.mean_j,
                    rep.mean_f, rep.mean_jf);
      f << buf;
      for (const auto& s : rep.per_sample) {
        std::snprintf(buf, sizeof(buf), "%s/%d,%.6f,%.6f,%.6f\n", s.video_id.c_str(),
                      s.expression_index, s.j, s.f, s.jf());
        f << buf;
      }
    }
  });

  // ---- annotate ----
  auto* an = app.add_subcommand("annotate", "Produce per-frame IoU pseudo-labels");
  CommonArgs an_args;
  std::string an_ckpt, an_data, an_out;
  an->add_option("--checkpoint", an_ckpt, "Early-stop segmenter checkpoint")->required();
  an->add_option("--data", an_data, "Dataset directory")->required();
  an->add_option("--out", an_out, "Labels file (TSV)")->required();
  an->add_option("--config", an_args.config_path, "Config file");
  an->add_option("overrides", an_args.overrides, "key=value overrides");
  an->footer(key_footer(keys_for({kMemoryKeys, kEvalKeys, {"selector.label_fraction"}})));
  an->callback([&] {
    Config cfg =
        load_config(an_args, keys_for({kMemoryKeys, kEvalKeys, {"selector.label_fraction"}}));
    Dataset ds = load_dataset(an_data);
    Segmenter model = Segmenter::load_checkpoint(an_ckpt);
    MemoryBankConfig mc = memory_from(cfg);
    InferOptions opts;
    opts.memory_stride = mc.infer_stride;
    opts.max_entries = mc.max_entries;
    opts.threads = cfg.get_int("eval.threads", 2);
    auto labels =
        annotate_pseudo_labels(model, ds, cfg.get_real("selector.label_fraction", 0.5), opts);
    write_labels(an_out, labels);
    std::cout << "wrote " << labels.size() << " labels to " << an_out << "\n";
  });

  // ---- train-selector ----
  auto* ts = app.add_subcommand("train-selector", "Fine-tune the key-frame selector");
  CommonArgs ts_args;
  std::string ts_labels, ts_data, ts_out;
  ts->add_option("--labels", ts_labels, "Pseudo-label TSV from 'annotate'")->required();
  ts->add_option("--data", ts_data, "Dataset directory")->required();
  ts->add_option("--out", ts_out, "Selector checkpoint path")->required();
  ts->add_option("--config", ts_args.config_path, "Config file");
  ts->add_option("overrides", ts_args.overrides, "key=value overrides");
  ts->footer(key_footer(keys_for({kModelKeys, kSelectorKeys})));
  ts->callback([&] {
    Config cfg = load_config(ts_args, keys_for({kModelKeys, kSelectorKeys}));
    Dataset ds = load_dataset(ts_data);
    auto labels = read_labels(ts_labels);
    ModelConfig mc = model_from(cfg);
    mc.n_context = 8;
    mc.n_query = 1;
    Selector selector(mc);
    train_selector(selector, ds, labels, selector_from(cfg));
    selector.save_checkpoint(ts_out);
    std::cout << "wrote selector checkpoint to " << ts_out << "\n";
  });

  // ---- ablate ----
  auto* ab = app.add_subcommand("ablate", "Run the six-row comparison table");
  CommonArgs ab_args;
  std::string ab_out;
  ab->add_option("--out", ab_out, "Work directory")->required();
  ab->add_option("--config", ab_args.config_path, "Config file");
  ab->add_option("overrides", ab_args.overrides, "key=value overrides");
  ab->footer(key_footer(keys_for({kWorldKeys, kModelKeys, kTrainKeys, kLossKeys, kMemoryKeys,
                                  kSelectorKeys, kEvalKeys, kAblateKeys})));
  ab->callback([&] {
    Config cfg = load_config(ab_args, keys_for({kWorldKeys, kModelKeys, kTrainKeys, kLossKeys,
                                                kMemoryKeys, kSelectorKeys, kEvalKeys,
                                                kAblateKeys}));
    ExperimentConfig ec;
    ec.world = world_from(cfg);
    ec.model = model_from(cfg);
    ec.train = train_from(cfg);
    ec.loss = loss_from(cfg);
    ec.memory = memory_from(cfg);
    ec.selector = selector_from(cfg);
    ec.selector_label_fraction = cfg.get_real("selector.label_fraction", 0.5);
    ec.eval_max_samples = cfg.get_int("eval.max_samples", 0);
    ec.eval_threads = cfg.get_int("eval.threads", 2);
    ec.val_videos = cfg.get_int("ablate.val_videos", std::max(1, ec.world.num_videos / 6));
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_i64("ablate.seed", 0));
    bool reuse = cfg.get_bool("ablate.reuse_cached", true);

    Dataset world = generate_world(ec.world);
    auto [train_ds, val_ds] =
        split_dataset(world, ec.world.num_videos - ec.val_videos);

    std::vector<RowResult> rows;
    for (const auto& row : ablation_rows()) {
      rows.push_back(run_ablation_row(row, train_ds, val_ds, ec, seed, ab_out, reuse));
      std::cout << format_report_row(rows.back().name,
                                     MetricReport{{}, rows.back().j, rows.back().f,
                                                  rows.back().jf, {}})
                << "\n";
    }
    std::string table = format_ablation_table(rows);

    // Fold in any training curves the rows produced.
    std::string curve_notes;
    for (const auto& row : ablation_rows()) {
      std::string key = row.use_selector ? "glu+mb+oc" : row.name;
      auto curve_file = std::filesystem::path(ab_out) /
                        (key + "_seed" + std::to_string(seed)) / "curve.csv";
      if (std::filesystem::exists(curve_file)) {
        auto pts = read_curve(curve_file);
        if (curve_overfitting_suspect(pts))
          curve_notes += row.name + ": overfitting-suspect (J&F falls over the last steps)\n";
      }
    }
    std::ofstream out(std::filesystem::path(ab_out) / "table.txt");
    out << table;
    if (!curve_notes.empty()) out << "\n" << curve_notes;
    std::cout << table;
    if (!curve_notes.empty()) std::cout << curve_notes;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
