#pragma once

#include "refvos/trainer.hpp"

namespace refvos {

/// Per-frame IoU pseudo-label produced by an early-stop checkpoint.
struct FrameScoreLabel {
  std::string video_id;
  int expression_index = 0;
  int frame_index = 0;
  real iou = 0;
};

/// Run full inference with `annotating_model` over the first
/// round(fraction * videos) clips and record per-frame IoU against ground
/// truth for every covered sample.
std::vector<FrameScoreLabel> annotate_pseudo_labels(const Segmenter& annotating_model,
                                                    const Dataset& ds, real fraction,
                                                    const InferOptions& opts);

/// Line-delimited records: video_id \t expression_index \t frame \t iou.
void write_labels(const std::filesystem::path& path,
                  const std::vector<FrameScoreLabel>& labels);
std::vector<FrameScoreLabel> read_labels(const std::filesystem::path& path);

/// Key-frame scoring model: the segmenter's frame encoder and causal stack at
/// the same scale, with 8 context frames, a single query frame, a dedicated
/// score token and a 3-layer projection head.
class Selector {
 public:
  explicit Selector(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  NodeRef encode_frame(Graph& g, const Image& img) const;

  struct Output {
    NodeRef score;           // 1x1
    NodeRef answer_logits;   // 2 x vocab
    std::vector<int> answer_targets;
  };
  Output forward(Graph& g, const std::vector<int>& prompt_ids,
                 const std::vector<NodeRef>& context_feats,
                 const std::vector<int>& context_frames, const NodeRef& query_feat,
                 int query_frame) const;

  /// Fixed question template wrapping the expression.
  static std::vector<int> prompt_for(const std::string& expression);

  /// Score every frame of a clip with deterministic (center) context frames.
  std::vector<real> score_video(const VideoClip& clip, const std::string& expression) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  static Selector load_checkpoint(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  ParamStore params_;
  FrameEncoder encoder_;
  SequenceCore core_;
  Linear score1_, score2_, score3_;
};

/// |y - s| score regression plus text cross-entropy, combined with lambda_s.
NodeRef selector_loss(Graph& g, const NodeRef& score, real iou_label,
                      const NodeRef& answer_logits, const std::vector<int>& answer_targets,
                      real lambda_s);

/// Argmax frame; ties break to the earliest index.
int select_key_frame(const std::vector<real>& scores);

struct SelectorTrainConfig {
  int steps = 300;
  int batch_size = 8;
  real lr = 3e-4;
  int warmup_steps = 0;
  real beta1 = 0.9;
  real beta2 = 0.95;
  real weight_decay = 0.0;
  real lambda_s = 1.0;
  std::uint64_t seed = 0;
  int threads = 2;

  void validate() const;
};

struct SelectorTrainResult {
  std::vector<real> loss_trajectory;
};

SelectorTrainResult train_selector(Selector& selector, const Dataset& ds,
                                   const std::vector<FrameScoreLabel>& labels,
                                   const SelectorTrainConfig& tc);

/// Bidirectional propagation anchored at the key frame: a forward sliding run
/// over [key, T) and a backward run over the reversed prefix [key, 0], each
/// with a fresh memory bank; the key frame's mask comes from the forward run.
/// Context frames stay the whole-video centers.
std::vector<Mask> propagate_from_key(const Segmenter& model, const VideoClip& clip,
                                     const std::string& expression, int key_frame,
                                     const InferOptions& opts);

}  // namespace refvos
