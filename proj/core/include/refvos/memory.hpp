#pragma once

#include <vector>

#include "refvos/nn.hpp"

namespace refvos {

struct ModelConfig;

struct MemoryBankConfig {
  int train_stride = 1;
  int infer_stride = 3;
  int max_entries = 7;
};

/// Encoded (mask, frame-feature) pair for one decoded frame.
struct MemoryEntry {
  NodeRef feature;  // tokens_per_frame x d_model
  int frame_index = 0;
};

/// Per-(video, expression) store of memory entries, owned by a single
/// training window or inference run. Never shared across samples.
class MemoryBank {
 public:
  /// Frame indices must be strictly increasing.
  void push(MemoryEntry entry);

  /// Strided walk anchored at the most recent frame: {t-1, t-1-s, t-1-2s, ...}
  /// intersected with stored indices, newest first, truncated to max_entries.
  /// The most recent entry is always included when the bank is non-empty.
  std::vector<const MemoryEntry*> select(int current_frame, int stride, int max_entries) const;

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

 private:
  std::vector<MemoryEntry> entries_;
};

/// Learned memory encoder plus the attention that conditions query features
/// on selected entries. Optimized end-to-end with the rest of the model.
struct MemoryModule {
  Linear conv_spread;  // 3x3 conv over the pooled mask-probability grid
  Linear fuse;         // 1x1 conv fusing frame tokens with mask channels
  NodeRef age_embed;   // relative-age table added to entries at read time
  LayerNormParams ln_query, ln_entries, ln_post;
  Attention read_attn;
  Mlp read_mlp;

  static MemoryModule create(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  /// Fuse downsampled mask probabilities with frame tokens; differentiable.
  NodeRef encode(Graph& g, const NodeRef& mask_logits, const NodeRef& frame_tokens,
                 const ModelConfig& cfg) const;

  /// Cross-attention from query tokens to the selected entries. With zero
  /// entries the input node is returned unchanged (identity bypass).
  NodeRef read(Graph& g, const NodeRef& frame_tokens,
               const std::vector<const MemoryEntry*>& selected, int current_frame,
               const ModelConfig& cfg) const;
};

}  // namespace refvos
