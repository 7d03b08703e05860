#include "refvos/memory.hpp"

#include <algorithm>

#include "refvos/model.hpp"

namespace refvos {

void MemoryBank::push(MemoryEntry entry) {
  if (!entries_.empty() && entry.frame_index <= entries_.back().frame_index)
    throw DataError("memory bank: frame index " + std::to_string(entry.frame_index) +
                    " not greater than last stored index " +
                    std::to_string(entries_.back().frame_index));
  entries_.push_back(std::move(entry));
}

std::vector<const MemoryEntry*> MemoryBank::select(int current_frame, int stride,
                                                   int max_entries) const {
  std::vector<const MemoryEntry*> out;
  if (entries_.empty() || max_entries <= 0) return out;
  if (current_frame <= entries_.back().frame_index)
    throw DataError("memory bank: current frame must exceed every stored index");
  if (stride < 1) throw DataError("memory bank: stride must be >= 1");

  auto find = [this](int frame) -> const MemoryEntry* {
    for (const auto& e : entries_)
      if (e.frame_index == frame) return &e;
    return nullptr;
  };
  for (int idx = current_frame - 1; idx >= entries_.front().frame_index;
       idx -= stride) {
    if (static_cast<int>(out.size()) == max_entries) break;
    if (const MemoryEntry* e = find(idx)) out.push_back(e);
  }
  // The most recent entry always participates when anything is stored.
  const MemoryEntry* newest = &entries_.back();
  if (std::find(out.begin(), out.end(), newest) == out.end()) {
    out.insert(out.begin(), newest);
    if (static_cast<int>(out.size()) > max_entries) out.pop_back();
  }
  return out;
}

MemoryModule MemoryModule::create(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  MemoryModule m;
  m.conv_spread = Linear::create(ps, "mem.conv", 9, cfg.mem_channels, rng, 0.1);
  m.fuse = Linear::create(ps, "mem.fuse", cfg.d_model + cfg.mem_channels, cfg.d_model, rng);
  m.age_embed = ps.add("mem.age", cfg.max_mem_age, cfg.d_model, 0.02, rng);
  m.ln_query = LayerNormParams::create(ps, "mem.ln_q", cfg.d_model, rng);
  m.ln_entries = LayerNormParams::create(ps, "mem.ln_e", cfg.d_model, rng);
  m.ln_post = LayerNormParams::create(ps, "mem.ln_p", cfg.d_model, rng);
  m.read_attn = Attention::create(ps, "mem.attn", cfg.d_model, cfg.heads, rng);
  m.read_mlp = Mlp::create(ps, "mem.mlp", cfg.d_model, 2 * cfg.d_model, rng);
  return m;
}

NodeRef MemoryModule::encode(Graph& g, const NodeRef& mask_logits, const NodeRef& frame_tokens,
                             const ModelConfig& cfg) const {
  if (mask_logits->rows() != cfg.resolution * cfg.resolution || mask_logits->cols() != 1)
    throw ShapeError("memory encode: mask logits must be HW x 1");
  if (frame_tokens->rows() != cfg.tokens_per_frame() || frame_tokens->cols() != cfg.d_model)
    throw ShapeError("memory encode: frame tokens have wrong shape");
  NodeRef probs = sigmoid(g, mask_logits);
  NodeRef pooled = patch_mean(g, probs, cfg.grid(), cfg.patch);  // tokens x 1
  NodeRef spread = gelu(g, conv_spread(g, neighbor_concat3x3(g, pooled, cfg.grid())));
  return fuse(g, concat_cols(g, {frame_tokens, spread}));
}

NodeRef MemoryModule::read(Graph& g, const NodeRef& frame_tokens,
                           const std::vector<const MemoryEntry*>& selected, int current_frame,
                           const ModelConfig& cfg) const {
  if (selected.empty()) return frame_tokens;  // identity bypass
  std::vector<NodeRef> parts;
  parts.reserve(selected.size());
  for (const MemoryEntry* e : selected) {
    int age = std::min(std::max(current_frame - e->frame_index, 0), cfg.max_mem_age - 1);
    parts.push_back(add_rowvec(g, e->feature, slice_rows(g, age_embed, age, 1)));
  }
  NodeRef entries = concat_rows(g, parts);
  NodeRef x = add(g, frame_tokens,
                  read_attn(g, ln_query(g, frame_tokens), ln_entries(g, entries), false));
  return add(g, x, read_mlp(g, ln_post(g, x)));
}

}  // namespace refvos
