#pragma once

#include <string>
#include <vector>

#include "refvos/tensor.hpp"

namespace refvos {

/// Named parameter registry. Iteration order is insertion order, which keeps
/// optimizer updates and checkpoints deterministic.
class ParamStore {
 public:
  NodeRef add(const std::string& name, int rows, int cols, real init_std, Rng& rng);
  NodeRef find(const std::string& name) const;
  const std::vector<std::pair<std::string, NodeRef>>& items() const { return items_; }
  size_t count() const { return items_.size(); }
  std::int64_t scalar_count() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, NodeRef>> items_;
};

struct Linear {
  NodeRef w, b;
  /// init_std <= 0 selects fan-in scaling, sqrt(1/in).
  static Linear create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                       real init_std = 0);
  NodeRef operator()(Graph& g, const NodeRef& x) const;
};

struct LayerNormParams {
  NodeRef gamma, beta;
  static LayerNormParams create(ParamStore& ps, const std::string& prefix, int dim, Rng& rng);
  NodeRef operator()(Graph& g, const NodeRef& x) const;
};

struct Attention {
  int heads = 1;
  Linear wq, wk, wv, wo;
  static Attention create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                          Rng& rng);
  /// Multi-head attention of x_q over x_kv; causal masking requires equal
  /// lengths (self-attention).
  NodeRef operator()(Graph& g, const NodeRef& x_q, const NodeRef& x_kv, bool causal) const;
};

struct Mlp {
  Linear fc1, fc2;
  static Mlp create(ParamStore& ps, const std::string& prefix, int dim, int hidden, Rng& rng);
  NodeRef operator()(Graph& g, const NodeRef& x) const;
};

/// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct TransformerBlock {
  LayerNormParams ln1, ln2;
  Attention attn;
  Mlp mlp;
  static TransformerBlock create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                                 Rng& rng);
  NodeRef operator()(Graph& g, const NodeRef& x, bool causal) const;
};

/// Adam with linear warmup to a constant learning rate.
class AdamOptimizer {
 public:
  AdamOptimizer(real lr, real beta1, real beta2, real weight_decay, int warmup_steps,
                real eps = 1e-8);
  /// Applies accumulated gradients (unset gradients count as zero), then
  /// clears them. Returns the learning rate used.
  real step(ParamStore& params);
  int steps_done() const { return t_; }

 private:
  real lr_, beta1_, beta2_, weight_decay_, eps_;
  int warmup_steps_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace refvos
