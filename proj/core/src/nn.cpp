#include "refvos/nn.hpp"

#include <cmath>

namespace refvos {

NodeRef ParamStore::add(const std::string& name, int rows, int cols, real init_std, Rng& rng) {
  for (const auto& [n, _] : items_)
    if (n == name) throw ShapeError("duplicate parameter name '" + name + "'");
  Mat v(rows, cols);
  if (init_std == 0.0) {
    v.setZero();
  } else if (init_std < 0.0) {
    v.setOnes();  // convention for LayerNorm gain
  } else {
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) v(i, j) = init_std * rng.normal();
  }
  NodeRef p = make_param(std::move(v));
  items_.emplace_back(name, p);
  return p;
}

NodeRef ParamStore::find(const std::string& name) const {
  for (const auto& [n, p] : items_)
    if (n == name) return p;
  throw ShapeError("unknown parameter '" + name + "'");
}

std::int64_t ParamStore::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& [_, p] : items_) n += p->val.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [_, p] : items_) p->zero_grad();
}

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                      real init_std) {
  Linear l;
  if (init_std <= 0) init_std = std::sqrt(1.0 / in);
  l.w = ps.add(prefix + ".w", in, out, init_std, rng);
  l.b = ps.add(prefix + ".b", 1, out, 0.0, rng);
  return l;
}

NodeRef Linear::operator()(Graph& g, const NodeRef& x) const {
  return add_rowvec(g, matmul(g, x, w), b);
}

LayerNormParams LayerNormParams::create(ParamStore& ps, const std::string& prefix, int dim,
                                        Rng& rng) {
  LayerNormParams ln;
  ln.gamma = ps.add(prefix + ".gamma", 1, dim, -1.0, rng);
  ln.beta = ps.add(prefix + ".beta", 1, dim, 0.0, rng);
  return ln;
}

NodeRef LayerNormParams::operator()(Graph& g, const NodeRef& x) const {
  return layer_norm(g, x, gamma, beta);
}

Attention Attention::create(ParamStore& ps, const std::string& prefix, int dim, int heads,
                            Rng& rng) {
  if (dim % heads != 0) throw ShapeError("attention dim must divide heads");
  Attention a;
  a.heads = heads;
  a.wq = Linear::create(ps, prefix + ".q", dim, dim, rng);
  a.wk = Linear::create(ps, prefix + ".k", dim, dim, rng);
  a.wv = Linear::create(ps, prefix + ".v", dim, dim, rng);
  a.wo = Linear::create(ps, prefix + ".o", dim, dim, rng);
  return a;
}

NodeRef Attention::operator()(Graph& g, const NodeRef& x_q, const NodeRef& x_kv,
                              bool causal) const {
  int dim = x_q->cols();
  int dh = dim / heads;
  NodeRef q = wq(g, x_q);
  NodeRef k = wk(g, x_kv);
  NodeRef v = wv(g, x_kv);
  real att_scale = 1.0 / std::sqrt(static_cast<real>(dh));
  std::vector<NodeRef> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    NodeRef qh = slice_cols(g, q, h * dh, dh);
    NodeRef kh = slice_cols(g, k, h * dh, dh);
    NodeRef vh = slice_cols(g, v, h * dh, dh);
    NodeRef a = attn_softmax(g, qh, kh, att_scale, causal);
    outs.push_back(matmul(g, a, vh));
  }
  return wo(g, heads == 1 ? outs[0] : concat_cols(g, outs));
}

Mlp Mlp::create(ParamStore& ps, const std::string& prefix, int dim, int hidden, Rng& rng) {
  Mlp m;
  m.fc1 = Linear::create(ps, prefix + ".fc1", dim, hidden, rng);
  m.fc2 = Linear::create(ps, prefix + ".fc2", hidden, dim, rng);
  return m;
}

NodeRef Mlp::operator()(Graph& g, const NodeRef& x) const {
  return fc2(g, gelu(g, fc1(g, x)));
}

TransformerBlock TransformerBlock::create(ParamStore& ps, const std::string& prefix, int dim,
                                          int heads, Rng& rng) {
  TransformerBlock b;
  b.ln1 = LayerNormParams::create(ps, prefix + ".ln1", dim, rng);
  b.ln2 = LayerNormParams::create(ps, prefix + ".ln2", dim, rng);
  b.attn = Attention::create(ps, prefix + ".attn", dim, heads, rng);
  b.mlp = Mlp::create(ps, prefix + ".mlp", dim, 4 * dim, rng);
  return b;
}

NodeRef TransformerBlock::operator()(Graph& g, const NodeRef& x, bool causal) const {
  NodeRef n1 = ln1(g, x);
  NodeRef h = add(g, x, attn(g, n1, n1, causal));
  return add(g, h, mlp(g, ln2(g, h)));
}

AdamOptimizer::AdamOptimizer(real lr, real beta1, real beta2, real weight_decay,
                             int warmup_steps, real eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps),
      warmup_steps_(warmup_steps) {}

real AdamOptimizer::step(ParamStore& params) {
  if (m_.empty()) {
    for (const auto& [_, p] : params.items()) {
      m_.push_back(Mat::Zero(p->val.rows(), p->val.cols()));
      v_.push_back(Mat::Zero(p->val.rows(), p->val.cols()));
    }
  }
  if (m_.size() != params.count()) throw TrainError("optimizer/parameter count mismatch");
  ++t_;
  real lr = lr_;
  if (warmup_steps_ > 0 && t_ <= warmup_steps_)
    lr = lr_ * static_cast<real>(t_) / static_cast<real>(warmup_steps_);
  real bc1 = 1.0 - std::pow(beta1_, t_);
  real bc2 = 1.0 - std::pow(beta2_, t_);
  size_t i = 0;
  for (auto& [_, p] : params.items()) {
    Mat grad = p->grad_ready ? p->grad : Mat::Zero(p->val.rows(), p->val.cols());
    if (weight_decay_ != 0.0) grad += weight_decay_ * p->val;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad.cwiseProduct(grad);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    p->val.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps_);
    p->zero_grad();
    ++i;
  }
  return lr;
}

}  // namespace refvos
