#include "refvos/tensor.hpp"

#include <cmath>
#include <limits>

namespace refvos {

namespace {
void check(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}
constexpr real kInvSqrt2 = 0.70710678118654752440;
constexpr real kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

NodeRef make_param(Mat v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->requires_grad = true;
  return n;
}

NodeRef make_const(Mat v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  return n;
}

void Graph::backward(const NodeRef& root) {
  check(root->val.rows() == 1 && root->val.cols() == 1, "backward: root must be 1x1");
  backward_seeded({{root, Mat::Ones(1, 1)}});
}

void Graph::backward_seeded(const std::vector<std::pair<NodeRef, Mat>>& seeds) {
  check(grad_enabled_, "backward on a gradient-disabled graph");
  for (const auto& [node, g] : seeds) node->accumulate(g);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node* n = it->get();
    if (n->grad_ready && n->backprop) n->backprop();
  }
}

NodeRef matmul(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.cols() == b->val.rows(), "matmul: inner dimensions differ");
  NodeRef out = g.make(a->val * b->val, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad * b->val.transpose());
      if (b->requires_grad) b->accumulate(a->val.transpose() * o->grad);
    };
  }
  return out;
}

NodeRef matmul_nt(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.cols() == b->val.cols(), "matmul_nt: inner dimensions differ");
  NodeRef out = g.make(a->val * b->val.transpose(), a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad * b->val);
      if (b->requires_grad) b->accumulate(o->grad.transpose() * a->val);
    };
  }
  return out;
}

NodeRef add(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols(), "add: shape mismatch");
  NodeRef out = g.make(a->val + b->val, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad);
      if (b->requires_grad) b->accumulate(o->grad);
    };
  }
  return out;
}

NodeRef sub(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols(), "sub: shape mismatch");
  NodeRef out = g.make(a->val - b->val, a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad);
      if (b->requires_grad) b->accumulate(-o->grad);
    };
  }
  return out;
}

NodeRef hadamard(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols(),
        "hadamard: shape mismatch");
  NodeRef out = g.make(a->val.cwiseProduct(b->val), a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad.cwiseProduct(b->val));
      if (b->requires_grad) b->accumulate(o->grad.cwiseProduct(a->val));
    };
  }
  return out;
}

NodeRef divide(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols(),
        "divide: shape mismatch");
  NodeRef out = g.make(a->val.cwiseQuotient(b->val), a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad.cwiseQuotient(b->val));
      if (b->requires_grad)
        b->accumulate(
            (-o->grad.cwiseProduct(a->val).cwiseQuotient(b->val.cwiseProduct(b->val))).eval());
    };
  }
  return out;
}

NodeRef scale(Graph& g, const NodeRef& a, real k) {
  NodeRef out = g.make(a->val * k, a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, k] { a->accumulate(o->grad * k); };
  }
  return out;
}

NodeRef add_scalar(Graph& g, const NodeRef& a, real c) {
  NodeRef out = g.make(a->val.array() + c, a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a] { a->accumulate(o->grad); };
  }
  return out;
}

NodeRef add_rowvec(Graph& g, const NodeRef& a, const NodeRef& row) {
  check(row->val.rows() == 1 && row->val.cols() == a->val.cols(),
        "add_rowvec: row must be 1 x cols(a)");
  Mat v = a->val;
  v.rowwise() += row->val.row(0);
  NodeRef out = g.make(std::move(v), a->requires_grad || row->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, row] {
      if (a->requires_grad) a->accumulate(o->grad);
      if (row->requires_grad) row->accumulate(o->grad.colwise().sum());
    };
  }
  return out;
}

NodeRef concat_rows(Graph& g, const std::vector<NodeRef>& parts) {
  check(!parts.empty(), "concat_rows: no parts");
  int cols = parts[0]->cols();
  int rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    check(p->cols() == cols, "concat_rows: column mismatch");
    rows += p->rows();
    rg = rg || p->requires_grad;
  }
  Mat v(rows, cols);
  int r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p->rows()) = p->val;
    r += p->rows();
  }
  NodeRef out = g.make(std::move(v), rg);
  if (out->requires_grad) {
    Node* o = out.get();
    auto parts_copy = parts;
    out->backprop = [o, parts_copy] {
      int r = 0;
      for (const auto& p : parts_copy) {
        if (p->requires_grad) p->accumulate(o->grad.middleRows(r, p->rows()));
        r += p->rows();
      }
    };
  }
  return out;
}

NodeRef concat_cols(Graph& g, const std::vector<NodeRef>& parts) {
  check(!parts.empty(), "concat_cols: no parts");
  int rows = parts[0]->rows();
  int cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    check(p->rows() == rows, "concat_cols: row mismatch");
    cols += p->cols();
    rg = rg || p->requires_grad;
  }
  Mat v(rows, cols);
  int c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p->cols()) = p->val;
    c += p->cols();
  }
  NodeRef out = g.make(std::move(v), rg);
  if (out->requires_grad) {
    Node* o = out.get();
    auto parts_copy = parts;
    out->backprop = [o, parts_copy] {
      int c = 0;
      for (const auto& p : parts_copy) {
        if (p->requires_grad) p->accumulate(o->grad.middleCols(c, p->cols()));
        c += p->cols();
      }
    };
  }
  return out;
}

NodeRef slice_rows(Graph& g, const NodeRef& a, int r0, int n) {
  check(r0 >= 0 && r0 + n <= a->rows(), "slice_rows: out of range");
  NodeRef out = g.make(a->val.middleRows(r0, n), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, r0, n] {
      Mat z = Mat::Zero(a->rows(), a->cols());
      z.middleRows(r0, n) = o->grad;
      a->accumulate(z);
    };
  }
  return out;
}

NodeRef slice_cols(Graph& g, const NodeRef& a, int c0, int n) {
  check(c0 >= 0 && c0 + n <= a->cols(), "slice_cols: out of range");
  NodeRef out = g.make(a->val.middleCols(c0, n), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, c0, n] {
      Mat z = Mat::Zero(a->rows(), a->cols());
      z.middleCols(c0, n) = o->grad;
      a->accumulate(z);
    };
  }
  return out;
}

NodeRef gather_rows(Graph& g, const NodeRef& a, const std::vector<int>& idx) {
  Mat v(static_cast<int>(idx.size()), a->cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] < a->rows(), "gather_rows: index out of range");
    if (idx[i] < 0)
      v.row(static_cast<int>(i)).setZero();
    else
      v.row(static_cast<int>(i)) = a->val.row(idx[i]);
  }
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, idx] {
      Mat z = Mat::Zero(a->rows(), a->cols());
      for (size_t i = 0; i < idx.size(); ++i)
        if (idx[i] >= 0) z.row(idx[i]) += o->grad.row(static_cast<int>(i));
      a->accumulate(z);
    };
  }
  return out;
}

NodeRef gelu(Graph& g, const NodeRef& a) {
  Mat v = a->val.unaryExpr([](real x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a] {
      Mat d = a->val.unaryExpr([](real x) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
               x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
      a->accumulate(o->grad.cwiseProduct(d));
    };
  }
  return out;
}

NodeRef sigmoid(Graph& g, const NodeRef& a) {
  Mat v = a->val.unaryExpr([](real x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a] {
      Mat d = o->val.cwiseProduct((1.0 - o->val.array()).matrix());
      a->accumulate(o->grad.cwiseProduct(d));
    };
  }
  return out;
}

NodeRef layer_norm(Graph& g, const NodeRef& a, const NodeRef& gamma, const NodeRef& beta,
                   real eps) {
  int C = a->cols();
  check(gamma->rows() == 1 && gamma->cols() == C, "layer_norm: gamma must be 1 x C");
  check(beta->rows() == 1 && beta->cols() == C, "layer_norm: beta must be 1 x C");
  Mat xhat(a->rows(), C);
  Eigen::VectorXd inv_std(a->rows());
  for (int i = 0; i < a->rows(); ++i) {
    real mu = a->val.row(i).mean();
    real var = (a->val.row(i).array() - mu).square().mean();
    real is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = (a->val.row(i).array() - mu) * is;
  }
  Mat v = (xhat.array().rowwise() * gamma->val.row(0).array()).matrix();
  v.rowwise() += beta->val.row(0);
  NodeRef out =
      g.make(std::move(v), a->requires_grad || gamma->requires_grad || beta->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, gamma, beta, xhat, inv_std] {
      if (gamma->requires_grad)
        gamma->accumulate(o->grad.cwiseProduct(xhat).colwise().sum());
      if (beta->requires_grad) beta->accumulate(o->grad.colwise().sum());
      if (a->requires_grad) {
        int C = static_cast<int>(a->val.cols());
        Mat dxhat = (o->grad.array().rowwise() * gamma->val.row(0).array()).matrix();
        Mat dx(a->val.rows(), C);
        for (int i = 0; i < a->val.rows(); ++i) {
          real m1 = dxhat.row(i).mean();
          real m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
          dx.row(i) =
              (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
        }
        a->accumulate(dx);
      }
    };
  }
  return out;
}

NodeRef l2_normalize_rows(Graph& g, const NodeRef& a, real eps) {
  Mat v(a->rows(), a->cols());
  Eigen::VectorXd norms(a->rows());
  for (int i = 0; i < a->rows(); ++i) {
    real s = std::sqrt(a->val.row(i).squaredNorm() + eps);
    norms(i) = s;
    v.row(i) = a->val.row(i) / s;
  }
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, norms] {
      Mat dx(a->val.rows(), a->val.cols());
      for (int i = 0; i < a->val.rows(); ++i) {
        real s = norms(i);
        real proj = (a->val.row(i).dot(o->grad.row(i))) / (s * s * s);
        dx.row(i) = o->grad.row(i) / s - a->val.row(i) * proj;
      }
      a->accumulate(dx);
    };
  }
  return out;
}

NodeRef sum_all(Graph& g, const NodeRef& a) {
  Mat v(1, 1);
  v(0, 0) = a->val.sum();
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a] {
      a->accumulate(Mat::Constant(a->val.rows(), a->val.cols(), o->grad(0, 0)));
    };
  }
  return out;
}

NodeRef mean_all(Graph& g, const NodeRef& a) {
  real n = static_cast<real>(a->val.size());
  Mat v(1, 1);
  v(0, 0) = a->val.sum() / n;
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, n] {
      a->accumulate(Mat::Constant(a->val.rows(), a->val.cols(), o->grad(0, 0) / n));
    };
  }
  return out;
}

NodeRef dot_sum(Graph& g, const NodeRef& a, const NodeRef& b) {
  check(a->val.rows() == b->val.rows() && a->val.cols() == b->val.cols(),
        "dot_sum: shape mismatch");
  Mat v(1, 1);
  v(0, 0) = a->val.cwiseProduct(b->val).sum();
  NodeRef out = g.make(std::move(v), a->requires_grad || b->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, b] {
      if (a->requires_grad) a->accumulate(o->grad(0, 0) * b->val);
      if (b->requires_grad) b->accumulate(o->grad(0, 0) * a->val);
    };
  }
  return out;
}

NodeRef abs_diff(Graph& g, const NodeRef& a, real y) {
  check(a->val.rows() == 1 && a->val.cols() == 1, "abs_diff: input must be 1x1");
  Mat v(1, 1);
  real d = a->val(0, 0) - y;
  v(0, 0) = std::abs(d);
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, d] {
      real sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
      a->accumulate(Mat::Constant(1, 1, o->grad(0, 0) * sign));
    };
  }
  return out;
}

NodeRef attn_softmax(Graph& g, const NodeRef& q, const NodeRef& k, real scale, bool causal) {
  check(q->cols() == k->cols(), "attn_softmax: head dimensions differ");
  if (causal) check(q->rows() == k->rows(), "attn_softmax: causal requires square attention");
  Mat s = scale * (q->val * k->val.transpose());
  int L = static_cast<int>(s.rows());
  int M = static_cast<int>(s.cols());
  Mat a(L, M);
  for (int i = 0; i < L; ++i) {
    int limit = causal ? i + 1 : M;
    real mx = -std::numeric_limits<real>::infinity();
    for (int j = 0; j < limit; ++j) mx = std::max(mx, s(i, j));
    real denom = 0;
    for (int j = 0; j < limit; ++j) {
      real e = std::exp(s(i, j) - mx);
      a(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < limit; ++j) a(i, j) /= denom;
    for (int j = limit; j < M; ++j) a(i, j) = 0;
  }
  NodeRef out = g.make(std::move(a), q->requires_grad || k->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, q, k, scale] {
      // dS = A .* (dA - rowsum(dA .* A)); masked entries have A = 0.
      Mat tmp = o->grad.cwiseProduct(o->val);
      Eigen::VectorXd rowsum = tmp.rowwise().sum();
      Mat ds = o->val.cwiseProduct(o->grad.colwise() - rowsum);
      if (q->requires_grad) q->accumulate(scale * (ds * k->val));
      if (k->requires_grad) k->accumulate(scale * (ds.transpose() * q->val));
    };
  }
  return out;
}

NodeRef bce_with_logits_mean(Graph& g, const NodeRef& logits, const Mat& target) {
  check(logits->val.rows() == target.rows() && logits->val.cols() == target.cols(),
        "bce: logits/target shape mismatch");
  real n = static_cast<real>(target.size());
  real acc = 0;
  for (int i = 0; i < target.rows(); ++i) {
    for (int j = 0; j < target.cols(); ++j) {
      real z = logits->val(i, j);
      real t = target(i, j);
      acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
  }
  Mat v(1, 1);
  v(0, 0) = acc / n;
  NodeRef out = g.make(std::move(v), logits->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    Mat tgt = target;
    out->backprop = [o, logits, tgt, n] {
      Mat sig = logits->val.unaryExpr([](real z) {
        return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      });
      logits->accumulate((o->grad(0, 0) / n) * (sig - tgt));
    };
  }
  return out;
}

NodeRef softmax_xent_mean(Graph& g, const NodeRef& logits, const std::vector<int>& targets) {
  check(static_cast<int>(targets.size()) == logits->rows(),
        "softmax_xent: one target per logits row required");
  int P = logits->rows();
  int V = logits->cols();
  Mat probs(P, V);
  real acc = 0;
  for (int i = 0; i < P; ++i) {
    check(targets[i] >= 0 && targets[i] < V, "softmax_xent: target id out of range");
    real mx = logits->val.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits->val.row(i).array() - mx).exp();
    real denom = e.sum();
    probs.row(i) = e / denom;
    acc += std::log(denom) + mx - logits->val(i, targets[i]);
  }
  Mat v(1, 1);
  v(0, 0) = acc / P;
  NodeRef out = g.make(std::move(v), logits->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, logits, probs, targets, P] {
      Mat d = probs;
      for (int i = 0; i < P; ++i) d(i, targets[i]) -= 1.0;
      logits->accumulate((o->grad(0, 0) / P) * d);
    };
  }
  return out;
}

NodeRef info_nce_sum(Graph& g, const NodeRef& sims, const std::vector<NcePair>& pairs,
                     real tau) {
  check(tau > 0, "info_nce: tau must be positive");
  real acc = 0;
  for (const auto& p : pairs) {
    check(p.anchor_row >= 0 && p.anchor_row < sims->rows(), "info_nce: anchor out of range");
    check(p.positive_col >= 0 && p.positive_col < sims->cols(),
          "info_nce: positive out of range");
    real m = sims->val(p.anchor_row, p.positive_col) / tau;
    for (int c : p.negative_cols) m = std::max(m, sims->val(p.anchor_row, c) / tau);
    real wp = std::exp(sims->val(p.anchor_row, p.positive_col) / tau - m);
    real denom = wp;
    for (int c : p.negative_cols) denom += std::exp(sims->val(p.anchor_row, c) / tau - m);
    acc += -(sims->val(p.anchor_row, p.positive_col) / tau - m - std::log(denom));
  }
  Mat v(1, 1);
  v(0, 0) = acc;
  NodeRef out = g.make(std::move(v), sims->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    auto pairs_copy = pairs;
    out->backprop = [o, sims, pairs_copy, tau] {
      Mat d = Mat::Zero(sims->val.rows(), sims->val.cols());
      for (const auto& p : pairs_copy) {
        real m = sims->val(p.anchor_row, p.positive_col) / tau;
        for (int c : p.negative_cols) m = std::max(m, sims->val(p.anchor_row, c) / tau);
        real wp = std::exp(sims->val(p.anchor_row, p.positive_col) / tau - m);
        real denom = wp;
        for (int c : p.negative_cols)
          denom += std::exp(sims->val(p.anchor_row, c) / tau - m);
        d(p.anchor_row, p.positive_col) += (wp / denom - 1.0) / tau;
        for (int c : p.negative_cols)
          d(p.anchor_row, c) += std::exp(sims->val(p.anchor_row, c) / tau - m) / denom / tau;
      }
      sims->accumulate(o->grad(0, 0) * d);
    };
  }
  return out;
}

namespace {
// Raster row for (patch p, in-patch pixel i) with ps x ps patches on a
// grid x grid patch lattice.
inline int raster_row(int p, int i, int grid, int ps) {
  int py = p / grid, px = p % grid;
  int iy = i / ps, ix = i % ps;
  return (py * ps + iy) * (grid * ps) + (px * ps + ix);
}
}  // namespace

NodeRef patches_to_pixels(Graph& g, const NodeRef& a, int grid, int ps, int c) {
  int patches = grid * grid;
  check(a->rows() == patches, "patches_to_pixels: row count != grid^2");
  check(a->cols() == ps * ps * c, "patches_to_pixels: col count != ps^2 * c");
  int hw = patches * ps * ps;
  Mat v(hw, c);
  for (int p = 0; p < patches; ++p)
    for (int i = 0; i < ps * ps; ++i)
      v.row(raster_row(p, i, grid, ps)) = a->val.block(p, i * c, 1, c);
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, grid, ps, c] {
      int patches = grid * grid;
      Mat z = Mat::Zero(a->val.rows(), a->val.cols());
      for (int p = 0; p < patches; ++p)
        for (int i = 0; i < ps * ps; ++i)
          z.block(p, i * c, 1, c) = o->grad.row(raster_row(p, i, grid, ps));
      a->accumulate(z);
    };
  }
  return out;
}

NodeRef patch_mean(Graph& g, const NodeRef& a, int grid, int ps) {
  int hw = grid * grid * ps * ps;
  check(a->rows() == hw && a->cols() == 1, "patch_mean: expected (grid*ps)^2 x 1");
  int patches = grid * grid;
  real inv = 1.0 / (ps * ps);
  Mat v = Mat::Zero(patches, 1);
  for (int p = 0; p < patches; ++p)
    for (int i = 0; i < ps * ps; ++i) v(p, 0) += a->val(raster_row(p, i, grid, ps), 0);
  v *= inv;
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, grid, ps, inv] {
      int patches = grid * grid;
      Mat z = Mat::Zero(a->val.rows(), 1);
      for (int p = 0; p < patches; ++p)
        for (int i = 0; i < ps * ps; ++i)
          z(raster_row(p, i, grid, ps), 0) += o->grad(p, 0) * inv;
      a->accumulate(z);
    };
  }
  return out;
}

NodeRef neighbor_concat3x3(Graph& g, const NodeRef& a, int grid) {
  check(a->rows() == grid * grid, "neighbor_concat3x3: row count != grid^2");
  int C = a->cols();
  Mat v = Mat::Zero(grid * grid, 9 * C);
  auto neighbor = [grid](int p, int k) -> int {
    int py = p / grid + k / 3 - 1;
    int px = p % grid + k % 3 - 1;
    if (py < 0 || py >= grid || px < 0 || px >= grid) return -1;
    return py * grid + px;
  };
  for (int p = 0; p < grid * grid; ++p)
    for (int k = 0; k < 9; ++k) {
      int n = neighbor(p, k);
      if (n >= 0) v.block(p, k * C, 1, C) = a->val.row(n);
    }
  NodeRef out = g.make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Node* o = out.get();
    out->backprop = [o, a, grid, neighbor] {
      int C = static_cast<int>(a->val.cols());
      Mat z = Mat::Zero(a->val.rows(), C);
      for (int p = 0; p < grid * grid; ++p)
        for (int k = 0; k < 9; ++k) {
          int n = neighbor(p, k);
          if (n >= 0) z.row(n) += o->grad.block(p, k * C, 1, C);
        }
      a->accumulate(z);
    };
  }
  return out;
}

NodeRef weighted_sum(Graph& g, const std::vector<std::pair<NodeRef, real>>& parts) {
  check(!parts.empty(), "weighted_sum: no parts");
  bool rg = false;
  real acc = 0;
  for (const auto& [n, w] : parts) {
    check(n->val.rows() == 1 && n->val.cols() == 1, "weighted_sum: parts must be 1x1");
    acc += w * n->val(0, 0);
    rg = rg || n->requires_grad;
  }
  Mat v(1, 1);
  v(0, 0) = acc;
  NodeRef out = g.make(std::move(v), rg);
  if (out->requires_grad) {
    Node* o = out.get();
    auto parts_copy = parts;
    out->backprop = [o, parts_copy] {
      for (const auto& [n, w] : parts_copy)
        if (n->requires_grad) n->accumulate(Mat::Constant(1, 1, o->grad(0, 0) * w));
    };
  }
  return out;
}

}  // namespace refvos
