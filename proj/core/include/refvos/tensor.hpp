#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "refvos/common.hpp"

namespace refvos {

using Mat = Eigen::MatrixXd;

/// One value in the computation graph. Gradients are accumulated lazily; a
/// node without `grad_ready` never contributed to the loss.
struct Node {
  Mat val;
  Mat grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::function<void()> backprop;

  void accumulate(const Mat& g) {
    if (!requires_grad) return;
    if (!grad_ready) {
      grad = g;
      grad_ready = true;
    } else {
      grad += g;
    }
  }
  void zero_grad() {
    grad_ready = false;
    grad.resize(0, 0);
  }
  int rows() const { return static_cast<int>(val.rows()); }
  int cols() const { return static_cast<int>(val.cols()); }
};

using NodeRef = std::shared_ptr<Node>;

/// Leaf with requires_grad (model parameter). Lives outside any graph.
NodeRef make_param(Mat v);
/// Leaf without gradient.
NodeRef make_const(Mat v);

/// Reverse-mode tape. Nodes are appended in creation (topological) order;
/// backward() walks the tape in reverse. With gradients disabled the ops
/// compute values only: nothing is recorded and nothing keeps parents alive.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  NodeRef make(Mat val, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->requires_grad = requires_grad && grad_enabled_;
    if (n->requires_grad) tape_.push_back(n);
    return n;
  }

  void backward(const NodeRef& root);
  void backward_seeded(const std::vector<std::pair<NodeRef, Mat>>& seeds);

  size_t size() const { return tape_.size(); }

 private:
  bool grad_enabled_;
  std::vector<NodeRef> tape_;
};

// ---- primitive ops -------------------------------------------------------

NodeRef matmul(Graph& g, const NodeRef& a, const NodeRef& b);
/// A * B^T without materializing the transpose.
NodeRef matmul_nt(Graph& g, const NodeRef& a, const NodeRef& b);
NodeRef add(Graph& g, const NodeRef& a, const NodeRef& b);
NodeRef sub(Graph& g, const NodeRef& a, const NodeRef& b);
NodeRef hadamard(Graph& g, const NodeRef& a, const NodeRef& b);
/// Elementwise division (same shapes; used mainly on 1x1 scalars).
NodeRef divide(Graph& g, const NodeRef& a, const NodeRef& b);
NodeRef scale(Graph& g, const NodeRef& a, real k);
NodeRef add_scalar(Graph& g, const NodeRef& a, real c);
/// Broadcast-add a 1xC row vector to every row of a.
NodeRef add_rowvec(Graph& g, const NodeRef& a, const NodeRef& row);
NodeRef concat_rows(Graph& g, const std::vector<NodeRef>& parts);
NodeRef concat_cols(Graph& g, const std::vector<NodeRef>& parts);
NodeRef slice_rows(Graph& g, const NodeRef& a, int r0, int n);
NodeRef slice_cols(Graph& g, const NodeRef& a, int c0, int n);
/// Rows of `a` selected by index; index -1 yields a zero row (padding).
NodeRef gather_rows(Graph& g, const NodeRef& a, const std::vector<int>& idx);
NodeRef gelu(Graph& g, const NodeRef& a);
NodeRef sigmoid(Graph& g, const NodeRef& a);
NodeRef layer_norm(Graph& g, const NodeRef& a, const NodeRef& gamma, const NodeRef& beta,
                   real eps = 1e-5);
/// Rows scaled to unit L2 norm: y = x / sqrt(x.x + eps).
NodeRef l2_normalize_rows(Graph& g, const NodeRef& a, real eps = 1e-12);
NodeRef sum_all(Graph& g, const NodeRef& a);
NodeRef mean_all(Graph& g, const NodeRef& a);
/// sum(a .* b) as a 1x1 node.
NodeRef dot_sum(Graph& g, const NodeRef& a, const NodeRef& b);
/// |a - y| for a 1x1 node against a constant target.
NodeRef abs_diff(Graph& g, const NodeRef& a, real y);

/// softmax(scale * Q K^T [+ causal mask]) computed row-wise. Stores only the
/// attention weights; scores are never materialized in the graph.
NodeRef attn_softmax(Graph& g, const NodeRef& q, const NodeRef& k, real scale, bool causal);

/// Mean stable binary cross-entropy with logits against a {0,1} target.
NodeRef bce_with_logits_mean(Graph& g, const NodeRef& logits, const Mat& target);
/// Mean softmax cross-entropy of each row against its target class.
NodeRef softmax_xent_mean(Graph& g, const NodeRef& logits, const std::vector<int>& targets);

/// One InfoNCE term: anchor row, positive column, negative columns (into a
/// shared similarity matrix).
struct NcePair {
  int anchor_row = 0;
  int positive_col = 0;
  std::vector<int> negative_cols;
};
/// Sum over pairs of -log( e^{s+/tau} / (e^{s+/tau} + sum e^{s-/tau}) ).
NodeRef info_nce_sum(Graph& g, const NodeRef& sims, const std::vector<NcePair>& pairs, real tau);

/// Reshape per-patch pixel blocks into a raster: input (P x ps*ps*c) with
/// P = grid*grid patches -> output (grid*ps)^2 x c, rows in raster order.
NodeRef patches_to_pixels(Graph& g, const NodeRef& a, int grid, int ps, int c);
/// Mean over each ps x ps patch of a raster column vector: (H*W x 1) ->
/// (grid*grid x 1).
NodeRef patch_mean(Graph& g, const NodeRef& a, int grid, int ps);
/// 3x3 neighborhood concat on a grid-shaped (P x C) tensor -> (P x 9C),
/// zero-padded at the border.
NodeRef neighbor_concat3x3(Graph& g, const NodeRef& a, int grid);

/// Weighted sum of 1x1 nodes: sum_i w_i * parts_i.
NodeRef weighted_sum(Graph& g, const std::vector<std::pair<NodeRef, real>>& parts);

}  // namespace refvos
