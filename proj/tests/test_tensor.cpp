#include <doctest.h>

#include <cmath>
#include <functional>

#include "refvos/nn.hpp"

using namespace refvos;

namespace {

Mat random_mat(int r, int c, Rng& rng, real scale = 1.0) {
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

// Central finite differences against the analytic gradient. The op under
// test is wrapped in a random projection so the full Jacobian is exercised.
void fd_check(const std::function<NodeRef(Graph&, std::vector<NodeRef>&)>& build,
              std::vector<Mat> init, real h = 1e-5, real tol = 1e-6) {
  std::vector<NodeRef> params;
  for (auto& m : init) params.push_back(make_param(m));
  Graph g(true);
  NodeRef loss = build(g, params);
  REQUIRE(loss->rows() == 1);
  REQUIRE(loss->cols() == 1);
  g.backward(loss);

  for (size_t p = 0; p < params.size(); ++p) {
    REQUIRE(params[p]->grad_ready);
    Mat analytic = params[p]->grad;
    for (int j = 0; j < init[p].cols(); ++j) {
      for (int i = 0; i < init[p].rows(); ++i) {
        auto eval = [&](real delta) {
          std::vector<NodeRef> q;
          for (size_t k = 0; k < init.size(); ++k) q.push_back(make_param(init[k]));
          q[p]->val(i, j) += delta;
          Graph g2(true);
          return build(g2, q)->val(0, 0);
        };
        real fd = (eval(h) - eval(-h)) / (2 * h);
        real a = analytic(i, j);
        real err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0});
        if (err > tol) {
          CAPTURE(p);
          CAPTURE(i);
          CAPTURE(j);
          CAPTURE(a);
          CAPTURE(fd);
          REQUIRE(err <= tol);
        }
      }
    }
  }
}

NodeRef project(Graph& g, const NodeRef& out, Rng& rng) {
  return dot_sum(g, out, make_const(random_mat(out->rows(), out->cols(), rng)));
}

}  // namespace

TEST_CASE("gradients: elementwise and matmul family") {
  Rng rng(101);
  Mat a = random_mat(3, 4, rng), b = random_mat(4, 2, rng), c = random_mat(3, 4, rng);
  fd_check([&](Graph& g, auto& p) { Rng r(1); return project(g, matmul(g, p[0], p[1]), r); },
           {a, b});
  fd_check([&](Graph& g, auto& p) { Rng r(2); return project(g, matmul_nt(g, p[0], p[1]), r); },
           {a, c});
  fd_check([&](Graph& g, auto& p) { Rng r(3); return project(g, add(g, p[0], p[1]), r); },
           {a, c});
  fd_check([&](Graph& g, auto& p) { Rng r(4); return project(g, sub(g, p[0], p[1]), r); },
           {a, c});
  fd_check([&](Graph& g, auto& p) { Rng r(5); return project(g, hadamard(g, p[0], p[1]), r); },
           {a, c});
  Mat denom = c;
  denom.array() += 3.0;  // keep away from zero
  fd_check([&](Graph& g, auto& p) { Rng r(6); return project(g, divide(g, p[0], p[1]), r); },
           {a, denom});
  fd_check([&](Graph& g, auto& p) { Rng r(7); return project(g, scale(g, p[0], 2.5), r); }, {a});
  fd_check([&](Graph& g, auto& p) { Rng r(8); return project(g, add_scalar(g, p[0], -1.5), r); },
           {a});
  Mat row = random_mat(1, 4, rng);
  fd_check(
      [&](Graph& g, auto& p) { Rng r(9); return project(g, add_rowvec(g, p[0], p[1]), r); },
      {a, row});
}

TEST_CASE("gradients: shaping ops") {
  Rng rng(12);
  Mat a = random_mat(4, 3, rng), b = random_mat(2, 3, rng), c = random_mat(4, 2, rng);
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(1);
        return project(g, concat_rows(g, {p[0], p[1]}), r);
      },
      {a, b});
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(2);
        return project(g, concat_cols(g, {p[0], p[1]}), r);
      },
      {a, c});
  fd_check([&](Graph& g, auto& p) { Rng r(3); return project(g, slice_rows(g, p[0], 1, 2), r); },
           {a});
  fd_check([&](Graph& g, auto& p) { Rng r(4); return project(g, slice_cols(g, p[0], 1, 2), r); },
           {a});
  std::vector<int> idx = {2, 0, -1, 2};
  fd_check(
      [&](Graph& g, auto& p) { Rng r(5); return project(g, gather_rows(g, p[0], idx), r); },
      {a});
}

TEST_CASE("gradients: nonlinearities and normalization") {
  Rng rng(13);
  Mat a = random_mat(3, 5, rng);
  fd_check([&](Graph& g, auto& p) { Rng r(1); return project(g, gelu(g, p[0]), r); }, {a});
  fd_check([&](Graph& g, auto& p) { Rng r(2); return project(g, sigmoid(g, p[0]), r); }, {a});
  Mat gamma = random_mat(1, 5, rng, 0.5);
  gamma.array() += 1.0;
  Mat beta = random_mat(1, 5, rng, 0.2);
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(3);
        return project(g, layer_norm(g, p[0], p[1], p[2]), r);
      },
      {a, gamma, beta}, 1e-5, 5e-6);
  fd_check(
      [&](Graph& g, auto& p) { Rng r(4); return project(g, l2_normalize_rows(g, p[0]), r); },
      {a});
}

TEST_CASE("gradients: reductions and scalar ops") {
  Rng rng(14);
  Mat a = random_mat(3, 4, rng), b = random_mat(3, 4, rng);
  fd_check([&](Graph& g, auto& p) { return sum_all(g, p[0]); }, {a});
  fd_check([&](Graph& g, auto& p) { return mean_all(g, p[0]); }, {a});
  fd_check([&](Graph& g, auto& p) { return dot_sum(g, p[0], p[1]); }, {a, b});
  Mat s(1, 1);
  s(0, 0) = 0.7;
  fd_check([&](Graph& g, auto& p) { return abs_diff(g, p[0], 0.3); }, {s});
  fd_check(
      [&](Graph& g, auto& p) {
        return weighted_sum(g, {{sum_all(g, p[0]), 2.0}, {mean_all(g, p[1]), -0.5}});
      },
      {a, b});
}

TEST_CASE("gradients: attention softmax, causal and cross") {
  Rng rng(15);
  Mat q = random_mat(5, 4, rng), k = random_mat(5, 4, rng), kv = random_mat(7, 4, rng);
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(1);
        return project(g, attn_softmax(g, p[0], p[1], 0.5, true), r);
      },
      {q, k});
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(2);
        return project(g, attn_softmax(g, p[0], p[1], 0.5, false), r);
      },
      {q, kv});
  // Causal masking zeroes strictly-upper attention.
  Graph g(true);
  NodeRef att = attn_softmax(g, make_param(q), make_param(k), 1.0, true);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) CHECK(att->val(i, j) == 0.0);
  for (int i = 0; i < 5; ++i) CHECK(att->val.row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("gradients: fused losses") {
  Rng rng(16);
  Mat logits = random_mat(4, 4, rng);
  Mat target(4, 4);
  Rng tr(5);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) target(i, j) = tr.chance(0.5) ? 1.0 : 0.0;
  fd_check([&](Graph& g, auto& p) { return bce_with_logits_mean(g, p[0], target); }, {logits});

  Mat lm = random_mat(3, 6, rng);
  std::vector<int> targets = {2, 0, 5};
  fd_check([&](Graph& g, auto& p) { return softmax_xent_mean(g, p[0], targets); }, {lm});

  Mat sims = random_mat(3, 5, rng, 0.5);
  std::vector<NcePair> pairs = {{0, 1, {2, 3}}, {1, 0, {4}}};
  fd_check([&](Graph& g, auto& p) { return info_nce_sum(g, p[0], pairs, 0.2); }, {sims});
}

TEST_CASE("gradients: patch reshapes and neighborhood concat") {
  Rng rng(17);
  int grid = 2, ps = 2, c = 3;
  Mat a = random_mat(grid * grid, ps * ps * c, rng);
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(1);
        return project(g, patches_to_pixels(g, p[0], grid, ps, c), r);
      },
      {a});
  Mat col = random_mat(grid * grid * ps * ps, 1, rng);
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(2);
        return project(g, patch_mean(g, p[0], grid, ps), r);
      },
      {col});
  Mat grid_feat = random_mat(9, 2, rng);
  fd_check(
      [&](Graph& g, auto& p) {
        Rng r(3);
        return project(g, neighbor_concat3x3(g, p[0], 3), r);
      },
      {grid_feat});
}

TEST_CASE("patches_to_pixels maps patch blocks to raster order") {
  // grid=2, ps=2, c=1: patch p holds pixels of the 2x2 block at
  // (2*(p/2), 2*(p%2)).
  Mat a(4, 4);
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 4; ++i) a(p, i) = 10 * p + i;
  Graph g(false);
  NodeRef out = patches_to_pixels(g, make_const(a), 2, 2, 1);
  REQUIRE(out->rows() == 16);
  // Pixel (0,0) comes from patch 0 pixel 0; pixel (0,2) from patch 1 pixel 0.
  CHECK(out->val(0, 0) == 0.0);
  CHECK(out->val(2, 0) == 10.0);
  // Pixel (1,1) = patch 0, in-patch (1,1) -> element 3.
  CHECK(out->val(1 * 4 + 1, 0) == 3.0);
  // Pixel (2,0) = patch 2, in-patch (0,0).
  CHECK(out->val(2 * 4 + 0, 0) == 20.0);
}

TEST_CASE("gradients: transformer block composite (input jacobian)") {
  // Per-parameter gradients of composites are covered by the model-level
  // subsampled check; here the full input Jacobian of a block is verified.
  Rng rng(18);
  Mat x = random_mat(6, 8, rng, 0.5);
  fd_check(
      [&](Graph& g, auto& p) {
        ParamStore ps2;
        Rng init2(3);
        TransformerBlock b2 = TransformerBlock::create(ps2, "b", 8, 2, init2);
        NodeRef out = b2(g, p[0], true);
        Rng r(4);
        return project(g, out, r);
      },
      {x}, 1e-5, 5e-6);
}

TEST_CASE("no-grad graphs record nothing") {
  Graph g(false);
  NodeRef a = make_param(Mat::Ones(2, 2));
  NodeRef b = matmul(g, a, a);
  CHECK(g.size() == 0);
  CHECK_FALSE(b->requires_grad);
}

TEST_CASE("adam applies warmup then a constant rate") {
  ParamStore ps;
  Rng rng(1);
  NodeRef p = ps.add("w", 1, 1, 0.0, rng);
  AdamOptimizer opt(0.1, 0.9, 0.95, 0.0, 2);
  p->accumulate(Mat::Ones(1, 1));
  CHECK(opt.step(ps) == doctest::Approx(0.05));
  p->accumulate(Mat::Ones(1, 1));
  CHECK(opt.step(ps) == doctest::Approx(0.1));
  p->accumulate(Mat::Ones(1, 1));
  CHECK(opt.step(ps) == doctest::Approx(0.1));
  // Gradients consumed each step.
  CHECK_FALSE(p->grad_ready);
  CHECK(p->val(0, 0) < 0.0);
}
