#include <doctest.h>

#include <cmath>

#include "refvos/losses.hpp"

using namespace refvos;

namespace {

Mat row_vec(std::initializer_list<real> vals) {
  Mat m(1, static_cast<int>(vals.size()));
  int j = 0;
  for (real v : vals) m(0, j++) = v;
  return m;
}

// Exhaustive reference: normalize, per ordered (anchor, positive) pair a full
// softmax over {positive} ∪ negatives, summed.
real oracle_contrastive(const std::vector<Eigen::RowVectorXd>& vecs,
                        const std::vector<std::string>& keys,
                        const std::vector<std::int64_t>& uids,
                        const std::vector<Eigen::RowVectorXd>& bank_vecs,
                        const std::vector<std::string>& bank_keys, real tau) {
  auto normalize = [](Eigen::RowVectorXd v) {
    return Eigen::RowVectorXd(v / std::sqrt(v.squaredNorm() + 1e-12));
  };
  std::vector<Eigen::RowVectorXd> xs;
  for (const auto& v : vecs) xs.push_back(normalize(v));
  std::vector<Eigen::RowVectorXd> bs;
  for (const auto& v : bank_vecs) bs.push_back(normalize(v));
  real total = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    for (size_t j = 0; j < xs.size(); ++j) {
      if (i == j || keys[i] != keys[j] || uids[i] == uids[j]) continue;
      real pos = std::exp(xs[i].dot(xs[j]) / tau);
      real denom = pos;
      for (size_t k = 0; k < xs.size(); ++k)
        if (keys[k] != keys[i]) denom += std::exp(xs[i].dot(xs[k]) / tau);
      for (size_t k = 0; k < bs.size(); ++k)
        if (bank_keys[k] != keys[i]) denom += std::exp(xs[i].dot(bs[k]) / tau);
      total += -std::log(pos / denom);
    }
  }
  return total;
}

std::vector<ContrastiveToken> make_tokens(const std::vector<Eigen::RowVectorXd>& vecs,
                                          const std::vector<std::string>& keys,
                                          const std::vector<std::int64_t>& uids) {
  std::vector<ContrastiveToken> tokens;
  for (size_t i = 0; i < vecs.size(); ++i) {
    Mat m(1, vecs[i].size());
    m.row(0) = vecs[i];
    tokens.push_back({make_param(std::move(m)), keys[i], uids[i]});
  }
  return tokens;
}

}  // namespace

TEST_CASE("text cross-entropy analytic values") {
  Graph g(true);
  // Probability ~1 on targets -> ~0 loss.
  Mat sure(2, 4);
  sure.setConstant(-50.0);
  sure(0, 1) = 50.0;
  sure(1, 3) = 50.0;
  CHECK(text_ce(g, make_param(sure), {1, 3})->val(0, 0) == doctest::Approx(0.0).epsilon(1e-9));

  // Uniform logits over V=4 -> ln 4 = 1.3863.
  Mat uniform = Mat::Zero(3, 4);
  NodeRef ce = text_ce(g, make_param(uniform), {0, 1, 2});
  CHECK(ce->val(0, 0) == doctest::Approx(std::log(4.0)));
  CHECK(ce->val(0, 0) == doctest::Approx(1.3863).epsilon(1e-4));

  CHECK_THROWS_AS(text_ce(g, make_param(uniform), {0, 1}), ShapeError);
}

TEST_CASE("mask BCE and DICE analytic values") {
  Graph g(true);
  Mask ones(2, 2);
  for (auto& v : ones.v) v = 1;

  // Saturated correct logits: BCE -> 0, hard p == g: DICE -> 0.
  Mat hot = Mat::Constant(4, 1, 60.0);
  CHECK(mask_bce(g, make_param(hot), ones)->val(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(mask_dice(g, make_param(hot), ones)->val(0, 0) == doctest::Approx(0.0).epsilon(1e-6));

  // p = 0.5 everywhere on all-ones 4-pixel mask:
  // DICE = 1 - (2*2 + 1)/(2 + 4 + 1) = 0.285714...
  Mat half = Mat::Zero(4, 1);
  CHECK(mask_dice(g, make_param(half), ones)->val(0, 0) ==
        doctest::Approx(0.2857).epsilon(1e-3));
  CHECK(mask_dice(g, make_param(half), ones)->val(0, 0) == doctest::Approx(1.0 - 5.0 / 7.0));

  // BCE of p=0.5 is ln 2.
  CHECK(mask_bce(g, make_param(half), ones)->val(0, 0) == doctest::Approx(std::log(2.0)));

  Mask wrong_shape(4, 4);
  CHECK_THROWS_AS(mask_bce(g, make_param(half), wrong_shape), ShapeError);
  CHECK_THROWS_AS(mask_dice(g, make_param(half), wrong_shape), ShapeError);
}

TEST_CASE("loss gradients match finite differences at spec tolerances") {
  // 16-dim instances, step 1e-3, relative tolerance 1e-4.
  const real h = 1e-3, tol = 1e-4;
  Rng rng(31);

  auto fd_scalar = [&](auto build, Mat init) {
    NodeRef p = make_param(init);
    Graph g(true);
    NodeRef loss = build(g, p);
    g.backward(loss);
    Mat analytic = p->grad;
    for (int j = 0; j < init.cols(); ++j)
      for (int i = 0; i < init.rows(); ++i) {
        auto eval = [&](real d) {
          Mat m = init;
          m(i, j) += d;
          Graph g2(true);
          return build(g2, make_param(m))->val(0, 0);
        };
        real fd = (eval(h) - eval(-h)) / (2 * h);
        real err = std::abs(analytic(i, j) - fd) /
                   std::max({std::abs(analytic(i, j)), std::abs(fd), 1.0});
        CAPTURE(i);
        CAPTURE(j);
        REQUIRE(err <= tol);
      }
  };

  Mask gt(4, 4);
  Rng mr(5);
  for (auto& v : gt.v) v = mr.chance(0.5);
  Mat logits(16, 1);
  for (int i = 0; i < 16; ++i) logits(i, 0) = rng.normal();
  fd_scalar([&](Graph& g, NodeRef p) { return mask_bce(g, p, gt); }, logits);
  fd_scalar([&](Graph& g, NodeRef p) { return mask_dice(g, p, gt); }, logits);

  Mat lm(2, 8);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 2; ++i) lm(i, j) = rng.normal();
  fd_scalar([&](Graph& g, NodeRef p) { return text_ce(g, p, {3, 5}); }, lm);

  // Contrastive: 4 tokens x 4 dims; gradient flows through normalization.
  Mat toks(4, 4);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) toks(i, j) = rng.normal();
  std::vector<std::string> keys = {"a", "a", "b", "c"};
  std::vector<std::int64_t> uids = {1, 2, 3, 4};
  fd_scalar(
      [&](Graph& g, NodeRef p) {
        std::vector<ContrastiveToken> tokens;
        for (int i = 0; i < 4; ++i)
          tokens.push_back({slice_rows(g, p, i, 1), keys[i], uids[i]});
        TokenBank bank(16);
        return object_contrastive(g, tokens, bank, 0.07);
      },
      toks);
}

TEST_CASE("object contrastive hand-computed examples") {
  const real tau = 1.0;

  SUBCASE("one anchor, one positive, zero negatives -> 0") {
    Graph g(true);
    TokenBank bank(8);
    auto tokens = make_tokens({row_vec({1, 0, 0}), row_vec({0.6, 0.8, 0})}, {"a", "a"}, {1, 2});
    NodeRef loss = object_contrastive(g, tokens, bank, tau);
    CHECK(loss->val(0, 0) == doctest::Approx(0.0));
    CHECK(bank.size() == 2);  // pushed even in the degenerate case
  }

  SUBCASE("sim(v,k+)=1 with one orthogonal negative -> -log(e/(e+1)) per pair") {
    Graph g(true);
    TokenBank bank(8);
    auto tokens = make_tokens({row_vec({1, 0, 0}), row_vec({1, 0, 0}), row_vec({0, 1, 0})},
                              {"a", "a", "b"}, {1, 2, 3});
    NodeRef loss = object_contrastive(g, tokens, bank, tau);
    real e = std::exp(1.0);
    real per_pair = -std::log(e / (e + 1.0));
    CHECK(per_pair == doctest::Approx(0.3133).epsilon(1e-3));
    // Two ordered (anchor, positive) pairs, each with the same negative.
    CHECK(loss->val(0, 0) == doctest::Approx(2 * per_pair));
  }

  SUBCASE("all-distinct object ids -> 0 (no positives)") {
    Graph g(true);
    TokenBank bank(8);
    auto tokens = make_tokens({row_vec({1, 0, 0}), row_vec({0, 1, 0}), row_vec({0, 0, 1})},
                              {"a", "b", "c"}, {1, 2, 3});
    CHECK(object_contrastive(g, tokens, bank, tau)->val(0, 0) == 0.0);
  }
}

TEST_CASE("object contrastive equals the exhaustive oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + trial % 7;  // up to 8 tokens
    int dim = 6;
    std::vector<Eigen::RowVectorXd> vecs;
    std::vector<std::string> keys;
    std::vector<std::int64_t> uids;
    for (int i = 0; i < n; ++i) {
      Eigen::RowVectorXd v(dim);
      for (int j = 0; j < dim; ++j) v(j) = rng.normal();
      vecs.push_back(v);
      keys.push_back(std::string(1, static_cast<char>('a' + rng.uniform_int(0, 2))));
      uids.push_back(i);
    }
    int nb = rng.uniform_int(0, 4);
    std::vector<Eigen::RowVectorXd> bank_vecs;
    std::vector<std::string> bank_keys;
    TokenBank bank(32);
    for (int i = 0; i < nb; ++i) {
      Eigen::RowVectorXd v(dim);
      for (int j = 0; j < dim; ++j) v(j) = rng.normal();
      bank_vecs.push_back(v);
      bank_keys.push_back(std::string(1, static_cast<char>('a' + rng.uniform_int(0, 2))));
      Eigen::RowVectorXd unit = v / std::sqrt(v.squaredNorm() + 1e-12);
      bank.push({unit, bank_keys.back(), 1000 + i});
    }
    real tau = 0.07 + 0.1 * rng.uniform();
    Graph g(true);
    auto tokens = make_tokens(vecs, keys, uids);
    real mine = object_contrastive(g, tokens, bank, tau)->val(0, 0);
    real ref = oracle_contrastive(vecs, keys, uids, bank_vecs, bank_keys, tau);
    CHECK(std::abs(mine - ref) <= 1e-6 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("contrastive loss decreases as positive similarity rises") {
  TokenBank bank0(8);
  real prev = 1e9;
  for (real t : {0.1, 0.4, 0.7, 0.95}) {
    Graph g(true);
    TokenBank bank(8);
    auto tokens = make_tokens(
        {row_vec({t, std::sqrt(1 - t * t), 0}), row_vec({1, 0, 0}), row_vec({-0.2, 0.3, 0.9})},
        {"a", "a", "b"}, {1, 2, 3});
    real loss = object_contrastive(g, tokens, bank, 0.5)->val(0, 0);
    CHECK(loss >= 0.0);
    CHECK(loss < prev);
    prev = loss;
  }
  (void)bank0;
}

TEST_CASE("token bank is a FIFO ring with fixed capacity") {
  TokenBank bank(3);
  for (int i = 0; i < 5; ++i) {
    Eigen::RowVectorXd v(2);
    v << 1, 0;
    bank.push({v, "k" + std::to_string(i), i});
  }
  REQUIRE(bank.size() == 3);
  CHECK(bank.entries().front().object_key == "k2");
  CHECK(bank.entries().back().object_key == "k4");
}

TEST_CASE("total loss combines parts with the configured weights") {
  LossWeights w;  // 1.0 / 2.0 / 0.5 / 0.1
  Graph g(true);
  auto one = [&] { return make_const(Mat::Ones(1, 1)); };
  NodeRef total = total_loss(g, one(), one(), one(), one(), w);
  CHECK(total->val(0, 0) == doctest::Approx(3.6));

  auto zero = [&] { return make_const(Mat::Zero(1, 1)); };
  CHECK(total_loss(g, zero(), zero(), zero(), zero(), w)->val(0, 0) == 0.0);

  LossWeights no_ct = w;
  no_ct.lambda_ct = 0.0;
  NodeRef big_ct = make_const(Mat::Constant(1, 1, 1e9));
  CHECK(total_loss(g, zero(), zero(), zero(), big_ct, no_ct)->val(0, 0) == 0.0);

  NodeRef bad = make_const(Mat::Constant(1, 1, std::nan("")));
  try {
    total_loss(g, zero(), bad, zero(), zero(), w);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("bce") != std::string::npos);
  }

  LossWeights invalid;
  invalid.tau = 0.0;
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
}
