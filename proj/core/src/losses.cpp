#include "refvos/losses.hpp"

#include <cmath>

namespace refvos {

void LossWeights::validate() const {
  if (lambda_ce < 0 || lambda_bce < 0 || lambda_dice < 0 || lambda_ct < 0)
    throw ConfigError("loss weights must be >= 0");
  if (tau <= 0) throw ConfigError("loss.tau must be > 0");
}

NodeRef text_ce(Graph& g, const NodeRef& answer_logits, const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != answer_logits->rows())
    throw ShapeError("text_ce: logits/target length mismatch");
  return softmax_xent_mean(g, answer_logits, targets);
}

NodeRef mask_bce(Graph& g, const NodeRef& mask_logits, const Mask& gt) {
  if (mask_logits->rows() != gt.h * gt.w || mask_logits->cols() != 1)
    throw ShapeError("mask_bce: logits/mask shape mismatch");
  Mat target(gt.h * gt.w, 1);
  for (size_t i = 0; i < gt.v.size(); ++i) target(static_cast<int>(i), 0) = gt.v[i] ? 1.0 : 0.0;
  return bce_with_logits_mean(g, mask_logits, target);
}

NodeRef mask_dice(Graph& g, const NodeRef& mask_logits, const Mask& gt) {
  if (mask_logits->rows() != gt.h * gt.w || mask_logits->cols() != 1)
    throw ShapeError("mask_dice: logits/mask shape mismatch");
  Mat target(gt.h * gt.w, 1);
  for (size_t i = 0; i < gt.v.size(); ++i) target(static_cast<int>(i), 0) = gt.v[i] ? 1.0 : 0.0;
  NodeRef gtn = make_const(std::move(target));
  NodeRef p = sigmoid(g, mask_logits);
  constexpr real eps = 1.0;
  NodeRef inter = dot_sum(g, p, gtn);                      // sum(p*g)
  NodeRef numer = add_scalar(g, scale(g, inter, 2.0), eps);
  NodeRef denom = add_scalar(g, add(g, sum_all(g, p), sum_all(g, gtn)), eps);
  NodeRef ratio = divide(g, numer, denom);
  return add_scalar(g, scale(g, ratio, -1.0), 1.0);
}

void TokenBank::push(Entry e) {
  entries_.push_back(std::move(e));
  while (entries_.size() > capacity_) entries_.pop_front();
}

NodeRef object_contrastive(Graph& g, const std::vector<ContrastiveToken>& tokens,
                           TokenBank& bank, real tau) {
  if (tau <= 0) throw ConfigError("object_contrastive: tau must be > 0");
  auto finish = [&](NodeRef loss) {
    // Push current tokens into the bank, detached and normalized.
    for (const auto& t : tokens) {
      Eigen::RowVectorXd v = t.hidden->val.row(0);
      real n = std::sqrt(v.squaredNorm() + 1e-12);
      bank.push({v / n, t.object_key, t.sample_uid});
    }
    return loss;
  };
  if (tokens.empty()) return finish(g.make(Mat::Zero(1, 1), false));

  int n = static_cast<int>(tokens.size());
  std::vector<NodeRef> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) rows.push_back(t.hidden);
  NodeRef x = l2_normalize_rows(g, concat_rows(g, rows));

  // Columns: batch tokens first, then bank entries (constants).
  int b = static_cast<int>(bank.size());
  NodeRef sims;
  if (b > 0) {
    Mat bankm(b, x->cols());
    int r = 0;
    for (const auto& e : bank.entries()) bankm.row(r++) = e.embedding;
    NodeRef bank_sims = matmul_nt(g, x, make_const(std::move(bankm)));
    sims = concat_cols(g, {matmul_nt(g, x, x), bank_sims});
  } else {
    sims = matmul_nt(g, x, x);
  }

  std::vector<NcePair> pairs;
  for (int i = 0; i < n; ++i) {
    std::vector<int> negatives;
    for (int j = 0; j < n; ++j)
      if (tokens[j].object_key != tokens[i].object_key) negatives.push_back(j);
    int col = n;
    for (const auto& e : bank.entries()) {
      if (e.object_key != tokens[i].object_key) negatives.push_back(col);
      ++col;
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (tokens[j].object_key != tokens[i].object_key) continue;
      if (tokens[j].sample_uid == tokens[i].sample_uid) continue;
      NcePair p;
      p.anchor_row = i;
      p.positive_col = j;
      p.negative_cols = negatives;
      pairs.push_back(std::move(p));
    }
  }
  if (pairs.empty()) return finish(g.make(Mat::Zero(1, 1), false));
  return finish(info_nce_sum(g, sims, pairs, tau));
}

NodeRef total_loss(Graph& g, const NodeRef& ce, const NodeRef& bce, const NodeRef& dice,
                   const NodeRef& ct, const LossWeights& w) {
  auto check_finite = [](const NodeRef& part, const char* name) {
    if (!std::isfinite(part->val(0, 0)))
      throw TrainError(std::string("non-finite loss part '") + name + "'");
  };
  check_finite(ce, "ce");
  check_finite(bce, "bce");
  check_finite(dice, "dice");
  check_finite(ct, "ct");
  return weighted_sum(g, {{ce, w.lambda_ce}, {bce, w.lambda_bce}, {dice, w.lambda_dice},
                          {ct, w.lambda_ct}});
}

}  // namespace refvos
