#pragma once

#include <deque>
#include <string>
#include <vector>

#include "refvos/image.hpp"
#include "refvos/tensor.hpp"

namespace refvos {

struct LossWeights {
  real lambda_ce = 1.0;
  real lambda_bce = 2.0;
  real lambda_dice = 0.5;
  real lambda_ct = 0.1;
  real tau = 0.07;

  void validate() const;
};

/// Mean cross-entropy over the supervised answer positions.
NodeRef text_ce(Graph& g, const NodeRef& answer_logits, const std::vector<int>& targets);

/// Mean per-pixel binary cross-entropy on sigmoid(logits).
NodeRef mask_bce(Graph& g, const NodeRef& mask_logits, const Mask& gt);

/// DICE = 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps), eps = 1.
NodeRef mask_dice(Graph& g, const NodeRef& mask_logits, const Mask& gt);

/// Ring buffer of detached SEG-token embeddings supplying contrastive
/// negatives across steps. Stored L2-normalized.
class TokenBank {
 public:
  explicit TokenBank(size_t capacity = 256) : capacity_(capacity) {}

  struct Entry {
    Eigen::RowVectorXd embedding;  // unit norm
    std::string object_key;
    std::int64_t sample_uid = 0;
  };

  void push(Entry e);
  const std::deque<Entry>& entries() const { return entries_; }
  size_t capacity() const { return capacity_; }
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  size_t capacity_;
  std::deque<Entry> entries_;
};

/// One SEG token entering the contrastive pool.
struct ContrastiveToken {
  NodeRef hidden;          // 1 x d, requires grad during training
  std::string object_key;  // "<video>/<object>": positives share it
  std::int64_t sample_uid = 0;  // positives must come from different samples
};

/// InfoNCE over L2-normalized SEG tokens: positives are same-object tokens
/// from different samples, negatives are different-object tokens from the
/// batch and the bank. Returns a constant 0 node when no positive pair
/// exists. Afterwards the batch tokens are pushed into the bank, detached.
NodeRef object_contrastive(Graph& g, const std::vector<ContrastiveToken>& tokens,
                           TokenBank& bank, real tau);

/// lambda_ce*CE + lambda_bce*BCE + lambda_dice*DICE + lambda_ct*CT.
/// Throws TrainError naming the first non-finite part.
NodeRef total_loss(Graph& g, const NodeRef& ce, const NodeRef& bce, const NodeRef& dice,
                   const NodeRef& ct, const LossWeights& w);

}  // namespace refvos
