#pragma once

#include <utility>
#include <vector>

#include "refvos/common.hpp"

namespace refvos {

/// One model pass worth of frame indices: sparse context frames covering the
/// whole video and a consecutive run of query frames.
struct FrameWindow {
  std::vector<int> context_ids;  // nondecreasing
  std::vector<int> query_ids;    // consecutive (clamp-repeated on short videos)
};

/// Partition [0, T) into n spans; leading spans absorb the remainder.
/// Returns inclusive [first, last] pairs; empty spans are (-1, -1).
std::vector<std::pair<int, int>> split_spans(int T, int n);

/// Training window: one uniform-random frame per context span plus a
/// uniform-random run of consecutive query frames. Short videos clamp-repeat
/// the last valid frame so arity is preserved.
FrameWindow sample_train_window(int T, int n_context, int n_query, Rng& rng);

/// Inference context frames: the center of each of n equal spans,
/// center([a,b]) = a + floor((b-a)/2). Constant for the whole video.
std::vector<int> inference_context(int T, int n_context);

/// One sliding query window plus which of its positions emit final masks.
struct QueryWindow {
  std::vector<int> frames;   // consecutive indices (clamp-repeated when T < n_query)
  std::vector<int> emit_at;  // positions within `frames` whose masks are finalized
};

/// Stride-1 sliding windows over [0, T). The first window emits masks for all
/// of its frames, later windows only for their newest frame; every frame is
/// emitted exactly once.
std::vector<QueryWindow> sliding_query_windows(int T, int n_query);

/// Interleaved full-coverage folds for context-style (uniform) inference:
/// fold g holds frames {g, g+G, g+2G, ...} with G = ceil(T / n), so each fold
/// spans the whole video and every frame lands in exactly one fold.
std::vector<std::vector<int>> uniform_folds(int T, int n);

}  // namespace refvos
