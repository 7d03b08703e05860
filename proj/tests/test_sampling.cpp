#include <doctest.h>

#include <set>

#include "refvos/sampling.hpp"

using namespace refvos;

TEST_CASE("context spans partition the video with remainder up front") {
  auto spans = split_spans(16, 4);
  REQUIRE(spans.size() == 4);
  CHECK(spans[0] == std::pair{0, 3});
  CHECK(spans[1] == std::pair{4, 7});
  CHECK(spans[2] == std::pair{8, 11});
  CHECK(spans[3] == std::pair{12, 15});

  spans = split_spans(10, 4);
  CHECK(spans[0] == std::pair{0, 2});
  CHECK(spans[1] == std::pair{3, 5});
  CHECK(spans[2] == std::pair{6, 7});
  CHECK(spans[3] == std::pair{8, 9});

  // Partition property over many (T, n).
  for (int T = 1; T <= 64; ++T) {
    for (int n = 1; n <= 8; ++n) {
      int covered = 0;
      int prev_end = -1;
      for (auto [a, b] : split_spans(T, n)) {
        if (a < 0) continue;
        CHECK(a == prev_end + 1);
        covered += b - a + 1;
        prev_end = b;
      }
      CHECK(covered == T);
    }
  }
}

TEST_CASE("training windows sample one context frame per span") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    FrameWindow w = sample_train_window(16, 4, 4, rng);
    REQUIRE(w.context_ids.size() == 4);
    auto spans = split_spans(16, 4);
    for (int k = 0; k < 4; ++k) {
      CHECK(w.context_ids[k] >= spans[k].first);
      CHECK(w.context_ids[k] <= spans[k].second);
    }
    REQUIRE(w.query_ids.size() == 4);
    for (int i = 1; i < 4; ++i) CHECK(w.query_ids[i] == w.query_ids[i - 1] + 1);
  }
}

TEST_CASE("degenerate short videos clamp-repeat") {
  Rng rng(5);
  FrameWindow w = sample_train_window(4, 4, 4, rng);
  CHECK(w.context_ids == std::vector<int>{0, 1, 2, 3});
  CHECK(w.query_ids == std::vector<int>{0, 1, 2, 3});

  w = sample_train_window(2, 4, 4, rng);
  CHECK(w.query_ids == std::vector<int>{0, 1, 1, 1});
  // Nondecreasing context even with empty spans.
  for (size_t i = 1; i < w.context_ids.size(); ++i)
    CHECK(w.context_ids[i] >= w.context_ids[i - 1]);
}

TEST_CASE("inference context picks span centers") {
  CHECK(inference_context(16, 4) == std::vector<int>{1, 5, 9, 13});
  CHECK(inference_context(4, 4) == std::vector<int>{0, 1, 2, 3});
  // Derived by enumerating spans [0,2],[3,5],[6,7],[8,9].
  CHECK(inference_context(10, 4) == std::vector<int>{1, 4, 6, 8});
  // Stationarity: pure function of (T, n).
  CHECK(inference_context(16, 4) == inference_context(16, 4));
}

TEST_CASE("sliding windows emit every frame exactly once") {
  auto ws = sliding_query_windows(6, 4);
  REQUIRE(ws.size() == 3);
  CHECK(ws[0].frames == std::vector<int>{0, 1, 2, 3});
  CHECK(ws[0].emit_at == std::vector<int>{0, 1, 2, 3});
  CHECK(ws[1].frames == std::vector<int>{1, 2, 3, 4});
  CHECK(ws[1].emit_at == std::vector<int>{3});
  CHECK(ws[2].frames == std::vector<int>{2, 3, 4, 5});

  // T < N_Q: a single clamp-repeated window emits each real frame once.
  ws = sliding_query_windows(3, 4);
  REQUIRE(ws.size() == 1);
  std::set<int> unique(ws[0].frames.begin(), ws[0].frames.end());
  CHECK(unique == std::set<int>{0, 1, 2});
  std::set<int> emitted;
  for (int pos : ws[0].emit_at) emitted.insert(ws[0].frames[pos]);
  CHECK(emitted == std::set<int>{0, 1, 2});

  // Window count formula T - N_Q + 1, verified by enumeration.
  ws = sliding_query_windows(100, 4);
  CHECK(ws.size() == 97);
  int total_emitted = 0;
  for (const auto& w : ws) total_emitted += static_cast<int>(w.emit_at.size());
  CHECK(total_emitted == 100);
}

TEST_CASE("sliding window coverage property") {
  for (int T = 1; T <= 200; ++T) {
    for (int nq = 1; nq <= 8; ++nq) {
      std::vector<int> count(T, 0);
      for (const auto& w : sliding_query_windows(T, nq))
        for (int pos : w.emit_at) count[w.frames[pos]]++;
      for (int f = 0; f < T; ++f) {
        if (count[f] != 1) {
          CAPTURE(T);
          CAPTURE(nq);
          CAPTURE(f);
          REQUIRE(count[f] == 1);
        }
      }
    }
  }
}

TEST_CASE("uniform folds cover every frame once and span the video") {
  for (int T : {1, 3, 8, 15, 16, 17, 100}) {
    auto folds = uniform_folds(T, 8);
    std::vector<int> count(T, 0);
    for (const auto& fold : folds) {
      CHECK(static_cast<int>(fold.size()) <= 8);
      for (int f : fold) count[f]++;
    }
    for (int f = 0; f < T; ++f) CHECK(count[f] == 1);
  }
}
