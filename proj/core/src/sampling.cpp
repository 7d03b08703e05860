#include "refvos/sampling.hpp"

namespace refvos {

std::vector<std::pair<int, int>> split_spans(int T, int n) {
  if (T < 1) throw ShapeError("split_spans: T must be >= 1");
  if (n < 1) throw ShapeError("split_spans: n must be >= 1");
  std::vector<std::pair<int, int>> spans;
  spans.reserve(n);
  int base = T / n;
  int rem = T % n;
  int cursor = 0;
  for (int k = 0; k < n; ++k) {
    int len = base + (k < rem ? 1 : 0);
    if (len == 0) {
      spans.emplace_back(-1, -1);
    } else {
      spans.emplace_back(cursor, cursor + len - 1);
      cursor += len;
    }
  }
  return spans;
}

FrameWindow sample_train_window(int T, int n_context, int n_query, Rng& rng) {
  FrameWindow win;
  win.context_ids.reserve(n_context);
  if (n_context > 0) {
    for (auto [a, b] : split_spans(T, n_context)) {
      if (a < 0)
        win.context_ids.push_back(T - 1);  // empty span: clamp-repeat last frame
      else
        win.context_ids.push_back(rng.uniform_int(a, b));
    }
  }
  win.query_ids.reserve(n_query);
  int start = T >= n_query ? rng.uniform_int(0, T - n_query) : 0;
  for (int i = 0; i < n_query; ++i) win.query_ids.push_back(std::min(start + i, T - 1));
  return win;
}

std::vector<int> inference_context(int T, int n_context) {
  std::vector<int> ids;
  ids.reserve(n_context);
  for (auto [a, b] : split_spans(T, n_context)) {
    if (a < 0)
      ids.push_back(T - 1);
    else
      ids.push_back(a + (b - a) / 2);
  }
  return ids;
}

std::vector<QueryWindow> sliding_query_windows(int T, int n_query) {
  if (T < 1) throw ShapeError("sliding_query_windows: T must be >= 1");
  if (n_query < 1) throw ShapeError("sliding_query_windows: n_query must be >= 1");
  std::vector<QueryWindow> windows;
  QueryWindow first;
  int span = std::min(n_query, T);
  for (int i = 0; i < n_query; ++i) first.frames.push_back(std::min(i, T - 1));
  for (int i = 0; i < span; ++i) first.emit_at.push_back(i);
  windows.push_back(std::move(first));
  for (int last = span; last < T; ++last) {
    QueryWindow w;
    for (int i = last - n_query + 1; i <= last; ++i) w.frames.push_back(i);
    w.emit_at.push_back(n_query - 1);
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<std::vector<int>> uniform_folds(int T, int n) {
  if (T < 1) throw ShapeError("uniform_folds: T must be >= 1");
  if (n < 1) throw ShapeError("uniform_folds: n must be >= 1");
  int groups = (T + n - 1) / n;
  std::vector<std::vector<int>> folds(groups);
  for (int g = 0; g < groups; ++g)
    for (int f = g; f < T; f += groups) folds[g].push_back(f);
  return folds;
}

}  // namespace refvos
