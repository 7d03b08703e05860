#include <benchmark/benchmark.h>

#include "refvos/losses.hpp"
#include "refvos/metrics.hpp"
#include "refvos/sampling.hpp"
#include "refvos/trainer.hpp"

namespace {

using namespace refvos;

ModelConfig bench_model() {
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.n_context = 4;
  cfg.n_query = 4;
  cfg.seed = 1;
  return cfg;
}

Image bench_image() {
  Rng rng(7);
  Image img(64, 64);
  for (auto& v : img.rgb) v = static_cast<float>(rng.uniform());
  return img;
}

void BM_EncodeFrame(benchmark::State& state) {
  Segmenter model(bench_model());
  Image img = bench_image();
  for (auto _ : state) {
    Graph g(false);
    benchmark::DoNotOptimize(model.encode_frame(g, img));
  }
}
BENCHMARK(BM_EncodeFrame)->Unit(benchmark::kMillisecond);

void BM_ForwardSequence(benchmark::State& state) {
  Segmenter model(bench_model());
  Image img = bench_image();
  Graph feat_graph(false);
  std::vector<NodeRef> feats;
  for (int i = 0; i < 8; ++i) feats.push_back(model.encode_frame(feat_graph, img));
  auto expr = Vocabulary::get().encode("red circle that moves left");
  std::vector<NodeRef> ctx(feats.begin(), feats.begin() + 4);
  std::vector<NodeRef> q(feats.begin() + 4, feats.end());
  for (auto _ : state) {
    Graph g(false);
    benchmark::DoNotOptimize(
        model.forward_sequence(g, expr, ctx, {1, 5, 9, 13}, q, {6, 7, 8, 9}));
  }
}
BENCHMARK(BM_ForwardSequence)->Unit(benchmark::kMillisecond);

void BM_TrainStepBackward(benchmark::State& state) {
  Segmenter model(bench_model());
  Image img = bench_image();
  auto expr = Vocabulary::get().encode("red circle that moves left");
  Mask gt(64, 64);
  for (int y = 8; y < 28; ++y)
    for (int x = 8; x < 28; ++x) gt.at(y, x) = 1;
  for (auto _ : state) {
    Graph g(true);
    std::vector<NodeRef> ctx, q;
    for (int i = 0; i < 4; ++i) ctx.push_back(model.encode_frame(g, img));
    for (int i = 0; i < 4; ++i) q.push_back(model.encode_frame(g, img));
    auto seq = model.forward_sequence(g, expr, ctx, {1, 5, 9, 13}, q, {6, 7, 8, 9});
    std::vector<std::pair<NodeRef, real>> parts;
    for (int t = 0; t < 4; ++t) {
      NodeRef logits = model.decode_mask(g, q[t], seq.seg_hidden[t]);
      parts.emplace_back(mask_bce(g, logits, gt), 0.25);
    }
    NodeRef loss = add(g, weighted_sum(g, parts), text_ce(g, seq.answer_logits,
                                                          seq.answer_targets));
    g.backward(loss);
    model.params().zero_grads();
    benchmark::DoNotOptimize(loss->val(0, 0));
  }
}
BENCHMARK(BM_TrainStepBackward)->Unit(benchmark::kMillisecond);

void BM_BoundaryF(benchmark::State& state) {
  Rng rng(5);
  Mask p(64, 64), g(64, 64);
  for (auto& v : p.v) v = rng.chance(0.2);
  for (auto& v : g.v) v = rng.chance(0.2);
  for (auto _ : state) benchmark::DoNotOptimize(boundary_f_frame(p, g, 1));
}
BENCHMARK(BM_BoundaryF)->Unit(benchmark::kMicrosecond);

void BM_GenerateWorld(benchmark::State& state) {
  WorldConfig wc;
  wc.num_videos = 4;
  wc.frames_per_video = 16;
  wc.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(generate_world(wc));
}
BENCHMARK(BM_GenerateWorld)->Unit(benchmark::kMillisecond);

void BM_SlidingWindows(benchmark::State& state) {
  for (auto _ : state)
    for (int T = 1; T <= 128; ++T) benchmark::DoNotOptimize(sliding_query_windows(T, 4));
}
BENCHMARK(BM_SlidingWindows)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
