#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "refvos/common.hpp"
#include "refvos/dataset.hpp"
#include "refvos/metrics.hpp"

using namespace refvos;

namespace {

Mask from_bits(int h, int w, std::uint32_t bits) {
  Mask m(h, w);
  for (int i = 0; i < h * w; ++i) m.v[i] = (bits >> i) & 1;
  return m;
}

// Independent set-count oracle for region similarity.
real oracle_j(const Mask& p, const Mask& g) {
  int inter = 0, uni = 0;
  for (size_t i = 0; i < p.v.size(); ++i) {
    if (p.v[i] && g.v[i]) ++inter;
    if (p.v[i] || g.v[i]) ++uni;
  }
  return uni == 0 ? 1.0 : static_cast<real>(inter) / uni;
}

// Independent brute-force boundary F oracle: definition-level boundary
// extraction and O(n^2) pairwise Euclidean distances.
real oracle_f(const Mask& p, const Mask& g, int tol) {
  auto boundary = [](const Mask& m) {
    std::vector<std::pair<int, int>> b;
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) {
        if (!m.at(y, x)) continue;
        bool edge = y == 0 || x == 0 || y == m.h - 1 || x == m.w - 1;
        if (edge || !m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1))
          b.emplace_back(y, x);
      }
    return b;
  };
  auto pb = boundary(p);
  auto gb = boundary(g);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  auto close = [tol](std::pair<int, int> a, std::pair<int, int> b) {
    int dy = a.first - b.first, dx = a.second - b.second;
    return dy * dy + dx * dx <= tol * tol;
  };
  int phit = 0;
  for (auto a : pb)
    for (auto b : gb)
      if (close(a, b)) { ++phit; break; }
  int ghit = 0;
  for (auto a : gb)
    for (auto b : pb)
      if (close(a, b)) { ++ghit; break; }
  real prec = static_cast<real>(phit) / pb.size();
  real rec = static_cast<real>(ghit) / gb.size();
  return prec + rec == 0 ? 0.0 : 2 * prec * rec / (prec + rec);
}

}  // namespace

TEST_CASE("region J basics") {
  Mask a(8, 8), b(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) b.at(y, x) = 1;
  CHECK(region_j_frame(b, b) == 1.0);
  // Left half vs full frame: 32 / 64.
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 4; ++x) a.at(y, x) = 1;
  CHECK(region_j_frame(a, b) == doctest::Approx(0.5));
  // Disjoint non-empty masks.
  Mask c(8, 8), d(8, 8);
  c.at(0, 0) = 1;
  d.at(7, 7) = 1;
  CHECK(region_j_frame(c, d) == 0.0);
  // Both empty contributes 1.
  CHECK(region_j_frame(Mask(8, 8), Mask(8, 8)) == 1.0);
  CHECK_THROWS_AS(region_j_frame(Mask(4, 4), Mask(8, 8)), ShapeError);
}

TEST_CASE("region J matches the exhaustive oracle on all 3x3 pairs") {
  for (std::uint32_t pb = 0; pb < 512; ++pb) {
    Mask p = from_bits(3, 3, pb);
    for (std::uint32_t gb = 0; gb < 512; ++gb) {
      Mask g = from_bits(3, 3, gb);
      if (region_j_frame(p, g) != oracle_j(p, g)) {
        CAPTURE(pb);
        CAPTURE(gb);
        REQUIRE(region_j_frame(p, g) == oracle_j(p, g));
      }
    }
  }
}

TEST_CASE("boundary tolerance follows the 0.8% diagonal rule") {
  CHECK(boundary_tolerance(64, 64) == 1);    // ceil(0.008 * 90.5) = 1
  CHECK(boundary_tolerance(480, 854) == 8);  // ceil(0.008 * 979.6) = 8
  CHECK(boundary_tolerance(4, 4) == 1);      // minimum 1
}

TEST_CASE("boundary F basics") {
  Mask sq(8, 8);
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) sq.at(y, x) = 1;
  CHECK(boundary_f_frame(sq, sq, 1) == 1.0);

  // Same square shifted by one pixel, tolerance 1: every boundary pixel of
  // one lies within distance 1 of the other.
  Mask shifted(8, 8);
  for (int y = 2; y < 6; ++y)
    for (int x = 3; x < 7; ++x) shifted.at(y, x) = 1;
  CHECK(boundary_f_frame(sq, shifted, 1) == doctest::Approx(oracle_f(sq, shifted, 1)));
  CHECK(boundary_f_frame(sq, shifted, 1) == 1.0);

  // Far apart: zero.
  Mask a(16, 16), b(16, 16);
  a.at(1, 1) = 1;
  b.at(14, 14) = 1;
  CHECK(boundary_f_frame(a, b, 1) == 0.0);

  // Both empty -> 1; one empty -> 0.
  CHECK(boundary_f_frame(Mask(8, 8), Mask(8, 8), 1) == 1.0);
  CHECK(boundary_f_frame(Mask(8, 8), sq, 1) == 0.0);
}

TEST_CASE("boundary F matches the brute-force oracle on random 8x8 pairs") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Mask p(8, 8), g(8, 8);
    for (auto& v : p.v) v = rng.chance(0.4);
    for (auto& v : g.v) v = rng.chance(0.4);
    int tol = 1 + trial % 3;
    real mine = boundary_f_frame(p, g, tol);
    real ref = oracle_f(p, g, tol);
    CHECK(std::abs(mine - ref) <= 1e-9);
    // Symmetry.
    CHECK(boundary_f_frame(p, g, tol) == doctest::Approx(boundary_f_frame(g, p, tol)));
  }
}

TEST_CASE("metric report means and identity") {
  auto rep = MetricReport::from_samples({{"a", 0, 0.5, 0.7}, {"b", 0, 0.9, 0.3}});
  CHECK(rep.mean_j == doctest::Approx(0.7));
  CHECK(rep.mean_f == doctest::Approx(0.5));
  CHECK(rep.mean_jf == (rep.mean_j + rep.mean_f) / 2);
  std::string row = format_report_row("test", rep);
  CHECK(row.find("J&F=0.600") != std::string::npos);
}

TEST_CASE("evaluate_dataset scores prediction directories") {
  WorldConfig wc;
  wc.num_videos = 2;
  wc.frames_per_video = 6;
  wc.shapes_per_video = 2;
  wc.expressions_per_object = 1;
  wc.seed = 9;
  Dataset ds = generate_world(wc);
  auto dir = std::filesystem::temp_directory_path() / "refvos_eval_test";
  std::filesystem::remove_all(dir);
  auto pred = dir / "pred";

  // Predictions copied from ground truth -> perfect scores.
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    auto d = pred / s.video_id / std::to_string(ds.expression_index(i));
    std::filesystem::create_directories(d);
    const auto& gt = ds.video(s.video_id).objects.at(s.target_object_id);
    for (size_t f = 0; f < gt.size(); ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05zu.png", f);
      write_png_mask(d / name, gt[f]);
    }
  }
  MetricReport rep = evaluate_dataset(pred, ds);
  CHECK(rep.mean_jf == doctest::Approx(1.0));

  // All-empty predictions with non-empty ground truth -> 0.
  auto pred0 = dir / "pred0";
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    auto d = pred0 / s.video_id / std::to_string(ds.expression_index(i));
    std::filesystem::create_directories(d);
    for (int f = 0; f < wc.frames_per_video; ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05d.png", f);
      write_png_mask(d / name, Mask(wc.canvas_size, wc.canvas_size));
    }
  }
  rep = evaluate_dataset(pred0, ds);
  CHECK(rep.mean_jf == doctest::Approx(0.0));

  // A missing frame file is a hard error naming it.
  auto victim = pred / ds.samples[0].video_id / "0" / "00002.png";
  std::filesystem::remove(victim);
  try {
    evaluate_dataset(pred, ds);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("00002.png") != std::string::npos);
  }
}

TEST_CASE("curve emission and overfitting flag") {
  auto dir = std::filesystem::temp_directory_path() / "refvos_curve_test";
  std::filesystem::create_directories(dir);
  auto file = dir / "curve.csv";
  std::vector<std::pair<int, real>> snaps = {{100, 0.5}, {200, 0.6}, {300, 0.55}};
  emit_curve(snaps, file);
  auto back = read_curve(file);
  REQUIRE(back.size() == 3);
  CHECK(back[1].first == 200);
  CHECK(back[1].second == doctest::Approx(0.6));

  CHECK_THROWS_AS(emit_curve({{100, 0.5}}, file), DataError);
  CHECK_THROWS_AS(emit_curve({{100, 0.5}, {100, 0.6}}, file), DataError);
  CHECK_THROWS_AS(emit_curve({{200, 0.5}, {100, 0.6}}, file), DataError);

  CHECK(curve_overfitting_suspect({{1, 0.5}, {2, 0.6}, {3, 0.55}}));
  CHECK(curve_overfitting_suspect({{1, 0.5}, {2, 0.6}, {3, 0.58}, {4, 0.5}}));
  CHECK(!curve_overfitting_suspect({{1, 0.5}, {2, 0.6}, {3, 0.65}}));
  CHECK(!curve_overfitting_suspect({{1, 0.5}, {2, 0.5}}));
}
