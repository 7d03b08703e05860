#include "refvos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "refvos/dataset.hpp"

namespace refvos {

real region_j_frame(const Mask& pred, const Mask& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw ShapeError("region_j: mask shapes differ");
  std::size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    inter += (p && g);
    uni += (p || g);
  }
  if (uni == 0) return 1.0;
  return static_cast<real>(inter) / static_cast<real>(uni);
}

real region_j(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  if (pred.size() != gt.size()) throw ShapeError("region_j: sequence lengths differ");
  if (pred.empty()) throw ShapeError("region_j: empty sequences");
  real sum = 0;
  for (size_t i = 0; i < pred.size(); ++i) sum += region_j_frame(pred[i], gt[i]);
  return sum / static_cast<real>(pred.size());
}

int boundary_tolerance(int h, int w) {
  real diag = std::sqrt(static_cast<real>(h) * h + static_cast<real>(w) * w);
  int tol = static_cast<int>(std::ceil(0.008 * diag));
  return std::max(tol, 1);
}

std::vector<std::pair<int, int>> boundary_pixels(const Mask& m) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(y, x)) continue;
      bool edge = (y == 0 || y == m.h - 1 || x == 0 || x == m.w - 1);
      bool bg_neighbor = (!edge && (!m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) ||
                                    !m.at(y, x + 1)));
      if (edge || bg_neighbor) out.emplace_back(y, x);
    }
  }
  return out;
}

namespace {

// Grid marking all pixels within Euclidean distance `tol` of any listed pixel.
std::vector<std::uint8_t> dilate(const std::vector<std::pair<int, int>>& pts, int h, int w,
                                 int tol) {
  std::vector<std::uint8_t> grid(static_cast<size_t>(h) * w, 0);
  int t2 = tol * tol;
  for (auto [y, x] : pts) {
    for (int dy = -tol; dy <= tol; ++dy) {
      for (int dx = -tol; dx <= tol; ++dx) {
        if (dy * dy + dx * dx > t2) continue;
        int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        grid[static_cast<size_t>(yy) * w + xx] = 1;
      }
    }
  }
  return grid;
}

size_t count_hits(const std::vector<std::pair<int, int>>& pts,
                  const std::vector<std::uint8_t>& grid, int w) {
  size_t hits = 0;
  for (auto [y, x] : pts) hits += grid[static_cast<size_t>(y) * w + x];
  return hits;
}

}  // namespace

real boundary_f_frame(const Mask& pred, const Mask& gt, int tolerance) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw ShapeError("boundary_f: mask shapes differ");
  auto pb = boundary_pixels(pred);
  auto gb = boundary_pixels(gt);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  auto gt_zone = dilate(gb, gt.h, gt.w, tolerance);
  auto pred_zone = dilate(pb, pred.h, pred.w, tolerance);
  real precision = static_cast<real>(count_hits(pb, gt_zone, gt.w)) / static_cast<real>(pb.size());
  real recall = static_cast<real>(count_hits(gb, pred_zone, pred.w)) / static_cast<real>(gb.size());
  if (precision + recall == 0) return 0.0;
  return 2 * precision * recall / (precision + recall);
}

real boundary_f(const std::vector<Mask>& pred, const std::vector<Mask>& gt, int tolerance) {
  if (pred.size() != gt.size()) throw ShapeError("boundary_f: sequence lengths differ");
  if (pred.empty()) throw ShapeError("boundary_f: empty sequences");
  real sum = 0;
  for (size_t i = 0; i < pred.size(); ++i) sum += boundary_f_frame(pred[i], gt[i], tolerance);
  return sum / static_cast<real>(pred.size());
}

MetricReport MetricReport::from_samples(std::vector<SampleMetrics> samples) {
  MetricReport r;
  r.per_sample = std::move(samples);
  if (r.per_sample.empty()) return r;
  for (const auto& s : r.per_sample) {
    r.mean_j += s.j;
    r.mean_f += s.f;
  }
  r.mean_j /= static_cast<real>(r.per_sample.size());
  r.mean_f /= static_cast<real>(r.per_sample.size());
  r.mean_jf = (r.mean_j + r.mean_f) / 2;
  return r;
}

MetricReport evaluate_dataset(const std::filesystem::path& predictions_dir, const Dataset& ds) {
  std::vector<SampleMetrics> samples;
  for (size_t si = 0; si < ds.samples.size(); ++si) {
    const ReferringSample& s = ds.samples[si];
    const VideoClip& clip = ds.video(s.video_id);
    int exp_idx = ds.expression_index(si);
    auto dir = predictions_dir / s.video_id / std::to_string(exp_idx);
    const auto& gt = clip.objects.at(s.target_object_id);
    std::vector<Mask> pred;
    pred.reserve(gt.size());
    for (size_t f = 0; f < gt.size(); ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05zu.png", f);
      auto file = dir / name;
      if (!std::filesystem::exists(file))
        throw DataError("missing prediction file '" + file.string() + "'");
      pred.push_back(read_png_mask(file));
    }
    // Extra frame files mean the prediction run disagrees with the dataset.
    char extra[16];
    std::snprintf(extra, sizeof(extra), "%05zu.png", gt.size());
    if (std::filesystem::exists(dir / extra))
      throw DataError("extra prediction file '" + (dir / extra).string() + "'");
    int tol = boundary_tolerance(clip.frames[0].h, clip.frames[0].w);
    SampleMetrics m;
    m.video_id = s.video_id;
    m.expression_index = exp_idx;
    m.j = region_j(pred, gt);
    m.f = boundary_f(pred, gt, tol);
    samples.push_back(std::move(m));
  }
  return MetricReport::from_samples(std::move(samples));
}

std::string format_report_row(const std::string& name, const MetricReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s J=%.3f F=%.3f J&F=%.3f", name.c_str(), report.mean_j,
                report.mean_f, report.mean_jf);
  return buf;
}

void emit_curve(const std::vector<std::pair<int, real>>& snapshots,
                const std::filesystem::path& out_file) {
  if (snapshots.size() < 2) throw DataError("emit_curve: need at least 2 snapshots");
  for (size_t i = 1; i < snapshots.size(); ++i) {
    if (snapshots[i].first == snapshots[i - 1].first)
      throw DataError("emit_curve: duplicate step " + std::to_string(snapshots[i].first));
    if (snapshots[i].first < snapshots[i - 1].first)
      throw DataError("emit_curve: steps out of order at step " +
                      std::to_string(snapshots[i].first));
  }
  std::ofstream out(out_file);
  if (!out) throw IoError("cannot write curve file '" + out_file.string() + "'");
  out << "step,jandf\n";
  for (auto [step, jf] : snapshots) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%.6f\n", step, jf);
    out << buf;
  }
}

std::vector<std::pair<int, real>> read_curve(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read curve file '" + file.string() + "'");
  std::vector<std::pair<int, real>> points;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("malformed curve line '" + line + "'");
    points.emplace_back(std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  return points;
}

bool curve_overfitting_suspect(const std::vector<std::pair<int, real>>& points) {
  if (points.size() < 2) return false;
  size_t i = points.size() - 1;
  size_t run = 1;
  while (i > 0 && points[i].second < points[i - 1].second) {
    ++run;
    --i;
  }
  return run >= 2;
}

}  // namespace refvos
