#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "refvos/image.hpp"

namespace refvos {

struct Dataset;  // dataset.hpp

/// Region similarity for one frame: |P ∩ G| / |P ∪ G|; 1.0 when both empty.
real region_j_frame(const Mask& pred, const Mask& gt);
/// Mean region similarity over a frame sequence.
real region_j(const std::vector<Mask>& pred, const std::vector<Mask>& gt);

/// DAVIS-style boundary tolerance: ceil(0.8% of the image diagonal), >= 1 px.
int boundary_tolerance(int h, int w);

/// A foreground pixel is boundary iff any 4-neighbor is background or it lies
/// on the image edge.
std::vector<std::pair<int, int>> boundary_pixels(const Mask& m);

/// Boundary F-measure for one frame with Euclidean pixel tolerance.
/// Both boundaries empty -> 1; exactly one empty -> 0.
real boundary_f_frame(const Mask& pred, const Mask& gt, int tolerance);
real boundary_f(const std::vector<Mask>& pred, const std::vector<Mask>& gt, int tolerance);

struct SampleMetrics {
  std::string video_id;
  int expression_index = 0;
  real j = 0;
  real f = 0;
  real jf() const { return (j + f) / 2; }
};

struct MetricReport {
  std::vector<SampleMetrics> per_sample;
  real mean_j = 0;
  real mean_f = 0;
  real mean_jf = 0;  // exactly (mean_j + mean_f) / 2
  std::vector<std::pair<int, real>> curve;  // optional (step, J&F) points

  static MetricReport from_samples(std::vector<SampleMetrics> samples);
};

/// Evaluate a predictions directory laid out like the Annotations tree but
/// keyed by expression index: <pred>/<video_id>/<exp_idx>/00000.png ...
/// A missing prediction file is a hard error naming the file.
MetricReport evaluate_dataset(const std::filesystem::path& predictions_dir, const Dataset& ds);

/// One row per dataset: J, F, J&F to 3 decimals.
std::string format_report_row(const std::string& name, const MetricReport& report);

/// Write ordered (step, J&F) points as "step,jf" lines. Steps must be strictly
/// increasing; duplicates or disorder are errors. Requires >= 2 snapshots.
void emit_curve(const std::vector<std::pair<int, real>>& snapshots,
                const std::filesystem::path& out_file);
std::vector<std::pair<int, real>> read_curve(const std::filesystem::path& file);

/// True when the curve ends in a strictly decreasing run of >= 2 points,
/// i.e. the latest snapshots only lost quality.
bool curve_overfitting_suspect(const std::vector<std::pair<int, real>>& points);

}  // namespace refvos
