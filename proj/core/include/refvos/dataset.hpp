#pragma once

#include <map>
#include <string>
#include <vector>

#include "refvos/expression.hpp"
#include "refvos/image.hpp"

namespace refvos {

/// Constant-velocity (or orbiting / wall-bouncing) motion over a frame range
/// [start, end), measured in frame indices.
struct MotionSegment {
  std::string kind;
  int start = 0;
  int end = 0;  // exclusive

  bool operator==(const MotionSegment& o) const {
    return kind == o.kind && start == o.start && end == o.end;
  }
};

/// Scene-graph record for one object: appearance plus its motion program.
/// Written into meta.json so referability stays checkable after a round-trip.
struct ObjectInfo {
  std::string color;
  std::string shape;
  std::vector<MotionSegment> motions;

  bool operator==(const ObjectInfo& o) const {
    return color == o.color && shape == o.shape && motions == o.motions;
  }
};

struct VideoClip {
  std::string video_id;
  std::vector<Image> frames;
  std::map<std::string, std::vector<Mask>> objects;  // object id -> mask per frame
  std::map<std::string, ObjectInfo> object_info;

  int length() const { return static_cast<int>(frames.size()); }

  bool operator==(const VideoClip& o) const {
    return video_id == o.video_id && frames == o.frames && objects == o.objects &&
           object_info == o.object_info;
  }
};

struct ReferringSample {
  std::string video_id;
  std::string expression;
  std::string target_object_id;

  bool operator==(const ReferringSample& o) const {
    return video_id == o.video_id && expression == o.expression &&
           target_object_id == o.target_object_id;
  }
};

struct WorldConfig {
  int num_videos = 8;
  int frames_per_video = 16;
  int canvas_size = 64;
  int shapes_per_video = 3;
  int expressions_per_object = 2;
  std::vector<std::string> motion_vocabulary = lang::motion_kinds();
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  std::vector<VideoClip> videos;
  std::vector<ReferringSample> samples;

  const VideoClip& video(const std::string& id) const;
  /// Index of a sample's expression within its video (meta.json order).
  int expression_index(size_t sample_idx) const;

  bool operator==(const Dataset& o) const { return videos == o.videos && samples == o.samples; }
};

/// Whether an object's motion matches `kind` at frame f, per the scene graph.
bool motion_active(const ObjectInfo& obj, const std::string& kind, int frame);
/// Expression predicate against one object at one frame.
bool predicate_holds(const lang::ParsedExpression& e, const ObjectInfo& obj, int frame);
/// True when some frame in [0, T) exists where the expression is true of
/// exactly one object in the scene — and that object is `target_id`.
bool uniquely_refers(const std::map<std::string, ObjectInfo>& scene, int T,
                     const std::string& expression, const std::string& target_id);
bool uniquely_refers(const VideoClip& clip, const std::string& expression,
                     const std::string& target_id);
/// Frames where the expression's (possibly two-part) motion is active for the
/// object; used to measure partial-clip coverage.
std::vector<int> active_frames(const lang::ParsedExpression& e, const ObjectInfo& obj, int T);

/// Deterministic synthetic corpus: per video, >= 2 shapes including at least
/// one same-appearance pair that differs only by motion; expressions are
/// guaranteed uniquely-referring; for a fixed share of samples the referred
/// motion only covers a contiguous sub-range of frames.
Dataset generate_world(const WorldConfig& config);

/// On-disk layout:
///   <root>/meta.json
///   <root>/Frames/<vid>/00000.png ...
///   <root>/Annotations/<vid>/<oid>/00000.png ...
Dataset load_dataset(const std::filesystem::path& root);
void write_dataset(const Dataset& ds, const std::filesystem::path& root, bool force = false);

/// Split by video position: first `head_videos` clips (and their samples) go
/// to the first dataset, the rest to the second.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int head_videos);

}  // namespace refvos
