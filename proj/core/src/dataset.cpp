#include "refvos/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace refvos {

using json = nlohmann::ordered_json;

void WorldConfig::validate() const {
  if (num_videos < 1) throw ConfigError("world config: num_videos must be >= 1");
  if (frames_per_video < 1) throw ConfigError("world config: frames_per_video must be >= 1");
  if (canvas_size < 16) throw ConfigError("world config: canvas_size must be >= 16");
  if (shapes_per_video < 2)
    throw ConfigError("world config: shapes_per_video must be >= 2 (hard negatives require it)");
  if (expressions_per_object < 1)
    throw ConfigError("world config: expressions_per_object must be >= 1");
  if (motion_vocabulary.size() < 2)
    throw ConfigError("world config: motion_vocabulary needs >= 2 kinds");
  for (const auto& kind : motion_vocabulary) {
    const auto& known = lang::motion_kinds();
    if (std::find(known.begin(), known.end(), kind) == known.end())
      throw ConfigError("world config: unknown motion kind '" + kind + "'");
  }
}

const VideoClip& Dataset::video(const std::string& id) const {
  for (const auto& v : videos)
    if (v.video_id == id) return v;
  throw DataError("unknown video id '" + id + "'");
}

int Dataset::expression_index(size_t sample_idx) const {
  if (sample_idx >= samples.size()) throw DataError("sample index out of range");
  int idx = 0;
  for (size_t i = 0; i < sample_idx; ++i)
    if (samples[i].video_id == samples[sample_idx].video_id) ++idx;
  return idx;
}

bool motion_active(const ObjectInfo& obj, const std::string& kind, int frame) {
  for (const auto& seg : obj.motions)
    if (seg.kind == kind && frame >= seg.start && frame < seg.end) return true;
  return false;
}

bool predicate_holds(const lang::ParsedExpression& e, const ObjectInfo& obj, int frame) {
  if (obj.color != e.color || obj.shape != e.shape) return false;
  if (!e.motion2) return motion_active(obj, e.motion, frame);
  // "<m1> then <m2>" is true on the span of any consecutive (m1, m2) segments.
  for (size_t i = 0; i + 1 < obj.motions.size(); ++i) {
    if (obj.motions[i].kind == e.motion && obj.motions[i + 1].kind == *e.motion2 &&
        frame >= obj.motions[i].start && frame < obj.motions[i + 1].end)
      return true;
  }
  return false;
}

bool uniquely_refers(const std::map<std::string, ObjectInfo>& scene, int T,
                     const std::string& expression, const std::string& target_id) {
  auto parsed = lang::parse_expression(expression);
  auto ti = scene.find(target_id);
  if (ti == scene.end()) return false;
  for (int f = 0; f < T; ++f) {
    if (!predicate_holds(parsed, ti->second, f)) continue;
    int hits = 0;
    for (const auto& [oid, info] : scene)
      if (predicate_holds(parsed, info, f)) ++hits;
    if (hits == 1) return true;
  }
  return false;
}

bool uniquely_refers(const VideoClip& clip, const std::string& expression,
                     const std::string& target_id) {
  return uniquely_refers(clip.object_info, clip.length(), expression, target_id);
}

std::vector<int> active_frames(const lang::ParsedExpression& e, const ObjectInfo& obj, int T) {
  std::vector<int> frames;
  for (int f = 0; f < T; ++f)
    if (predicate_holds(e, obj, f)) frames.push_back(f);
  return frames;
}

namespace {

struct Vec2 {
  real x = 0, y = 0;
};

struct SegmentPlan {
  std::string kind;
  int start = 0, end = 0;
  Vec2 vel;            // move-*
  real orbit_r = 0;    // circle
  real omega = 0;      // circle / bounce rate, signed for circle
  real theta0 = 0;     // circle
  real amplitude = 0;  // bounce
};

struct ObjectPlan {
  std::string id;
  std::string color;
  std::string shape;
  real size = 5;
  std::vector<SegmentPlan> segments;
  std::vector<Vec2> centers;  // one per frame
};

struct Palette {
  std::array<std::uint8_t, 3> rgb;
};

const std::map<std::string, Palette>& palette() {
  static const std::map<std::string, Palette> p = {
      {"red", {{230, 30, 30}}},    {"green", {{40, 210, 70}}}, {"blue", {{50, 90, 240}}},
      {"yellow", {{235, 220, 45}}}, {"magenta", {{225, 50, 225}}}, {"cyan", {{45, 215, 220}}}};
  return p;
}

// Split [0, T) into n chunks of length >= min_len each, randomized cut points.
std::vector<std::pair<int, int>> random_chunks(int T, int n, int min_len, Rng& rng) {
  std::vector<int> lens(n, min_len);
  int slack = T - n * min_len;
  for (int i = 0; i < slack; ++i) lens[rng.uniform_int(0, n - 1)] += 1;
  std::vector<std::pair<int, int>> chunks;
  int cursor = 0;
  for (int i = 0; i < n; ++i) {
    chunks.emplace_back(cursor, cursor + lens[i]);
    cursor += lens[i];
  }
  return chunks;
}

std::vector<SegmentPlan> plan_program(int T, const std::vector<std::string>& vocab,
                                      bool force_multi, Rng& rng) {
  int max_segs = std::max(1, std::min(3, T / 3));
  int min_segs = force_multi && max_segs >= 2 ? 2 : 1;
  int n = rng.uniform_int(min_segs, std::max(min_segs, max_segs));
  auto chunks = random_chunks(T, n, std::min(T, std::max(2, T / (n + 1))), rng);
  std::vector<SegmentPlan> segs;
  std::string prev;
  for (auto [a, b] : chunks) {
    SegmentPlan s;
    do {
      s.kind = vocab[rng.uniform_int(0, static_cast<int>(vocab.size()) - 1)];
    } while (s.kind == prev);
    prev = s.kind;
    s.start = a;
    s.end = b;
    segs.push_back(s);
  }
  return segs;
}

bool same_program(const std::vector<SegmentPlan>& a, const std::vector<SegmentPlan>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].kind != b[i].kind) return false;
  return true;
}

// Simulate centers for all frames; returns false if the shape leaves the canvas.
bool simulate(ObjectPlan& obj, int T, int canvas, Rng& rng) {
  real margin = obj.size + 1.5;
  real lo = margin, hi = canvas - margin;
  if (lo >= hi) return false;
  Vec2 pos{rng.uniform(lo, hi), rng.uniform(lo, hi)};
  real speed = rng.uniform(1.5, 2.5);

  for (auto& seg : obj.segments) {
    if (seg.kind == "move-left") seg.vel = {-speed, 0};
    else if (seg.kind == "move-right") seg.vel = {speed, 0};
    else if (seg.kind == "move-up") seg.vel = {0, -speed};
    else if (seg.kind == "move-down") seg.vel = {0, speed};
    else if (seg.kind == "stop") seg.vel = {0, 0};
    else if (seg.kind == "bounce") {
      // Rapid floor bounce: visible between adjacent frames, temporally
      // aliased under sparse sampling.
      seg.amplitude = rng.uniform(3.5, 5.5);
      seg.omega = rng.uniform(0.8, 1.2);
      seg.theta0 = rng.uniform(0, M_PI);
    } else if (seg.kind == "circle") {
      seg.orbit_r = rng.uniform(3.0, 5.5);
      seg.omega = (rng.chance(0.5) ? 1 : -1) * rng.uniform(0.7, 1.1);
      seg.theta0 = rng.uniform(0, 2 * M_PI);
    }
  }

  obj.centers.assign(T, Vec2{});
  obj.centers[0] = pos;
  for (auto& seg : obj.segments) {
    Vec2 anchor = obj.centers[seg.start];
    if (seg.kind == "circle") {
      Vec2 orbit_c{anchor.x - seg.orbit_r * std::cos(seg.theta0),
                   anchor.y - seg.orbit_r * std::sin(seg.theta0)};
      for (int f = seg.start + 1; f <= seg.end && f < T; ++f) {
        real th = seg.theta0 + seg.omega * (f - seg.start);
        obj.centers[f] = {orbit_c.x + seg.orbit_r * std::cos(th),
                          orbit_c.y + seg.orbit_r * std::sin(th)};
      }
    } else if (seg.kind == "bounce") {
      real floor_y = anchor.y;
      real base = std::abs(std::sin(seg.theta0));
      for (int f = seg.start + 1; f <= seg.end && f < T; ++f) {
        real phase = std::abs(std::sin(seg.theta0 + seg.omega * (f - seg.start)));
        obj.centers[f] = {anchor.x, floor_y - seg.amplitude * (phase - base)};
      }
    } else {
      Vec2 vel = seg.vel;
      for (int f = seg.start + 1; f <= seg.end && f < T; ++f) {
        Vec2 p = obj.centers[f - 1];
        p.x += vel.x;
        p.y += vel.y;
        obj.centers[f] = p;
      }
    }
  }
  for (const auto& c : obj.centers)
    if (c.x < lo - 1e-9 || c.x > hi + 1e-9 || c.y < lo - 1e-9 || c.y > hi + 1e-9) return false;
  return true;
}

bool separated(const ObjectPlan& a, const ObjectPlan& b, int T) {
  for (int f = 0; f < T; ++f) {
    real dx = a.centers[f].x - b.centers[f].x;
    real dy = a.centers[f].y - b.centers[f].y;
    real need = a.size + b.size + 1.0;
    if (dx * dx + dy * dy < need * need) return false;
  }
  return true;
}

// Translate the distractor's whole path so it passes close to the target at
// one mid-video frame. Near-crossings of identical-looking objects are what
// temporal reasoning has to untangle.
bool steer_encounter(ObjectPlan& obj, const ObjectPlan& anchor, int T, int canvas, Rng& rng) {
  int when = rng.uniform_int(T / 4, (3 * T) / 4);
  real angle = rng.uniform(0, 2 * M_PI);
  real gap = rng.uniform(4.0, 10.0);
  Vec2 want{anchor.centers[when].x + gap * std::cos(angle),
            anchor.centers[when].y + gap * std::sin(angle)};
  Vec2 shift{want.x - obj.centers[when].x, want.y - obj.centers[when].y};
  real margin = obj.size + 1.5;
  real lo = margin, hi = canvas - margin;
  for (const auto& c : obj.centers) {
    real x = c.x + shift.x, y = c.y + shift.y;
    if (x < lo || x > hi || y < lo || y > hi) return false;
  }
  for (auto& c : obj.centers) {
    c.x += shift.x;
    c.y += shift.y;
  }
  return true;
}

bool inside_shape(const std::string& shape, real cx, real cy, real s, int x, int y) {
  real px = x + 0.5 - cx;
  real py = y + 0.5 - cy;
  if (shape == "circle") return px * px + py * py <= s * s;
  if (shape == "square") return std::abs(px) <= s && std::abs(py) <= s;
  // Upward triangle A=(0,-s), B=(-s,s), C=(s,s), clockwise in image coords.
  real ax = 0, ay = -s, bx = -s, by = s, cx2 = s, cy2 = s;
  auto cross = [](real ux, real uy, real vx, real vy) { return ux * vy - uy * vx; };
  real d1 = cross(bx - ax, by - ay, px - ax, py - ay);
  real d2 = cross(cx2 - bx, cy2 - by, px - bx, py - by);
  real d3 = cross(ax - cx2, ay - cy2, px - cx2, py - cy2);
  return d1 <= 0 && d2 <= 0 && d3 <= 0;
}

Mask rasterize(const ObjectPlan& obj, int frame, int canvas) {
  Mask m(canvas, canvas);
  const Vec2& c = obj.centers[frame];
  int x0 = std::max(0, static_cast<int>(std::floor(c.x - obj.size - 1)));
  int x1 = std::min(canvas - 1, static_cast<int>(std::ceil(c.x + obj.size + 1)));
  int y0 = std::max(0, static_cast<int>(std::floor(c.y - obj.size - 1)));
  int y1 = std::min(canvas - 1, static_cast<int>(std::ceil(c.y + obj.size + 1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (inside_shape(obj.shape, c.x, c.y, obj.size, x, y)) m.at(y, x) = 1;
  return m;
}

ObjectInfo to_info(const ObjectPlan& plan) {
  ObjectInfo info;
  info.color = plan.color;
  info.shape = plan.shape;
  for (const auto& s : plan.segments) info.motions.push_back({s.kind, s.start, s.end});
  return info;
}

// Candidate expressions for an object, partial-coverage ones first so the
// primary expression exercises the "referring covers part of the frames" case.
std::vector<std::string> expression_candidates(const ObjectInfo& obj, int T) {
  std::vector<lang::ParsedExpression> parsed;
  std::set<std::string> seen_kinds;
  for (const auto& seg : obj.motions) {
    if (!seen_kinds.insert(seg.kind).second) continue;
    lang::ParsedExpression e;
    e.color = obj.color;
    e.shape = obj.shape;
    e.motion = seg.kind;
    parsed.push_back(e);
  }
  for (size_t i = 0; i + 1 < obj.motions.size(); ++i) {
    lang::ParsedExpression e;
    e.color = obj.color;
    e.shape = obj.shape;
    e.motion = obj.motions[i].kind;
    e.motion2 = obj.motions[i + 1].kind;
    parsed.push_back(e);
  }
  auto is_partial = [&](const lang::ParsedExpression& e) {
    auto frames = active_frames(e, obj, T);
    if (frames.empty() || static_cast<int>(frames.size()) == T) return false;
    return frames.back() - frames.front() + 1 == static_cast<int>(frames.size());
  };
  std::stable_sort(parsed.begin(), parsed.end(),
                   [&](const auto& a, const auto& b) { return is_partial(a) > is_partial(b); });
  std::vector<std::string> out;
  for (const auto& e : parsed) out.push_back(lang::render_expression(e, false));
  for (const auto& e : parsed) out.push_back(lang::render_expression(e, true));
  return out;
}

bool build_video(const WorldConfig& cfg, int video_index, Rng rng, VideoClip& clip,
                 std::vector<ReferringSample>& samples) {
  const int T = cfg.frames_per_video;
  const int K = cfg.shapes_per_video;
  char vid[32];
  std::snprintf(vid, sizeof(vid), "v%04d", video_index);

  std::vector<ObjectPlan> plans(K);
  const auto& cols = lang::colors();
  const auto& shps = lang::shapes();

  // Objects 0 and 1 form the same-appearance distractor pair.
  std::string pair_color = cols[rng.uniform_int(0, static_cast<int>(cols.size()) - 1)];
  std::string pair_shape = shps[rng.uniform_int(0, static_cast<int>(shps.size()) - 1)];
  int forced_multi = std::max(2, (2 * K + 4) / 5);  // ceil(0.4K), at least the pair
  for (int k = 0; k < K; ++k) {
    ObjectPlan& p = plans[k];
    char oid[16];
    std::snprintf(oid, sizeof(oid), "obj%d", k);
    p.id = oid;
    if (k < 2) {
      p.color = pair_color;
      p.shape = pair_shape;
    } else {
      p.color = cols[rng.uniform_int(0, static_cast<int>(cols.size()) - 1)];
      p.shape = shps[rng.uniform_int(0, static_cast<int>(shps.size()) - 1)];
    }
    p.size = rng.uniform(5.0, 7.5);
    p.segments = plan_program(T, cfg.motion_vocabulary, k < forced_multi, rng);
  }
  if (same_program(plans[0].segments, plans[1].segments)) return false;

  for (int k = 0; k < K; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
      ObjectPlan trial = plans[k];
      if (!simulate(trial, T, cfg.canvas_size, rng)) continue;
      // The distractor is steered into a near-crossing with the target; the
      // pair may come arbitrarily close, every other object stays apart.
      if (k == 1 && !steer_encounter(trial, plans[0], T, cfg.canvas_size, rng)) continue;
      bool ok = true;
      for (int j = (k == 1 ? 1 : 0); j < k; ++j)
        if (!separated(trial, plans[j], T)) { ok = false; break; }
      if (!ok) continue;
      plans[k] = trial;
      placed = true;
    }
    if (!placed) return false;
  }

  clip = VideoClip{};
  clip.video_id = vid;
  for (const auto& p : plans) clip.object_info[p.id] = to_info(p);

  // Expressions, checked for unique reference against the scene graph.
  std::vector<std::pair<std::string, std::string>> exprs;  // (exp, obj_id)
  for (const auto& p : plans) {
    std::vector<std::string> chosen;
    for (const auto& cand : expression_candidates(clip.object_info[p.id], T)) {
      if (static_cast<int>(chosen.size()) == cfg.expressions_per_object) break;
      if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
      if (uniquely_refers(clip.object_info, T, cand, p.id)) chosen.push_back(cand);
    }
    if (static_cast<int>(chosen.size()) < cfg.expressions_per_object) return false;
    for (const auto& e : chosen) exprs.emplace_back(e, p.id);
  }

  // Render frames and exact masks.
  const auto& pal = palette();
  for (int f = 0; f < T; ++f) {
    Image img(cfg.canvas_size, cfg.canvas_size);
    for (const auto& p : plans) {
      Mask m = rasterize(p, f, cfg.canvas_size);
      const auto& rgb = pal.at(p.color).rgb;
      for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x)
          if (m.at(y, x))
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(rgb[c]) / 255.f;
    }
    clip.frames.push_back(std::move(img));
  }
  for (const auto& p : plans) {
    std::vector<Mask> seq;
    seq.reserve(T);
    for (int f = 0; f < T; ++f) seq.push_back(rasterize(p, f, cfg.canvas_size));
    clip.objects[p.id] = std::move(seq);
  }

  for (const auto& [exp, oid] : exprs)
    samples.push_back({clip.video_id, exp, oid});
  return true;
}

}  // namespace

Dataset generate_world(const WorldConfig& config) {
  config.validate();
  Dataset ds;
  for (int v = 0; v < config.num_videos; ++v) {
    Rng video_rng = Rng(config.seed, 0x7A57E000ULL + static_cast<std::uint64_t>(v));
    VideoClip clip;
    std::vector<ReferringSample> samples;
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      samples.clear();
      ok = build_video(config, v, video_rng.split(attempt), clip, samples);
    }
    if (!ok)
      throw DataError("generate_world: could not satisfy constraints for video " +
                      std::to_string(v) + "; relax shapes_per_video or motion_vocabulary");
    ds.videos.push_back(std::move(clip));
    for (auto& s : samples) ds.samples.push_back(std::move(s));
  }

  if (config.frames_per_video >= 6) {
    int partial = 0;
    for (const auto& s : ds.samples) {
      const auto& clip = ds.video(s.video_id);
      auto e = lang::parse_expression(s.expression);
      auto frames = active_frames(e, clip.object_info.at(s.target_object_id), clip.length());
      bool contiguous = !frames.empty() &&
                        frames.back() - frames.front() + 1 == static_cast<int>(frames.size());
      if (contiguous && static_cast<int>(frames.size()) < clip.length()) ++partial;
    }
    if (partial * 10 < static_cast<int>(ds.samples.size()) * 3)
      throw DataError("generate_world: partial-clip sample share fell below 30%");
  }
  return ds;
}

namespace {

void write_meta(const Dataset& ds, const std::filesystem::path& root) {
  json meta;
  meta["videos"] = json::object();
  for (const auto& clip : ds.videos) {
    json v;
    v["frames"] = clip.length();
    v["objects"] = json::object();
    for (const auto& [oid, info] : clip.object_info) {
      json o;
      o["color"] = info.color;
      o["shape"] = info.shape;
      o["motions"] = json::array();
      for (const auto& m : info.motions)
        o["motions"].push_back({{"kind", m.kind}, {"start", m.start}, {"end", m.end}});
      v["objects"][oid] = o;
    }
    v["expressions"] = json::array();
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      if (ds.samples[i].video_id != clip.video_id) continue;
      v["expressions"].push_back(
          {{"exp", ds.samples[i].expression}, {"obj_id", ds.samples[i].target_object_id}});
    }
    meta["videos"][clip.video_id] = v;
  }
  std::ofstream out(root / "meta.json");
  if (!out) throw IoError("cannot write '" + (root / "meta.json").string() + "'");
  out << meta.dump(2) << "\n";
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& root, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(root) && !fs::is_empty(root) && !force)
    throw IoError("refusing to overwrite non-empty '" + root.string() +
                  "' without force flag");
  fs::create_directories(root);
  write_meta(ds, root);
  for (const auto& clip : ds.videos) {
    auto frames_dir = root / "Frames" / clip.video_id;
    fs::create_directories(frames_dir);
    for (int f = 0; f < clip.length(); ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05d.png", f);
      write_png_rgb(frames_dir / name, clip.frames[f]);
    }
    for (const auto& [oid, masks] : clip.objects) {
      auto ann_dir = root / "Annotations" / clip.video_id / oid;
      fs::create_directories(ann_dir);
      for (size_t f = 0; f < masks.size(); ++f) {
        char name[16];
        std::snprintf(name, sizeof(name), "%05zu.png", f);
        write_png_mask(ann_dir / name, masks[f]);
      }
    }
  }
}

Dataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  auto meta_path = root / "meta.json";
  if (!fs::exists(meta_path))
    throw DataError("missing meta file '" + meta_path.string() + "'");
  std::ifstream in(meta_path);
  json meta;
  try {
    in >> meta;
  } catch (const std::exception& e) {
    throw DataError("malformed meta file: " + std::string(e.what()));
  }

  Dataset ds;
  if (!meta.contains("videos")) throw DataError("meta file lacks 'videos'");
  for (const auto& [vid, v] : meta["videos"].items()) {
    VideoClip clip;
    clip.video_id = vid;
    int frames = v.at("frames").get<int>();
    for (int f = 0; f < frames; ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05d.png", f);
      auto path = root / "Frames" / vid / name;
      if (!fs::exists(path)) throw DataError("missing frame file '" + path.string() + "'");
      clip.frames.push_back(read_png_rgb(path));
    }
    for (const auto& [oid, o] : v.at("objects").items()) {
      ObjectInfo info;
      info.color = o.value("color", "");
      info.shape = o.value("shape", "");
      if (o.contains("motions"))
        for (const auto& m : o["motions"])
          info.motions.push_back({m.at("kind").get<std::string>(), m.at("start").get<int>(),
                                  m.at("end").get<int>()});
      clip.object_info[oid] = info;
      std::vector<Mask> seq;
      for (int f = 0;; ++f) {
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", f);
        auto path = root / "Annotations" / vid / oid / name;
        if (!fs::exists(path)) break;
        seq.push_back(read_png_mask(path));
      }
      if (static_cast<int>(seq.size()) != frames)
        throw DataError("mask count mismatch for video '" + vid + "' object '" + oid + "': " +
                        std::to_string(seq.size()) + " masks vs " + std::to_string(frames) +
                        " frames");
      clip.objects[oid] = std::move(seq);
    }
    for (const auto& e : v.at("expressions")) {
      std::string oid = e.at("obj_id").get<std::string>();
      if (!clip.objects.count(oid))
        throw DataError("unknown object id '" + oid + "' in expressions of video '" + vid + "'");
      ds.samples.push_back({vid, e.at("exp").get<std::string>(), oid});
    }
    ds.videos.push_back(std::move(clip));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int head_videos) {
  Dataset head, tail;
  for (size_t i = 0; i < ds.videos.size(); ++i) {
    if (static_cast<int>(i) < head_videos)
      head.videos.push_back(ds.videos[i]);
    else
      tail.videos.push_back(ds.videos[i]);
  }
  std::set<std::string> head_ids;
  for (const auto& v : head.videos) head_ids.insert(v.video_id);
  for (const auto& s : ds.samples) {
    if (head_ids.count(s.video_id))
      head.samples.push_back(s);
    else
      tail.samples.push_back(s);
  }
  return {std::move(head), std::move(tail)};
}

}  // namespace refvos
