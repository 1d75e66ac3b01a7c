#pragma once

// Ground-truth feature tracks: anchor a spatial point for each track (from
// depth at birth or from a keyframe point cloud), reproject it through the
// camera poses, and difference against the observed track.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "trackbench/geometry.hpp"
#include "trackbench/sequence.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

enum class AnchorMode { depth_at_birth, keyframe_cloud };

struct GroundTruthTrack {
  std::int64_t track_id = 0;
  Point3 X_s = Point3::Zero();
  AnchorMode mode = AnchorMode::depth_at_birth;
  int anchor_frame = 0;
  int first_frame = 0;  // frame of curve[0] / errors[0]
  std::vector<std::optional<Pixel>> curve;  // nullopt where the point is behind the camera
  std::vector<std::optional<Vec2>> errors;

  /// Largest L2 error over the valid part of the lifetime (0 if none).
  double max_error() const {
    double m = 0.0;
    for (const auto& e : errors)
      if (e) m = std::max(m, e->norm());
    return m;
  }
};

inline bool valid_depth(float z) { return std::isfinite(z) && z > 0.f; }

/// Bilinear depth lookup that ignores invalid samples and renormalizes the
/// remaining weights. nullopt when no neighbour is valid.
inline std::optional<double> interpolate_depth(const DepthMap& depth, const Pixel& p) {
  const int x0 = static_cast<int>(std::floor(p.u)), y0 = static_cast<int>(std::floor(p.v));
  const double fx = p.u - x0, fy = p.v - y0;
  double acc = 0.0, wsum = 0.0;
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a) {
      const double w = (a ? fx : 1 - fx) * (b ? fy : 1 - fy);
      const int x = x0 + a, y = y0 + b;
      if (w <= 0.0 || !depth.in_bounds(x, y)) continue;
      const float z = depth(x, y);
      if (!valid_depth(z)) continue;
      acc += w * z;
      wsum += w;
    }
  if (wsum <= 0.0) return std::nullopt;
  return acc / wsum;
}

/// Spatial point of a track from the depth image at its birth frame.
inline Point3 anchor_from_depth(const FeatureTrack& track, const SequenceBundle& seq) {
  if (track.observations.empty()) throw NoValidDepth("track " + std::to_string(track.id) + " has no observations");
  const int t0 = track.birth_frame;
  if (t0 < 0 || t0 >= static_cast<int>(seq.size()) || !seq.frames[static_cast<std::size_t>(t0)].depth)
    throw NoValidDepth("no depth image at frame " + std::to_string(t0));
  const Pixel& p = track.observations.front().pixel;
  const auto z = interpolate_depth(*seq.frames[static_cast<std::size_t>(t0)].depth, p);
  if (!z) throw NoValidDepth("no valid depth around (" + std::to_string(p.u) + ", " + std::to_string(p.v) + ")");
  return transform(seq.poses[static_cast<std::size_t>(t0)], backproject(seq.intrinsics, p, *z));
}

struct CloudAssociation {
  Point3 X_s = Point3::Zero();
  std::size_t cloud_index = 0;
  double residual = 0.0;  // pixel distance between feature and projected cloud point
};

inline constexpr double kAssociationThreshold = 0.25;

/// Projected keyframe cloud bucketed on a 1-pixel grid for nearest-point queries.
class ProjectedCloud {
 public:
  ProjectedCloud(const KeyframeCloud& cloud, const CameraIntrinsics& K) : pixels_(cloud.points.size()) {
    for (std::size_t j = 0; j < cloud.points.size(); ++j) {
      const Point3& P = cloud.points[j];
      if (!(P.z() > kMinDepth)) continue;
      const Pixel px = project(K, P);
      if (!std::isfinite(px.u) || !std::isfinite(px.v)) continue;
      buckets_[key(cell(px.u), cell(px.v))].push_back(j);
      pixels_[j] = px;
    }
  }

  /// Nearest projected point strictly within `radius` (<= 1 px) of p, lowest
  /// index on ties.
  std::optional<std::pair<std::size_t, double>> nearest(const Pixel& p, double radius) const {
    if (radius > 1.0) throw InvalidSpec("association radius must not exceed one pixel");
    std::optional<std::pair<std::size_t, double>> best;
    const std::int64_t cx = cell(p.u), cy = cell(p.v);
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = buckets_.find(key(cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (std::size_t j : it->second) {
          const double d = distance(pixels_[j], p);
          if (d >= radius) continue;
          if (!best || d < best->second || (d == best->second && j < best->first)) best = {j, d};
        }
      }
    return best;
  }

 private:
  static std::int64_t cell(double x) { return static_cast<std::int64_t>(std::floor(x)); }
  static std::int64_t key(std::int64_t x, std::int64_t y) { return (y << 32) ^ (x & 0xffffffffLL); }

  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
  std::vector<Pixel> pixels_;
};

/// Associates each track observed at the keyframe with the nearest projected
/// cloud point, if that point lies strictly closer than 0.25 px.
inline std::vector<std::optional<CloudAssociation>> anchor_from_cloud(std::span<const FeatureTrack> tracks,
                                                                      const SequenceBundle& seq,
                                                                      double threshold = kAssociationThreshold) {
  if (!seq.keyframe_cloud) throw MissingStream("sequence has no keyframe cloud");
  const KeyframeCloud& cloud = *seq.keyframe_cloud;
  const ProjectedCloud projected(cloud, seq.intrinsics);
  const RigidPose& g = seq.poses[static_cast<std::size_t>(cloud.frame)];
  std::vector<std::optional<CloudAssociation>> out(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Observation* o = tracks[i].at_frame(cloud.frame);
    if (!o) continue;
    if (const auto hit = projected.nearest(o->pixel, threshold))
      out[i] = CloudAssociation{transform(g, cloud.points[hit->first]), hit->first, hit->second};
  }
  return out;
}

/// Ground-truth pixel of a fixed spatial point in each requested frame.
inline std::vector<std::optional<Pixel>> reproject_track(const Point3& X_s, std::span<const int> frames,
                                                         const SequenceBundle& seq) {
  std::vector<std::optional<Pixel>> out;
  out.reserve(frames.size());
  for (int t : frames) {
    const Point3 Xc = transform(inverse(seq.poses.at(static_cast<std::size_t>(t))), X_s);
    if (Xc.z() > kMinDepth)
      out.push_back(project(seq.intrinsics, Xc));
    else
      out.push_back(std::nullopt);
  }
  return out;
}

/// e(t) = observed(t) - ground_truth(t); invalid ground truth gives no error.
inline std::vector<std::optional<Vec2>> compute_errors(std::span<const Pixel> observed,
                                                       std::span<const std::optional<Pixel>> truth) {
  std::vector<std::optional<Vec2>> out(observed.size());
  for (std::size_t i = 0; i < observed.size() && i < truth.size(); ++i)
    if (truth[i]) out[i] = observed[i] - *truth[i];
  return out;
}

inline GroundTruthTrack make_ground_truth(const FeatureTrack& track, const Point3& X_s, AnchorMode mode,
                                          int anchor_frame, const SequenceBundle& seq) {
  GroundTruthTrack gt;
  gt.track_id = track.id;
  gt.X_s = X_s;
  gt.mode = mode;
  gt.anchor_frame = anchor_frame;
  gt.first_frame = track.birth_frame;
  std::vector<int> frames;
  std::vector<Pixel> observed;
  for (const auto& o : track.observations) {
    frames.push_back(o.frame);
    observed.push_back(o.pixel);
  }
  gt.curve = reproject_track(X_s, frames, seq);
  gt.errors = compute_errors(observed, gt.curve);
  return gt;
}

/// Depth-at-birth ground truth for every track that has valid depth.
inline std::vector<GroundTruthTrack> ground_truth_from_depth(std::span<const FeatureTrack> tracks,
                                                             const SequenceBundle& seq) {
  std::vector<GroundTruthTrack> out;
  for (const auto& t : tracks) {
    if (t.observations.empty()) continue;
    try {
      out.push_back(make_ground_truth(t, anchor_from_depth(t, seq), AnchorMode::depth_at_birth, t.birth_frame, seq));
    } catch (const NoValidDepth&) {
      // no ground truth: excluded from statistics
    }
  }
  return out;
}

/// Keyframe-cloud ground truth for every associated track.
inline std::vector<GroundTruthTrack> ground_truth_from_cloud(std::span<const FeatureTrack> tracks,
                                                             const SequenceBundle& seq) {
  const auto assoc = anchor_from_cloud(tracks, seq);
  std::vector<GroundTruthTrack> out;
  for (std::size_t i = 0; i < tracks.size(); ++i)
    if (assoc[i])
      out.push_back(make_ground_truth(tracks[i], assoc[i]->X_s, AnchorMode::keyframe_cloud,
                                      seq.keyframe_cloud->frame, seq));
  return out;
}

/// q-th percentile by nearest rank: the ceil(q/100 * n)-th smallest value.
inline double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

/// Drops tracks whose maximum L2 error strictly exceeds the nearest-rank
/// q-th percentile of all tracks' maxima.
inline std::vector<GroundTruthTrack> percentile_reject(std::vector<GroundTruthTrack> gts, double q) {
  if (gts.empty()) return gts;
  std::vector<double> maxima;
  maxima.reserve(gts.size());
  for (const auto& g : gts) maxima.push_back(g.max_error());
  const double cutoff = nearest_rank_percentile(maxima, q);
  std::erase_if(gts, [cutoff](const GroundTruthTrack& g) { return g.max_error() > cutoff; });
  return gts;
}

// track_id,frame,gt_u,gt_v,err_u,err_v,valid
inline void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruthTrack> gts) {
  out << "track_id,frame,gt_u,gt_v,err_u,err_v,valid\n";
  for (const auto& g : gts)
    for (std::size_t i = 0; i < g.curve.size(); ++i) {
      out << g.track_id << ',' << g.first_frame + static_cast<int>(i) << ',';
      if (g.curve[i] && g.errors[i])
        out << detail::fmt_double(g.curve[i]->u) << ',' << detail::fmt_double(g.curve[i]->v) << ','
            << detail::fmt_double(g.errors[i]->x()) << ',' << detail::fmt_double(g.errors[i]->y()) << ",1\n";
      else
        out << "nan,nan,nan,nan,0\n";
    }
}

}  // namespace trackbench
