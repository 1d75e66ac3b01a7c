#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trackbench/errors.hpp"
#include "trackbench/geometry.hpp"

namespace trackbench {

enum class TrackerKind { differential, correspondence };

inline std::string to_string(TrackerKind k) {
  return k == TrackerKind::differential ? "differential" : "correspondence";
}

inline TrackerKind tracker_kind_from_string(const std::string& s) {
  if (s == "differential" || s == "lk") return TrackerKind::differential;
  if (s == "correspondence" || s == "match") return TrackerKind::correspondence;
  throw FormatError("unknown tracker kind '" + s + "'");
}

struct TrackerConfig {
  TrackerKind kind = TrackerKind::differential;
  // feature band
  int min_features = 1000;
  int max_features = 1200;
  // segment-test detector
  int detector_threshold = 20;
  int nms_radius = 5;
  double exclusion_radius = 10.0;
  // pyramidal Lucas-Kanade
  int pyramid_levels = 3;
  int window_radius = 10;
  int max_iterations = 30;
  double epsilon = 0.01;
  double min_eigen_threshold = 1e-4;  // min eigenvalue of G over window area
  double max_residual = 0.08;         // RMS photometric residual in [0,1] units
  // descriptor matching
  double match_threshold = 0.35;
  // outlier gate
  double ransac_p = 0.995;
  double ransac_threshold = 3.0;
  int ransac_max_iterations = 2000;

  void validate() const {
    if (min_features < 0 || max_features < 1 || min_features > max_features)
      throw InvalidSpec("need 0 <= min_features <= max_features");
    if (!(ransac_threshold > 0)) throw InvalidSpec("ransac_threshold must be positive");
    if (!(ransac_p > 0 && ransac_p < 1)) throw InvalidSpec("ransac_p must lie in (0,1)");
    if (pyramid_levels < 1 || window_radius < 1 || max_iterations < 1 || !(epsilon > 0))
      throw InvalidSpec("invalid Lucas-Kanade parameters");
    if (detector_threshold < 1 || nms_radius < 0) throw InvalidSpec("invalid detector parameters");
    if (!(match_threshold > 0)) throw InvalidSpec("match_threshold must be positive");
  }
};

using Descriptor = std::vector<float>;

struct Observation {
  int frame = 0;
  Pixel pixel;
};

/// One tracked feature. Observations cover consecutive frames starting at
/// birth_frame; a single miss ends the track.
struct FeatureTrack {
  std::int64_t id = 0;
  int birth_frame = 0;
  std::vector<Observation> observations;
  Descriptor descriptor;  // frozen at birth; empty for the differential tracker
  bool alive = true;
  // Continuation that the outlier gate rejected; it terminated the track and
  // is not part of the attributed observations.
  std::optional<Observation> rejected;

  int lifetime() const { return static_cast<int>(observations.size()); }
  int last_frame() const { return observations.empty() ? birth_frame - 1 : observations.back().frame; }
  const Pixel& last_pixel() const { return observations.back().pixel; }

  const Observation* at_frame(int frame) const {
    const int k = frame - birth_frame;
    if (k < 0 || k >= lifetime()) return nullptr;
    return &observations[static_cast<std::size_t>(k)];
  }
};

struct FrameAttribution {
  int frame = 0;
  int f0 = 0;      // continuations accepted by the outlier gate
  int f1 = 0;      // continuations rejected by the outlier gate
  int f2 = 0;      // newly created tracks
  int F_prev = 0;  // features alive in the previous frame

  std::optional<double> outlier_ratio() const {
    if (F_prev <= 0) return std::nullopt;
    return static_cast<double>(f1) / F_prev;
  }
};

}  // namespace trackbench
