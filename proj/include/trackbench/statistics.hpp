#pragma once

// Error-distribution estimators.
//
// Per-timestep (keyframe-anchored data) and per-track-age (birth-anchored
// data) statistics share one moment accumulator:
//   mean      = 1/M * sum e
//   mean_abs  = 1/M * sum |e|        (componentwise)
//   second    = 1/(M-1) * sum e e^T  (uncentered: the mean is NOT removed)
// The uncentered second moment converges to S + b b^T for errors drawn with
// bias b and covariance S. It is reported as-is because a nonzero mean is
// exactly what these statistics are meant to expose.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "trackbench/geometry.hpp"
#include "trackbench/groundtruth.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

inline constexpr int kDefaultMinCount = 100;

/// One track's error signal. errors[i] belongs to frame start + i, which is
/// age i when start is the birth frame.
struct ErrorSeries {
  std::string scene;
  std::int64_t track_id = 0;
  int start = 0;
  std::vector<std::optional<Vec2>> errors;
};

struct MomentStats {
  int count = 0;
  Vec2 mean = Vec2::Zero();
  Vec2 mean_abs = Vec2::Zero();
  std::optional<Mat2> second_moment;  // requires count >= 2
  bool included = false;              // count >= cutoff
};

struct TimestepStats {
  int t = 0;
  MomentStats m;
};

struct AgeStats {
  int k = 0;
  MomentStats m;
};

class MomentAccumulator {
 public:
  void add(const Vec2& e) {
    ++count_;
    sum_ += e;
    sum_abs_ += e.cwiseAbs();
    sum_outer_ += e * e.transpose();
  }

  MomentStats finish(int cutoff) const {
    MomentStats s;
    s.count = count_;
    if (count_ > 0) {
      s.mean = sum_ / count_;
      s.mean_abs = sum_abs_ / count_;
    }
    if (count_ >= 2) {
      Mat2 m = sum_outer_ / (count_ - 1);
      m(0, 1) = m(1, 0) = 0.5 * (m(0, 1) + m(1, 0));
      s.second_moment = m;
    }
    s.included = count_ >= cutoff;
    return s;
  }

 private:
  int count_ = 0;
  Vec2 sum_ = Vec2::Zero();
  Vec2 sum_abs_ = Vec2::Zero();
  Mat2 sum_outer_ = Mat2::Zero();
};

namespace detail {

// Summation runs in (scene, track id) order so that results do not depend on
// the order in which scenes or tracks were supplied.
inline std::vector<const ErrorSeries*> sorted_series(std::span<const ErrorSeries> series) {
  std::vector<const ErrorSeries*> order;
  order.reserve(series.size());
  for (const auto& s : series) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const ErrorSeries* a, const ErrorSeries* b) {
    return std::tie(a->scene, a->track_id, a->start) < std::tie(b->scene, b->track_id, b->start);
  });
  return order;
}

template <typename KeyFn>
std::map<int, MomentAccumulator> accumulate(std::span<const ErrorSeries> series, KeyFn key) {
  std::map<int, MomentAccumulator> acc;
  for (const ErrorSeries* s : sorted_series(series))
    for (std::size_t i = 0; i < s->errors.size(); ++i)
      if (s->errors[i]) acc[key(*s, static_cast<int>(i))].add(*s->errors[i]);
  return acc;
}

}  // namespace detail

/// Statistics per absolute frame index over all supplied tracks.
inline std::vector<TimestepStats> timestep_stats(std::span<const ErrorSeries> series, int cutoff = kDefaultMinCount) {
  std::vector<TimestepStats> out;
  for (const auto& [t, acc] : detail::accumulate(series, [](const ErrorSeries& s, int i) { return s.start + i; }))
    out.push_back({t, acc.finish(cutoff)});
  return out;
}

/// Statistics per track age (frames since birth), pooling every track.
inline std::vector<AgeStats> age_stats(std::span<const ErrorSeries> series, int cutoff = kDefaultMinCount) {
  std::vector<AgeStats> out;
  for (const auto& [k, acc] : detail::accumulate(series, [](const ErrorSeries&, int i) { return i; }))
    out.push_back({k, acc.finish(cutoff)});
  return out;
}

inline std::vector<ErrorSeries> error_series(std::span<const GroundTruthTrack> gts, const std::string& scene) {
  std::vector<ErrorSeries> out;
  out.reserve(gts.size());
  for (const auto& g : gts) out.push_back({scene, g.track_id, g.first_frame, g.errors});
  return out;
}

struct OutlierRatio {
  int frame = 0;
  double ratio = 0.0;
};

/// f1 / F_prev per frame; frames without previous features are skipped.
inline std::vector<OutlierRatio> outlier_ratios(std::span<const FrameAttribution> attributions) {
  std::vector<OutlierRatio> out;
  for (const auto& a : attributions)
    if (const auto r = a.outlier_ratio()) out.push_back({a.frame, *r});
  return out;
}

struct LifetimeHistogram {
  std::map<int, std::int64_t> counts;  // lifetime in frames -> number of tracks

  std::int64_t total() const {
    std::int64_t n = 0;
    for (const auto& [l, c] : counts) n += c;
    return n;
  }

  void merge(const LifetimeHistogram& other) {
    for (const auto& [l, c] : other.counts) counts[l] += c;
  }

  /// Lower median of the lifetime distribution (0 when empty).
  double median() const {
    const std::int64_t n = total();
    if (n == 0) return 0.0;
    const auto value_at = [this](std::int64_t rank) {
      std::int64_t seen = 0;
      for (const auto& [l, c] : counts) {
        seen += c;
        if (seen > rank) return l;
      }
      return counts.rbegin()->first;
    };
    return n % 2 ? value_at(n / 2) : 0.5 * (value_at(n / 2 - 1) + value_at(n / 2));
  }
};

inline LifetimeHistogram lifetimes(std::span<const FeatureTrack> tracks) {
  LifetimeHistogram h;
  for (const auto& t : tracks)
    if (t.lifetime() >= 1) ++h.counts[t.lifetime()];
  return h;
}

struct BoxSummary {
  std::size_t n = 0;
  double median = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
  double whisker_lo = std::numeric_limits<double>::quiet_NaN();
  double whisker_hi = std::numeric_limits<double>::quiet_NaN();
};

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (sorted.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

/// Tukey box: type-7 quartiles, whiskers at the most extreme data points
/// within 1.5 IQR of the box.
inline BoxSummary summarize_box(std::vector<double> values) {
  BoxSummary b;
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  b.n = values.size();
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  double sum = 0;
  for (double v : values) sum += v;
  b.mean = sum / values.size();
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_lo = *std::find_if(values.begin(), values.end(), [&](double v) { return v >= lo_fence; });
  b.whisker_hi = *std::find_if(values.rbegin(), values.rend(), [&](double v) { return v <= hi_fence; });
  return b;
}

}  // namespace trackbench
