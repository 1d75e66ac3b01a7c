#pragma once

// RANSAC outlier gate around a normalized eight-point fundamental matrix.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trackbench/geometry.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

inline constexpr int kEightPointSampleSize = 8;

/// Number of RANSAC draws so that, with probability p, at least one
/// all-inlier sample of size s is drawn when the inlier ratio is w.
inline int adaptive_iterations(double p, double inlier_ratio, int sample_size, int cap) {
  if (inlier_ratio <= 0.0) return cap;
  const double ws = std::pow(inlier_ratio, sample_size);
  if (ws >= 1.0) return 1;
  const double n = std::ceil(std::log(1.0 - p) / std::log(1.0 - ws));
  if (!std::isfinite(n) || n > cap) return cap;
  return std::max(1, static_cast<int>(n));
}

namespace detail {

// Translate to the centroid and scale so the mean distance is sqrt(2).
inline Eigen::Matrix3d hartley_normalization(std::span<const Pixel> pts, std::span<const int> idx) {
  double mx = 0, my = 0;
  for (int i : idx) {
    mx += pts[i].u;
    my += pts[i].v;
  }
  mx /= idx.size();
  my /= idx.size();
  double mean_dist = 0;
  for (int i : idx) mean_dist += std::hypot(pts[i].u - mx, pts[i].v - my);
  mean_dist /= idx.size();
  const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d T;
  T << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return T;
}

}  // namespace detail

/// Least-squares fundamental matrix (x_next^T F x_prev = 0) from >= 8
/// correspondences, with rank 2 enforced.
inline std::optional<Eigen::Matrix3d> eight_point(std::span<const Pixel> prev, std::span<const Pixel> next,
                                                  std::span<const int> idx) {
  if (idx.size() < kEightPointSampleSize) return std::nullopt;
  const Eigen::Matrix3d T1 = detail::hartley_normalization(prev, idx);
  const Eigen::Matrix3d T2 = detail::hartley_normalization(next, idx);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(std::max<std::size_t>(idx.size(), 9)), 9);
  A.setZero();
  Eigen::Index row = 0;
  for (int i : idx) {
    const Eigen::Vector3d a = T1 * Eigen::Vector3d(prev[i].u, prev[i].v, 1.0);
    const Eigen::Vector3d b = T2 * Eigen::Vector3d(next[i].u, next[i].v, 1.0);
    A.row(row++) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(), b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Eigen::Matrix3d F;
  F << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  Eigen::JacobiSVD<Eigen::Matrix3d> svdF(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sv = svdF.singularValues();
  sv(2) = 0.0;
  F = svdF.matrixU() * sv.asDiagonal() * svdF.matrixV().transpose();
  F = T2.transpose() * F * T1;
  const double norm = F.norm();
  if (!std::isfinite(norm) || norm <= 0.0) return std::nullopt;
  return F / norm;
}

/// Symmetric epipolar distance: root of the summed squared distances of each
/// point to the epipolar line induced by its partner, in pixels.
inline double epipolar_distance(const Eigen::Matrix3d& F, const Pixel& prev, const Pixel& next) {
  const Eigen::Vector3d a(prev.u, prev.v, 1.0), b(next.u, next.v, 1.0);
  const Eigen::Vector3d l2 = F * a;              // line in the next image
  const Eigen::Vector3d l1 = F.transpose() * b;  // line in the previous image
  const double e = b.dot(l2);
  const double n2 = l2.head<2>().squaredNorm(), n1 = l1.head<2>().squaredNorm();
  if (n1 <= 0.0 || n2 <= 0.0) return e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(e * e / n2 + e * e / n1);
}

struct GateResult {
  std::vector<bool> inlier;
  bool degenerate = false;  // fewer than 8 pairs: everything passes
  int iterations = 0;
  Eigen::Matrix3d F = Eigen::Matrix3d::Zero();

  std::size_t inlier_count() const { return static_cast<std::size_t>(std::count(inlier.begin(), inlier.end(), true)); }
};

/// Classifies each (prev[i], next[i]) pair as inlier/outlier of the best
/// fundamental-matrix consensus. Iterations adapt to the best inlier ratio
/// seen so far and are capped at cfg.ransac_max_iterations; the winning
/// consensus set is refit on all of its inliers.
template <typename Rng>
GateResult ransac_gate(std::span<const Pixel> prev, std::span<const Pixel> next, const TrackerConfig& cfg,
                       Rng& rng) {
  const int n = static_cast<int>(std::min(prev.size(), next.size()));
  GateResult result;
  result.inlier.assign(static_cast<std::size_t>(n), true);
  if (n < kEightPointSampleSize) {
    result.degenerate = true;
    return result;
  }

  auto classify = [&](const Eigen::Matrix3d& F, std::vector<bool>& flags) {
    int count = 0;
    for (int i = 0; i < n; ++i) {
      flags[i] = epipolar_distance(F, prev[i], next[i]) <= cfg.ransac_threshold;
      count += flags[i];
    }
    return count;
  };

  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<bool> flags(static_cast<std::size_t>(n)), best_flags(flags.size(), false);
  int best_count = -1;
  Eigen::Matrix3d best_F = Eigen::Matrix3d::Zero();
  int budget = cfg.ransac_max_iterations;
  int it = 0;
  for (; it < budget; ++it) {
    // partial Fisher-Yates draw of 8 distinct indices
    for (int k = 0; k < kEightPointSampleSize; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    const auto F = eight_point(prev, next, std::span<const int>(pool.data(), kEightPointSampleSize));
    if (!F) continue;
    const int count = classify(*F, flags);
    if (count > best_count) {
      best_count = count;
      best_flags = flags;
      best_F = *F;
      budget = std::min(cfg.ransac_max_iterations,
                        adaptive_iterations(cfg.ransac_p, static_cast<double>(count) / n, kEightPointSampleSize,
                                            cfg.ransac_max_iterations));
    }
  }
  result.iterations = it;
  if (best_count < 0) {
    result.degenerate = true;
    return result;
  }

  std::vector<int> inliers;
  for (int i = 0; i < n; ++i)
    if (best_flags[i]) inliers.push_back(i);
  if (const auto refit = eight_point(prev, next, inliers)) {
    const int count = classify(*refit, flags);
    if (count >= best_count) {
      best_flags = flags;
      best_F = *refit;
    }
  }
  result.inlier = std::move(best_flags);
  result.F = best_F;
  return result;
}

}  // namespace trackbench
