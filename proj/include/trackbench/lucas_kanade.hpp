#pragma once

// Pyramidal inverse-compositional Lucas-Kanade for sparse translational flow.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "trackbench/image.hpp"
#include "trackbench/sequence.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

namespace detail {

inline bool window_inside(const FloatImage& img, double x, double y, int r) {
  return x - r >= 0.0 && y - r >= 0.0 && x + r <= img.width() - 1 && y + r <= img.height() - 1;
}

}  // namespace detail

/// Tracks one point from `prev` to `next`. Returns the new location, or
/// nullopt when the window leaves the image, the structure tensor is
/// near-singular, or the final photometric residual is too large.
inline std::optional<Pixel> track_point_lk(const std::vector<PyramidLevel>& prev,
                                           const std::vector<PyramidLevel>& next, const Pixel& pos,
                                           const TrackerConfig& cfg) {
  const int r = cfg.window_radius;
  const int side = 2 * r + 1;
  const int n = side * side;
  const int levels = static_cast<int>(std::min(prev.size(), next.size()));
  std::vector<float> T(static_cast<std::size_t>(n)), Tx(T.size()), Ty(T.size());

  double gx = 0.0, gy = 0.0;  // displacement guess at the current level
  double residual_rms = 0.0;
  for (int level = levels - 1; level >= 0; --level) {
    const PyramidLevel& P = prev[static_cast<std::size_t>(level)];
    const FloatImage& I = next[static_cast<std::size_t>(level)].image;
    const double scale = 1.0 / (1 << level);
    const double px = pos.u * scale, py = pos.v * scale;
    const bool finest = level == 0;
    if (finest && !detail::window_inside(P.image, px, py, r)) return std::nullopt;

    double g11 = 0, g12 = 0, g22 = 0;
    int k = 0;
    for (int j = -r; j <= r; ++j)
      for (int i = -r; i <= r; ++i, ++k) {
        const double x = px + i, y = py + j;
        T[k] = sample_bilinear_clamped(P.image, x, y);
        Tx[k] = sample_bilinear_clamped(P.grad_x, x, y);
        Ty[k] = sample_bilinear_clamped(P.grad_y, x, y);
        g11 += Tx[k] * Tx[k];
        g12 += Tx[k] * Ty[k];
        g22 += Ty[k] * Ty[k];
      }
    const double tr = g11 + g22;
    const double det = g11 * g22 - g12 * g12;
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    if (min_eig / n < cfg.min_eigen_threshold || det <= 0.0) {
      if (finest) return std::nullopt;
      gx *= 2.0;
      gy *= 2.0;
      continue;
    }
    const double inv11 = g22 / det, inv12 = -g12 / det, inv22 = g11 / det;

    double dx = gx, dy = gy;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const double qx = px + dx, qy = py + dy;
      if (finest && !detail::window_inside(I, qx, qy, r)) return std::nullopt;
      double b1 = 0, b2 = 0;
      k = 0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i, ++k) {
          const double res = T[k] - sample_bilinear_clamped(I, qx + i, qy + j);
          b1 += Tx[k] * res;
          b2 += Ty[k] * res;
        }
      const double sx = inv11 * b1 + inv12 * b2;
      const double sy = inv12 * b1 + inv22 * b2;
      dx += sx;
      dy += sy;
      if (!std::isfinite(dx) || !std::isfinite(dy)) return std::nullopt;
      if (std::hypot(sx, sy) < cfg.epsilon) break;
    }

    if (finest) {
      const double qx = px + dx, qy = py + dy;
      if (!detail::window_inside(I, qx, qy, r)) return std::nullopt;
      double ss = 0;
      k = 0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i, ++k) {
          const double res = T[k] - sample_bilinear(I, qx + i, qy + j);
          ss += res * res;
        }
      residual_rms = std::sqrt(ss / n);
      gx = dx;
      gy = dy;
    } else {
      gx = 2.0 * dx;
      gy = 2.0 * dy;
    }
  }
  if (residual_rms > cfg.max_residual) return std::nullopt;
  return Pixel{pos.u + gx, pos.v + gy};
}

/// Differential tracking of many points between two prepared pyramids.
inline std::vector<std::optional<Pixel>> track_differential(const std::vector<PyramidLevel>& prev,
                                                            const std::vector<PyramidLevel>& next,
                                                            std::span<const Pixel> points,
                                                            const TrackerConfig& cfg) {
  std::vector<std::optional<Pixel>> out;
  out.reserve(points.size());
  for (const Pixel& p : points) out.push_back(track_point_lk(prev, next, p, cfg));
  return out;
}

inline std::vector<std::optional<Pixel>> track_differential(const Frame& prev, const Frame& next,
                                                            std::span<const Pixel> points,
                                                            const TrackerConfig& cfg) {
  if (!prev.image->same_size(*next.image)) throw DimensionMismatch("frames differ in size");
  return track_differential(build_pyramid(*prev.image, cfg.pyramid_levels),
                            build_pyramid(*next.image, cfg.pyramid_levels), points, cfg);
}

}  // namespace trackbench
