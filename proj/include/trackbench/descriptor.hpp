#pragma once

// Upright, fixed-scale SIFT-like descriptor and mutual-nearest matching.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trackbench/image.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

inline constexpr int kDescriptorCells = 4;
inline constexpr int kDescriptorBins = 8;
inline constexpr int kDescriptorSize = kDescriptorCells * kDescriptorCells * kDescriptorBins;
inline constexpr int kDescriptorWindow = 16;
// Half extent of the sampled support, including the one-sample gradient apron.
inline constexpr double kDescriptorReach = kDescriptorWindow / 2.0 + 0.5;

inline bool descriptor_fits(const GrayImage& img, const Pixel& p) {
  return p.u - kDescriptorReach >= 0 && p.v - kDescriptorReach >= 0 &&
         p.u + kDescriptorReach <= img.width() - 1 && p.v + kDescriptorReach <= img.height() - 1;
}

/// 128-vector: 4x4 spatial cells x 8 orientation bins over a 16x16 window
/// centred on p, Gaussian weighted, trilinearly binned, unit-normalized,
/// clamped at 0.2 and renormalized. A textureless window yields all zeros.
inline Descriptor compute_descriptor(const GrayImage& img, const Pixel& p) {
  if (!descriptor_fits(img, p)) throw WindowOutOfBounds("descriptor window at (" + std::to_string(p.u) + ", " +
                                                        std::to_string(p.v) + ") leaves the image");
  constexpr int S = kDescriptorWindow + 2;
  float samples[S][S];
  for (int j = 0; j < S; ++j)
    for (int i = 0; i < S; ++i)
      samples[j][i] = sample_bilinear(img, p.u + (i - kDescriptorReach), p.v + (j - kDescriptorReach));

  std::vector<float> hist(kDescriptorSize, 0.f);
  constexpr double sigma = 0.5 * kDescriptorWindow;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int j = 0; j < kDescriptorWindow; ++j)
    for (int i = 0; i < kDescriptorWindow; ++i) {
      const double dx = 0.5 * (samples[j + 1][i + 2] - samples[j + 1][i]);
      const double dy = 0.5 * (samples[j + 2][i + 1] - samples[j][i + 1]);
      const double mag = std::hypot(dx, dy);
      if (mag == 0.0) continue;
      const double ox = i - (kDescriptorWindow - 1) / 2.0, oy = j - (kDescriptorWindow - 1) / 2.0;
      const double weight = mag * std::exp(-(ox * ox + oy * oy) / (2 * sigma * sigma));
      double theta = std::atan2(dy, dx);
      if (theta < 0) theta += two_pi;

      // continuous cell / bin coordinates, centred on cell and bin middles
      const double cx = (i + 0.5) / (kDescriptorWindow / kDescriptorCells) - 0.5;
      const double cy = (j + 0.5) / (kDescriptorWindow / kDescriptorCells) - 0.5;
      const double co = theta / two_pi * kDescriptorBins;
      const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
      const int o0 = static_cast<int>(std::floor(co));
      const double fx = cx - x0, fy = cy - y0, fo = co - o0;
      for (int b = 0; b < 2; ++b) {
        const int yy = y0 + b;
        if (yy < 0 || yy >= kDescriptorCells) continue;
        const double wy = b ? fy : 1 - fy;
        for (int a = 0; a < 2; ++a) {
          const int xx = x0 + a;
          if (xx < 0 || xx >= kDescriptorCells) continue;
          const double wx = a ? fx : 1 - fx;
          for (int c = 0; c < 2; ++c) {
            const int oo = ((o0 + c) % kDescriptorBins + kDescriptorBins) % kDescriptorBins;
            const double wo = c ? fo : 1 - fo;
            hist[(yy * kDescriptorCells + xx) * kDescriptorBins + oo] += static_cast<float>(weight * wx * wy * wo);
          }
        }
      }
    }

  auto normalize = [&hist]() {
    double ss = 0;
    for (float h : hist) ss += double(h) * h;
    if (ss <= 0) return false;
    const float inv = static_cast<float>(1.0 / std::sqrt(ss));
    for (float& h : hist) h *= inv;
    return true;
  };
  if (!normalize()) return hist;
  for (float& h : hist) h = std::min(h, 0.2f);
  normalize();
  return hist;
}

inline bool is_zero_descriptor(const Descriptor& d) {
  for (float v : d)
    if (v != 0.f) return false;
  return true;
}

inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

/// Mutual-nearest matching under Euclidean distance. Result[i] is the
/// candidate matched to query i, if any. A match needs each side to be the
/// other's nearest neighbour and a distance <= threshold; ties go to the
/// lowest index. All-zero descriptors never match.
inline std::vector<std::optional<int>> match_mutual_nearest(std::span<const Descriptor> queries,
                                                            std::span<const Descriptor> candidates,
                                                            double threshold) {
  const int nq = static_cast<int>(queries.size()), nc = static_cast<int>(candidates.size());
  std::vector<std::optional<int>> result(static_cast<std::size_t>(nq));
  if (nq == 0 || nc == 0) return result;

  Eigen::MatrixXf Q(kDescriptorSize, nq), C(kDescriptorSize, nc);
  std::vector<char> q_ok(nq), c_ok(nc);
  for (int i = 0; i < nq; ++i) {
    q_ok[i] = queries[i].size() == kDescriptorSize && !is_zero_descriptor(queries[i]);
    for (int k = 0; k < kDescriptorSize; ++k) Q(k, i) = q_ok[i] ? queries[i][k] : 0.f;
  }
  for (int j = 0; j < nc; ++j) {
    c_ok[j] = candidates[j].size() == kDescriptorSize && !is_zero_descriptor(candidates[j]);
    for (int k = 0; k < kDescriptorSize; ++k) C(k, j) = c_ok[j] ? candidates[j][k] : 0.f;
  }
  const Eigen::VectorXf qn = Q.colwise().squaredNorm().transpose();
  const Eigen::VectorXf cn = C.colwise().squaredNorm().transpose();
  const Eigen::MatrixXf dots = Q.transpose() * C;  // nq x nc

  auto d2 = [&](int i, int j) { return std::max(0.f, qn[i] + cn[j] - 2.f * dots(i, j)); };
  constexpr float inf = std::numeric_limits<float>::infinity();
  std::vector<int> best_c(nq, -1), best_q(nc, -1);
  std::vector<float> best_c_d(nq, inf), best_q_d(nc, inf);
  for (int i = 0; i < nq; ++i) {
    if (!q_ok[i]) continue;
    for (int j = 0; j < nc; ++j) {
      if (!c_ok[j]) continue;
      const float d = d2(i, j);
      if (d < best_c_d[i]) {
        best_c_d[i] = d;
        best_c[i] = j;
      }
      if (d < best_q_d[j]) {
        best_q_d[j] = d;
        best_q[j] = i;
      }
    }
  }
  const float thr2 = static_cast<float>(threshold * threshold);
  for (int i = 0; i < nq; ++i) {
    const int j = best_c[i];
    if (j >= 0 && best_q[j] == i && best_c_d[i] <= thr2) result[i] = j;
  }
  return result;
}

}  // namespace trackbench
