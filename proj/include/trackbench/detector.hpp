#pragma once

// FAST-9 segment-test corner detector with non-maximum suppression.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "trackbench/image.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

struct Corner {
  int x = 0;
  int y = 0;
  int score = 0;
};

namespace detail {

// Bresenham circle of radius 3, clockwise from 12 o'clock.
inline constexpr std::array<std::array<int, 2>, 16> kCircle = {{{0, -3},
                                                                {1, -3},
                                                                {2, -2},
                                                                {3, -1},
                                                                {3, 0},
                                                                {3, 1},
                                                                {2, 2},
                                                                {1, 3},
                                                                {0, 3},
                                                                {-1, 3},
                                                                {-2, 2},
                                                                {-3, 1},
                                                                {-3, 0},
                                                                {-3, -1},
                                                                {-2, -2},
                                                                {-1, -3}}};

inline constexpr int kArcLength = 9;

inline bool has_arc(unsigned mask16) {
  // Duplicate the ring so that runs wrapping past index 15 are contiguous.
  const unsigned ring = mask16 | (mask16 << 16);
  unsigned run = ring;
  for (int i = 1; i < kArcLength; ++i) run &= ring >> i;
  return (run & 0xFFFFu) != 0;
}

}  // namespace detail

/// Segment-test score at (x, y), or 0 when the pixel is not a corner. The score
/// is the summed absolute intensity difference over the circle pixels of the
/// winning polarity. Requires a 3 pixel margin.
inline int segment_test_score(const GrayImage& img, int x, int y, int threshold) {
  const int c = img(x, y);
  const int hi = c + threshold, lo = c - threshold;
  // 9 contiguous pixels always cover at least two of the four compass points.
  int compass_bright = 0, compass_dark = 0;
  for (int i = 0; i < 16; i += 4) {
    const int p = img(x + detail::kCircle[i][0], y + detail::kCircle[i][1]);
    compass_bright += p > hi;
    compass_dark += p < lo;
  }
  if (compass_bright < 2 && compass_dark < 2) return 0;

  unsigned bright = 0, dark = 0;
  int sum_bright = 0, sum_dark = 0;
  for (int i = 0; i < 16; ++i) {
    const int p = img(x + detail::kCircle[i][0], y + detail::kCircle[i][1]);
    if (p > hi) {
      bright |= 1u << i;
      sum_bright += p - c;
    } else if (p < lo) {
      dark |= 1u << i;
      sum_dark += c - p;
    }
  }
  if (detail::has_arc(bright)) return sum_bright;
  if (detail::has_arc(dark)) return sum_dark;
  return 0;
}

/// All segment-test corners after non-maximum suppression, in raster order.
/// Ties between equal scores resolve towards the lowest row, then column.
inline std::vector<Corner> detect_segment_test(const GrayImage& img, int threshold, int nms_radius,
                                               int border = 3) {
  const int w = img.width(), h = img.height();
  border = std::max(border, 3);
  std::vector<Corner> raw;
  if (w <= 2 * border || h <= 2 * border) return raw;
  Raster<int> score(w, h, 0);
  for (int y = border; y < h - border; ++y)
    for (int x = border; x < w - border; ++x) {
      const int s = segment_test_score(img, x, y, threshold);
      if (s > 0) {
        score(x, y) = s;
        raw.push_back({x, y, s});
      }
    }
  if (nms_radius <= 0) return raw;
  std::vector<Corner> kept;
  for (const Corner& c : raw) {
    bool is_max = true;
    for (int dy = -nms_radius; dy <= nms_radius && is_max; ++dy) {
      const int yy = c.y + dy;
      if (yy < 0 || yy >= h) continue;
      for (int dx = -nms_radius; dx <= nms_radius; ++dx) {
        const int xx = c.x + dx;
        if (xx < 0 || xx >= w || (dx == 0 && dy == 0)) continue;
        const int s = score(xx, yy);
        // an equal score earlier in raster order wins
        if (s > c.score || (s == c.score && (dy < 0 || (dy == 0 && dx < 0)))) {
          is_max = false;
          break;
        }
      }
    }
    if (is_max) kept.push_back(c);
  }
  return kept;
}

/// Marks every pixel within `radius` of an occupied location.
inline GrayImage make_occupancy_mask(int width, int height, std::span<const Pixel> occupied, double radius) {
  GrayImage mask(width, height, 0);
  const int r = static_cast<int>(std::ceil(radius));
  const double r2 = radius * radius;
  for (const Pixel& p : occupied) {
    const int cx = static_cast<int>(std::lround(p.u)), cy = static_cast<int>(std::lround(p.v));
    for (int y = std::max(0, cy - r); y <= std::min(height - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(width - 1, cx + r); ++x) {
        const double dx = x - p.u, dy = y - p.v;
        if (dx * dx + dy * dy <= r2) mask(x, y) = 1;
      }
  }
  return mask;
}

/// Corner detection for track (re)initialization: segment test, non-maximum
/// suppression, suppression inside `mask` (nonzero = occupied), strongest
/// first, capped so that `live_features` plus the result never exceeds
/// cfg.max_features.
inline std::vector<Pixel> detect_corners(const GrayImage& img, const TrackerConfig& cfg,
                                         const GrayImage* mask = nullptr, int live_features = 0,
                                         int border = 3) {
  std::vector<Corner> corners = detect_segment_test(img, cfg.detector_threshold, cfg.nms_radius, border);
  if (mask) {
    std::erase_if(corners, [&](const Corner& c) { return (*mask)(c.x, c.y) != 0; });
  }
  std::stable_sort(corners.begin(), corners.end(), [](const Corner& a, const Corner& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  const std::size_t budget = static_cast<std::size_t>(std::max(0, cfg.max_features - live_features));
  if (corners.size() > budget) corners.resize(budget);
  std::vector<Pixel> out;
  out.reserve(corners.size());
  for (const Corner& c : corners) out.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
  return out;
}

}  // namespace trackbench
