#pragma once

// Minimal static SVG charts: multi-series line plots and Tukey box plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "trackbench/statistics.hpp"

namespace trackbench::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct BoxItem {
  std::string name;
  BoxSummary box;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
inline constexpr double kWidth = 640, kHeight = 400;
inline constexpr double kLeft = 70, kRight = 130, kTop = 40, kBottom = 50;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Roughly five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void pad_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    const double d = std::max(1e-3, std::abs(lo) * 0.1);
    lo -= d;
    hi += d;
  } else {
    const double d = 0.05 * (hi - lo);
    lo -= d;
    hi += d;
  }
}

inline void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
    << "</text>\n";
}

inline void y_axis(std::ostringstream& o, const Frame& f, const std::string& label) {
  for (double t : ticks(f.y0, f.y1)) {
    const double y = f.py(t);
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kWidth - kRight) << "\" y2=\""
      << num(y) << "\" stroke=\"#e0e0e0\"/>\n"
      << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  o << "<text transform=\"translate(16," << num((kTop + kHeight - kBottom) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(label) << "</text>\n";
}

inline void border(std::ostringstream& o) {
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
    << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
}

}  // namespace detail

/// One polyline per series; non-finite points break the line.
inline std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                             const std::vector<Series>& series) {
  using namespace detail;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  pad_range(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::ostringstream o;
  header(o, title);
  y_axis(o, f, y_label);
  for (double t : ticks(x0, x1))
    o << "<text x=\"" << num(f.px(t)) << "\" y=\"" << num(kHeight - kBottom + 16) << "\" text-anchor=\"middle\">"
      << num(t) << "</text>\n";
  o << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 12)
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  border(o);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    const auto& s = series[k];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      pts += num(f.px(s.x[i])) + ',' + num(f.py(s.y[i])) + ' ';
    }
    flush();
    const double ly = kTop + 14 + 16 * static_cast<double>(k);
    o << "<line x1=\"" << num(kWidth - kRight + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
      << num(kWidth - kRight + 30) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n<text x=\"" << num(kWidth - kRight + 34) << "\" y=\"" << num(ly) << "\">"
      << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Tukey box plot, one box per item; the mean is drawn as a dot.
inline std::string box_plot(const std::string& title, const std::string& y_label, const std::vector<BoxItem>& items) {
  using namespace detail;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& it : items)
    for (double v : {it.box.whisker_lo, it.box.whisker_hi, it.box.mean})
      if (std::isfinite(v)) {
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
      }
  pad_range(y0, y1);
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(1, items.size())), y0, y1};

  std::ostringstream o;
  header(o, title);
  y_axis(o, f, y_label);
  border(o);
  const double slot = (kWidth - kLeft - kRight) / std::max<std::size_t>(1, items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& b = items[k].box;
    const double cx = f.px(k + 0.5), hw = 0.25 * slot;
    o << "<text x=\"" << num(cx) << "\" y=\"" << num(kHeight - kBottom + 16) << "\" text-anchor=\"middle\">"
      << escape(items[k].name) << "</text>\n";
    if (b.n == 0) continue;
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(b.whisker_lo)) << "\" x2=\"" << num(cx) << "\" y2=\""
      << num(f.py(b.q1)) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(b.q3)) << "\" x2=\"" << num(cx) << "\" y2=\""
      << num(f.py(b.whisker_hi)) << "\" stroke=\"black\"/>\n";
    for (double w : {b.whisker_lo, b.whisker_hi})
      o << "<line x1=\"" << num(cx - hw / 2) << "\" y1=\"" << num(f.py(w)) << "\" x2=\"" << num(cx + hw / 2)
        << "\" y2=\"" << num(f.py(w)) << "\" stroke=\"black\"/>\n";
    o << "<rect x=\"" << num(cx - hw) << "\" y=\"" << num(f.py(b.q3)) << "\" width=\"" << num(2 * hw)
      << "\" height=\"" << num(std::max(0.5, f.py(b.q1) - f.py(b.q3))) << "\" fill=\"" << color
      << "\" fill-opacity=\"0.35\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(cx - hw) << "\" y1=\"" << num(f.py(b.median)) << "\" x2=\"" << num(cx + hw)
      << "\" y2=\"" << num(f.py(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n"
      << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(f.py(b.mean)) << "\" r=\"2.5\" fill=\"black\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace trackbench::svg
