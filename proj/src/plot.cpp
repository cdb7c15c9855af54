#include "pdial/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "pdial/errors.hpp"

namespace pdial {

namespace {

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                  "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(const std::string& s) {
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

}  // namespace

PlotMapping PlotMapping::fit(const PlotInput& in) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  auto extend = [&](const PerspectivePoint& p) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  };
  for (const auto& s : in.series) {
    for (const auto& p : s.points) extend(p);
  }
  if (in.target) extend(*in.target);
  for (const auto& p : in.path) extend(p);
  if (!std::isfinite(x0)) throw InputError("plot has no points");
  const double sx = x1 > x0 ? x1 - x0 : 1.0;
  const double sy = y1 > y0 ? y1 - y0 : 1.0;
  return {x0 - kSvgPaddingFraction * sx, x1 + kSvgPaddingFraction * sx,
          y0 - kSvgPaddingFraction * sy, y1 + kSvgPaddingFraction * sy};
}

double PlotMapping::px(double x) const {
  const double span = x_hi - x_lo;
  return span > 0.0 ? (x - x_lo) / span * kSvgWidth : kSvgWidth / 2.0;
}

double PlotMapping::py(double y) const {
  const double span = y_hi - y_lo;
  return span > 0.0 ? kSvgHeight - (y - y_lo) / span * kSvgHeight : kSvgHeight / 2.0;
}

std::string render_svg(const PlotInput& in) {
  const bool any = std::any_of(in.series.begin(), in.series.end(),
                               [](const PlotSeries& s) { return !s.points.empty(); });
  if (!any) throw InputError("plot has no points");
  const auto map = PlotMapping::fit(in);

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  if (!in.title.empty()) {
    out += "<text x=\"400\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">" + escape(in.title) + "</text>\n";
  }

  // Axes through the origin of PCA space when it is in view.
  if (map.x_lo <= 0.0 && 0.0 <= map.x_hi) {
    out += "<line class=\"axis\" x1=\"" + num(map.px(0.0)) + "\" y1=\"0.00\" x2=\"" +
           num(map.px(0.0)) + "\" y2=\"600.00\" stroke=\"#cccccc\"/>\n";
  }
  if (map.y_lo <= 0.0 && 0.0 <= map.y_hi) {
    out += "<line class=\"axis\" x1=\"0.00\" y1=\"" + num(map.py(0.0)) + "\" x2=\"800.00\" y2=\"" +
           num(map.py(0.0)) + "\" stroke=\"#cccccc\"/>\n";
  }
  out += "<text x=\"790\" y=\"590\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"11\">PC1</text>\n";
  out += "<text x=\"10\" y=\"40\" font-family=\"sans-serif\" font-size=\"11\">PC2</text>\n";

  if (in.path.size() >= 2) {
    out += "<polyline class=\"path\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < in.path.size(); ++i) {
      if (i) out += ' ';
      out += num(map.px(in.path[i].x)) + "," + num(map.py(in.path[i].y));
    }
    out += "\"/>\n";
  }

  for (std::size_t s = 0; s < in.series.size(); ++s) {
    const char* color = kPalette[s % kPalette.size()];
    out += "<g class=\"series\" data-label=\"" + escape(in.series[s].label) + "\" fill=\"" +
           color + "\">\n";
    for (const auto& p : in.series[s].points) {
      out += "<circle cx=\"" + num(map.px(p.x)) + "\" cy=\"" + num(map.py(p.y)) + "\" r=\"4\"/>\n";
    }
    out += "</g>\n";
  }

  if (in.target) {
    const double cx = map.px(in.target->x);
    const double cy = map.py(in.target->y);
    out += "<polygon class=\"target\" fill=\"gold\" stroke=\"black\" data-cx=\"" + num(cx) +
           "\" data-cy=\"" + num(cy) + "\" points=\"";
    for (int k = 0; k < 10; ++k) {
      const double r = k % 2 == 0 ? 10.0 : 4.0;
      const double a = -std::numbers::pi / 2.0 + k * std::numbers::pi / 5.0;
      if (k) out += ' ';
      out += num(cx + r * std::cos(a)) + "," + num(cy + r * std::sin(a));
    }
    out += "\"/>\n";
  }

  // Legend
  double ly = 40.0;
  out += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t s = 0; s < in.series.size(); ++s) {
    const char* color = kPalette[s % kPalette.size()];
    out += "<rect x=\"600\" y=\"" + num(ly - 9.0) + "\" width=\"10\" height=\"10\" fill=\"" +
           color + "\"/>\n";
    out += "<text x=\"616\" y=\"" + num(ly) + "\">" + escape(in.series[s].label) + "</text>\n";
    ly += 16.0;
  }
  if (in.target) {
    out += "<text x=\"616\" y=\"" + num(ly) + "\">target (star)</text>\n";
  }
  out += "</g>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace pdial
