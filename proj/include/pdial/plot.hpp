#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdial/pca.hpp"

namespace pdial {

inline constexpr double kSvgWidth = 800.0;
inline constexpr double kSvgHeight = 600.0;
inline constexpr double kSvgPaddingFraction = 0.05;

struct PlotSeries {
  std::string label;
  std::vector<PerspectivePoint> points;
};

struct PlotInput {
  std::string title;
  std::vector<PlotSeries> series;            // one color each, in order
  std::optional<PerspectivePoint> target;    // drawn as a star
  std::vector<PerspectivePoint> path;        // polyline, e.g. best-so-far points
};

/// Affine map from data coordinates to the 800x600 viewBox. The data extent
/// (all series points, target and path) is widened by 5% of its span on
/// each side; a zero span is treated as 1. SVG y grows downwards.
struct PlotMapping {
  double x_lo, x_hi, y_lo, y_hi;

  static PlotMapping fit(const PlotInput& in);
  double px(double x) const;
  double py(double y) const;
};

/// Self-contained SVG. Output bytes depend only on the input.
/// Throws InputError when no series has any point.
std::string render_svg(const PlotInput& in);

}  // namespace pdial
