#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace grle {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal static SVG line chart: axes, min/max tick labels, one polyline and
// legend entry per series.
void write_line_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const Series> series);

}  // namespace grle
