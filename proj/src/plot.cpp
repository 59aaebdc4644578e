#include "grle/plot.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include "grle/common.hpp"

namespace grle {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void write_line_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const Series> series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"" << kTop + ph + 16 << "\" font-size=\"11\">" << fmt(x0) << "</text>\n";
  out << "<text x=\"" << kLeft + pw << "\" y=\"" << kTop + ph + 16 << "\" font-size=\"11\" text-anchor=\"end\">"
      << fmt(x1) << "</text>\n";
  out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + ph << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y0)
      << "</text>\n";
  out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 10 << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y1)
      << "</text>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t j = 0; j < n; ++j) out << (j ? " " : "") << fmt(px(s.x[j])) << ',' << fmt(py(s.y[j]));
    out << "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(i);
    out << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 32 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << escape(s.label)
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace grle
