#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gbl/errors.hpp"

namespace gbl {

/// One labeled polyline. Points are drawn in order; x need not be sorted.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Largest 1/2/5 x 10^k step not exceeding the raw spacing, so axes carry
// round tick labels.
inline double nice_step(double range, int target_ticks) {
  const double raw = range / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {5.0, 2.0, 1.0})
    if (m * mag <= raw) return m * mag;
  return mag;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace detail

/// Renders a fixed-size line plot as a standalone SVG document. Output is a
/// pure function of the inputs: no timestamps, no randomness, stable number
/// formatting.
inline std::string render_line_plot(const std::string& title,
                                    const std::string& x_label,
                                    const std::string& y_label,
                                    const std::vector<PlotSeries>& series) {
  using detail::svg_num;
  using detail::xml_escape;
  static const char* kPalette[] = {"#000000", "#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  constexpr int kColors = 8;
  constexpr double W = 760, H = 480;
  constexpr double L = 64, R = 168, T = 40, B = 48;  // margins
  const double pw = W - L - R, ph = H - T - B;

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool any = false;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size())
      throw ShapeMismatch("series '" + s.label + "' has uneven coordinates");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        x_lo = x_hi = s.x[i];
        y_lo = y_hi = s.y[i];
        any = true;
      }
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (x_hi - x_lo <= 0) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi - y_lo <= 0) { y_lo -= 0.5; y_hi += 0.5; }
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return T + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(W) +
         "\" height=\"" + svg_num(H) + "\" viewBox=\"0 0 " + svg_num(W) + " " +
         svg_num(H) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + svg_num(L + pw / 2) + "\" y=\"22\" font-size=\"15\" "
         "text-anchor=\"middle\" font-family=\"sans-serif\">" +
         xml_escape(title) + "</text>\n";

  // axes box and ticks
  svg += "<rect x=\"" + svg_num(L) + "\" y=\"" + svg_num(T) + "\" width=\"" +
         svg_num(pw) + "\" height=\"" + svg_num(ph) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  const double sx = detail::nice_step(x_hi - x_lo, 6);
  for (double v = std::ceil(x_lo / sx) * sx; v <= x_hi + 1e-12 * sx; v += sx) {
    svg += "<line x1=\"" + svg_num(px(v)) + "\" y1=\"" + svg_num(T + ph) +
           "\" x2=\"" + svg_num(px(v)) + "\" y2=\"" + svg_num(T + ph + 5) +
           "\" stroke=\"#444\"/>\n";
    svg += "<text x=\"" + svg_num(px(v)) + "\" y=\"" + svg_num(T + ph + 18) +
           "\" font-size=\"11\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">" + svg_num(v) + "</text>\n";
  }
  const double sy = detail::nice_step(y_hi - y_lo, 5);
  for (double v = std::ceil(y_lo / sy) * sy; v <= y_hi + 1e-12 * sy; v += sy) {
    svg += "<line x1=\"" + svg_num(L - 5) + "\" y1=\"" + svg_num(py(v)) +
           "\" x2=\"" + svg_num(L) + "\" y2=\"" + svg_num(py(v)) +
           "\" stroke=\"#444\"/>\n";
    svg += "<text x=\"" + svg_num(L - 8) + "\" y=\"" + svg_num(py(v) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\" "
           "font-family=\"sans-serif\">" + svg_num(v) + "</text>\n";
  }
  svg += "<text x=\"" + svg_num(L + pw / 2) + "\" y=\"" + svg_num(H - 10) +
         "\" font-size=\"12\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\">" + xml_escape(x_label) + "</text>\n";
  svg += "<text x=\"16\" y=\"" + svg_num(T + ph / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 16 " +
         svg_num(T + ph / 2) + ")\">" + xml_escape(y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    const char* color = kPalette[k % kColors];
    const bool dashed = k >= kColors;  // palette reuse stays distinguishable
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      pts += svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i])) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.4\"" +
           (dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts +
           "\"/>\n";
    const double ly = T + 14 + 16.0 * static_cast<double>(k);
    svg += "<line x1=\"" + svg_num(W - R + 10) + "\" y1=\"" + svg_num(ly - 4) +
           "\" x2=\"" + svg_num(W - R + 34) + "\" y2=\"" + svg_num(ly - 4) +
           "\" stroke=\"" + color + "\" stroke-width=\"1.4\"" +
           (dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    svg += "<text x=\"" + svg_num(W - R + 40) + "\" y=\"" + svg_num(ly) +
           "\" font-size=\"11\" font-family=\"sans-serif\">" +
           xml_escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace gbl
