/*
 * Copyright 2026 The riskboost Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "riskboost/explain.hpp"
#include "riskboost/metrics.hpp"

// Static SVG figures built from polylines, rectangles and text only.
namespace riskboost::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
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

inline std::string header(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

}  // namespace detail

struct Series {
  std::string label;
  std::vector<metrics::CurvePoint> points;
};

// Unit-square curve plot (ROC or PR) with one polyline per series.
inline std::string curve_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                              const std::string& y_label, bool diagonal) {
  using detail::num;
  constexpr double size = 400.0, margin = 50.0;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::string out = detail::header(size + 2 * margin, size + 2 * margin);
  out += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(size) + "\" height=\"" +
         num(size) + "\" fill=\"none\" stroke=\"black\"/>\n";
  if (diagonal) {
    out += "<polyline fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 4\" points=\"" + num(margin) + "," +
           num(margin + size) + " " + num(margin + size) + "," + num(margin) + "\"/>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    out += "<polyline fill=\"none\" stroke=\"" + std::string(colors[s % 4]) + "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : series[s].points) {
      out += num(margin + p.x * size) + "," + num(margin + (1.0 - p.y) * size) + " ";
    }
    out += "\"/>\n";
    out += "<rect x=\"" + num(margin + size - 150) + "\" y=\"" + num(margin + size - 20.0 * (series.size() - s) - 4) +
           "\" width=\"10\" height=\"10\" fill=\"" + colors[s % 4] + "\"/>\n";
    out += detail::text(margin + size - 135, margin + size - 20.0 * (series.size() - s) + 5, series[s].label, "start");
  }
  out += detail::text(margin + size / 2, margin - 15, title);
  out += detail::text(margin + size / 2, margin + size + 35, x_label);
  out += "<text x=\"15\" y=\"" + num(margin + size / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
         num(margin + size / 2) + ")\">" + detail::escape(y_label) + "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    out += detail::text(margin + v * size, margin + size + 15, num(v));
    out += detail::text(margin - 5, margin + (1.0 - v) * size + 4, num(v), "end");
  }
  return out + "</svg>\n";
}

// Horizontal bars of mean |attribution|, most important first.
inline std::string importance_bars(const std::vector<explain::Importance>& ranking, std::size_t top_k,
                                   const std::string& title) {
  using detail::num;
  top_k = std::min(top_k, ranking.size());
  constexpr double label_width = 120.0, bar_width = 360.0, row = 18.0, top = 40.0;
  const double height = top + row * static_cast<double>(top_k) + 20.0;
  std::string out = detail::header(label_width + bar_width + 80.0, height);
  out += detail::text((label_width + bar_width) / 2 + 40, 20, title);
  double peak = 0.0;
  for (std::size_t r = 0; r < top_k; ++r) peak = std::max(peak, ranking[r].mean_abs);
  for (std::size_t r = 0; r < top_k; ++r) {
    const double y = top + row * static_cast<double>(r);
    const double w = peak > 0.0 ? ranking[r].mean_abs / peak * bar_width : 0.0;
    out += detail::text(label_width - 5, y + 12, ranking[r].name, "end");
    out += "<rect x=\"" + num(label_width) + "\" y=\"" + num(y + 2) + "\" width=\"" + num(w) + "\" height=\"" +
           num(row - 4) + "\" fill=\"#1f77b4\"/>\n";
    out += detail::text(label_width + w + 5, y + 12, detail::short_num(ranking[r].mean_abs), "start");
  }
  return out + "</svg>\n";
}

}  // namespace riskboost::svg
