// Copyright 2026 The GST Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gst/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace gst {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 180, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string svg_line_chart(const std::vector<Series>& series, const ChartOptions& opts) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  auto ty = [&](double y) {
    if (!opts.log_y) return y;
    return std::log10(std::max(y, 1e-300));
  };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      x_lo = std::min(x_lo, s.xs[i]);
      x_hi = std::max(x_hi, s.xs[i]);
      y_lo = std::min(y_lo, ty(s.ys[i]));
      y_hi = std::max(y_hi, ty(s.ys[i]));
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (ty(y) - y_lo) / (y_hi - y_lo) * ph; };

  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!opts.comment.empty()) out += "<!-- " + escape(opts.comment) + " -->\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(opts.title) + "</text>\n";
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 4.0;
    const double fy = y_lo + (y_hi - y_lo) * i / 4.0;
    const double gx = kLeft + pw * i / 4.0, gy = kTop + ph - ph * i / 4.0;
    out += "<text x=\"" + num(gx) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" + tick(fx) + "</text>\n";
    out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(gy + 4) + "\" text-anchor=\"end\">" +
           tick(opts.log_y ? std::pow(10.0, fy) : fy) + "</text>\n";
    out += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(gy) + "\" y2=\"" + num(gy) +
           "\" stroke=\"#ddd\"/>\n";
  }
  out += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 16) + "\" text-anchor=\"middle\">" +
         escape(opts.x_label) + "</text>\n";
  out += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(opts.y_label + (opts.log_y ? " (log)" : "")) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string color = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
    std::string pts;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      pts += (n++ ? " " : "") + num(px(s.xs[i])) + "," + num(py(s.ys[i]));
    }
    if (n == 1) {
      const auto comma = pts.find(',');
      out += "<circle cx=\"" + pts.substr(0, comma) + "\" cy=\"" + pts.substr(comma + 1) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
    } else if (n > 1) {
      out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    }
    const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + num(kWidth - kRight + 12) + "\" x2=\"" + num(kWidth - kRight + 36) + "\" y1=\"" + num(ly - 4) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kWidth - kRight + 42) + "\" y=\"" + num(ly) + "\">" + escape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace gst
