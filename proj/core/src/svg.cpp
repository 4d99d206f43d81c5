// Copyright 2026 The fp4lab Authors
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

#include "fp4lab/report/svg.hpp"

#include <cstdio>

namespace fp4lab::report {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

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

}  // namespace

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& color,
                     double stroke) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
           num(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke) + "\"/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts,
                         const std::string& color, double stroke) {
  body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke) +
           "\" points=\"";
  for (auto [x, y] : pts) body_ += num(x) + "," + num(y) + " ";
  body_ += "\"/>\n";
}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
           num(h) + "\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill) {
  body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" +
           fill + "\"/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& s, double size,
                     const std::string& anchor) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + escape(s) +
           "</text>\n";
}

std::string SvgCanvas::finish() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
         num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

const std::string& palette(size_t i) {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % colors.size()];
}

double AxisFrame::map_x(double x) const {
  if (x_max == x_min) return px0;
  return px0 + (x - x_min) / (x_max - x_min) * (px1 - px0);
}

double AxisFrame::map_y(double y) const {
  if (y_max == y_min) return py1;
  return py1 - (y - y_min) / (y_max - y_min) * (py1 - py0);
}

void AxisFrame::draw(SvgCanvas& c, const std::string& x_label, const std::string& y_label,
                     int ticks) const {
  c.line(px0, py1, px1, py1, "#000000");
  c.line(px0, py0, px0, py1, "#000000");
  for (int i = 0; i <= ticks; ++i) {
    double fx = x_min + (x_max - x_min) * i / ticks;
    double fy = y_min + (y_max - y_min) * i / ticks;
    double px = map_x(fx), py = map_y(fy);
    c.line(px, py1, px, py1 + 4, "#000000");
    c.line(px0 - 4, py, px0, py, "#000000");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fx);
    c.text(px, py1 + 16, buf, 9.0, "middle");
    std::snprintf(buf, sizeof buf, "%.2f", fy);
    c.text(px0 - 6, py + 3, buf, 9.0, "end");
  }
  c.text((px0 + px1) / 2, py1 + 30, x_label, 11.0, "middle");
  c.text(px0 - 34, (py0 + py1) / 2, y_label, 11.0, "middle");
}

}  // namespace fp4lab::report
