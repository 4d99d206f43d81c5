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

#pragma once

#include <string>
#include <vector>

namespace fp4lab::report {

/// Hand-emitted SVG with a fixed decimal format, so identical inputs always
/// produce identical bytes. No plotting dependency.
class SvgCanvas {
 public:
  SvgCanvas(double width, double height);

  void line(double x1, double y1, double x2, double y2, const std::string& color,
            double stroke = 1.0);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                double stroke = 1.5);
  void rect(double x, double y, double w, double h, const std::string& fill);
  void circle(double cx, double cy, double r, const std::string& fill);
  void text(double x, double y, const std::string& s, double size = 11.0,
            const std::string& anchor = "start");

  std::string finish() const;

 private:
  double width_, height_;
  std::string body_;
};

/// Fixed qualitative palette (cycled).
const std::string& palette(size_t i);

/// Maps data coordinates to a plot viewport with axes, ticks and labels.
struct AxisFrame {
  double px0, py0, px1, py1;  // viewport corners (py0 = top)
  double x_min, x_max, y_min, y_max;
  double map_x(double x) const;
  double map_y(double y) const;
  void draw(SvgCanvas& c, const std::string& x_label, const std::string& y_label,
            int ticks = 5) const;
};

}  // namespace fp4lab::report
