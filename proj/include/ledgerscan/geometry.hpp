// Copyright 2026 The ledgerscan Authors
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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace ledgerscan {

/// Axis-aligned box in pixel coordinates, origin top-left, half-open:
/// covers x in [x0, x1) and y in [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  std::int64_t area() const noexcept {
    return x1 > x0 && y1 > y0 ? std::int64_t{width()} * height() : 0;
  }
  bool valid() const noexcept { return x0 < x1 && y0 < y1; }
  double center_x() const noexcept { return 0.5 * (x0 + x1); }
  double center_y() const noexcept { return 0.5 * (y0 + y1); }

  bool operator==(const Box&) const = default;
};

inline Box unite(const Box& a, const Box& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

inline Box intersect(const Box& a, const Box& b) {
  return {std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
          std::min(a.y1, b.y1)};
}

inline double iou(const Box& a, const Box& b) {
  const auto inter = intersect(a, b).area();
  const auto uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct Point {
  double x = 0;
  double y = 0;
};

/// Affine map x' = a*x + b*y + c, y' = d*x + e*y + f. Used to carry word
/// coordinates from the raw scan into a processed image's frame.
struct Affine {
  double a = 1, b = 0, c = 0;
  double d = 0, e = 1, f = 0;

  Point apply(Point p) const noexcept {
    return {a * p.x + b * p.y + c, d * p.x + e * p.y + f};
  }
  /// this ∘ first: apply `first`, then this.
  Affine after(const Affine& first) const noexcept {
    return {a * first.a + b * first.d, a * first.b + b * first.e,
            a * first.c + b * first.f + c, d * first.a + e * first.d,
            d * first.b + e * first.e, d * first.c + e * first.f + f};
  }
  bool is_identity() const noexcept {
    return a == 1 && b == 0 && c == 0 && d == 0 && e == 1 && f == 0;
  }
  std::array<double, 6> coefficients() const { return {a, b, c, d, e, f}; }

  static Affine translation(double dx, double dy) { return {1, 0, dx, 0, 1, dy}; }
};

/// Maps a box through an affine transform and returns the enclosing box.
inline Box transform_box(const Affine& t, const Box& box) {
  const Point corners[4] = {t.apply({double(box.x0), double(box.y0)}),
                            t.apply({double(box.x1), double(box.y0)}),
                            t.apply({double(box.x1), double(box.y1)}),
                            t.apply({double(box.x0), double(box.y1)})};
  double minx = corners[0].x, maxx = corners[0].x;
  double miny = corners[0].y, maxy = corners[0].y;
  for (const auto& p : corners) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  return {static_cast<int>(std::lround(minx)), static_cast<int>(std::lround(miny)),
          static_cast<int>(std::lround(maxx)), static_cast<int>(std::lround(maxy))};
}

}  // namespace ledgerscan
