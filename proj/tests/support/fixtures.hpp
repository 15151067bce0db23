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

// Synthetic rasters for image tests.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "ledgerscan/geometry.hpp"
#include "ledgerscan/raster.hpp"

namespace fixture {

using ledgerscan::Box;
using ledgerscan::Raster;

inline void fill_box(Raster& img, const Box& b, std::uint8_t v) {
  for (int y = std::max(0, b.y0); y < std::min(img.height(), b.y1); ++y) {
    for (int x = std::max(0, b.x0); x < std::min(img.width(), b.x1); ++x) {
      for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = v;
    }
  }
}

/// White page with rows of dark word-like blobs; stroke pixels are dark in
/// the core with a lighter halo so threshold changes thin or thicken them.
inline Raster text_page(int w, int h, std::uint64_t seed, int margin = 40,
                        int line_pitch = 24, std::uint8_t paper = 215) {
  std::mt19937_64 rng(seed);
  Raster img = Raster::gray(w, h, paper);
  for (int y = margin; y + 12 < h - margin; y += line_pitch) {
    int x = margin + static_cast<int>(rng() % 20);
    while (x < w - margin - 30) {
      const int chars = 2 + static_cast<int>(rng() % 8);
      for (int c = 0; c < chars && x + 7 < w - margin; ++c) {
        const int ch = 8 + static_cast<int>(rng() % 4);
        for (int yy = y + 12 - ch; yy < y + 12; ++yy) {
          for (int xx = x; xx < x + 6; ++xx) {
            if (rng() % 100 < 70) {
              img.at(xx, yy) = static_cast<std::uint8_t>(30 + rng() % 30);
            } else {
              img.at(xx, yy) = static_cast<std::uint8_t>(130 + rng() % 45);
            }
          }
        }
        x += 8;
      }
      x += 10 + static_cast<int>(rng() % 8);
    }
  }
  return img;
}

inline std::size_t count_value(const Raster& img, std::uint8_t v) {
  std::size_t n = 0;
  for (auto p : img.data()) n += p == v;
  return n;
}

/// Solves the 8x8 DLT system by Gauss-Jordan elimination; maps the rectangle
/// (0,0)-(W,H) onto `dst` (TL, TR, BR, BL). Row-major 3x3 with h33 = 1.
inline std::array<double, 9> homography(double W, double H,
                                        const std::array<ledgerscan::Point, 4>& dst) {
  const double src[4][2] = {{0, 0}, {W, 0}, {W, H}, {0, H}};
  double m[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double u = src[i][0], v = src[i][1], x = dst[i].x, y = dst[i].y;
    const double r0[9] = {u, v, 1, 0, 0, 0, -u * x, -v * x, x};
    const double r1[9] = {0, 0, 0, u, v, 1, -u * y, -v * y, y};
    for (int j = 0; j < 9; ++j) {
      m[2 * i][j] = r0[j];
      m[2 * i + 1][j] = r1[j];
    }
  }
  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    for (int j = 0; j < 9; ++j) std::swap(m[col][j], m[piv][j]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int j = 0; j < 9; ++j) m[r][j] -= f * m[col][j];
    }
  }
  std::array<double, 9> h{};
  for (int i = 0; i < 8; ++i) h[i] = m[i][8] / m[i][i];
  h[8] = 1;
  return h;
}

inline std::array<double, 9> invert3(const std::array<double, 9>& a) {
  const double det = a[0] * (a[4] * a[8] - a[5] * a[7]) -
                     a[1] * (a[3] * a[8] - a[5] * a[6]) +
                     a[2] * (a[3] * a[7] - a[4] * a[6]);
  return {(a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det,
          (a[1] * a[5] - a[2] * a[4]) / det, (a[5] * a[6] - a[3] * a[8]) / det,
          (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
          (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det,
          (a[0] * a[4] - a[1] * a[3]) / det};
}

/// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ledgerscan-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct ForeEdgeComposite {
  Raster image;
  Box page;
};

struct ForeEdgeStyle {
  std::uint8_t background = 20;
  std::uint8_t edge = 90;
  std::uint8_t paper = 180;
  int noise = 6;
};

/// Black scanner bed, a gray fore-edge strip along the page's right (and
/// sometimes bottom) side, and a bright page with dark text-like speckle.
inline ForeEdgeComposite fore_edge_composite(std::uint64_t seed, int w, int h,
                                             const ForeEdgeStyle& style = {}) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  auto jitter = [&](int base) {
    const int v = base + static_cast<int>(rng() % (2 * style.noise + 1)) - style.noise;
    return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  };
  Raster img = Raster::gray(w, h);
  for (auto& v : img.data()) v = jitter(style.background);

  const double fh = uni(0.70, 0.86);
  const double fw = std::min(0.80, fh * uni(0.85, 1.12));
  const int pw = static_cast<int>(fw * w), ph = static_cast<int>(fh * h);
  const int strip = 15 + static_cast<int>(rng() % 21);
  const int x0 = 10 + static_cast<int>(rng() % std::max(1, w - pw - strip - 20));
  const int y0 = 10 + static_cast<int>(rng() % std::max(1, h - ph - strip - 20));
  const Box page{x0, y0, x0 + pw, y0 + ph};

  const bool bottom_edge = rng() % 2 == 0;
  for (int y = page.y0; y < page.y1 + (bottom_edge ? strip : 0) && y < h; ++y) {
    for (int x = page.x1; x < page.x1 + strip && x < w; ++x) {
      // Stacked page edges show up as fine stripes.
      img.at(x, y) = jitter(style.edge + ((x - page.x1) % 3 == 0 ? -10 : 0));
    }
  }
  if (bottom_edge) {
    for (int y = page.y1; y < page.y1 + strip && y < h; ++y) {
      for (int x = page.x0; x < page.x1; ++x) img.at(x, y) = jitter(style.edge);
    }
  }
  for (int y = page.y0; y < page.y1; ++y) {
    for (int x = page.x0; x < page.x1; ++x) img.at(x, y) = jitter(style.paper);
  }
  // Text-like speckle, kept away from the page border.
  const int blobs = pw * ph / 150;
  for (int i = 0; i < blobs; ++i) {
    const int bw = 2 + static_cast<int>(rng() % 6), bh = 3 + static_cast<int>(rng() % 6);
    const int bx = page.x0 + 20 + static_cast<int>(rng() % std::max(1, pw - 40 - bw));
    const int by = page.y0 + 20 + static_cast<int>(rng() % std::max(1, ph - 40 - bh));
    fill_box(img, {bx, by, bx + bw, by + bh}, static_cast<std::uint8_t>(30 + rng() % 40));
  }
  // Dust on the scanner bed.
  for (int i = 0; i < w * h / 2000; ++i) {
    const int x = static_cast<int>(rng() % w), y = static_cast<int>(rng() % h);
    if (x < page.x0 || x >= page.x1 + strip || y < page.y0 || y >= page.y1 + strip) {
      img.at(x, y) = 255;
    }
  }
  return {img, page};
}


/// White page with 1-px black grid lines spanning the given extents and
/// salt noise (random black pixels) over `salt` of the area.
inline Raster grid_page(int w, int h, const std::vector<int>& hs, const std::vector<int>& vs,
                        double salt, std::uint64_t seed) {
  Raster img = Raster::gray(w, h, 255);
  const int x0 = vs.empty() ? w / 10 : vs.front(), x1 = vs.empty() ? w - w / 10 : vs.back();
  const int y0 = hs.empty() ? h / 10 : hs.front(), y1 = hs.empty() ? h - h / 10 : hs.back();
  for (int y : hs) fill_box(img, {x0, y, x1 + 1, y + 1}, 0);
  for (int x : vs) fill_box(img, {x, y0, x + 1, y1 + 1}, 0);
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(salt * w * h);
  for (std::size_t i = 0; i < n; ++i) img.at(static_cast<int>(rng() % w), static_cast<int>(rng() % h)) = 0;
  return img;
}

/// Amount as printed in a ledger column: "7", "12,345" or "1,234.56".
inline std::string random_amount(std::mt19937_64& rng) {
  const std::uint64_t magnitude = rng() % 5;
  std::uint64_t dollars = 1 + rng() % 9;
  for (std::uint64_t i = 0; i < magnitude; ++i) dollars = dollars * 1000 + rng() % 1000;
  std::string digits = std::to_string(dollars), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  if (rng() % 2) out += "." + std::to_string(10 + rng() % 90);
  return out;
}

/// Page crop IoU against the truth box; 0 when no crop was produced.
inline double crop_iou(const std::optional<Box>& crop, const Box& truth) {
  return crop ? ledgerscan::iou(*crop, truth) : 0.0;
}

}  // namespace fixture
