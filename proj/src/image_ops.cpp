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

#include "ledgerscan/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <fmt/core.h>

#include "ledgerscan/error.hpp"

namespace ledgerscan::image {

namespace {

void require_gray(const Raster& img, std::string_view op) {
  if (img.channels() != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("{}: expected a 1-channel image", op));
  }
}

// Reflect-101 border index: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
inline int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Raster to_grayscale(const Raster& img) {
  if (img.channels() == 1) {
    throw Error(ErrorCode::kInvalidArgument, "to_grayscale: already grayscale");
  }
  Raster out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double lum = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] +
                       0.114 * src[3 * i + 2];
    dst[i] = clamp_u8(lum);
  }
  return out;
}

Histogram256 intensity_histogram(const Raster& img) {
  require_gray(img, "intensity_histogram");
  Histogram256 hist{};
  for (auto v : img.data()) ++hist[v];
  return hist;
}

Lut256 equalization_lut(const Histogram256& hist_in, double clip_limit) {
  Histogram256 hist = hist_in;
  const std::uint64_t total = std::accumulate(hist.begin(), hist.end(), std::uint64_t{0});

  if (clip_limit > 0 && std::isfinite(clip_limit) && total > 0) {
    const auto limit = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(clip_limit * static_cast<double>(total) / 256.0));
    std::uint64_t excess = 0;
    for (auto& h : hist) {
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    }
    const std::uint64_t batch = excess / 256;
    std::uint64_t residual = excess % 256;
    for (auto& h : hist) h += batch;
    if (residual > 0) {
      const std::size_t step = std::max<std::size_t>(1, 256 / residual);
      for (std::size_t i = 0; i < 256 && residual > 0; i += step, --residual) {
        ++hist[i];
      }
    }
  }

  Lut256 lut{};
  std::uint64_t cdf_min = 0;
  for (auto h : hist) {
    if (h > 0) {
      cdf_min = h;
      break;
    }
  }
  if (total == 0 || total == cdf_min) {
    for (int v = 0; v < 256; ++v) lut[v] = static_cast<std::uint8_t>(v);
    return lut;
  }
  std::uint64_t cdf = 0;
  const double denom = static_cast<double>(total - cdf_min);
  for (int v = 0; v < 256; ++v) {
    cdf += hist[v];
    const double num = cdf >= cdf_min ? static_cast<double>(cdf - cdf_min) : 0.0;
    lut[v] = clamp_u8(255.0 * num / denom);
  }
  return lut;
}

Raster equalize(const Raster& img) {
  require_gray(img, "equalize");
  const auto lut = equalization_lut(intensity_histogram(img), 0.0);
  Raster out = img;
  for (auto& v : out.data()) v = lut[v];
  return out;
}

Raster clahe(const Raster& img, int tile_cols, int tile_rows, double clip_limit) {
  require_gray(img, "clahe");
  const int w = img.width(), h = img.height();
  if (tile_cols < 1 || tile_rows < 1) {
    throw Error(ErrorCode::kInvalidArgument, "clahe: tile grid must be >= (1,1)");
  }
  if (tile_cols > w || tile_rows > h) {
    throw Error(ErrorCode::kInvalidArgument, "clahe: tile larger than image");
  }

  std::vector<int> xs(tile_cols + 1), ys(tile_rows + 1);
  for (int i = 0; i <= tile_cols; ++i) xs[i] = static_cast<int>(std::int64_t{i} * w / tile_cols);
  for (int j = 0; j <= tile_rows; ++j) ys[j] = static_cast<int>(std::int64_t{j} * h / tile_rows);

  std::vector<Lut256> luts(static_cast<std::size_t>(tile_cols) * tile_rows);
  for (int j = 0; j < tile_rows; ++j) {
    for (int i = 0; i < tile_cols; ++i) {
      Histogram256 hist{};
      for (int y = ys[j]; y < ys[j + 1]; ++y) {
        for (int x = xs[i]; x < xs[i + 1]; ++x) ++hist[img.at(x, y)];
      }
      luts[static_cast<std::size_t>(j) * tile_cols + i] = equalization_lut(hist, clip_limit);
    }
  }

  std::vector<double> cx(tile_cols), cy(tile_rows);
  for (int i = 0; i < tile_cols; ++i) cx[i] = 0.5 * (xs[i] + xs[i + 1] - 1);
  for (int j = 0; j < tile_rows; ++j) cy[j] = 0.5 * (ys[j] + ys[j + 1] - 1);

  // Left tile index and weight of the right neighbour for a coordinate.
  auto locate = [](const std::vector<double>& centers, double p) {
    const int n = static_cast<int>(centers.size());
    if (p <= centers.front()) return std::pair{0, 0.0};
    if (p >= centers.back()) return std::pair{n - 1, 0.0};
    int i = static_cast<int>(std::upper_bound(centers.begin(), centers.end(), p) -
                             centers.begin()) - 1;
    const double t = (p - centers[i]) / (centers[i + 1] - centers[i]);
    return std::pair{i, t};
  };

  Raster out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    const auto [ty, wy] = locate(cy, y);
    const int ty1 = std::min(ty + 1, tile_rows - 1);
    for (int x = 0; x < w; ++x) {
      const auto [tx, wx] = locate(cx, x);
      const int tx1 = std::min(tx + 1, tile_cols - 1);
      const std::uint8_t v = img.at(x, y);
      const double a = luts[static_cast<std::size_t>(ty) * tile_cols + tx][v];
      const double b = luts[static_cast<std::size_t>(ty) * tile_cols + tx1][v];
      const double c = luts[static_cast<std::size_t>(ty1) * tile_cols + tx][v];
      const double d = luts[static_cast<std::size_t>(ty1) * tile_cols + tx1][v];
      const double top = a + (b - a) * wx;
      const double bottom = c + (d - c) * wx;
      out.at(x, y) = clamp_u8(top + (bottom - top) * wy);
    }
  }
  return out;
}

// ---------------------------------------------------------------- binarize

std::string_view to_string(BinarizeMethod m) {
  switch (m) {
    case BinarizeMethod::kFixed: return "fixed";
    case BinarizeMethod::kOtsu: return "otsu";
    case BinarizeMethod::kAdaptiveMean: return "adaptive_mean";
    case BinarizeMethod::kSauvola: return "sauvola";
    case BinarizeMethod::kWolf: return "wolf";
  }
  return "?";
}

std::optional<BinarizeMethod> parse_binarize_method(std::string_view name) {
  for (auto m : {BinarizeMethod::kFixed, BinarizeMethod::kOtsu,
                 BinarizeMethod::kAdaptiveMean, BinarizeMethod::kSauvola,
                 BinarizeMethod::kWolf}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

double BinarizeParams::effective_k() const {
  if (k) return *k;
  return method == BinarizeMethod::kWolf ? 0.5 : 0.2;
}

void BinarizeParams::validate() const {
  if (tau < 0 || tau > 255) {
    throw Error(ErrorCode::kInvalidArgument, "binarize: tau must be in [0,255]");
  }
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "binarize: window must be odd and >= 3");
  }
  if (method == BinarizeMethod::kSauvola && !(R > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "binarize: R must be positive");
  }
  if (!std::isfinite(effective_k())) {
    throw Error(ErrorCode::kInvalidArgument, "binarize: k must be finite");
  }
}

int otsu_threshold(const Raster& gray) {
  const auto hist = intensity_histogram(gray);
  std::int64_t total_n = 0, total_s = 0;
  for (int v = 0; v < 256; ++v) {
    total_n += static_cast<std::int64_t>(hist[v]);
    total_s += static_cast<std::int64_t>(hist[v]) * v;
  }
  // Between-class variance up to the constant factor 1/N^2:
  // (n1*s0 - n0*s1)^2 / (n0*n1).
  long double best = -1.0L;
  int best_tau = 0;
  std::int64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += static_cast<std::int64_t>(hist[t]);
    s0 += static_cast<std::int64_t>(hist[t]) * t;
    const std::int64_t n1 = total_n - n0;
    const std::int64_t s1 = total_s - s0;
    long double score = 0.0L;
    if (n0 > 0 && n1 > 0) {
      const long double d = static_cast<long double>(n1) * s0 -
                            static_cast<long double>(n0) * s1;
      score = d * d / (static_cast<long double>(n0) * static_cast<long double>(n1));
    }
    if (score > best) {
      best = score;
      best_tau = t;
    }
  }
  return best_tau;
}

namespace {

Raster threshold_fixed(const Raster& gray, int tau) {
  Raster out(gray.width(), gray.height(), 1);
  auto src = gray.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > tau ? 255 : 0;
  return out;
}

// Summed-area tables of a mirror-padded copy; window sums are exact integers.
struct WindowStats {
  int w = 0, h = 0, half = 0, pw = 0;
  std::vector<std::int64_t> sum, sq;

  WindowStats(const Raster& gray, int window)
      : w(gray.width()), h(gray.height()), half(window / 2) {
    pw = w + 2 * half + 1;
    const int ph = h + 2 * half + 1;
    sum.assign(static_cast<std::size_t>(pw) * ph, 0);
    sq.assign(static_cast<std::size_t>(pw) * ph, 0);
    for (int py = 1; py < ph; ++py) {
      const int sy = mirror(py - 1 - half, h);
      std::int64_t rs = 0, rq = 0;
      for (int px = 1; px < pw; ++px) {
        const std::int64_t v = gray.at(mirror(px - 1 - half, w), sy);
        rs += v;
        rq += v * v;
        sum[idx(px, py)] = sum[idx(px, py - 1)] + rs;
        sq[idx(px, py)] = sq[idx(px, py - 1)] + rq;
      }
    }
  }

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * pw + x; }

  // Window of side 2*half+1 centred on (x, y) in image coordinates.
  std::pair<std::int64_t, std::int64_t> at(int x, int y) const {
    const int x0 = x, y0 = y, x1 = x + 2 * half + 1, y1 = y + 2 * half + 1;
    auto box = [&](const std::vector<std::int64_t>& t) {
      return t[idx(x1, y1)] - t[idx(x0, y1)] - t[idx(x1, y0)] + t[idx(x0, y0)];
    };
    return {box(sum), box(sq)};
  }
};

struct MeanStd {
  double mean;
  double stddev;
};

inline MeanStd mean_std(std::int64_t s, std::int64_t q, std::int64_t n) {
  const double mean = static_cast<double>(s) / static_cast<double>(n);
  // (q*n - s^2) / n^2 is exact in integers before the final division.
  const std::int64_t num = q * n - s * s;
  const double var = static_cast<double>(num) / (static_cast<double>(n) * static_cast<double>(n));
  return {mean, std::sqrt(std::max(0.0, var))};
}

}  // namespace

Raster binarize(const Raster& gray, const BinarizeParams& params) {
  require_gray(gray, "binarize");
  params.validate();
  switch (params.method) {
    case BinarizeMethod::kFixed: return threshold_fixed(gray, params.tau);
    case BinarizeMethod::kOtsu: return threshold_fixed(gray, otsu_threshold(gray));
    default: break;
  }

  const int w = gray.width(), h = gray.height();
  const WindowStats stats(gray, params.window);
  const std::int64_t n = std::int64_t{params.window} * params.window;
  const double k = params.effective_k();

  double global_min = 255.0, s_max = 0.0;
  if (params.method == BinarizeMethod::kWolf) {
    for (auto v : gray.data()) global_min = std::min(global_min, double(v));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto [s, q] = stats.at(x, y);
        s_max = std::max(s_max, mean_std(s, q, n).stddev);
      }
    }
  }

  Raster out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [s, q] = stats.at(x, y);
      const auto [m, sd] = mean_std(s, q, n);
      double t = 0;
      switch (params.method) {
        case BinarizeMethod::kAdaptiveMean:
          t = m - params.offset;
          break;
        case BinarizeMethod::kSauvola:
          t = m * (1.0 + k * (sd / params.R - 1.0));
          break;
        case BinarizeMethod::kWolf: {
          const double ratio = s_max > 0 ? sd / s_max : 0.0;
          t = (1.0 - k) * m + k * global_min + k * ratio * (m - global_min);
          break;
        }
        default: break;
      }
      out.at(x, y) = gray.at(x, y) >= std::ceil(t) ? 255 : 0;
    }
  }
  return out;
}

// -------------------------------------------------------------- morphology

namespace {

// One separable pass along rows (horizontal=true) or columns. For each output
// pixel counts the white samples in the window [p - anchor, p - anchor + k - 1]
// (mirror padded) and keeps white when all (erode) or any (dilate) are white.
Raster morph_pass(const Raster& src, MorphOp op, int k, bool horizontal) {
  const int w = src.width(), h = src.height();
  const int n = horizontal ? w : h;
  const int lines = horizontal ? h : w;
  const int anchor = k / 2;
  Raster out(w, h, 1);
  std::vector<int> line(n);
  for (int l = 0; l < lines; ++l) {
    for (int i = 0; i < n; ++i) {
      line[i] = (horizontal ? src.at(i, l) : src.at(l, i)) == 255 ? 1 : 0;
    }
    auto sample = [&](int i) { return line[mirror(i, n)]; };
    int count = 0;
    for (int j = -anchor; j < -anchor + k; ++j) count += sample(j);
    for (int i = 0; i < n; ++i) {
      const bool white = op == MorphOp::kErode ? count == k : count > 0;
      (horizontal ? out.at(i, l) : out.at(l, i)) = white ? 255 : 0;
      count -= sample(i - anchor);
      count += sample(i - anchor + k);
    }
  }
  return out;
}

}  // namespace

Raster morphology(const Raster& binary, MorphOp op, int kernel_w, int kernel_h,
                  int iterations) {
  require_gray(binary, "morphology");
  if (kernel_w < 1 || kernel_h < 1) {
    throw Error(ErrorCode::kInvalidArgument, "morphology: kernel must be >= (1,1)");
  }
  if (iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "morphology: iterations must be >= 0");
  }
  if (!binary.is_binary()) {
    throw Error(ErrorCode::kInvalidArgument, "morphology: input is not binary");
  }
  Raster cur = binary;
  for (int it = 0; it < iterations; ++it) {
    if (kernel_w > 1) cur = morph_pass(cur, op, kernel_w, true);
    if (kernel_h > 1) cur = morph_pass(cur, op, kernel_h, false);
  }
  return cur;
}

// -------------------------------------------------------------- fore edges

void ForeEdgeParams::validate() const {
  if (binarize_tau < 0 || binarize_tau > 255) {
    throw Error(ErrorCode::kInvalidArgument, "remove_fore_edges: binarize_tau out of [0,255]");
  }
  if (denoise_kernel < 1 || expand_kernel < 1 || denoise_iterations < 0 ||
      expand_iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "remove_fore_edges: bad kernel or iterations");
  }
  if (!(min_rect_area_fraction >= 0 && min_rect_area_fraction <= 1)) {
    throw Error(ErrorCode::kInvalidArgument,
                "remove_fore_edges: min_rect_area_fraction out of [0,1]");
  }
  if (!(max_aspect_deviation >= 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "remove_fore_edges: max_aspect_deviation must be >= 0");
  }
}

namespace {

struct Component {
  std::int64_t pixels = 0;
  Box box;
};

// 4-connected components of white pixels.
std::vector<Component> white_components(const Raster& bin) {
  const int w = bin.width(), h = bin.height();
  std::vector<std::uint8_t> seen(bin.pixel_count(), 0);
  std::vector<Component> comps;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (seen[i] || bin.at(x, y) != 255) continue;
      Component c{0, {x, y, x + 1, y + 1}};
      seen[i] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.pixels;
        c.box = unite(c.box, Box{cx, cy, cx + 1, cy + 1});
        const int nx[4] = {cx - 1, cx + 1, cx, cx};
        const int ny[4] = {cy, cy, cy - 1, cy + 1};
        for (int d = 0; d < 4; ++d) {
          if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
          const std::size_t j = static_cast<std::size_t>(ny[d]) * w + nx[d];
          if (!seen[j] && bin.at(nx[d], ny[d]) == 255) {
            seen[j] = 1;
            stack.push_back({nx[d], ny[d]});
          }
        }
      }
      comps.push_back(c);
    }
  }
  return comps;
}

Raster crop(const Raster& img, const Box& b) {
  Raster out(b.width(), b.height(), img.channels());
  const std::size_t row_bytes = static_cast<std::size_t>(b.width()) * img.channels();
  for (int y = b.y0; y < b.y1; ++y) {
    auto src = img.row(y).subspan(static_cast<std::size_t>(b.x0) * img.channels(), row_bytes);
    std::copy(src.begin(), src.end(), out.row(y - b.y0).begin());
  }
  return out;
}

}  // namespace

ForeEdgeResult remove_fore_edges(const Raster& img, const ForeEdgeParams& p) {
  p.validate();
  const Raster gray = img.channels() == 1 ? img : to_grayscale(img);
  const int w = gray.width(), h = gray.height();
  if (w == 0 || h == 0) return {img, std::nullopt};

  // Step 1: threshold, then erode + dilate to drop speckle.
  Raster mask = threshold_fixed(gray, p.binarize_tau);
  mask = morphology(mask, MorphOp::kErode, p.denoise_kernel, p.denoise_kernel,
                    p.denoise_iterations);
  mask = morphology(mask, MorphOp::kDilate, p.denoise_kernel, p.denoise_kernel,
                    p.denoise_iterations);
  // Step 2: grow the white area so text and margins merge into the page.
  mask = morphology(mask, MorphOp::kDilate, p.expand_kernel, p.expand_kernel,
                    p.expand_iterations);

  // Step 3: union of all large white components.
  const double min_pixels = p.min_rect_area_fraction * static_cast<double>(w) * h;
  std::optional<Box> page;
  for (const auto& c : white_components(mask)) {
    if (static_cast<double>(c.pixels) < min_pixels || c.pixels == 0) continue;
    page = page ? unite(*page, c.box) : c.box;
  }
  if (!page) return {img, std::nullopt};

  // The dilation pushed every edge outward; pull back the sides that do not
  // touch the image border (what a closing would have produced).
  const int grow_lo = (p.expand_kernel / 2) * p.expand_iterations;
  const int grow_hi = (p.expand_kernel - 1 - p.expand_kernel / 2) * p.expand_iterations;
  Box box = *page;
  if (box.x0 > 0) box.x0 += grow_hi;
  if (box.y0 > 0) box.y0 += grow_hi;
  if (box.x1 < w) box.x1 -= grow_lo;
  if (box.y1 < h) box.y1 -= grow_lo;
  if (!box.valid()) box = *page;

  if (static_cast<double>(box.area()) < min_pixels) return {img, std::nullopt};
  const double in_aspect = static_cast<double>(w) / h;
  const double out_aspect = static_cast<double>(box.width()) / box.height();
  if (std::abs(out_aspect / in_aspect - 1.0) > p.max_aspect_deviation) {
    return {img, std::nullopt};
  }
  return {crop(img, box), box};
}

// ---------------------------------------------------------------- geometry

namespace {

inline double sample_bilinear(const Raster& img, double x, double y, int c,
                              std::uint8_t fill, bool clamp_border) {
  const int w = img.width(), h = img.height();
  if (clamp_border) {
    x = std::clamp(x, 0.0, double(w - 1));
    y = std::clamp(y, 0.0, double(h - 1));
  } else if (x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5) {
    return fill;
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto px = [&](int xx, int yy) -> double {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) {
      if (clamp_border) return img.at(std::clamp(xx, 0, w - 1), std::clamp(yy, 0, h - 1), c);
      return fill;
    }
    return img.at(xx, yy, c);
  };
  const double top = px(x0, y0) * (1 - fx) + px(x0 + 1, y0) * fx;
  const double bot = px(x0, y0 + 1) * (1 - fx) + px(x0 + 1, y0 + 1) * fx;
  return top * (1 - fy) + bot * fy;
}

}  // namespace

Raster rotate(const Raster& img, double degrees, std::uint8_t fill) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = 0.5 * (img.width() - 1), cy = 0.5 * (img.height() - 1);
  Raster out(img.width(), img.height(), img.channels(), fill);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      // Inverse map: rotate the output point clockwise back into the source.
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + dx * cs - dy * sn;
      const double sy = cy + dx * sn + dy * cs;
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = clamp_u8(sample_bilinear(img, sx, sy, c, fill, false));
      }
    }
  }
  return out;
}

Affine rotation_transform(int width, int height, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  return {cs, sn, cx - cs * cx - sn * cy, -sn, cs, cy + sn * cx - cs * cy};
}

double estimate_skew(const Raster& gray, const DeskewParams& params) {
  require_gray(gray, "deskew");
  const int w = gray.width(), h = gray.height();
  std::vector<std::pair<float, float>> dark;
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gray.at(x, y) < params.dark_threshold) {
        dark.emplace_back(static_cast<float>(x - cx), static_cast<float>(y - cy));
      }
    }
  }
  if (dark.empty()) return 0.0;
  constexpr std::size_t kMaxSamples = 400000;
  const std::size_t stride = std::max<std::size_t>(1, dark.size() / kMaxSamples);

  const int steps = static_cast<int>(std::lround(params.max_angle / params.step));
  const int diag = static_cast<int>(std::ceil(std::hypot(w, h))) + 2;
  std::vector<std::int64_t> bins(static_cast<std::size_t>(2 * diag + 1));

  double best_score = -1.0;
  double best_angle = 0.0;
  // Visit 0, +s, -s, +2s, ... so the smallest |angle| wins ties.
  for (int i = 0; i <= 2 * steps; ++i) {
    const int k = (i % 2 == 1) ? (i + 1) / 2 : -(i / 2);
    const double angle = k * params.step;
    const double rad = angle * std::numbers::pi / 180.0;
    const double sn = std::sin(rad), cs = std::cos(rad);
    std::fill(bins.begin(), bins.end(), 0);
    std::int64_t n = 0;
    for (std::size_t j = 0; j < dark.size(); j += stride) {
      const double ry = dark[j].first * sn + dark[j].second * cs;
      ++bins[static_cast<std::size_t>(std::floor(ry) + diag)];
      ++n;
    }
    // Variance of bin counts over the full bin range (sum of squares suffices
    // because the mean is fixed by n and the bin count).
    double sq = 0;
    for (auto b : bins) sq += static_cast<double>(b) * static_cast<double>(b);
    if (sq > best_score) {
      best_score = sq;
      best_angle = angle;
    }
  }
  return best_angle;
}

DeskewResult deskew(const Raster& gray, const DeskewParams& params) {
  const double angle = estimate_skew(gray, params);
  if (angle == 0.0) return {gray, 0.0};
  return {rotate(gray, -angle, 255), angle};
}

std::array<double, 9> homography_to_quad(const Quad& quad, int out_w, int out_h) {
  if (out_w < 2 || out_h < 2) {
    throw Error(ErrorCode::kInvalidArgument, "perspective_correct: output too small");
  }
  const auto& q = quad.corners;
  // Every consecutive triple must turn the same way with non-zero area.
  double sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Point& a = q[i];
    const Point& b = q[(i + 1) % 4];
    const Point& c = q[(i + 2) % 4];
    const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    const double scale = std::hypot(b.x - a.x, b.y - a.y) * std::hypot(c.x - b.x, c.y - b.y);
    if (!(std::abs(cross) > 1e-9 * std::max(scale, 1.0))) {
      throw Error(ErrorCode::kInvalidArgument, "perspective_correct: degenerate (collinear) corners");
    }
    if (sign == 0) sign = cross;
    else if ((cross > 0) != (sign > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "perspective_correct: corners are not convex");
    }
  }

  const double W = out_w - 1, H = out_h - 1;
  const Point src[4] = {{0, 0}, {W, 0}, {W, H}, {0, H}};
  Eigen::Matrix<double, 8, 8> A;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    const double u = src[i].x, v = src[i].y, x = q[i].x, y = q[i].y;
    A.row(2 * i) << u, v, 1, 0, 0, 0, -u * x, -v * x;
    A.row(2 * i + 1) << 0, 0, 0, u, v, 1, -u * y, -v * y;
    rhs(2 * i) = x;
    rhs(2 * i + 1) = y;
  }
  const Eigen::Matrix<double, 8, 1> hsol = A.fullPivLu().solve(rhs);
  return {hsol(0), hsol(1), hsol(2), hsol(3), hsol(4), hsol(5), hsol(6), hsol(7), 1.0};
}

Raster perspective_correct(const Raster& img, const Quad& corners, int out_w, int out_h) {
  const auto hm = homography_to_quad(corners, out_w, out_h);
  Raster out(out_w, out_h, img.channels());
  for (int v = 0; v < out_h; ++v) {
    for (int u = 0; u < out_w; ++u) {
      const double den = hm[6] * u + hm[7] * v + hm[8];
      const double x = (hm[0] * u + hm[1] * v + hm[2]) / den;
      const double y = (hm[3] * u + hm[4] * v + hm[5]) / den;
      for (int c = 0; c < img.channels(); ++c) {
        out.at(u, v, c) = clamp_u8(sample_bilinear(img, x, y, c, 255, true));
      }
    }
  }
  return out;
}

}  // namespace ledgerscan::image
