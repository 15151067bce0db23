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

// Pure raster transformations used before recognition: grayscale, contrast
// correction, binarization, morphology, fore-edge trimming and 2D geometric
// correction. Every function is deterministic and reentrant.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "ledgerscan/geometry.hpp"
#include "ledgerscan/raster.hpp"

namespace ledgerscan::image {

using Histogram256 = std::array<std::uint64_t, 256>;
using Lut256 = std::array<std::uint8_t, 256>;

/// Luminance 0.299R + 0.587G + 0.114B, rounded to nearest.
Raster to_grayscale(const Raster& img);

Histogram256 intensity_histogram(const Raster& img);

/// Global histogram equalization with the CDF remap
/// out(v) = round(255 * (cdf(v) - cdf_min) / (N - cdf_min)).
Raster equalize(const Raster& img);

/// Equalization lookup table for one histogram. When clip_limit is finite and
/// positive, bins are clipped at max(1, clip_limit * N / 256) and the excess
/// is spread uniformly over all 256 bins before the CDF remap.
Lut256 equalization_lut(const Histogram256& hist, double clip_limit);

/// Contrast-limited adaptive histogram equalization. The image is split into
/// tile_cols x tile_rows tiles; each tile gets a clipped-histogram LUT and
/// pixels are mapped by bilinear interpolation between neighbouring tile
/// centres. clip_limit <= 0 or infinity disables clipping.
Raster clahe(const Raster& img, int tile_cols = 8, int tile_rows = 8,
             double clip_limit = 2.0);

enum class BinarizeMethod { kFixed, kOtsu, kAdaptiveMean, kSauvola, kWolf };

std::string_view to_string(BinarizeMethod m);
std::optional<BinarizeMethod> parse_binarize_method(std::string_view name);

struct BinarizeParams {
  BinarizeMethod method = BinarizeMethod::kFixed;
  int tau = 160;      // fixed only
  int window = 31;    // local methods, odd >= 3
  std::optional<double> k;  // sauvola 0.2, wolf 0.5 when unset
  double R = 128.0;   // sauvola dynamic range
  int offset = 10;    // adaptive_mean

  double effective_k() const;
  /// Throws Error(kInvalidArgument) on out-of-range values.
  void validate() const;
};

/// Threshold maximizing between-class variance (smallest on ties). Class 0 is
/// v <= tau.
int otsu_threshold(const Raster& gray);

/// Fixed and Otsu: white iff v > tau. Local methods compute a real threshold
/// T per pixel over a mirror-padded window and emit white iff v >= ceil(T).
Raster binarize(const Raster& gray, const BinarizeParams& params);

enum class MorphOp { kErode, kDilate };

/// Rectangular min (erode) or max (dilate) filter over the white foreground.
/// Both use the window [x - kw/2, x - kw/2 + kw - 1] (same for y) with mirror
/// padding, so erode and dilate are exact duals under inversion.
Raster morphology(const Raster& binary, MorphOp op, int kernel_w, int kernel_h,
                  int iterations = 1);

struct ForeEdgeParams {
  int binarize_tau = 160;
  int denoise_kernel = 3;
  int denoise_iterations = 1;
  int expand_kernel = 15;
  int expand_iterations = 1;
  double min_rect_area_fraction = 0.05;
  double max_aspect_deviation = 0.30;

  void validate() const;
};

struct ForeEdgeResult {
  Raster cropped;
  std::optional<Box> crop_box;  // none when the aspect guard tripped
};

/// Trims scanner bed and book fore-edges by locating the bright page:
/// threshold + opening, dilation of the white area, then the union of the
/// bounding boxes of all large white components. Returns the input untouched
/// when that union's aspect ratio strays too far from the input's.
ForeEdgeResult remove_fore_edges(const Raster& img, const ForeEdgeParams& params);

/// Rotates counter-clockwise (as displayed, y pointing down) about the image
/// centre by `degrees`, bilinear sampling, `fill` outside the source.
Raster rotate(const Raster& img, double degrees, std::uint8_t fill = 255);

/// Maps source pixel coordinates to their position in rotate(img, degrees).
Affine rotation_transform(int width, int height, double degrees);

struct DeskewParams {
  double max_angle = 15.0;
  double step = 0.1;
  int dark_threshold = 128;
};

struct DeskewResult {
  Raster rotated;
  double angle = 0.0;  // degrees; positive means text rises to the right
};

DeskewResult deskew(const Raster& gray, const DeskewParams& params = {});

/// Estimated skew angle alone (no resampling).
double estimate_skew(const Raster& gray, const DeskewParams& params = {});

struct Quad {
  std::array<Point, 4> corners;  // clockwise from top-left
};

/// Row-major 3x3 homography mapping output pixel (u, v) to source (x, y) for
/// the rectangle (0,0)-(w-1,h-1) onto `quad`. Throws on degenerate corners.
std::array<double, 9> homography_to_quad(const Quad& quad, int out_w, int out_h);

Raster perspective_correct(const Raster& img, const Quad& corners, int out_w,
                           int out_h);

}  // namespace ledgerscan::image
