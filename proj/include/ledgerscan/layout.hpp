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

// Table structure from pixels and word boxes: edge detection, randomized
// Hough line segments, delimiter consolidation, row grouping, continuation
// merging and header detection.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ledgerscan/geometry.hpp"
#include "ledgerscan/ocr.hpp"
#include "ledgerscan/raster.hpp"

namespace ledgerscan::layout {

/// Canny: Gaussian blur, 3x3 Sobel magnitude, non-maximum suppression and
/// hysteresis. Edge pixels are 255 in the returned map. Throws if low >= high.
Raster detect_edges(const Raster& gray, double low = 50, double high = 150, double sigma = 1.4);

enum class Orientation { kHorizontal, kVertical, kOther };

struct Segment {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Orientation orientation = Orientation::kOther;
  int support = 0;

  double angle_deg() const;  // in [0, 180)
  bool operator==(const Segment&) const = default;
};

Orientation classify(const Segment& s, double angle_tol_deg);

struct HoughParams {
  int vote_threshold = 80;
  int min_len = 0;  // 0 means 0.3 x the smaller page dimension
  int max_gap = 5;
  std::size_t samples = 0;  // edge pixels to process, 0 = all
  std::uint64_t seed = 1;
  double angle_tol = 2.0;  // only for the orientation tag
};

/// Progressive probabilistic Hough transform at 1 degree x 1 pixel.
std::vector<Segment> detect_line_segments(const Raster& edges, const HoughParams& params = {});

struct Delimiters {
  std::vector<double> h;  // y positions
  std::vector<double> v;  // x positions
};

struct ConsolidateParams {
  double angle_tol = 2.0;
  double merge_dist = 8.0;
  double min_span_frac = 0.5;
};

/// Drops oblique segments, clusters the rest by position (chains closer than
/// merge_dist), and keeps clusters whose covered extent reaches
/// min_span_frac of the page dimension. Positions are support-weighted.
Delimiters consolidate_delimiters(const std::vector<Segment>& segments, int page_w, int page_h,
                                  const ConsolidateParams& params = {});

struct Row {
  std::vector<int> word_ids;  // indices into the OCR page, x-ordered
  std::vector<ocr::OcrWord> words;
  double baseline_y = 0;
  std::string label_text;
  std::optional<int> continuation_of;
  bool chain_merged = false;
  bool orphan_continuation = false;

  Box bbox() const;
};

/// True when the token, after letter repair, is digits with commas/dots.
bool numeric_looking(const std::string& token);

/// Transitive closure of vertical overlap (intersection over the smaller
/// height >= y_overlap_min), computed separately inside each x-interval in
/// `regions` (words whose centre lies in no interval form one more group).
std::vector<Row> group_words_into_rows(const std::vector<ocr::OcrWord>& words,
                                       double y_overlap_min = 0.5,
                                       const std::vector<std::pair<double, double>>& regions = {});

/// Marks indented, amount-free rows as continuations of the row above and
/// extends that row's label. Rows listed in `skip` are neither merged nor
/// merged into. Continuation rows stay in the list.
std::vector<Row> merge_indented_continuations(std::vector<Row> rows, double label_left,
                                              double indent_min,
                                              const std::vector<int>& skip = {});

struct HeaderParams {
  double center_tol_frac = 0.05;
  double height_ratio_min = 1.3;
  double gap_ratio_min = 2.0;
};

struct HeaderDetection {
  std::vector<int> rows;
  bool indeterminate = false;
};

HeaderDetection detect_headers(const std::vector<Row>& rows, int page_width,
                               const HeaderParams& params = {});

struct LayoutParams {
  double canny_low = 50, canny_high = 150, canny_sigma = 1.4;
  HoughParams hough;
  double hough_min_len_frac = 0.3;
  ConsolidateParams consolidate;
  double y_overlap_min = 0.5;
  std::optional<double> indent_min;  // default 1.5 x median character width
  HeaderParams headers;

  void validate() const;
};

struct LayoutModel {
  int width = 0, height = 0;
  std::vector<double> h_delims;
  std::vector<double> v_delims;
  std::vector<Box> table_regions;
  std::vector<Row> rows;
  std::vector<int> headers;
  bool header_indeterminate = false;
};

LayoutModel analyze(const Raster& gray, const ocr::OcrPage& page, const LayoutParams& params = {});

std::string to_json(const LayoutModel& model);
/// Rows are rebuilt from word indices into `page`.
LayoutModel from_json(std::string_view json, const ocr::OcrPage& page);

/// RGB copy of the page with horizontal delimiters in green and vertical
/// ones in blue.
Raster render_annotated(const Raster& img, const LayoutModel& model);

}  // namespace ledgerscan::layout
