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

#include "ledgerscan/layout.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/core.h>

#include "json.hpp"
#include "ledgerscan/amount.hpp"
#include "ledgerscan/error.hpp"
#include "ledgerscan/image_ops.hpp"

namespace ledgerscan::layout {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

std::vector<double> gaussian_blur(const Raster& g, double sigma) {
  const int w = g.width(), h = g.height();
  std::vector<double> src(g.data().begin(), g.data().end());
  if (sigma <= 0) return src;
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src[y * w + reflect(x + i, w)];
      tmp[y * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[reflect(y + i, h) * w + x];
      out[y * w + x] = acc;
    }
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double overlap_ratio(const Box& a, const Box& b) {
  const int inter = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const int hmin = std::min(a.height(), b.height());
  return inter > 0 && hmin > 0 ? static_cast<double>(inter) / hmin : 0.0;
}

std::string join_label(const std::vector<ocr::OcrWord>& words) {
  std::string s;
  for (const auto& w : words) {
    if (numeric_looking(w.text)) continue;
    if (!s.empty()) s += ' ';
    s += w.text;
  }
  return s;
}

}  // namespace

Raster detect_edges(const Raster& input, double low, double high, double sigma) {
  if (!(low < high)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("canny: low threshold {} must be below high {}", low, high));
  }
  const Raster gray = input.channels() == 1 ? input : image::to_grayscale(input);
  const int w = gray.width(), h = gray.height();
  const auto b = gaussian_blur(gray, sigma);
  auto at = [&](int x, int y) { return b[reflect(y, h) * w + reflect(x, w)]; };
  std::vector<double> mag(b.size());
  std::vector<std::uint8_t> dir(b.size());
  constexpr double kTan22 = 0.41421356237309503;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::hypot(gx, gy);
      const double ax = std::abs(gx), ay = std::abs(gy);
      if (ay <= kTan22 * ax) dir[i] = 0;
      else if (ax <= kTan22 * ay) dir[i] = 2;
      else dir[i] = (gx > 0) == (gy > 0) ? 1 : 3;
    }
  }
  auto m = [&](int x, int y) {
    return x < 0 || y < 0 || x >= w || y >= h ? 0.0 : mag[static_cast<std::size_t>(y) * w + x];
  };
  static constexpr int kOff[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  // 0 = suppressed, 1 = weak candidate, 2 = strong
  std::vector<std::uint8_t> state(b.size(), 0);
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double v = mag[i];
      if (v < low) continue;
      const auto [dx, dy] = kOff[dir[i]];
      // Strict on one side only, so a symmetric ridge keeps exactly one pixel.
      if (!(v > m(x - dx, y - dy) && v >= m(x + dx, y + dy))) continue;
      state[i] = v >= high ? 2 : 1;
      if (state[i] == 2) stack.push_back(i);
    }
  }
  Raster out = Raster::gray(w, h, 0);
  for (auto i : stack) out.data()[i] = 255;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (state[j] == 1) {
          state[j] = 2;
          out.data()[j] = 255;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

double Segment::angle_deg() const {
  double a = std::atan2(static_cast<double>(y1 - y0), static_cast<double>(x1 - x0)) * 180.0 /
             std::numbers::pi;
  if (a < 0) a += 180.0;
  if (a >= 180.0) a -= 180.0;
  return a;
}

Orientation classify(const Segment& s, double angle_tol_deg) {
  const double a = s.angle_deg();
  if (std::min(a, 180.0 - a) <= angle_tol_deg) return Orientation::kHorizontal;
  if (std::abs(a - 90.0) <= angle_tol_deg) return Orientation::kVertical;
  return Orientation::kOther;
}

std::vector<Segment> detect_line_segments(const Raster& edges, const HoughParams& p) {
  const int w = edges.width(), h = edges.height();
  std::vector<Segment> out;
  if (edges.empty()) return out;
  const int min_len = p.min_len > 0 ? p.min_len
                                    : std::max(1, static_cast<int>(0.3 * std::min(w, h)));
  constexpr int kAngles = 180;
  const int offset = w + h;
  const int nrho = 2 * offset + 1;
  std::vector<double> cs(kAngles), sn(kAngles);
  for (int k = 0; k < kAngles; ++k) {
    cs[k] = std::cos(k * std::numbers::pi / kAngles);
    sn[k] = std::sin(k * std::numbers::pi / kAngles);
  }
  std::vector<int> acc(static_cast<std::size_t>(kAngles) * nrho, 0);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::uint8_t> voted(mask.size(), 0);
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (edges.at(x, y)) {
        mask[static_cast<std::size_t>(y) * w + x] = 1;
        pts.emplace_back(x, y);
      }
    }
  }
  std::mt19937_64 rng(p.seed);
  for (std::size_t i = pts.size(); i > 1; --i) {
    std::swap(pts[i - 1], pts[rng() % i]);
  }
  auto vote = [&](int x, int y, int delta) {
    for (int k = 0; k < kAngles; ++k) {
      const int r = static_cast<int>(std::lround(x * cs[k] + y * sn[k])) + offset;
      acc[static_cast<std::size_t>(k) * nrho + r] += delta;
    }
  };
  const std::size_t limit = p.samples > 0 ? std::min(p.samples, pts.size()) : pts.size();
  for (std::size_t n = 0; n < limit; ++n) {
    const auto [x, y] = pts[n];
    const std::size_t idx = static_cast<std::size_t>(y) * w + x;
    if (!mask[idx]) continue;
    int best = 0, best_k = 0;
    for (int k = 0; k < kAngles; ++k) {
      const int r = static_cast<int>(std::lround(x * cs[k] + y * sn[k])) + offset;
      const int v = ++acc[static_cast<std::size_t>(k) * nrho + r];
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    voted[idx] = 1;
    if (best < p.vote_threshold) continue;

    // Walk along the line direction (perpendicular to the normal).
    const double dxl = -sn[best_k], dyl = cs[best_k];
    const bool x_major = std::abs(dxl) > std::abs(dyl);
    const double sx = x_major ? (dxl > 0 ? 1.0 : -1.0) : dxl / std::abs(dyl);
    const double sy = x_major ? dyl / std::abs(dxl) : (dyl > 0 ? 1.0 : -1.0);
    std::array<std::pair<int, int>, 2> ends{std::pair{x, y}, std::pair{x, y}};
    for (int dirn = 0; dirn < 2; ++dirn) {
      const double sgn = dirn == 0 ? 1.0 : -1.0;
      double px = x, py = y;
      int gap = 0;
      while (true) {
        px += sgn * sx;
        py += sgn * sy;
        const int ix = static_cast<int>(std::lround(px)), iy = static_cast<int>(std::lround(py));
        if (ix < 0 || iy < 0 || ix >= w || iy >= h) break;
        if (mask[static_cast<std::size_t>(iy) * w + ix]) {
          gap = 0;
          ends[dirn] = {ix, iy};
        } else if (++gap > p.max_gap) {
          break;
        }
      }
    }
    const int len = std::max(std::abs(ends[0].first - ends[1].first),
                             std::abs(ends[0].second - ends[1].second));
    if (len < min_len) continue;

    int support = 0;
    for (int dirn = 0; dirn < 2; ++dirn) {
      const double sgn = dirn == 0 ? 1.0 : -1.0;
      double px = x, py = y;
      for (bool first = true;; first = false) {
        if (!first) {
          px += sgn * sx;
          py += sgn * sy;
        }
        const int ix = static_cast<int>(std::lround(px)), iy = static_cast<int>(std::lround(py));
        if (ix < 0 || iy < 0 || ix >= w || iy >= h) break;
        const std::size_t j = static_cast<std::size_t>(iy) * w + ix;
        if (mask[j]) {
          if (voted[j]) vote(ix, iy, -1);
          voted[j] = 0;
          mask[j] = 0;
          ++support;
        }
        if (ix == ends[dirn].first && iy == ends[dirn].second) break;
        if (x_major ? (sgn * sx > 0 ? ix > ends[dirn].first : ix < ends[dirn].first)
                    : (sgn * sy > 0 ? iy > ends[dirn].second : iy < ends[dirn].second)) {
          break;
        }
      }
    }
    Segment s{ends[1].first, ends[1].second, ends[0].first, ends[0].second,
              Orientation::kOther, support};
    if (std::tie(s.x0, s.y0) > std::tie(s.x1, s.y1)) {
      std::swap(s.x0, s.x1);
      std::swap(s.y0, s.y1);
    }
    s.orientation = classify(s, p.angle_tol);
    out.push_back(s);
  }
  return out;
}

Delimiters consolidate_delimiters(const std::vector<Segment>& segments, int page_w, int page_h,
                                  const ConsolidateParams& p) {
  struct Item {
    double pos;
    int lo, hi;
    int support;
  };
  std::vector<Item> hs, vs;
  for (const auto& s : segments) {
    switch (classify(s, p.angle_tol)) {
      case Orientation::kHorizontal:
        hs.push_back({0.5 * (s.y0 + s.y1), std::min(s.x0, s.x1), std::max(s.x0, s.x1),
                      std::max(1, s.support)});
        break;
      case Orientation::kVertical:
        vs.push_back({0.5 * (s.x0 + s.x1), std::min(s.y0, s.y1), std::max(s.y0, s.y1),
                      std::max(1, s.support)});
        break;
      case Orientation::kOther:
        break;
    }
  }
  auto build = [&](std::vector<Item> items, int extent) {
    std::vector<double> out;
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
      return std::tie(a.pos, a.lo, a.hi) < std::tie(b.pos, b.lo, b.hi);
    });
    std::size_t i = 0;
    while (i < items.size()) {
      std::size_t j = i + 1;
      while (j < items.size() && items[j].pos - items[j - 1].pos <= p.merge_dist) ++j;
      std::vector<std::pair<int, int>> spans;
      double wsum = 0, psum = 0;
      for (std::size_t k = i; k < j; ++k) {
        spans.emplace_back(items[k].lo, items[k].hi);
        wsum += items[k].support;
        psum += items[k].support * items[k].pos;
      }
      std::sort(spans.begin(), spans.end());
      long covered = 0;
      int cur_lo = spans[0].first, cur_hi = spans[0].second;
      for (std::size_t k = 1; k < spans.size(); ++k) {
        if (spans[k].first <= cur_hi + 1) {
          cur_hi = std::max(cur_hi, spans[k].second);
        } else {
          covered += cur_hi - cur_lo + 1;
          cur_lo = spans[k].first;
          cur_hi = spans[k].second;
        }
      }
      covered += cur_hi - cur_lo + 1;
      if (covered >= p.min_span_frac * extent) out.push_back(psum / wsum);
      i = j;
    }
    return out;
  };
  return {build(std::move(hs), page_w), build(std::move(vs), page_h)};
}

Box Row::bbox() const {
  Box b = words.empty() ? Box{} : words[0].bbox;
  for (const auto& w : words) b = unite(b, w.bbox);
  return b;
}

bool numeric_looking(const std::string& token) {
  const std::string t = repair_token(token, default_repair_map()).text;
  bool digit = false;
  for (char c : t) {
    if (c >= '0' && c <= '9') digit = true;
    else if (c != ',' && c != '.' && c != '$') return false;
  }
  return digit;
}

std::vector<Row> group_words_into_rows(const std::vector<ocr::OcrWord>& words,
                                       double y_overlap_min,
                                       const std::vector<std::pair<double, double>>& regions) {
  const std::size_t n = words.size();
  std::vector<std::size_t> region(n, regions.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = words[i].bbox.center_x();
    for (std::size_t r = 0; r < regions.size(); ++r) {
      if (cx >= regions[r].first && cx <= regions[r].second) {
        region[i] = r;
        break;
      }
    }
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (region[i] != region[j]) continue;
      if (overlap_ratio(words[i].bbox, words[j].bbox) >= y_overlap_min) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::map<std::size_t, std::vector<int>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(static_cast<int>(i));
  std::vector<Row> rows;
  for (auto& [root, ids] : groups) {
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      return words[a].bbox.x0 < words[b].bbox.x0;
    });
    Row r;
    r.word_ids = ids;
    for (int id : ids) {
      r.words.push_back(words[id]);
      r.baseline_y = std::max(r.baseline_y, static_cast<double>(words[id].bbox.y1));
    }
    for (std::size_t a = 0; a < ids.size() && !r.chain_merged; ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        if (overlap_ratio(words[ids[a]].bbox, words[ids[b]].bbox) < y_overlap_min) {
          r.chain_merged = true;
          break;
        }
      }
    }
    r.label_text = join_label(r.words);
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    const int ax = a.words[0].bbox.x0, bx = b.words[0].bbox.x0;
    return std::tie(a.baseline_y, ax, a.word_ids[0]) < std::tie(b.baseline_y, bx, b.word_ids[0]);
  });
  return rows;
}

std::vector<Row> merge_indented_continuations(std::vector<Row> rows, double label_left,
                                              double indent_min, const std::vector<int>& skip) {
  int root = -1;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    Row& r = rows[i];
    if (std::find(skip.begin(), skip.end(), i) != skip.end() || r.words.empty()) {
      root = -1;
      continue;
    }
    const bool indented = r.words[0].bbox.x0 >= label_left + indent_min;
    const bool has_amount = std::any_of(r.words.begin(), r.words.end(), [](const ocr::OcrWord& w) {
      return numeric_looking(w.text);
    });
    if (indented && !has_amount) {
      if (root < 0) {
        r.orphan_continuation = true;
        continue;
      }
      r.continuation_of = root;
      if (!r.label_text.empty()) rows[root].label_text += " " + r.label_text;
      continue;
    }
    root = i;
  }
  return rows;
}

HeaderDetection detect_headers(const std::vector<Row>& rows, int page_width,
                               const HeaderParams& p) {
  HeaderDetection out;
  if (rows.size() < 2) {
    out.indeterminate = true;
    return out;
  }
  std::vector<double> heights;
  for (const auto& r : rows) {
    for (const auto& w : r.words) heights.push_back(w.bbox.height());
  }
  const double page_median_h = median_of(heights);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    gaps.push_back(std::max(0, rows[i].bbox().y0 - rows[i - 1].bbox().y1));
  }
  const double median_gap = median_of(gaps);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Box b = rows[i].bbox();
    const double gap_above = i == 0 ? b.y0 : gaps[i - 1];
    std::vector<double> hs;
    for (const auto& w : rows[i].words) hs.push_back(w.bbox.height());
    const bool centered =
        std::abs(b.center_x() - 0.5 * page_width) <= p.center_tol_frac * page_width;
    const bool tall = median_of(hs) >= p.height_ratio_min * page_median_h;
    const bool spaced = gap_above >= p.gap_ratio_min * median_gap;
    if (centered && tall && spaced) out.rows.push_back(static_cast<int>(i));
  }
  return out;
}

void LayoutParams::validate() const {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "layout: " + what);
  };
  if (!(canny_low < canny_high)) bad("canny low must be below high");
  if (canny_sigma < 0) bad("canny sigma must be non-negative");
  if (hough.vote_threshold < 1) bad("hough vote threshold must be positive");
  if (hough.max_gap < 0) bad("hough max_gap must be non-negative");
  if (hough_min_len_frac <= 0 || hough_min_len_frac > 1) bad("hough min_len_frac out of (0,1]");
  if (consolidate.angle_tol < 0 || consolidate.angle_tol >= 45) bad("angle_tol out of [0,45)");
  if (consolidate.merge_dist < 0) bad("merge_dist must be non-negative");
  if (consolidate.min_span_frac < 0 || consolidate.min_span_frac > 1) bad("min_span_frac out of [0,1]");
  if (y_overlap_min <= 0 || y_overlap_min > 1) bad("y_overlap_min out of (0,1]");
  if (indent_min && *indent_min < 0) bad("indent_min must be non-negative");
}

LayoutModel analyze(const Raster& input, const ocr::OcrPage& page, const LayoutParams& params) {
  params.validate();
  const Raster gray = input.channels() == 1 ? input : image::to_grayscale(input);
  LayoutModel m;
  m.width = gray.width();
  m.height = gray.height();
  const Raster edges = detect_edges(gray, params.canny_low, params.canny_high, params.canny_sigma);
  HoughParams hp = params.hough;
  if (hp.min_len <= 0) {
    hp.min_len = std::max(1, static_cast<int>(params.hough_min_len_frac * std::min(m.width, m.height)));
  }
  hp.angle_tol = params.consolidate.angle_tol;
  const auto segments = detect_line_segments(edges, hp);
  const Delimiters d = consolidate_delimiters(segments, m.width, m.height, params.consolidate);
  m.h_delims = d.h;
  m.v_delims = d.v;
  const int rx0 = m.v_delims.size() >= 2 ? static_cast<int>(std::lround(m.v_delims.front())) : 0;
  const int rx1 = m.v_delims.size() >= 2 ? static_cast<int>(std::lround(m.v_delims.back())) : m.width;
  for (std::size_t i = 1; i < m.h_delims.size(); ++i) {
    m.table_regions.push_back({rx0, static_cast<int>(std::lround(m.h_delims[i - 1])), rx1,
                               static_cast<int>(std::lround(m.h_delims[i]))});
  }
  std::vector<std::pair<double, double>> regions;
  if (m.v_delims.size() >= 2) regions.emplace_back(m.v_delims.front(), m.v_delims.back());
  auto rows = group_words_into_rows(page.words, params.y_overlap_min, regions);
  const HeaderDetection hd = detect_headers(rows, m.width, params.headers);
  m.headers = hd.rows;
  m.header_indeterminate = hd.indeterminate;

  std::vector<double> lefts, char_w;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    if (std::find(hd.rows.begin(), hd.rows.end(), i) != hd.rows.end()) continue;
    lefts.push_back(rows[i].words[0].bbox.x0);
  }
  for (const auto& w : page.words) {
    if (!w.text.empty()) char_w.push_back(static_cast<double>(w.bbox.width()) / w.text.size());
  }
  const double indent = params.indent_min.value_or(1.5 * median_of(char_w));
  m.rows = merge_indented_continuations(std::move(rows), median_of(lefts), indent, hd.rows);
  return m;
}

std::string to_json(const LayoutModel& m) {
  using nlohmann::ordered_json;
  ordered_json rows = ordered_json::array();
  for (const auto& r : m.rows) {
    ordered_json j;
    j["words"] = r.word_ids;
    j["label"] = r.label_text;
    j["continuation_of"] = r.continuation_of ? ordered_json(*r.continuation_of) : ordered_json(nullptr);
    j["baseline_y"] = r.baseline_y;
    j["chain_merged"] = r.chain_merged;
    if (r.orphan_continuation) j["orphan_continuation"] = true;
    rows.push_back(std::move(j));
  }
  ordered_json regions = ordered_json::array();
  for (const auto& b : m.table_regions) regions.push_back({b.x0, b.y0, b.x1, b.y1});
  ordered_json root;
  root["page_size"] = {{"w", m.width}, {"h", m.height}};
  root["h_delims"] = m.h_delims;
  root["v_delims"] = m.v_delims;
  root["table_regions"] = std::move(regions);
  root["rows"] = std::move(rows);
  root["headers"] = m.headers;
  root["header_indeterminate"] = m.header_indeterminate;
  return root.dump(1) + "\n";
}

LayoutModel from_json(std::string_view text, const ocr::OcrPage& page) {
  using nlohmann::json;
  LayoutModel m;
  try {
    const json root = json::parse(text.begin(), text.end());
    m.width = root.at("page_size").at("w").get<int>();
    m.height = root.at("page_size").at("h").get<int>();
    m.h_delims = root.at("h_delims").get<std::vector<double>>();
    m.v_delims = root.at("v_delims").get<std::vector<double>>();
    for (const auto& b : root.at("table_regions")) {
      m.table_regions.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
    }
    for (const auto& j : root.at("rows")) {
      Row r;
      r.word_ids = j.at("words").get<std::vector<int>>();
      for (int id : r.word_ids) {
        if (id < 0 || id >= static_cast<int>(page.words.size())) {
          throw Error(ErrorCode::kParse, fmt::format("layout row references word {}", id));
        }
        r.words.push_back(page.words[id]);
      }
      r.label_text = j.at("label").get<std::string>();
      if (!j.at("continuation_of").is_null()) r.continuation_of = j.at("continuation_of").get<int>();
      r.baseline_y = j.at("baseline_y").get<double>();
      r.chain_merged = j.at("chain_merged").get<bool>();
      r.orphan_continuation = j.value("orphan_continuation", false);
      m.rows.push_back(std::move(r));
    }
    m.headers = root.at("headers").get<std::vector<int>>();
    m.header_indeterminate = root.at("header_indeterminate").get<bool>();
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("layout: malformed JSON at byte {}", e.byte));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("layout: {}", e.what()));
  }
  return m;
}

Raster render_annotated(const Raster& img, const LayoutModel& model) {
  Raster out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, img.channels() == 3 ? c : 0);
    }
  }
  auto paint = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= out.width() || y >= out.height()) return;
    out.at(x, y, 0) = r;
    out.at(x, y, 1) = g;
    out.at(x, y, 2) = b;
  };
  for (double yd : model.h_delims) {
    const int y = static_cast<int>(std::lround(yd));
    for (int t = -1; t <= 1; ++t) {
      for (int x = 0; x < out.width(); ++x) paint(x, y + t, 0, 200, 0);
    }
  }
  for (double xd : model.v_delims) {
    const int x = static_cast<int>(std::lround(xd));
    for (int t = -1; t <= 1; ++t) {
      for (int y = 0; y < out.height(); ++y) paint(x + t, y, 0, 0, 255);
    }
  }
  return out;
}

}  // namespace ledgerscan::layout
