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

// Independent reference implementations used only by tests. Nothing here
// shares code with the library paths it checks: these are the slow, obvious
// versions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ledgerscan/raster.hpp"

namespace oracle {

using ledgerscan::Raster;

inline Raster random_gray(std::mt19937_64& rng, int w, int h) {
  Raster img = Raster::gray(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

inline Raster random_binary(std::mt19937_64& rng, int w, int h, int white_pct = 50) {
  Raster img = Raster::gray(w, h);
  for (auto& v : img.data()) v = static_cast<int>(rng() % 100) < white_pct ? 255 : 0;
  return img;
}

/// Otsu by exhaustive search: for every tau, split pixels into v <= tau and
/// v > tau, compute each class variance directly from the pixels, and keep
/// the smallest weighted sum (first tau on ties).
inline int otsu_bruteforce(const Raster& img) {
  const auto px = img.data();
  const double n = static_cast<double>(px.size());
  double best = INFINITY;
  int best_tau = 0;
  for (int tau = 0; tau < 256; ++tau) {
    double sum0 = 0, sum1 = 0, c0 = 0, c1 = 0;
    for (auto v : px) {
      if (v <= tau) { sum0 += v; c0 += 1; } else { sum1 += v; c1 += 1; }
    }
    const double m0 = c0 > 0 ? sum0 / c0 : 0, m1 = c1 > 0 ? sum1 / c1 : 0;
    double ss0 = 0, ss1 = 0;
    for (auto v : px) {
      if (v <= tau) ss0 += (v - m0) * (v - m0); else ss1 += (v - m1) * (v - m1);
    }
    // weight * class variance == class sum of squares / n
    const double intra = (ss0 + ss1) / n;
    if (intra < best) {
      best = intra;
      best_tau = tau;
    }
  }
  return best_tau;
}

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

struct WindowMoments {
  double mean;
  double stddev;
};

/// Direct per-pixel window statistics with reflect-101 padding.
inline WindowMoments window_moments(const Raster& img, int x, int y, int window) {
  const int half = window / 2;
  std::int64_t s = 0, q = 0, n = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const std::int64_t v = img.at(reflect101(x + dx, img.width()),
                                    reflect101(y + dy, img.height()));
      s += v;
      q += v * v;
      ++n;
    }
  }
  const double mean = double(s) / double(n);
  const double var = double(q * n - s * s) / (double(n) * double(n));
  return {mean, std::sqrt(std::max(0.0, var))};
}

/// T = m * (1 + k * (s / R - 1)); white iff v >= ceil(T).
inline Raster sauvola_naive(const Raster& img, int window, double k, double R) {
  Raster out = Raster::gray(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [m, s] = window_moments(img, x, y, window);
      const double t = m * (1.0 + k * (s / R - 1.0));
      out.at(x, y) = img.at(x, y) >= std::ceil(t) ? 255 : 0;
    }
  }
  return out;
}

/// T = (1-k) m + k M + k (s/s_max)(m - M); white iff v >= ceil(T).
inline Raster wolf_naive(const Raster& img, int window, double k) {
  double M = 255, s_max = 0;
  for (auto v : img.data()) M = std::min<double>(M, v);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      s_max = std::max(s_max, window_moments(img, x, y, window).stddev);
    }
  }
  Raster out = Raster::gray(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [m, s] = window_moments(img, x, y, window);
      const double ratio = s_max > 0 ? s / s_max : 0.0;
      const double t = (1.0 - k) * m + k * M + k * ratio * (m - M);
      out.at(x, y) = img.at(x, y) >= std::ceil(t) ? 255 : 0;
    }
  }
  return out;
}

/// Classic full-matrix Levenshtein distance.
inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

/// Recognizer for  "0" | [1-9][0-9]{0,2} ("," [0-9]{3})* ("." [0-9]{2})?
/// written as an explicit state walk rather than the production parser.
inline bool amount_grammar_accepts(const std::string& s) {
  if (s.empty()) return false;
  if (s == "0") return true;  // the bare zero takes no fraction
  std::string integer = s, cents;
  if (auto dot = s.find('.'); dot != std::string::npos) {
    integer = s.substr(0, dot);
    cents = s.substr(dot + 1);
    if (cents.size() != 2 || !std::isdigit(static_cast<unsigned char>(cents[0])) ||
        !std::isdigit(static_cast<unsigned char>(cents[1]))) {
      return false;
    }
  }
  std::vector<std::string> groups;
  std::string cur;
  for (char c : integer) {
    if (c == ',') { groups.push_back(cur); cur.clear(); }
    else if (std::isdigit(static_cast<unsigned char>(c))) cur += c;
    else return false;
  }
  groups.push_back(cur);
  if (groups[0].empty() || groups[0].size() > 3 || groups[0][0] == '0') return false;
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (groups[i].size() != 3) return false;
  }
  return true;
}

}  // namespace oracle
