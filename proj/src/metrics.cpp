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

#include "ledgerscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/core.h>

#include "ledgerscan/error.hpp"

namespace ledgerscan::metrics {

double cer(std::string_view hyp, std::string_view ref) {
  if (ref.empty()) throw Error(ErrorCode::kInvalidArgument, "cer: empty reference");
  const double d = static_cast<double>(extract::edit_distance(hyp, ref));
  return std::min(1.0, d / static_cast<double>(ref.size()));
}

Metric field_accuracy(const std::vector<extract::CsvRow>& records,
                      const std::vector<extract::CsvRow>& truth) {
  using Key = std::pair<std::string, int>;
  auto keyed = [](const std::vector<extract::CsvRow>& rows) {
    std::map<Key, std::string> out;
    std::map<std::string, int> seen;
    for (const auto& r : rows) {
      if (r.amount.empty()) continue;
      const std::string label = extract::normalize_label(r.label);
      out[{label, seen[label]++}] = r.amount;
    }
    return out;
  };
  const auto want = keyed(truth);
  if (want.empty()) throw Error(ErrorCode::kInvalidArgument, "field_accuracy: empty truth");
  const auto got = keyed(records);
  std::size_t hits = 0;
  for (const auto& [k, v] : want) {
    auto it = got.find(k);
    if (it != got.end() && it->second == v) ++hits;
  }
  return {"field_accuracy", static_cast<double>(hits) / static_cast<double>(want.size()), want.size()};
}

Metric flag_recall(std::size_t detected, std::size_t injected) {
  if (injected == 0) throw Error(ErrorCode::kInvalidArgument, "flag_recall: nothing injected");
  if (detected > injected) throw Error(ErrorCode::kInvalidArgument, "flag_recall: detected > injected");
  return {"flag_recall", static_cast<double>(detected) / static_cast<double>(injected), injected};
}

double page_error_probability(double char_accuracy, std::size_t n_chars) {
  if (!(char_accuracy >= 0.0 && char_accuracy <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "page_error_probability: accuracy outside [0,1]");
  }
  return 1.0 - std::pow(char_accuracy, static_cast<double>(n_chars));
}

Split holdout_split(const std::vector<int>& pages, double fraction, std::uint64_t seed) {
  if (pages.empty()) throw Error(ErrorCode::kInvalidArgument, "holdout_split: no pages");
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("holdout_split: fraction {} outside [0,1)", fraction));
  }
  std::vector<int> order = pages;
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw Error(ErrorCode::kInvalidArgument, "holdout_split: duplicate page ids");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::size_t k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(order.size())));
  if (fraction > 0 && k == 0) k = 1;
  Split s;
  s.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace ledgerscan::metrics
