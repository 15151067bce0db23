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

// Accuracy measures against reviewed records and the holdout split used by
// the tuner.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ledgerscan/extract.hpp"

namespace ledgerscan::metrics {

struct Metric {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;
};

/// Unit-cost Levenshtein distance over the reference length, clamped to 1.
/// Throws on an empty reference.
double cer(std::string_view hypothesis, std::string_view reference);

/// Share of truth fields (rows with an amount) reproduced exactly. Fields are
/// keyed by normalized label and occurrence, so "Total" on both sides counts
/// twice and row renumbering does not matter.
Metric field_accuracy(const std::vector<extract::CsvRow>& records,
                      const std::vector<extract::CsvRow>& truth);

/// Share of injected faults that raised a flag.
Metric flag_recall(std::size_t detected, std::size_t injected);

/// 1 - accuracy^n: chance that a run of n characters holds at least one error.
double page_error_probability(double char_accuracy, std::size_t n_chars);

struct Split {
  std::vector<int> train;
  std::vector<int> holdout;
};

/// Seeded shuffle, then round(fraction * n) pages (at least one when the
/// fraction is positive) go to the holdout. Both halves come back sorted.
Split holdout_split(const std::vector<int>& pages, double fraction, std::uint64_t seed);

}  // namespace ledgerscan::metrics
