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

// Exhaustive grid search over pipeline parameters with a holdout split.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ledgerscan::tuning {

struct Parameter {
  std::string name;
  std::vector<std::string> values;
};

struct TuningSpec {
  std::vector<Parameter> parameters;
  std::string objective = "field_accuracy";  // or cer, flag_recall, any name
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;

  /// cer is minimized, everything else maximized.
  bool minimize() const { return objective == "cer"; }
  void validate() const;
};

/// Plain-text spec:
///   objective = field_accuracy
///   holdout_fraction = 0.2
///   seed = 7
///   param image_ops.binarize.tau = 100..200 step 10
///   param image_ops.binarize.method = otsu, sauvola
TuningSpec parse_tuning_spec(std::string_view text);

using ParamSet = std::vector<std::pair<std::string, std::string>>;

/// Cartesian product, last parameter varying fastest.
std::vector<ParamSet> expand_grid(const TuningSpec& spec);

/// Scores one page under one parameter set. Exceptions mark the grid point
/// failed; it is then scored worst and the search goes on.
using Evaluator = std::function<double(const ParamSet&, int page)>;

struct GridPoint {
  ParamSet params;
  double train = 0.0;
  bool failed = false;
  std::string error;
};

struct TuningResult {
  ParamSet best;
  double train_metric = 0.0;
  std::optional<double> holdout_metric;
  std::vector<GridPoint> table;  // grid order
  std::vector<int> train_pages;
  std::vector<int> holdout_pages;
};

/// Grid points run in parallel (workers = 0 picks the hardware width); pages
/// within a point run in order. Ties go to the earliest grid point.
TuningResult grid_search(const TuningSpec& spec, const std::vector<int>& pages,
                         const Evaluator& evaluate, unsigned workers = 0);

/// `param1,...,paramK,objective_train` rows plus a trailing summary line.
std::string tuning_report_csv(const TuningSpec& spec, const TuningResult& result);

}  // namespace ledgerscan::tuning
