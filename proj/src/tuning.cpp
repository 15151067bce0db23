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

#include "ledgerscan/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <mutex>
#include <thread>

#include <fmt/core.h>

#include "ledgerscan/error.hpp"
#include "ledgerscan/metrics.hpp"

namespace ledgerscan::tuning {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_spec(int line, const std::string& what) {
  throw Error(ErrorCode::kConfig, fmt::format("tuning spec line {}: {}", line, what));
}

std::vector<std::string> expand_values(const std::string& text, int line) {
  std::vector<std::string> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    long lo = 0, hi = 0, step = 1;
    std::string rest = text.substr(dots + 2);
    const auto sp = rest.find("step");
    try {
      lo = std::stol(text.substr(0, dots));
      hi = std::stol(rest.substr(0, sp));
      if (sp != std::string::npos) step = std::stol(rest.substr(sp + 4));
    } catch (const std::exception&) {
      bad_spec(line, "bad range '" + text + "'");
    }
    if (step <= 0 || hi < lo) bad_spec(line, "empty range '" + text + "'");
    for (long v = lo; v <= hi; v += step) out.push_back(std::to_string(v));
    return out;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void TuningSpec::validate() const {
  if (parameters.empty()) throw Error(ErrorCode::kConfig, "tuning: empty parameter grid");
  std::set<std::string> names;
  for (const auto& p : parameters) {
    if (p.values.empty()) throw Error(ErrorCode::kConfig, "tuning: no candidates for " + p.name);
    if (!names.insert(p.name).second) throw Error(ErrorCode::kConfig, "tuning: duplicate " + p.name);
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "tuning: holdout_fraction outside [0,1)");
  }
}

TuningSpec parse_tuning_spec(std::string_view text) {
  TuningSpec spec;
  std::istringstream in{std::string(text)};
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad_spec(n, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("param ", 0) == 0) {
      spec.parameters.push_back({trim(key.substr(6)), expand_values(value, n)});
    } else if (key == "objective") {
      spec.objective = value;
    } else if (key == "holdout_fraction") {
      try {
        spec.holdout_fraction = std::stod(value);
      } catch (const std::exception&) {
        bad_spec(n, "bad holdout_fraction");
      }
    } else if (key == "seed") {
      try {
        spec.seed = std::stoull(value);
      } catch (const std::exception&) {
        bad_spec(n, "bad seed");
      }
    } else {
      bad_spec(n, "unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::vector<ParamSet> expand_grid(const TuningSpec& spec) {
  spec.validate();
  std::vector<ParamSet> grid{{}};
  for (const auto& p : spec.parameters) {
    std::vector<ParamSet> next;
    for (const auto& partial : grid) {
      for (const auto& v : p.values) {
        ParamSet s = partial;
        s.emplace_back(p.name, v);
        next.push_back(std::move(s));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

TuningResult grid_search(const TuningSpec& spec, const std::vector<int>& pages,
                         const Evaluator& evaluate, unsigned workers) {
  const auto grid = expand_grid(spec);
  const auto split = metrics::holdout_split(pages, spec.holdout_fraction, spec.seed);
  if (split.train.empty()) throw Error(ErrorCode::kConfig, "tuning: no pages left for training");
  const std::set<int> holdout(split.holdout.begin(), split.holdout.end());
  const double worst = spec.minimize() ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();

  TuningResult result;
  result.train_pages = split.train;
  result.holdout_pages = split.holdout;
  result.table.resize(grid.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      GridPoint& gp = result.table[i];
      gp.params = grid[i];
      try {
        double sum = 0;
        for (int page : split.train) {
          if (holdout.count(page)) {
            throw std::logic_error(fmt::format("holdout page {} reached training", page));
          }
          const double v = evaluate(grid[i], page);
          if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "objective is not finite");
          sum += v;
        }
        gp.train = sum / static_cast<double>(split.train.size());
      } catch (const std::logic_error&) {
        throw;
      } catch (const std::exception& e) {
        gp.failed = true;
        gp.error = e.what();
        gp.train = worst;
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(grid.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex mu;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        try {
          work();
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const double a = result.table[i].train, b = result.table[best].train;
    if (spec.minimize() ? a < b : a > b) best = i;
  }
  result.best = result.table[best].params;
  result.train_metric = result.table[best].train;
  if (!split.holdout.empty()) {
    double sum = 0;
    for (int page : split.holdout) sum += evaluate(result.best, page);
    result.holdout_metric = sum / static_cast<double>(split.holdout.size());
  }
  return result;
}

std::string tuning_report_csv(const TuningSpec& spec, const TuningResult& result) {
  std::string out;
  for (const auto& p : spec.parameters) out += p.name + ",";
  out += "objective_train\n";
  for (const auto& gp : result.table) {
    for (const auto& [name, value] : gp.params) out += value + ",";
    out += gp.failed ? std::string("failed") : fmt::format("{:.6f}", gp.train);
    out += "\n";
  }
  std::string best;
  for (const auto& [name, value] : result.best) best += fmt::format(" {}={}", name, value);
  out += fmt::format("# objective={} best{} train={:.6f} holdout={}\n", spec.objective, best,
                     result.train_metric,
                     result.holdout_metric ? fmt::format("{:.6f}", *result.holdout_metric) : "none");
  return out;
}

}  // namespace ledgerscan::tuning
