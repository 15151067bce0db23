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

#include <map>
#include <mutex>
#include <random>
#include <set>

#include "doctest.h"
#include "ledgerscan/error.hpp"
#include "ledgerscan/metrics.hpp"
#include "ledgerscan/tuning.hpp"
#include "support/oracles.hpp"

using namespace ledgerscan;
using namespace ledgerscan::metrics;
using namespace ledgerscan::tuning;

TEST_CASE("cer") {
  CHECK(cer("abc", "abc") == 0.0);
  CHECK(cer("ab", "abc") == doctest::Approx(1.0 / 3.0));
  CHECK(cer("", "abc") == 1.0);
  CHECK(cer("abcdefgh", "a") == 1.0);
  CHECK_THROWS_AS(cer("a", ""), Error);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    auto gen = [&](int min_len) {
      std::string s;
      const int len = min_len + static_cast<int>(rng() % 50);
      for (int k = 0; k < len; ++k) s += static_cast<char>('a' + rng() % 5);
      return s;
    };
    const std::string h = gen(0), r = gen(1);
    const double want = std::min(1.0, double(oracle::levenshtein(h, r)) / double(r.size()));
    CHECK(cer(h, r) == doctest::Approx(want));
  }
}

TEST_CASE("field accuracy") {
  using extract::CsvRow;
  std::vector<CsvRow> truth;
  for (int i = 0; i < 10; ++i) truth.push_back({i, "Item " + std::to_string(i), "", std::to_string(i + 1), {}});
  CHECK(field_accuracy(truth, truth).value == 1.0);
  auto off = truth;
  off[3].amount = "99";
  CHECK(field_accuracy(off, truth).value == doctest::Approx(0.9));
  auto missing = truth;
  missing.pop_back();
  CHECK(field_accuracy(missing, truth).value == doctest::Approx(0.9));
  std::vector<CsvRow> totals{{0, "Total", "", "5", {}}, {1, "Total", "", "5", {}}};
  CHECK(field_accuracy({totals[0]}, totals).value == doctest::Approx(0.5));
  CHECK_THROWS_AS(field_accuracy(truth, {}), Error);
  CHECK(flag_recall(3, 4).value == doctest::Approx(0.75));
}

TEST_CASE("page error probability") {
  CHECK(page_error_probability(0.95, 60) == doctest::Approx(0.9539).epsilon(0.0005));
  CHECK(page_error_probability(1.0, 1000) == 0.0);
  CHECK(page_error_probability(0.5, 1) == doctest::Approx(0.5));
  for (std::size_t n = 1; n < 100; ++n) {
    CHECK(page_error_probability(0.9, n + 1) > page_error_probability(0.9, n));
  }
  for (int a = 30; a < 99; ++a) {
    CHECK(page_error_probability((a + 1) / 100.0, 10) < page_error_probability(a / 100.0, 10));
  }
  CHECK_THROWS_AS(page_error_probability(1.5, 3), Error);
}

TEST_CASE("holdout split") {
  std::vector<int> pages{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const Split s = holdout_split(pages, 0.2, 42);
  CHECK(s.train.size() == 8);
  CHECK(s.holdout.size() == 2);
  std::set<int> all(s.train.begin(), s.train.end());
  for (int h : s.holdout) CHECK(all.insert(h).second);
  CHECK(all.size() == 10);
  const Split again = holdout_split(pages, 0.2, 42);
  CHECK(again.train == s.train);
  CHECK(again.holdout == s.holdout);
  CHECK(holdout_split(pages, 0.0, 1).holdout.empty());
  CHECK(holdout_split({1, 2, 3}, 0.01, 1).holdout.size() == 1);
  CHECK_THROWS_AS(holdout_split(pages, 1.0, 1), Error);
  CHECK_THROWS_AS(holdout_split({}, 0.2, 1), Error);
}

TEST_CASE("spec parsing and grid expansion") {
  const auto spec = parse_tuning_spec(
      "# comment\nobjective = cer\nholdout_fraction = 0.25\nseed = 3\n"
      "param a = 1..5 step 2\nparam b = x, y\n");
  CHECK(spec.objective == "cer");
  CHECK(spec.minimize());
  CHECK(spec.seed == 3);
  const auto grid = expand_grid(spec);
  REQUIRE(grid.size() == 6);
  CHECK(grid[0] == ParamSet{{"a", "1"}, {"b", "x"}});
  CHECK(grid[1] == ParamSet{{"a", "1"}, {"b", "y"}});
  CHECK(grid[5] == ParamSet{{"a", "5"}, {"b", "y"}});
  CHECK_THROWS_AS(parse_tuning_spec("objective = cer\n"), Error);
  CHECK_THROWS_AS(parse_tuning_spec("param a = 5..1\n"), Error);
  CHECK_THROWS_AS(parse_tuning_spec("bogus = 1\nparam a = 1\n"), Error);
}

TEST_CASE("grid search") {
  TuningSpec spec;
  spec.parameters = {{"x", {"1", "2", "3", "4", "5"}}};
  spec.holdout_fraction = 0.3;
  spec.seed = 9;
  std::vector<int> pages{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::mutex mu;
  std::map<int, int> calls;
  auto eval = [&](const ParamSet& p, int page) {
    {
      std::lock_guard lock(mu);
      ++calls[page];
    }
    const int x = std::stoi(p[0].second);
    if (x == 5) throw std::runtime_error("boom");
    return -std::abs(x - 3) + 0.01 * page;
  };
  auto r = grid_search(spec, pages, eval, 4);
  CHECK(r.best == ParamSet{{"x", "3"}});
  CHECK(r.table.size() == 5);
  CHECK(r.table[4].failed);
  CHECK(r.holdout_metric.has_value());
  // Holdout pages are scored once, for the winner only.
  for (int h : r.holdout_pages) CHECK(calls[h] == 1);
  for (int t : r.train_pages) CHECK(calls[t] >= 4);

  const auto again = grid_search(spec, pages, eval, 1);
  CHECK(again.best == r.best);
  CHECK(again.train_metric == r.train_metric);
  CHECK(tuning_report_csv(spec, again) == tuning_report_csv(spec, r));

  TuningSpec one;
  one.parameters = {{"x", {"2"}}};
  one.holdout_fraction = 0.0;
  const auto single = grid_search(one, pages, eval);
  CHECK(single.best == ParamSet{{"x", "2"}});
  CHECK_FALSE(single.holdout_metric);
  CHECK(single.train_metric == doctest::Approx(-1 + 0.055));

  TuningSpec ties;
  ties.parameters = {{"x", {"2", "4"}}};
  ties.holdout_fraction = 0.0;
  CHECK(grid_search(ties, pages, eval, 2).best == ParamSet{{"x", "2"}});
  const std::string report = tuning_report_csv(spec, r);
  CHECK(report.rfind("x,objective_train\n", 0) == 0);
  CHECK(report.find("failed") != std::string::npos);
  CHECK(report.find("holdout=") != std::string::npos);
}
