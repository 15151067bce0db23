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

#include <random>
#include <set>

#include "doctest.h"
#include "ledgerscan/error.hpp"
#include "ledgerscan/ocr.hpp"

using namespace ledgerscan;
using namespace ledgerscan::ocr;

namespace {

OcrPage random_page(std::mt19937_64& rng, int words) {
  OcrPage p;
  p.engine = "test";
  p.width = 1000;
  p.height = 1400;
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789,.";
  int y = 20;
  int x = 20;
  for (int i = 0; i < words; ++i) {
    OcrWord w;
    const int len = 1 + static_cast<int>(rng() % 9);
    for (int k = 0; k < len; ++k) w.text += alphabet[rng() % alphabet.size()];
    const int ww = 8 * len + static_cast<int>(rng() % 5);
    if (x + ww > p.width - 20) {
      x = 20;
      y += 30 + static_cast<int>(rng() % 20);
    }
    w.bbox = {x, y, x + ww, y + 14 + static_cast<int>(rng() % 4)};
    w.confidence = static_cast<double>(rng() % 1000) / 1000.0;
    x += ww + 10 + static_cast<int>(rng() % 10);
    p.words.push_back(std::move(w));
  }
  return p;
}

void check_forest(const OcrPage& p) {
  std::map<int, int> line_para;
  std::map<int, int> para_block;
  for (const auto& w : p.words) {
    if (w.line && w.paragraph) {
      auto [it, fresh] = line_para.emplace(*w.line, *w.paragraph);
      CHECK((fresh || it->second == *w.paragraph));
    }
    if (w.paragraph && w.block) {
      auto [it, fresh] = para_block.emplace(*w.paragraph, *w.block);
      CHECK((fresh || it->second == *w.block));
    }
  }
}

}  // namespace

TEST_CASE("native payloads normalize losslessly") {
  std::mt19937_64 rng(42);
  for (Engine e : {Engine::kGoogle, Engine::kAmazon, Engine::kMicrosoft, Engine::kTesseract}) {
    for (int trial = 0; trial < 10; ++trial) {
      const OcrPage src = random_page(rng, 5 + static_cast<int>(rng() % 60));
      const std::string native = encode_native(e, src);
      NormalizeOptions opt;
      opt.page_size = std::pair{src.width, src.height};
      const OcrPage out = normalize(e, native, opt);
      CHECK(out.engine == to_string(e));
      REQUIRE(out.words.size() == src.words.size());
      std::multiset<std::tuple<std::string, int, int, int, int>> a, b;
      for (std::size_t i = 0; i < src.words.size(); ++i) {
        const auto& s = src.words[i];
        a.insert({s.text, s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1});
        const auto& o = out.words[i];
        b.insert({o.text, o.bbox.x0, o.bbox.y0, o.bbox.x1, o.bbox.y1});
      }
      CHECK(a == b);
      for (std::size_t i = 0; i < src.words.size(); ++i) {
        CHECK(out.words[i].confidence == doctest::Approx(src.words[i].confidence).epsilon(1e-9));
      }
      check_invariants(out);
      check_forest(out);
      for (const auto& w : out.words) {
        CHECK(w.line.has_value());
        CHECK(w.paragraph.has_value());
        CHECK(w.block.has_value());
      }
    }
  }
}

TEST_CASE("inferred levels depend on the engine") {
  std::mt19937_64 rng(7);
  const OcrPage src = random_page(rng, 30);
  NormalizeOptions opt;
  opt.page_size = std::pair{src.width, src.height};
  const OcrPage g = normalize(Engine::kGoogle, encode_native(Engine::kGoogle, src), opt);
  CHECK(g.inferred_levels == std::vector<std::string>{"line"});
  const OcrPage m = normalize(Engine::kMicrosoft, encode_native(Engine::kMicrosoft, src), opt);
  CHECK(std::find(m.inferred_levels.begin(), m.inferred_levels.end(), "paragraph") !=
        m.inferred_levels.end());
  CHECK(std::find(m.inferred_levels.begin(), m.inferred_levels.end(), "line") ==
        m.inferred_levels.end());
}

TEST_CASE("normalize errors") {
  std::mt19937_64 rng(9);
  const std::string native = encode_native(Engine::kGoogle, random_page(rng, 10));
  try {
    normalize(Engine::kGoogle, native.substr(0, native.size() / 2));
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
  const std::string amazon = encode_native(Engine::kAmazon, random_page(rng, 3));
  CHECK_THROWS_AS(normalize(Engine::kAmazon, amazon), Error);
  CHECK_THROWS_AS(normalize("abbyy", "{}"), Error);
  CHECK_FALSE(parse_engine("abbyy"));
}

TEST_CASE("unified json round trip") {
  std::mt19937_64 rng(3);
  OcrPage p = random_page(rng, 25);
  synthesize_lines(p);
  synthesize_paragraphs(p);
  p.words[0].char_confidence = {0.5, 0.25};
  p.tables.push_back({1, 2, {{0, 0, "a", {1, 1, 5, 5}}, {0, 1, "b", {5, 1, 9, 5}}}});
  CHECK(from_json(to_json(p)) == p);
  CHECK(to_json(from_json(to_json(p))) == to_json(p));
}

TEST_CASE("invariant violations are reported") {
  OcrPage p;
  p.width = 100;
  p.height = 100;
  p.words.push_back({"a", {10, 10, 5, 20}, 0.5});
  CHECK_THROWS_AS(check_invariants(p), Error);
  p.words[0].bbox = {10, 10, 20, 20};
  p.words[0].confidence = 1.5;
  CHECK_THROWS_AS(check_invariants(p), Error);
  p.words[0].confidence = 0.5;
  p.words[0].line = 0;
  p.words[0].paragraph = 0;
  p.words.push_back({"b", {30, 10, 40, 20}, 0.5, 0, 1});
  CHECK_THROWS_AS(check_invariants(p), Error);
}

TEST_CASE("synthesized lines follow vertical overlap") {
  OcrPage p;
  p.width = 500;
  p.height = 500;
  p.words = {{"b", {100, 10, 140, 24}, 1}, {"a", {10, 12, 60, 25}, 1}, {"c", {10, 50, 60, 64}, 1}};
  synthesize_lines(p);
  CHECK(p.words[0].line == p.words[1].line);
  CHECK(p.words[2].line != p.words[0].line);
  const auto order = reading_order(p);
  CHECK(order == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("mock engine") {
  std::vector<TruthWord> truth{{"109", {10, 10, 40, 24}}, {"Specie", {60, 10, 120, 24}}};
  NoiseModel clean;
  const OcrPage exact = mock_ocr(truth, 200, 100, clean);
  REQUIRE(exact.words.size() == 2);
  CHECK(exact.words[0].text == "109");
  CHECK(exact.words[0].bbox == truth[0].bbox);
  CHECK(exact.words[0].confidence >= 0.99);

  NoiseModel forced;
  forced.substitution_prob = 1.0;
  forced.random_unmapped = false;
  forced.confusion_table = {{'0', 'O'}};
  CHECK(mock_ocr(truth, 200, 100, forced).words[0].text == "1O9");
  forced.confusion_table = NoiseModel::default_confusions();
  CHECK(mock_ocr(truth, 200, 100, forced).words[0].text == "lO9");

  NoiseModel noisy;
  noisy.substitution_prob = 0.3;
  noisy.deletion_prob = 0.1;
  noisy.seed = 5;
  std::vector<TruthWord> many;
  for (int i = 0; i < 200; ++i) many.push_back({"1,234,567.89", {10, 10 + i * 20, 100, 24 + i * 20}});
  const OcrPage a = mock_ocr(many, 200, 5000, noisy);
  CHECK(to_json(a) == to_json(mock_ocr(many, 200, 5000, noisy)));
  noisy.seed = 6;
  CHECK(to_json(a) != to_json(mock_ocr(many, 200, 5000, noisy)));
  check_invariants(a);

  NoiseModel bad;
  bad.substitution_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("truth words json round trip") {
  std::vector<TruthWord> truth{{"a,b \"c\"", {1, 2, 3, 4}}};
  int w = 0, h = 0;
  CHECK(truth_words_from_json(truth_words_to_json(truth, 10, 20), &w, &h) == truth);
  CHECK(w == 10);
  CHECK(h == 20);
}
