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

#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "ledgerscan/error.hpp"
#include "ledgerscan/extract.hpp"
#include "ledgerscan/metrics.hpp"
#include "ledgerscan/pipeline.hpp"
#include "ledgerscan/synth.hpp"
#include "support/fixtures.hpp"

using namespace ledgerscan;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fixture::TempDir dir{"pipeline"};
  fs::path images() const { return dir.path() / "images"; }
  fs::path cache() const { return dir.path() / "cache"; }
  fs::path conf() const { return images() / "pipeline.conf"; }

  explicit Corpus(int pages) {
    synth::CorpusOptions o;
    o.pages = pages;
    synth::write_corpus(images(), o);
  }
  Workspace open() const { return Workspace::open(images(), cache()); }
};

ErrorCode config_error(const std::string& text, const fs::path& base = ".") {
  try {
    pipeline::build_config(pipeline::parse_config_entries(text), base);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;  // sentinel: nothing thrown
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config entries parse dotted keys and reject malformed lines") {
  const auto e = pipeline::parse_config_entries("# c\nimage_ops = grayscale, binarize  # trailing\n\n"
                                                "image_ops.binarize.method = sauvola\nengines = mock\n");
  CHECK(e.at("image_ops") == "grayscale, binarize");
  CHECK(e.at("image_ops.binarize.method") == "sauvola");
  CHECK_THROWS_AS(pipeline::parse_config_entries("no equals sign\n"), Error);
  CHECK_THROWS_AS(pipeline::parse_config_entries("a = 1\na = 2\n"), Error);
}

TEST_CASE("config validation rejects unknown ops, params and keys") {
  CHECK(config_error("engines = mock\nimage_ops = grayscale, sharpen9\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nimage_ops = binarize\nimage_ops.binarize.window = 4\n"
                     "image_ops.binarize.method = sauvola\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nimage_ops = binarize\nimage_ops.binarize.tau = 300\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nimage_ops = binarize\nimage_ops.binarize.method = magic\n") ==
        ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nimage_ops = binarize\nimage_ops.binarize.sharpness = 2\n") ==
        ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nimage_ops = grayscale\nimage_ops.deskew.step = 1\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nlayout.bogus = 1\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = abbyy\n") == ErrorCode::kConfig);
  CHECK(config_error("image_ops = grayscale\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nextract.vocabulary = missing.tsv\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nimage_ops = grayscale, grayscale\n") == ErrorCode::kConfig);
  CHECK(config_error("engines = mock\nworkers = many\n") == ErrorCode::kConfig);

  const auto ok = pipeline::build_config(
      pipeline::parse_config_entries("engines = google, mock\nimage_ops = grayscale, morphology:open, "
                                     "morphology:close\nimage_ops.morphology:open.op = erode\n"
                                     "image_ops.morphology:close.op = dilate\nensemble.weights = confidence\n"),
      ".");
  REQUIRE(ok.image_ops.size() == 3);
  CHECK(ok.image_ops[1].params.at("op") == "erode");
  CHECK(ok.image_ops[2].params.at("op") == "dilate");
  CHECK(ok.engines == std::vector<std::string>{"google", "mock"});
}

TEST_CASE("invalid config is rejected before any page is processed") {
  Corpus c(2);
  auto ws = c.open();
  std::ofstream(c.dir.path() / "bad.conf") << "engines = google\nimage_ops = grayscale, sharpen9\n";
  CHECK_THROWS_AS(pipeline::load_config(c.dir.path() / "bad.conf"), Error);
  for (int id : ws.page_ids()) {
    CHECK_FALSE(ws.has_artifact(id, "processed"));
    CHECK_FALSE(ws.has_artifact(id, "extracted"));
  }
}

TEST_CASE("image ops compose and track the raw-to-processed transform") {
  const Raster page = fixture::text_page(300, 200, 5);
  SUBCASE("no ops leaves the raw image") {
    const auto p = pipeline::apply_image_ops(page, {});
    CHECK(p.image == page);
    CHECK(p.transform.is_identity());
  }
  SUBCASE("fore edge crop is a translation") {
    Raster framed(360, 260, 1, 0);
    for (int y = 0; y < 200; ++y) {
      for (int x = 0; x < 300; ++x) framed.at(x + 30, y + 30) = page.at(x, y) < 128 ? 40 : 240;
    }
    const auto p = pipeline::apply_image_ops(framed, {{"fore_edge", {}}});
    REQUIRE(p.image.width() < framed.width());
    const Point o = p.transform.apply({40, 50});
    CHECK(o.x < 40);
    CHECK(o.y < 50);
    CHECK(o.x - 40 == doctest::Approx(o.y - 50));
  }
  SUBCASE("color input needs grayscale first") {
    Raster color(20, 10, 3, 200);
    CHECK_THROWS_AS(pipeline::apply_image_ops(color, {{"binarize", {}}}), Error);
    CHECK(pipeline::apply_image_ops(color, {{"grayscale", {}}, {"binarize", {}}}).image.is_binary());
  }
}

TEST_CASE("omitting image ops runs recognition on the raw image") {
  Corpus c(1);
  auto ws = c.open();
  auto entries = pipeline::parse_config_entries(read_file(c.conf()));
  entries.erase("image_ops");
  entries.erase("image_ops.binarize.method");
  const auto config = pipeline::build_config(entries, c.images());
  const auto report = pipeline::run_pipeline(ws, config, {1}, {});
  REQUIRE(report.failures() == 0);
  const auto stored = ws.load_artifact(1, "processed").first;
  const auto raw = encode_png(ws.raw_image(1));
  CHECK(stored == std::string(raw.begin(), raw.end()));
  CHECK(ws.entry(1).transform.is_identity());
}

TEST_CASE("three-page run stores records and flags and reports matching totals") {
  Corpus c(3);
  auto ws = c.open();
  const auto config = pipeline::load_config(c.conf());
  const auto report = pipeline::run_pipeline(ws, config, ws.page_ids(), {});
  REQUIRE(report.pages.size() == 3);
  CHECK(report.failures() == 0);
  for (const auto& p : report.pages) {
    const auto records = ws.load_artifact(p.page_id, "records").first;
    const auto flags = extract::flags_from_json(ws.load_artifact(p.page_id, "flags").first);
    CHECK(p.records == count_lines(records) - 1);
    std::size_t red = 0;
    for (const auto& f : flags) red += f.severity == extract::Severity::kRed;
    CHECK(p.red == red);
    CHECK(p.yellow == flags.size() - red);
    const auto acc = metrics::field_accuracy(extract::read_records_csv(records),
                                             extract::read_records_csv(ws.load_artifact(p.page_id, "truth").first));
    CHECK(acc.value >= 0.9);
  }
  const std::string text = report.to_text();
  CHECK(text.find("3 pages, 0 failed") != std::string::npos);

  SUBCASE("a rerun is byte-identical") {
    std::vector<std::string> before;
    for (int id : ws.page_ids()) {
      before.push_back(ws.load_artifact(id, "records").first + ws.load_artifact(id, "flags").first);
    }
    setenv("PIPELINE_WORKERS", "2", 1);
    const auto again = pipeline::run_pipeline(ws, config, ws.page_ids(), {});
    unsetenv("PIPELINE_WORKERS");
    CHECK(again.failures() == 0);
    for (int id : ws.page_ids()) {
      CHECK(ws.load_artifact(id, "records").first + ws.load_artifact(id, "flags").first == before[id - 1]);
    }
  }
  SUBCASE("cached OCR is reused while newer than its inputs") {
    const auto v = ws.entry(1).artifacts.at("ocr:google").version;
    pipeline::run_pipeline(ws, config, {1}, {});
    CHECK(ws.entry(1).artifacts.at("ocr:google").version == v);
  }
}

TEST_CASE("a failing page does not abort the run") {
  Corpus c(2);
  auto ws = c.open();
  auto entries = pipeline::parse_config_entries(read_file(c.conf()));
  entries["engines"] = "google, amazon";
  const auto config = pipeline::build_config(entries, c.images());
  const auto report = pipeline::run_pipeline(ws, config, ws.page_ids(), {});
  CHECK(report.failures() == 2);
  CHECK(report.pages[0].error.find("engine unavailable") != std::string::npos);

  const auto good = pipeline::load_config(c.conf());
  ws.store_artifact(2, "native:google", "{not json");
  const auto mixed = pipeline::run_pipeline(ws, good, ws.page_ids(), {});
  CHECK(mixed.pages[0].ok);
  CHECK_FALSE(mixed.pages[1].ok);
  CHECK(ws.has_artifact(1, "records"));
  CHECK_FALSE(ws.has_artifact(2, "records"));
  CHECK_THROWS_AS(pipeline::run_pipeline(ws, good, {}, {}), Error);
}

TEST_CASE("mock engine reads the page's truth words") {
  Corpus c(1);
  auto ws = c.open();
  auto entries = pipeline::parse_config_entries(read_file(c.conf()));
  entries["engines"] = "mock";
  const auto config = pipeline::build_config(entries, c.images());
  const auto page = pipeline::run_ocr(ws, 1, "mock", config);
  CHECK(page.words.size() == ocr::truth_words_from_json(ws.load_artifact(1, "mock_truth").first).size());
  CHECK(pipeline::run_pipeline(ws, config, {1}, {}).failures() == 0);
}

TEST_CASE("flag report orders pages by red count") {
  Corpus c(3);
  auto ws = c.open();
  CHECK(pipeline::render_flag_report(ws, ws.page_ids()).find("page 0002: not validated") != std::string::npos);
  for (int id : ws.page_ids()) ws.store_artifact(id, "flags", extract::flags_to_json({}));
  CHECK(pipeline::render_flag_report(ws, ws.page_ids()).rfind("0 red, 0 yellow\n", 0) == 0);

  using extract::FlagCode;
  ws.store_artifact(3, "flags",
                    extract::flags_to_json({{FlagCode::kIdentityMismatch, extract::Severity::kRed, "assets", 4}}));
  ws.store_artifact(1, "flags",
                    extract::flags_to_json({{FlagCode::kUnknownLabel, extract::Severity::kYellow, "x", 2}}));
  const auto text = pipeline::render_flag_report(ws, ws.page_ids());
  CHECK(text.rfind("1 red, 1 yellow\n", 0) == 0);
  CHECK(text.find("IDENTITY_MISMATCH") != std::string::npos);
  CHECK(text.find("page 0003") < text.find("page 0001"));
  CHECK(text.find("page 0001") < text.find("page 0002"));
}

TEST_CASE("page selection and worker count") {
  CHECK(pipeline::parse_page_selection("1-3,5", 6) == std::vector<int>{1, 2, 3, 5});
  CHECK(pipeline::parse_page_selection("2,2,1", 3) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(pipeline::parse_page_selection("0-2", 5), Error);
  CHECK_THROWS_AS(pipeline::parse_page_selection("4-9", 5), Error);
  CHECK_THROWS_AS(pipeline::parse_page_selection("x", 5), Error);
  CHECK_THROWS_AS(pipeline::parse_page_selection("", 5), Error);

  unsetenv("PIPELINE_WORKERS");
  CHECK(pipeline::worker_count(3) == 3);
  CHECK(pipeline::worker_count(0) >= 1);
  setenv("PIPELINE_WORKERS", "5", 1);
  CHECK(pipeline::worker_count(3) == 5);
  setenv("PIPELINE_WORKERS", "zero", 1);
  CHECK_THROWS_AS(pipeline::worker_count(3), Error);
  unsetenv("PIPELINE_WORKERS");
}

TEST_CASE("per-page evaluation applies parameter overrides") {
  Corpus c(1);
  auto ws = c.open();
  const auto entries = pipeline::parse_config_entries(read_file(c.conf()));
  const double base = pipeline::evaluate_page(ws, entries, c.images(), {}, 1, "field_accuracy");
  CHECK(base >= 0.9);
  CHECK(pipeline::evaluate_page(ws, entries, c.images(), {}, 1, "cer") <= 0.05);
  const double noisy = pipeline::evaluate_page(
      ws, entries, c.images(), {{"engines", "mock"}, {"ocr.mock.substitution", "0.5"}}, 1, "field_accuracy");
  CHECK(noisy < 0.5);
  CHECK_THROWS_AS(pipeline::evaluate_page(ws, entries, c.images(), {{"image_ops.binarize.tau", "-4"}}, 1,
                                          "field_accuracy"),
                  Error);
}
