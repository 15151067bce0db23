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

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "ledgerscan/error.hpp"
#include "ledgerscan/workspace.hpp"
#include "support/fixtures.hpp"
#include "support/pdf_writer.hpp"

using namespace ledgerscan;
namespace fs = std::filesystem;

namespace {

fs::path write_pdf(const fs::path& dir, const std::vector<fixture::PdfPageSpec>& pages) {
  const fs::path p = dir / "book.pdf";
  write_file_atomic(p, fixture::make_pdf(pages));
  return p;
}

std::vector<fixture::PdfPageSpec> three_pages() {
  std::vector<fixture::PdfPageSpec> pages;
  for (int i = 0; i < 3; ++i) {
    fixture::PdfPageSpec s;
    s.image = fixture::text_page(120, 160, i + 1);
    s.width_pt = 120 * 72.0 / 300.0;
    s.height_pt = 160 * 72.0 / 300.0;
    pages.push_back(std::move(s));
  }
  pages[2].encoding = fixture::PdfImageEncoding::kRaw;
  return pages;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("open a pdf workspace and extract pages") {
  fixture::TempDir tmp("ws");
  const auto pages = three_pages();
  const fs::path pdf = write_pdf(tmp.path(), pages);
  Workspace ws = Workspace::open(pdf, tmp.path() / "wk");
  CHECK(ws.page_ids().empty());
  CHECK(ws.describe().pages == 3);
  CHECK(ws.describe().dpi == 300);

  CHECK(ws.extract_images() == 3);
  for (int id = 1; id <= 3; ++id) {
    const fs::path raw = tmp.path() / "wk" / fmt::format("pages/{:04d}/raw.png", id);
    REQUIRE(fs::exists(raw));
    CHECK(ws.raw_image(id) == pages[id - 1].image);
  }
  std::vector<fs::file_time_type> mtimes;
  for (int id = 1; id <= 3; ++id) {
    mtimes.push_back(fs::last_write_time(tmp.path() / "wk" / fmt::format("pages/{:04d}/raw.png", id)));
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  CHECK(ws.extract_images() == 3);
  for (int id = 1; id <= 3; ++id) {
    CHECK(fs::last_write_time(tmp.path() / "wk" / fmt::format("pages/{:04d}/raw.png", id)) == mtimes[id - 1]);
  }

  Workspace again = Workspace::open(pdf, tmp.path() / "wk");
  CHECK(again.manifest() == ws.manifest());
  const auto d = again.describe();
  CHECK(d.extracted == 3);
  CHECK(d.sizes[0] == std::pair{120, 160});
}

TEST_CASE("pages are resampled to the requested dpi") {
  fixture::TempDir tmp("ws");
  std::vector<fixture::PdfPageSpec> pages(1);
  pages[0].image = fixture::text_page(100, 100, 3);
  pages[0].width_pt = 72;
  pages[0].height_pt = 36;
  Workspace ws = Workspace::open(write_pdf(tmp.path(), pages), tmp.path() / "wk", 150);
  ws.extract_images();
  CHECK(ws.entry(1).width == 150);
  CHECK(ws.entry(1).height == 75);
}

TEST_CASE("corrupt pdf pages are marked failed") {
  fixture::TempDir tmp("ws");
  auto pages = three_pages();
  pages[1].encoding = fixture::PdfImageEncoding::kCorruptFlate;
  pages[2].encoding = fixture::PdfImageEncoding::kPng;
  Workspace ws = Workspace::open(write_pdf(tmp.path(), pages), tmp.path() / "wk");
  CHECK(ws.extract_images() == 1);
  CHECK(ws.entry(1).status == "ok");
  CHECK(ws.entry(2).status == "failed");
  CHECK_FALSE(ws.entry(2).error.empty());
  CHECK(ws.entry(3).status == "failed");
}

TEST_CASE("image directory workspace") {
  fixture::TempDir tmp("ws");
  const fs::path scans = tmp.path() / "scans";
  fs::create_directories(scans);
  for (int i = 3; i >= 1; --i) {
    write_png(fixture::text_page(80, 60 + i, i), scans / fmt::format("{:04d}.png", i));
  }
  write_file_atomic(scans / "0002.google.native", "{\"responses\":[]}");
  write_file_atomic(scans / "0002.truth.csv", "row,label,raw_value,amount,flags\n");
  write_file_atomic(scans / "notes.txt", "ignored");
  Workspace ws = Workspace::open(scans, tmp.path() / "wk");
  REQUIRE(ws.page_ids() == std::vector<int>{1, 2, 3});
  for (int i = 1; i <= 3; ++i) CHECK(ws.entry(i).height == 60 + i);
  CHECK(ws.has_artifact(2, "native:google"));
  CHECK(ws.has_artifact(2, "truth"));
  CHECK_FALSE(ws.has_artifact(1, "truth"));
  CHECK(code_of([&] { ws.extract_images(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("open errors") {
  fixture::TempDir tmp("ws");
  CHECK(code_of([&] { Workspace::open(tmp.path() / "missing.pdf", tmp.path() / "wk"); }) ==
        ErrorCode::kNotFound);
  write_file_atomic(tmp.path() / "x.txt", "hello");
  CHECK(code_of([&] { Workspace::open(tmp.path() / "x.txt", tmp.path() / "wk"); }) ==
        ErrorCode::kInvalidArgument);
  const fs::path pdf = write_pdf(tmp.path(), three_pages());
  write_file_atomic(tmp.path() / "blocker", "file");
  CHECK(code_of([&] { Workspace::open(pdf, tmp.path() / "blocker" / "wk"); }) == ErrorCode::kIo);
}

TEST_CASE("artifact store and load") {
  fixture::TempDir tmp("ws");
  Workspace ws = Workspace::open(write_pdf(tmp.path(), three_pages()), tmp.path() / "wk");
  ws.extract_images();
  std::uint64_t v = 0;
  for (int i = 0; i < 4; ++i) v = ws.store_artifact(1, "layout", "{}");
  CHECK(v == 4);
  CHECK(ws.store_artifact(1, "records", "row,label\n1,x\n") == 5);
  const auto [bytes, version] = ws.load_artifact(1, "records");
  CHECK(bytes == "row,label\n1,x\n");
  CHECK(version == 5);
  CHECK(ws.store_artifact(1, "ocr:google", "{}") == 6);
  CHECK(fs::exists(tmp.path() / "wk/pages/0001/ocr/google.json"));
  CHECK(code_of([&] { ws.load_artifact(1, "truth"); }) == ErrorCode::kNotYetProduced);
  CHECK(code_of([&] { ws.store_artifact(99, "records", "x"); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { ws.store_artifact(1, "bogus", "x"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { ws.store_artifact(1, "ocr:../x", "x"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { ws.store_artifact(1, "records", "y", 2); }) == ErrorCode::kConflict);
  CHECK(ws.load_artifact(1, "records").first == "row,label\n1,x\n");
  CHECK(Workspace::open_existing(tmp.path() / "wk").manifest() == ws.manifest());
}

TEST_CASE("manifest round trip on random manifests") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Manifest m;
    m.source = "/data/book " + std::to_string(rng() % 100) + ".pdf";
    m.source_kind = rng() % 2 ? "pdf" : "images";
    m.dpi = 72 + static_cast<int>(rng() % 600);
    m.config["image_ops.binarize.tau"] = std::to_string(rng() % 256);
    const int n = static_cast<int>(rng() % 6);
    for (int i = 1; i <= n; ++i) {
      PageEntry p;
      p.page_id = i;
      p.raw_image = rng() % 2 ? fmt::format("pages/{:04d}/raw.png", i) : "";
      p.status = rng() % 3 == 0 ? "failed" : "ok";
      p.error = p.status == "failed" ? "bad \"stream\"\n" : "";
      p.version = rng() % 1000;
      p.reviewed = rng() % 2;
      p.transform = {std::cos(0.1 * trial), std::sin(0.3), -12.25, 1e-9, 0.999999, 1.0 / 3.0};
      p.artifacts["ocr:google"] = {artifact_path(i, "ocr:google"), rng() % 50};
      m.pages.push_back(p);
    }
    CHECK(manifest_from_json(manifest_to_json(m)) == m);
  }
  CHECK_THROWS_AS(manifest_from_json("{\"pages\": ["), Error);
}

TEST_CASE("concurrent writers never expose torn payloads") {
  fixture::TempDir tmp("ws");
  Workspace ws = Workspace::open(write_pdf(tmp.path(), three_pages()), tmp.path() / "wk");
  ws.extract_images();
  // Payload k is k repeated 20000 times, so any mix of two is detectable.
  auto payload = [](int k) { return std::string(20000, static_cast<char>('a' + k % 26)); };
  ws.store_artifact(2, "layout", payload(0));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < 2; ++w) {
    threads.emplace_back([&, w] {
      for (int k = 1; k <= 60; ++k) ws.store_artifact(2, "layout", payload(k + w * 7));
    });
  }
  for (int r = 0; r < 3; ++r) {
    threads.emplace_back([&] {
      std::uint64_t last = 0;
      while (!done) {
        const auto [bytes, version] = ws.load_artifact(2, "layout");
        if (bytes.size() != 20000 || bytes.find_first_not_of(bytes[0]) != std::string::npos) ++bad;
        if (version < last) ++bad;
        last = version;
      }
    });
  }
  threads[0].join();
  threads[1].join();
  done = true;
  for (std::size_t i = 2; i < threads.size(); ++i) threads[i].join();
  CHECK(bad == 0);
  CHECK(ws.entry(2).version == 121);
  // Writes to other pages are unaffected.
  CHECK(ws.entry(1).version == 0);
}

TEST_CASE("audit log appends") {
  fixture::TempDir tmp("ws");
  Workspace ws = Workspace::open(write_pdf(tmp.path(), three_pages()), tmp.path() / "wk");
  ws.extract_images();
  CHECK(ws.read_audit(1).empty());
  ws.append_audit(1, "first");
  ws.append_audit(1, "second");
  CHECK(ws.read_audit(1) == std::vector<std::string>{"first", "second"});
}
