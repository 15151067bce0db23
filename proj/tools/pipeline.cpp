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

// Command-line front end: pipeline <command> --workspace W ...

#include <chrono>
#include <csignal>
#include <iostream>

#include <fmt/chrono.h>
#include <fmt/core.h>

#include "CLI11.hpp"
#include "ledgerscan/error.hpp"
#include "ledgerscan/pipeline.hpp"
#include "ledgerscan/review.hpp"
#include "ledgerscan/synth.hpp"
#include "ledgerscan/tuning.hpp"
#include "ledgerscan/workspace.hpp"

using namespace ledgerscan;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kFailures = 1, kBadConfig = 2;

struct Args {
  std::string workspace, source, config, pages, engine, spec, out, static_dir, host = "127.0.0.1";
  int dpi = 300, port = 8080, count = 10;
  std::uint64_t seed = 1900;
  double noise = 0.02;
};

review::ReviewServer* g_server = nullptr;

std::vector<int> selection(const Workspace& ws, const std::string& pages) {
  if (pages.empty()) return ws.page_ids();
  return pipeline::parse_page_selection(pages, static_cast<int>(ws.page_ids().size()));
}

int report_run(const pipeline::RunReport& r) {
  std::cout << r.to_text();
  return r.failures() ? kFailures : kOk;
}

int cmd_init(const Args& a) {
  auto ws = Workspace::open(a.source, a.workspace, a.dpi);
  const auto d = ws.describe();
  fmt::print("{} ({}): {} pages, {} with images, {} failed\n", d.source, d.source_kind, d.pages, d.extracted,
             d.failed);
  return kOk;
}

int cmd_extract_images(const Args& a) {
  auto ws = Workspace::open_existing(a.workspace);
  const auto n = ws.extract_images();
  const auto d = ws.describe();
  fmt::print("{} of {} pages have images, {} failed\n", n, d.pages, d.failed);
  return d.failed ? kFailures : kOk;
}

int cmd_run(const Args& a, pipeline::RunOptions options) {
  const auto config = pipeline::load_config(a.config);
  auto ws = Workspace::open_existing(a.workspace);
  ws.set_config(config.entries);
  return report_run(pipeline::run_pipeline(ws, config, selection(ws, a.pages), options));
}

int cmd_ocr(const Args& a) {
  auto config = pipeline::load_config(a.config);
  auto ws = Workspace::open_existing(a.workspace);
  int failures = 0;
  for (int id : selection(ws, a.pages)) {
    try {
      const auto page = pipeline::run_ocr(ws, id, a.engine, config);
      fmt::print("page {:04d}: {} words\n", id, page.words.size());
    } catch (const Error& e) {
      fmt::print("page {:04d}: FAILED {}\n", id, e.what());
      ++failures;
    }
  }
  return failures ? kFailures : kOk;
}

int cmd_tune(const Args& a) {
  const auto entries = pipeline::parse_config_entries(read_file(a.config));
  const fs::path base = fs::path(a.config).parent_path();
  pipeline::build_config(entries, base);  // the untuned config must be valid
  tuning::TuningSpec spec;
  try {
    spec = tuning::parse_tuning_spec(read_file(a.spec));
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  auto ws = Workspace::open_existing(a.workspace);
  std::vector<int> pages;
  for (int id : selection(ws, a.pages)) {
    if (ws.has_artifact(id, "truth")) pages.push_back(id);
  }
  if (pages.empty()) throw Error(ErrorCode::kNotYetProduced, "no selected page has ground truth");
  const auto result = tuning::grid_search(
      spec, pages,
      [&](const tuning::ParamSet& p, int page) {
        return pipeline::evaluate_page(ws, entries, base, p, page, spec.objective);
      },
      pipeline::worker_count(0));
  const std::string csv = tuning::tuning_report_csv(spec, result);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  const fs::path out = ws.root() / "tuning" / fmt::format("{:%Y%m%dT%H%M%S}.csv", fmt::gmtime(now));
  fs::create_directories(out.parent_path());
  write_file_atomic(out, csv);
  std::cout << csv;
  fmt::print("report: {}\n", out.string());
  return kOk;
}

int cmd_report(const Args& a) {
  auto ws = Workspace::open_existing(a.workspace);
  std::cout << pipeline::render_flag_report(ws, selection(ws, a.pages));
  return kOk;
}

int cmd_review(const Args& a) {
  const auto config = pipeline::load_config(a.config);
  review::ReviewService service(Workspace::open_existing(a.workspace), config);
  std::optional<fs::path> static_dir;
  if (!a.static_dir.empty()) static_dir = a.static_dir;
  review::ReviewServer server(service, static_dir);
  const int port = server.bind(a.host, a.port);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  fmt::print("review service on http://{}:{}/\n", a.host, port);
  std::fflush(stdout);
  server.serve();
  g_server = nullptr;
  return kOk;
}

int cmd_synth(const Args& a) {
  synth::CorpusOptions o;
  o.pages = a.count;
  o.seed = a.seed;
  o.substitution = a.noise;
  synth::write_corpus(a.out, o);
  fmt::print("wrote {} pages to {}\n", o.pages, a.out);
  return kOk;
}

int cmd_install_aws() {
  std::cerr << "Cloud OCR accounts are not provisioned by this tool.\n"
               "Run the engine yourself and save each page's response next to its image as\n"
               "  <stem>.amazon.native   (Textract DetectDocumentText JSON)\n"
               "then re-run `pipeline init`; recorded payloads are imported as native:amazon\n"
               "and read by `pipeline ocr --engine amazon`.\n";
  return kFailures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balance-sheet digitization pipeline"};
  app.require_subcommand(1);
  Args a;

  auto add_ws = [&](CLI::App* c) { c->add_option("--workspace,-w", a.workspace, "Workspace directory")->required(); };
  auto add_config = [&](CLI::App* c) { c->add_option("--config,-c", a.config, "Pipeline config")->required(); };
  auto add_pages = [&](CLI::App* c) { c->add_option("--pages,-p", a.pages, "Page selection, e.g. 1-50,60"); };

  auto* init = app.add_subcommand("init", "Create a workspace from a PDF or an image directory");
  add_ws(init);
  init->add_option("--source,-s", a.source, "PDF file or image directory")->required();
  init->add_option("--dpi", a.dpi, "Rasterization DPI for PDF sources")->check(CLI::Range(36, 1200));

  auto* extract_images = app.add_subcommand("extract-images", "Write page images from a PDF workspace");
  add_ws(extract_images);

  auto* process = app.add_subcommand("process", "Run every step on the selected pages");
  add_ws(process);
  add_config(process);
  add_pages(process);

  auto* ocr = app.add_subcommand("ocr", "Recognize pages with one engine");
  add_ws(ocr);
  add_config(ocr);
  add_pages(ocr);
  ocr->add_option("--engine,-e", a.engine, "Engine name")->required();

  auto* extract = app.add_subcommand("extract", "Image ops, OCR, layout and record extraction");
  add_ws(extract);
  add_config(extract);
  add_pages(extract);

  auto* validate = app.add_subcommand("validate", "Validate extracted records and store flags");
  add_ws(validate);
  add_config(validate);
  add_pages(validate);

  auto* tune = app.add_subcommand("tune", "Grid search over config parameters against ground truth");
  add_ws(tune);
  add_config(tune);
  add_pages(tune);
  tune->add_option("--spec,-s", a.spec, "Tuning spec")->required();

  auto* report = app.add_subcommand("report", "Summarize flags");
  add_ws(report);
  add_pages(report);

  auto* review = app.add_subcommand("review", "Serve the review API");
  add_ws(review);
  add_config(review);
  review->add_option("--port", a.port, "Port, 0 for any free port")->check(CLI::Range(0, 65535));
  review->add_option("--host", a.host, "Bind address");
  review->add_option("--static", a.static_dir, "Directory served at /");

  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic balance-sheet corpus");
  synth_cmd->add_option("--out,-o", a.out, "Output directory")->required();
  synth_cmd->add_option("--pages", a.count, "Page count")->check(CLI::Range(1, 1000));
  synth_cmd->add_option("--seed", a.seed, "Seed");
  synth_cmd->add_option("--noise", a.noise, "Per-character confusion probability")->check(CLI::Range(0.0, 1.0));

  auto* install_aws = app.add_subcommand("install-aws", "Explain how to supply recorded Textract output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) return cmd_init(a);
    if (extract_images->parsed()) return cmd_extract_images(a);
    if (process->parsed()) return cmd_run(a, {true, true});
    if (ocr->parsed()) return cmd_ocr(a);
    if (extract->parsed()) return cmd_run(a, {true, false});
    if (validate->parsed()) return cmd_run(a, {false, true});
    if (tune->parsed()) return cmd_tune(a);
    if (report->parsed()) return cmd_report(a);
    if (review->parsed()) return cmd_review(a);
    if (synth_cmd->parsed()) return cmd_synth(a);
    if (install_aws->parsed()) return cmd_install_aws();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfig ? kBadConfig : kFailures;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailures;
  }
  return kOk;
}
