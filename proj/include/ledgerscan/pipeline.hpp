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

// Configuration-driven orchestration: image operations, recognition,
// consensus, layout, extraction and validation over a workspace.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ledgerscan/ensemble.hpp"
#include "ledgerscan/extract.hpp"
#include "ledgerscan/layout.hpp"
#include "ledgerscan/ocr.hpp"
#include "ledgerscan/raster.hpp"
#include "ledgerscan/tuning.hpp"
#include "ledgerscan/workspace.hpp"

namespace ledgerscan::pipeline {

struct ImageOp {
  std::string name;
  std::map<std::string, std::string> params;
};

struct PipelineConfig {
  std::vector<ImageOp> image_ops;
  std::vector<std::string> engines;
  bool ensemble = true;
  ensemble::Config ensemble_config;
  layout::LayoutParams layout;
  extract::ExtractConfig extract;
  double low_confidence = 0.5;
  ocr::NoiseModel mock_noise;  // for engines named mock*
  bool annotated_layout = false;
  unsigned workers = 0;  // 0 = hardware width
  std::map<std::string, std::string> entries;  // the dotted keys as read
};

/// key = value lines; '#' starts a comment. Relative file paths are taken
/// from `base_dir`.
std::map<std::string, std::string> parse_config_entries(std::string_view text);

/// Validates every key and value (unknown ops, unknown params, ranges) and
/// loads the extraction files. Throws Error(kConfig) on the first problem.
PipelineConfig build_config(const std::map<std::string, std::string>& entries,
                            const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Returns a copy of `entries` with the grid point's values substituted.
std::map<std::string, std::string> with_overrides(std::map<std::string, std::string> entries,
                                                  const tuning::ParamSet& params);

struct ProcessedImage {
  Raster image;
  Affine transform;  // raw -> processed
};

ProcessedImage apply_image_ops(const Raster& raw, const std::vector<ImageOp>& ops);

/// Everything a page's extraction reads, loaded up front.
struct PageSource {
  int page_id = 0;
  Raster raw;
  std::map<std::string, std::string> native;  // engine -> payload
  std::optional<std::string> mock_truth;
};

PageSource load_page_source(const Workspace& ws, int page_id);

/// One engine on one processed page: a recorded payload mapped into the
/// processed frame, or a mock engine fed by the page's truth words.
ocr::OcrPage recognize(const std::string& engine, const PageSource& source,
                       const ProcessedImage& processed, const PipelineConfig& config);

struct PageResult {
  ProcessedImage processed;
  std::vector<ocr::OcrPage> ocr;
  ocr::OcrPage consensus;
  layout::LayoutModel layout;
  extract::BalanceSheet sheet;
};

/// Pure per-page path up to (not including) dataset-level validation.
PageResult extract_page(const PageSource& source, const PipelineConfig& config);

/// Recognizes one page and stores the unified result as ocr:<engine>.
/// A stored result newer than the processed image is returned as is.
ocr::OcrPage run_ocr(Workspace& ws, int page_id, const std::string& engine,
                     const PipelineConfig& config = {});

struct PageReport {
  int page_id = 0;
  bool ok = true;
  std::string error;
  std::size_t red = 0, yellow = 0;
  std::size_t records = 0;
};

struct RunReport {
  std::vector<PageReport> pages;  // by page id
  std::size_t failures() const;
  std::string to_text() const;
};

struct RunOptions {
  bool extract = true;   // image ops through extraction
  bool validate = true;  // dataset context, flags, records.csv
};

/// Failed pages are reported and skipped; they never abort the run.
RunReport run_pipeline(Workspace& ws, const PipelineConfig& config, const std::vector<int>& pages,
                       const RunOptions& options = {});

/// Per-code counts, red/yellow totals and pages by red count.
std::string render_flag_report(const Workspace& ws, const std::vector<int>& pages);

/// "1-5,8" style selection, checked against the workspace's page count.
std::vector<int> parse_page_selection(std::string_view text, int page_count);

/// PIPELINE_WORKERS overrides the configured width when set.
unsigned worker_count(unsigned configured);

/// Objective for one page under one parameter set, against its truth
/// artifact: field_accuracy or cer (over amounts of truth fields).
double evaluate_page(const Workspace& ws, const std::map<std::string, std::string>& entries,
                     const std::filesystem::path& base_dir, const tuning::ParamSet& params,
                     int page_id, const std::string& objective);

}  // namespace ledgerscan::pipeline
