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

#pragma once

// Human review of extracted pages: flagged-page queues, page bundles,
// versioned corrections with re-validation, and promotion to ground truth.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ledgerscan/error.hpp"
#include "ledgerscan/extract.hpp"
#include "ledgerscan/pipeline.hpp"
#include "ledgerscan/workspace.hpp"

namespace ledgerscan::review {

enum class Filter { kAll, kFlagged, kRedOnly, kUnreviewed };
std::optional<Filter> parse_filter(std::string_view name);

struct PageSummary {
  int page_id = 0;
  std::uint64_t version = 0;
  std::string status;
  bool validated = false;
  bool reviewed = false;
  std::size_t red = 0, yellow = 0;
};

struct BundleRecord {
  extract::CsvRow row;
  std::string side;
  std::vector<extract::Flag> flags;
};

struct Bundle {
  int page_id = 0;
  std::uint64_t version = 0;
  bool reviewed = false;
  bool has_processed = false;
  std::string bank_name, city, charter;
  std::vector<BundleRecord> records;
  std::vector<extract::Flag> flags;
  extract::IdentityStatus identity;
  std::size_t red = 0, yellow = 0;
};

struct Edit {
  int row_id = 0;
  std::string field;  // label or amount
  std::string value;
};

struct CorrectionSet {
  std::uint64_t base_version = 0;
  std::vector<Edit> edits;
  std::string reviewer;
};

/// Thrown by promote() while red flags remain; carries them.
class PromotionRefused : public Error {
 public:
  PromotionRefused(std::string msg, std::vector<extract::Flag> flags)
      : Error(ErrorCode::kRefused, std::move(msg)), flags_(std::move(flags)) {}
  const std::vector<extract::Flag>& flags() const { return flags_; }

 private:
  std::vector<extract::Flag> flags_;
};

class ReviewService {
 public:
  ReviewService(Workspace ws, pipeline::PipelineConfig config);

  std::vector<PageSummary> list_pages(Filter filter) const;
  /// kNotFound for unknown pages, kNotYetProduced without records.
  Bundle get_bundle(int page_id) const;
  /// kConflict (message carries the current version) when base_version is
  /// stale; kInvalidArgument for unknown rows or fields. Nothing is written
  /// on error.
  Bundle apply_corrections(int page_id, const CorrectionSet& corrections);
  /// Copies records to truth and marks the page reviewed; returns the new
  /// page version. PromotionRefused while red flags exist.
  std::uint64_t promote(int page_id, const std::string& reviewer);

  /// Rebuilds records.csv from the extraction output and the audit log.
  std::string replay(int page_id) const;

  Workspace& workspace() { return ws_; }
  std::uint64_t page_version(int page_id) const { return ws_.entry(page_id).version; }

 private:
  struct Validated {
    std::string records_csv;
    std::string flags_json;
  };
  Validated validate_rows(int page_id, const std::vector<extract::CsvRow>& rows) const;
  extract::ValidationContext context_excluding(int page_id) const;
  std::mutex& page_mutex(int page_id);

  Workspace ws_;
  pipeline::PipelineConfig config_;
  std::mutex mutexes_guard_;
  std::map<int, std::unique_ptr<std::mutex>> mutexes_;
};

/// Applies edits to stored rows; edited rows lose their carried flags.
void apply_edits(std::vector<extract::CsvRow>& rows, const std::vector<Edit>& edits);

std::string bundle_to_json(const Bundle& bundle);
std::string summaries_to_json(const std::vector<PageSummary>& pages);
CorrectionSet corrections_from_json(std::string_view json);

/// HTTP front end. Routes under /api plus static files at "/".
class ReviewServer {
 public:
  ReviewServer(ReviewService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds and returns the port (0 picks a free one).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ledgerscan::review
