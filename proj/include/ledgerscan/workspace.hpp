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

// On-disk document workspace: page images, versioned per-page artifacts and
// the manifest tying them together.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ledgerscan/geometry.hpp"
#include "ledgerscan/raster.hpp"

namespace ledgerscan {

struct ArtifactInfo {
  std::string path;  // relative to the workspace root
  std::uint64_t version = 0;

  bool operator==(const ArtifactInfo&) const = default;
};

struct PageEntry {
  int page_id = 0;
  std::string raw_image;  // empty until extracted
  std::string status = "pending";  // pending, ok, failed
  std::string error;
  int width = 0, height = 0;
  std::uint64_t version = 0;
  bool reviewed = false;
  Affine transform;  // raw -> processed coordinates
  std::map<std::string, ArtifactInfo> artifacts;

  bool operator==(const PageEntry& o) const {
    return page_id == o.page_id && raw_image == o.raw_image && status == o.status &&
           error == o.error && width == o.width && height == o.height && version == o.version &&
           reviewed == o.reviewed && transform.coefficients() == o.transform.coefficients() &&
           artifacts == o.artifacts;
  }
};

struct Manifest {
  std::string source;
  std::string source_kind;  // pdf or images
  int dpi = 300;
  std::map<std::string, std::string> config;
  std::vector<PageEntry> pages;

  bool operator==(const Manifest&) const = default;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(std::string_view json);

/// Canonical relative path of an artifact, e.g. "pages/0003/ocr/google.json"
/// (recorded engine payloads sit next to it as google.native).
/// Kinds: processed, ocr:<engine>, native:<engine>, layout, layout_image,
/// records, extracted, flags, truth, mock_truth. Throws on anything else.
std::string artifact_path(int page_id, std::string_view kind);

struct Description {
  std::string source;
  std::string source_kind;
  std::size_t pages = 0;
  std::size_t extracted = 0;
  std::size_t failed = 0;
  int dpi = 0;
  std::vector<std::pair<int, int>> sizes;  // per page, 0x0 when absent
};

/// Readers share a page; writers to the same page serialize. Copies share
/// state, so a Workspace can be handed to worker threads by value.
class Workspace {
 public:
  /// Opens or re-opens `cache` for a PDF file or a directory of numbered
  /// images. Image directories are imported on first open, together with
  /// sidecar files `<stem>.<engine>.native`, `<stem>.truth.json` and
  /// `<stem>.truth.csv`.
  static Workspace open(const std::filesystem::path& source, const std::filesystem::path& cache,
                        int dpi = 300);
  /// Re-opens an initialized workspace from its manifest alone.
  static Workspace open_existing(const std::filesystem::path& cache);

  const std::filesystem::path& root() const;
  Manifest manifest() const;
  std::vector<int> page_ids() const;
  PageEntry entry(int page_id) const;
  Description describe() const;

  /// PDF workspaces only. Writes pages/NNNN/raw.png for every page not yet
  /// extracted; corrupt pages are marked failed. Returns the number of pages
  /// with a raw image.
  std::size_t extract_images();

  /// Persists the payload atomically and returns the page's new version.
  /// When expected_version is set and differs from the current one the
  /// write is refused with kConflict.
  std::uint64_t store_artifact(int page_id, std::string_view kind, std::string_view payload,
                               std::optional<std::uint64_t> expected_version = std::nullopt);
  /// Several artifacts under one version check; each file is still written
  /// atomically on its own. Returns the version after the last write.
  std::uint64_t store_artifacts(int page_id,
                                const std::vector<std::pair<std::string, std::string>>& items,
                                std::optional<std::uint64_t> expected_version = std::nullopt);
  /// Payload with the version it was stored at; kNotYetProduced if absent.
  std::pair<std::string, std::uint64_t> load_artifact(int page_id, std::string_view kind) const;
  bool has_artifact(int page_id, std::string_view kind) const;

  Raster raw_image(int page_id) const;
  void set_transform(int page_id, const Affine& transform);
  std::uint64_t set_reviewed(int page_id, bool reviewed);

  void set_config(const std::map<std::string, std::string>& config);

  /// Append-only per-page audit log (pages/NNNN/audit.log).
  void append_audit(int page_id, std::string_view line);
  std::vector<std::string> read_audit(int page_id) const;

  struct State;

 private:
  explicit Workspace(std::shared_ptr<State> state) : state_(std::move(state)) {}
  std::shared_ptr<State> state_;
};

/// Writes bytes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Images embedded in a PDF, one per page, resampled to the page's size at
/// `dpi`. Pages that cannot be decoded come back as an error string.
struct PdfPage {
  std::optional<Raster> image;
  std::string error;
};
std::vector<PdfPage> read_pdf_pages(std::string_view pdf, int dpi);

}  // namespace ledgerscan
