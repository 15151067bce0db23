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

// Engine-agnostic recognition results, adapters for the native output of
// several OCR services, and a seeded mock engine.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ledgerscan/geometry.hpp"

namespace ledgerscan::ocr {

struct OcrWord {
  std::string text;
  Box bbox;
  double confidence = 1.0;
  std::optional<int> line;
  std::optional<int> paragraph;
  std::optional<int> block;
  std::vector<double> char_confidence;  // only engines with a symbol level

  bool operator==(const OcrWord&) const = default;
};

struct TableCell {
  int row = 0;
  int col = 0;
  std::string text;
  Box bbox;

  bool operator==(const TableCell&) const = default;
};

struct Table {
  int rows = 0;
  int cols = 0;
  std::vector<TableCell> cells;

  bool operator==(const Table&) const = default;
};

struct OcrPage {
  std::string engine;
  int width = 0;
  int height = 0;
  std::vector<OcrWord> words;
  std::vector<std::string> inferred_levels;  // subset of line, paragraph, block
  std::vector<Table> tables;

  bool operator==(const OcrPage&) const = default;
};

/// Throws Error(kInvalidArgument) naming the first broken invariant: bad
/// bbox, confidence outside [0,1], or a line/paragraph claimed by two
/// different parents.
void check_invariants(const OcrPage& page);

std::string to_json(const OcrPage& page);
OcrPage from_json(std::string_view json);

enum class Engine { kGoogle, kAmazon, kMicrosoft, kTesseract };

std::string_view to_string(Engine e);
std::optional<Engine> parse_engine(std::string_view name);

struct NormalizeOptions {
  /// Needed for engines reporting coordinates as page fractions.
  std::optional<std::pair<int, int>> page_size;
};

/// Parses a native payload into the unified schema. Missing hierarchy
/// levels are synthesized (lines by vertical overlap, paragraphs by
/// vertical gaps, a single block otherwise) and listed in inferred_levels.
/// Parse errors carry the byte offset of the failure.
OcrPage normalize(Engine engine, std::string_view payload,
                  const NormalizeOptions& options = {});
OcrPage normalize(std::string_view engine, std::string_view payload,
                  const NormalizeOptions& options = {});

/// Writes a page in an engine's native format. Used to record fixtures;
/// normalize(e, encode_native(e, p)) preserves text, boxes and confidences.
std::string encode_native(Engine engine, const OcrPage& page);

/// Groups words into lines by transitive vertical overlap (ratio over the
/// smaller height >= min_overlap). Words that already share a paragraph are
/// only grouped within it. Returns line ids in reading order.
void synthesize_lines(OcrPage& page, double min_overlap = 0.5);
/// Splits the line sequence into paragraphs wherever the vertical gap
/// between consecutive lines exceeds gap_factor times the median gap.
void synthesize_paragraphs(OcrPage& page, double gap_factor = 1.8);

/// Words ordered top-to-bottom by line, then left-to-right.
std::vector<std::size_t> reading_order(const OcrPage& page);

struct TruthWord {
  std::string text;
  Box bbox;

  bool operator==(const TruthWord&) const = default;
};

struct NoiseModel {
  double substitution_prob = 0.0;
  double deletion_prob = 0.0;
  std::map<char, char> confusion_table = default_confusions();
  /// When a character has no table entry, substitute a random alphanumeric.
  bool random_unmapped = true;
  std::uint64_t seed = 0;

  static std::map<char, char> default_confusions();
  void validate() const;
};

/// Deterministic noisy recognizer over known words. Per character: drop
/// with deletion_prob, else substitute with substitution_prob. Word
/// confidence is the product of (1 - 0.5) over damaged characters, clamped
/// to [0.3, 0.99]. Words that lose every character are omitted.
OcrPage mock_ocr(const std::vector<TruthWord>& truth, int width, int height,
                 const NoiseModel& noise, std::string engine = "mock");

std::string truth_words_to_json(const std::vector<TruthWord>& words, int width, int height);
std::vector<TruthWord> truth_words_from_json(std::string_view json, int* width = nullptr,
                                             int* height = nullptr);

}  // namespace ledgerscan::ocr
