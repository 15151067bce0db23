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

// From positioned words to balance-sheet records: cell assignment, label
// matching, ditto/abbreviation expansion, amount repair, side assignment and
// the accounting checks that flag records for review.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ledgerscan/amount.hpp"
#include "ledgerscan/layout.hpp"
#include "ledgerscan/ocr.hpp"

namespace ledgerscan::extract {

enum class FlagCode {
  kIdentityMismatch,
  kLeadingZero,
  kBadNumeric,
  kUnknownLabel,
  kDupCharter,
  kMissingCharter,
  kCapitalChanged,
  kLowConfidence,
  kChainMerged,
  kIndeterminateHeader,
  kRuleViolation,
  kDittoWithoutPrior,
};

enum class Severity { kRed, kYellow };

std::string_view to_string(FlagCode code);
std::optional<FlagCode> parse_flag_code(std::string_view name);
std::string_view to_string(Severity s);
Severity severity_of(FlagCode code);
/// Codes that come from recognition/layout rather than from the records.
bool is_carried(FlagCode code);

struct Flag {
  FlagCode code;
  Severity severity;
  std::string detail;
  std::optional<int> row;

  bool operator==(const Flag&) const = default;
};

std::string flags_to_json(const std::vector<Flag>& flags);
std::vector<Flag> flags_from_json(std::string_view json);

enum class Side { kAsset, kLiabilityEquity, kHeader, kTotal };
std::string_view to_string(Side s);

struct SheetRecord {
  int row_id = 0;
  std::string label_raw;  // after ditto/abbreviation expansion
  std::optional<std::string> label_canonical;
  int label_distance = 0;
  std::string raw_value;  // as recognized, before repair
  std::optional<Amount> amount;
  Side side = Side::kAsset;
  std::optional<Side> total_of;  // for totals: kAsset or kLiabilityEquity
  std::vector<FlagCode> flags;   // carried flags only

  /// Canonical label when matched, otherwise the raw label.
  const std::string& label() const { return label_canonical ? *label_canonical : label_raw; }
};

struct BalanceSheet {
  std::string bank_name;
  std::string city;
  std::string charter;
  int year = 0;
  std::vector<SheetRecord> records;
  std::vector<FlagCode> flags;  // carried, sheet level
};

// ---- cells --------------------------------------------------------------

struct GridRow {
  int row_id = 0;
  std::vector<std::string> cells;
  bool header = false;
  bool low_confidence = false;
  bool chain_merged = false;
  std::optional<int> continuation_of;
};

struct Grid {
  int columns = 1;
  /// Column holding amounts, or -1 when the table has no vertical rules.
  int value_column = -1;
  bool header_indeterminate = false;
  std::vector<GridRow> rows;
};

/// Places every word of each layout row into the column (between vertical
/// delimiters) holding the larger share of its box. Rows with words below
/// `low_confidence` or outside every table region are marked.
Grid cells_from_layout(const layout::LayoutModel& layout, const ocr::OcrPage& page,
                       double low_confidence = 0.5);

// ---- labels -------------------------------------------------------------

struct VocabEntry {
  std::string label;
  std::int64_t frequency = 1;
};
using Vocabulary = std::vector<VocabEntry>;

/// One "label<TAB>frequency" per line; '#' starts a comment.
Vocabulary parse_vocabulary(std::string_view text);

/// Lower case, punctuation to spaces, whitespace collapsed.
std::string normalize_label(std::string_view s);
std::size_t edit_distance(std::string_view a, std::string_view b);

struct LabelMatch {
  std::string label;
  std::size_t distance = 0;
};

/// Exact (normalized) match first; otherwise the most frequent entry within
/// max_edit, ties by distance then alphabetical. nullopt means unknown.
std::optional<LabelMatch> match_label(std::string_view raw, const Vocabulary& vocab,
                                      std::size_t max_edit = 2);

using AbbrevMap = std::map<std::string, std::string>;
AbbrevMap parse_abbreviations(std::string_view text);

struct DittoResult {
  std::string label;
  bool ditto_without_prior = false;
};

DittoResult resolve_ditto_and_abbrev(const std::vector<std::string>& tokens, const AbbrevMap& abbrevs,
                                     const std::optional<std::string>& prior_label);

struct ParagraphItem {
  std::string label;
  std::string value;  // comma-grouped, e.g. "1,000,000"
};

/// Splits free running text ("A.-K. 1 000 000 Reserven 250 000 ...") into
/// label/value pairs. A value is a run of digit groups (1-3 digits, then
/// exactly 3) that has at least two groups or is followed by a word.
std::vector<ParagraphItem> tokenize_paragraph(std::string_view text);

// ---- rules --------------------------------------------------------------

struct Rule {
  struct Term {
    double coef = 1.0;
    std::optional<std::string> label;  // constant when empty
  };
  std::string id;
  std::string text;
  std::vector<Term> lhs, rhs;  // rhs moved to the left on evaluation
  std::string op;              // <=, >=, ==, <, >
};

/// One "rule_id<TAB>expression" per line, e.g.
///   min_capital	[Capital stock paid in] >= 50000
///   fund	[Redemption fund with Treasurer] >= 0.05 * [National bank notes outstanding]
/// Amounts are in dollars. Rules referencing absent labels are skipped.
std::vector<Rule> parse_rules(std::string_view text);

// ---- assembly and validation --------------------------------------------

struct ExtractConfig {
  Vocabulary vocabulary;
  AbbrevMap abbreviations;
  std::vector<Rule> rules;
  std::string header_pattern = R"(^(.*?),\s*(.*?)\.\s*No\.\s*(\S+)$)";
  std::vector<std::string> asset_sections = {"Resources", "Assets"};
  std::vector<std::string> liability_sections = {"Liabilities"};
  std::vector<std::string> total_labels = {"Total"};
  std::string capital_label = "Capital stock paid in";
  std::size_t max_edit = 2;
  int year = 0;
  ConfusionMap repair = default_repair_map();
};

BalanceSheet assemble_balance_sheet(const Grid& grid, const ExtractConfig& config);

/// Dataset-wide facts needed by per-sheet checks. Build once, then validate
/// sheets in parallel.
struct ValidationContext {
  std::map<std::pair<std::string, int>, int> charter_year_count;
  std::map<std::string, std::map<int, std::int64_t>> capital;  // charter -> year -> cents

  void add(const BalanceSheet& sheet, const ExtractConfig& config);
};

std::vector<Flag> validate_sheet(const BalanceSheet& sheet, const ValidationContext& context,
                                 const ExtractConfig& config);

struct IdentityStatus {
  bool balanced = true;
  std::int64_t difference = 0;  // cents, absolute
  std::string detail;
};

IdentityStatus identity_status(const BalanceSheet& sheet);

// ---- CSV ----------------------------------------------------------------

struct CsvRow {
  int row = 0;
  std::string label;
  std::string raw_value;
  std::string amount;
  std::vector<std::string> flags;

  bool operator==(const CsvRow&) const = default;
};

std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

/// `row,label,raw_value,amount,flags`; flags are the codes attached to that
/// row, ';'-separated.
std::string records_to_csv(const BalanceSheet& sheet, const std::vector<Flag>& flags);
std::vector<CsvRow> read_records_csv(std::string_view text);

/// Rebuilds a sheet from stored rows: header identity, sides and amounts are
/// re-derived, carried flags are kept from the flags column.
BalanceSheet sheet_from_rows(const std::vector<CsvRow>& rows, const ExtractConfig& config);

}  // namespace ledgerscan::extract
