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

// Money amounts as printed in ledger columns, and the letter/digit repair
// applied to OCR tokens before parsing.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ledgerscan {

/// A parsed amount. `digits` has the grouping commas removed; `cents` is
/// present only when the token carried a two-digit fraction.
struct Amount {
  std::string digits;
  std::optional<std::string> cents;
  std::string raw;
  bool repaired = false;

  /// Value in cents. Saturates at INT64_MAX for absurdly long tokens.
  std::int64_t value() const;
  /// "123456" or "123456.00"; stable textual form used in CSV files.
  std::string canonical() const;

  bool operator==(const Amount&) const = default;
};

enum class AmountError { kLeadingZero, kBadNumeric };

struct AmountParse {
  std::optional<Amount> amount;
  std::optional<AmountError> error;

  bool ok() const { return amount.has_value(); }
};

/// value := "0" | [1-9] [0-9]{0,2} ("," [0-9]{3})* ("." [0-9]{2})?
/// Tokens that would match if the leading zero were dropped are reported as
/// kLeadingZero; everything else that fails is kBadNumeric.
AmountParse parse_amount(std::string_view token);

/// Inverse of Amount::canonical for stored values ("123456.00" or "0").
std::optional<Amount> amount_from_canonical(std::string_view text);

/// Renders a cents value as "1,234.56" (or "1,234" when the cents are zero).
std::string format_cents(std::int64_t cents);

using ConfusionMap = std::map<char, char>;

/// O->0, l->1, I->1, G->6, B->8, S->5.
const ConfusionMap& default_repair_map();

struct Substitution {
  std::size_t position;
  char from;
  char to;
};

struct RepairResult {
  std::string text;
  std::vector<Substitution> applied;
};

/// Replaces letters that sit in a numeric context. A maximal run of mappable
/// letters is rewritten when each side of the run is a digit or the token
/// edge and at least one side is a digit, so "1GB" becomes "168" while
/// "BOND" is left alone.
RepairResult repair_token(std::string_view token, const ConfusionMap& table);

}  // namespace ledgerscan
