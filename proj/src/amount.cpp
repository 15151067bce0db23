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

#include "ledgerscan/amount.hpp"

#include <cctype>
#include <limits>

namespace ledgerscan {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool all_digits(std::string_view s) {
  for (char c : s) {
    if (!is_digit(c)) return false;
  }
  return true;
}

// Shape check shared by the strict grammar and the leading-zero diagnosis:
// head group of 1..3 digits, comma groups of exactly 3, optional ".dd".
// A bare digit run with no commas is also accepted when `loose_head` is set
// ("0123" is a leading-zero case, not garbage).
bool grouped_shape(std::string_view integer, bool loose_head) {
  if (integer.empty()) return false;
  std::size_t start = 0;
  std::size_t comma = integer.find(',');
  std::string_view head = integer.substr(0, comma);
  if (head.empty() || !all_digits(head)) return false;
  if (head.size() > 3 && !(loose_head && comma == std::string_view::npos)) return false;
  if (comma == std::string_view::npos) return true;
  start = comma + 1;
  while (true) {
    comma = integer.find(',', start);
    std::string_view group = integer.substr(start, comma == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : comma - start);
    if (group.size() != 3 || !all_digits(group)) return false;
    if (comma == std::string_view::npos) return true;
    start = comma + 1;
  }
}

}  // namespace

std::int64_t Amount::value() const {
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  std::int64_t v = 0;
  for (char c : digits) {
    if (v > (kMax - 9) / 10) return kMax;
    v = v * 10 + (c - '0');
  }
  if (v > kMax / 100) return kMax;
  v *= 100;
  if (cents) v += ((*cents)[0] - '0') * 10 + ((*cents)[1] - '0');
  return v;
}

std::string Amount::canonical() const {
  return cents ? digits + "." + *cents : digits;
}

AmountParse parse_amount(std::string_view token) {
  AmountParse out;
  if (token == "0") {
    out.amount = Amount{"0", std::nullopt, std::string(token), false};
    return out;
  }
  std::string_view integer = token;
  std::optional<std::string> cents;
  bool cents_ok = true;
  if (auto dot = token.find('.'); dot != std::string_view::npos) {
    integer = token.substr(0, dot);
    std::string_view frac = token.substr(dot + 1);
    cents_ok = frac.size() == 2 && all_digits(frac);
    if (cents_ok) cents = std::string(frac);
  }
  if (cents_ok && grouped_shape(integer, false) && integer[0] != '0') {
    Amount a;
    for (char c : integer) {
      if (c != ',') a.digits += c;
    }
    a.cents = cents;
    a.raw = std::string(token);
    out.amount = std::move(a);
    return out;
  }
  if (cents_ok && !integer.empty() && integer[0] == '0' && grouped_shape(integer, true)) {
    out.error = AmountError::kLeadingZero;
  } else {
    out.error = AmountError::kBadNumeric;
  }
  return out;
}

std::optional<Amount> amount_from_canonical(std::string_view text) {
  std::string_view integer = text;
  std::optional<std::string> cents;
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    integer = text.substr(0, dot);
    auto frac = text.substr(dot + 1);
    if (frac.size() != 2 || !all_digits(frac)) return std::nullopt;
    cents = std::string(frac);
  }
  if (integer.empty() || !all_digits(integer)) return std::nullopt;
  if (integer.size() > 1 && integer[0] == '0') return std::nullopt;
  return Amount{std::string(integer), cents, std::string(text), false};
}

std::string format_cents(std::int64_t cents) {
  const bool neg = cents < 0;
  const auto mag = neg ? -static_cast<unsigned long long>(cents)
                       : static_cast<unsigned long long>(cents);
  std::string whole = std::to_string(mag / 100);
  std::string grouped;
  for (std::size_t i = 0; i < whole.size(); ++i) {
    if (i > 0 && (whole.size() - i) % 3 == 0) grouped += ',';
    grouped += whole[i];
  }
  const auto frac = mag % 100;
  if (frac != 0) {
    grouped += '.';
    grouped += static_cast<char>('0' + frac / 10);
    grouped += static_cast<char>('0' + frac % 10);
  }
  return neg ? "-" + grouped : grouped;
}

const ConfusionMap& default_repair_map() {
  static const ConfusionMap map = {{'O', '0'}, {'l', '1'}, {'I', '1'},
                                   {'G', '6'}, {'B', '8'}, {'S', '5'}};
  return map;
}

RepairResult repair_token(std::string_view token, const ConfusionMap& table) {
  RepairResult out{std::string(token), {}};
  const std::size_t n = token.size();
  std::size_t i = 0;
  while (i < n) {
    if (!table.contains(token[i]) || is_digit(token[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && table.contains(token[j]) && !is_digit(token[j])) ++j;
    const bool left_edge = i == 0, right_edge = j == n;
    const bool left_ok = left_edge || is_digit(token[i - 1]);
    const bool right_ok = right_edge || is_digit(token[j]);
    if (left_ok && right_ok && !(left_edge && right_edge)) {
      for (std::size_t k = i; k < j; ++k) {
        const char to = table.at(token[k]);
        out.applied.push_back({k, token[k], to});
        out.text[k] = to;
      }
    }
    i = j;
  }
  return out;
}

}  // namespace ledgerscan
