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

#include "ledgerscan/extract.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "json.hpp"
#include "ledgerscan/error.hpp"

namespace ledgerscan::extract {

namespace {

struct CodeInfo {
  FlagCode code;
  std::string_view name;
  Severity severity;
  bool carried;
};

constexpr CodeInfo kCodes[] = {
    {FlagCode::kIdentityMismatch, "IDENTITY_MISMATCH", Severity::kRed, false},
    {FlagCode::kLeadingZero, "LEADING_ZERO", Severity::kRed, false},
    {FlagCode::kBadNumeric, "BAD_NUMERIC", Severity::kRed, false},
    {FlagCode::kUnknownLabel, "UNKNOWN_LABEL", Severity::kYellow, false},
    {FlagCode::kDupCharter, "DUP_CHARTER", Severity::kRed, false},
    {FlagCode::kMissingCharter, "MISSING_CHARTER", Severity::kRed, false},
    {FlagCode::kCapitalChanged, "CAPITAL_CHANGED", Severity::kYellow, false},
    {FlagCode::kLowConfidence, "LOW_CONFIDENCE", Severity::kYellow, true},
    {FlagCode::kChainMerged, "CHAIN_MERGED", Severity::kYellow, true},
    {FlagCode::kIndeterminateHeader, "INDETERMINATE_HEADER", Severity::kYellow, true},
    {FlagCode::kRuleViolation, "RULE_VIOLATION", Severity::kYellow, false},
    {FlagCode::kDittoWithoutPrior, "DITTO_WITHOUT_PRIOR", Severity::kYellow, true},
};

const CodeInfo& info(FlagCode c) {
  for (const auto& i : kCodes) {
    if (i.code == c) return i;
  }
  return kCodes[0];
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
  std::string s;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!s.empty()) s += sep;
    s += p;
  }
  return s;
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool same_label(std::string_view a, std::string_view b) {
  return normalize_label(a) == normalize_label(b);
}

bool in_list(std::string_view label, const std::vector<std::string>& list) {
  return std::any_of(list.begin(), list.end(),
                     [&](const std::string& s) { return same_label(label, s); });
}

std::string carried_detail(FlagCode c) {
  switch (c) {
    case FlagCode::kLowConfidence: return "recognition confidence below threshold or word outside the table";
    case FlagCode::kChainMerged: return "row joined words that do not overlap vertically";
    case FlagCode::kIndeterminateHeader: return "too few rows to decide which are headers";
    case FlagCode::kDittoWithoutPrior: return "ditto mark with no previous label";
    default: return std::string(to_string(c));
  }
}

// Sides are a function of the label sequence: rows before the first section
// or amount are header rows, section labels switch the current side, and a
// total closes the side it belongs to.
void assign_sides(BalanceSheet& sheet, const ExtractConfig& config) {
  const std::regex header_re(config.header_pattern);
  Side current = Side::kAsset;
  bool started = false;
  for (auto& r : sheet.records) {
    r.total_of.reset();
    const std::string& label = r.label();
    const bool has_value = !trim(r.raw_value).empty();
    std::smatch m;
    const std::string raw = r.label_raw;
    if (!has_value && in_list(label, config.asset_sections)) {
      r.side = Side::kHeader;
      current = Side::kAsset;
      started = true;
    } else if (!has_value && in_list(label, config.liability_sections)) {
      r.side = Side::kHeader;
      current = Side::kLiabilityEquity;
      started = true;
    } else if (!has_value && (!started || std::regex_match(raw, m, header_re))) {
      r.side = Side::kHeader;
    } else if (in_list(label, config.total_labels)) {
      r.side = Side::kTotal;
      r.total_of = current;
      if (current == Side::kAsset) current = Side::kLiabilityEquity;
      started = true;
    } else {
      r.side = current;
      started = true;
    }
  }
  sheet.bank_name.clear();
  sheet.city.clear();
  sheet.charter.clear();
  for (const auto& r : sheet.records) {
    if (r.side != Side::kHeader) continue;
    std::smatch m;
    if (std::regex_match(r.label_raw, m, header_re) && m.size() >= 4) {
      sheet.bank_name = trim(m[1].str());
      sheet.city = trim(m[2].str());
      sheet.charter = trim(m[3].str());
      break;
    }
  }
}

void fill_value(SheetRecord& r, const ExtractConfig& config) {
  r.amount.reset();
  const std::string v = trim(r.raw_value);
  if (v.empty()) return;
  const RepairResult fixed = repair_token(v, config.repair);
  AmountParse p = parse_amount(fixed.text);
  if (p.amount) {
    p.amount->raw = v;
    p.amount->repaired = !fixed.applied.empty();
    r.amount = std::move(p.amount);
  }
}

void fill_label(SheetRecord& r, const ExtractConfig& config) {
  r.label_canonical.reset();
  r.label_distance = 0;
  if (config.vocabulary.empty() || r.label_raw.empty()) return;
  if (auto m = match_label(r.label_raw, config.vocabulary, config.max_edit)) {
    r.label_canonical = m->label;
    r.label_distance = static_cast<int>(m->distance);
  }
}

std::optional<std::int64_t> label_amount(const BalanceSheet& sheet, const std::string& label) {
  std::optional<std::int64_t> sum;
  for (const auto& r : sheet.records) {
    if (r.side == Side::kHeader || !r.amount || !same_label(r.label(), label)) continue;
    sum = sum.value_or(0) + r.amount->value();
  }
  return sum;
}

struct Totals {
  std::int64_t asset_sum = 0, liab_sum = 0;
  const SheetRecord* asset_total = nullptr;
  const SheetRecord* liab_total = nullptr;
};

Totals totals_of(const BalanceSheet& sheet) {
  Totals t;
  for (const auto& r : sheet.records) {
    if (r.side == Side::kAsset && r.amount) t.asset_sum += r.amount->value();
    if (r.side == Side::kLiabilityEquity && r.amount) t.liab_sum += r.amount->value();
    if (r.side == Side::kTotal && r.total_of == Side::kAsset && !t.asset_total) t.asset_total = &r;
    if (r.side == Side::kTotal && r.total_of == Side::kLiabilityEquity && !t.liab_total) {
      t.liab_total = &r;
    }
  }
  return t;
}

// Identity checks shared by validation and the review status.
std::vector<Flag> identity_flags(const BalanceSheet& sheet) {
  std::vector<Flag> out;
  const Totals t = totals_of(sheet);
  auto mismatch = [&](std::string detail, const SheetRecord* row) {
    out.push_back({FlagCode::kIdentityMismatch, Severity::kRed, std::move(detail),
                   row ? std::optional<int>(row->row_id) : std::nullopt});
  };
  auto check_side = [&](const SheetRecord* total, std::int64_t sum, std::string_view side) {
    if (!total) return;
    if (!total->amount) {
      mismatch(fmt::format("{} total is unreadable", side), total);
    } else if (total->amount->value() != sum) {
      mismatch(fmt::format("{}: sum {} ≠ total {}", side, format_cents(sum),
                           format_cents(total->amount->value())),
               total);
    }
  };
  check_side(t.asset_total, t.asset_sum, "assets");
  check_side(t.liab_total, t.liab_sum, "liabilities");
  if (t.asset_total && t.liab_total && t.asset_total->amount && t.liab_total->amount &&
      t.asset_total->amount->value() != t.liab_total->amount->value()) {
    mismatch(fmt::format("total assets {} ≠ total liabilities {}",
                         format_cents(t.asset_total->amount->value()),
                         format_cents(t.liab_total->amount->value())),
             t.liab_total);
  }
  return out;
}

// ---- rule expressions ----

struct RuleLexer {
  std::string_view s;
  std::size_t i = 0;

  void skip() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eof() {
    skip();
    return i >= s.size();
  }
  char peek() {
    skip();
    return i < s.size() ? s[i] : '\0';
  }
  [[noreturn]] void fail(const std::string& what) {
    throw Error(ErrorCode::kParse, fmt::format("rule '{}': {} at column {}", s, what, i + 1));
  }
  double number() {
    skip();
    std::size_t j = i;
    while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
    if (j == i) fail("expected a number");
    const double v = std::stod(std::string(s.substr(i, j - i)));
    i = j;
    return v;
  }
  std::string label() {
    skip();
    if (i >= s.size() || s[i] != '[') fail("expected '['");
    const auto close = s.find(']', i);
    if (close == std::string_view::npos) fail("unclosed '['");
    std::string l = trim(s.substr(i + 1, close - i - 1));
    i = close + 1;
    return l;
  }
  Rule::Term term(double sign) {
    Rule::Term t;
    t.coef = sign;
    if (peek() == '[') {
      t.label = label();
      if (peek() == '*') {
        ++i;
        t.coef *= number();
      }
      return t;
    }
    t.coef *= number();
    if (peek() == '*') {
      ++i;
      t.label = label();
    }
    return t;
  }
  std::vector<Rule::Term> side() {
    std::vector<Rule::Term> terms;
    double sign = 1;
    if (peek() == '-') {
      ++i;
      sign = -1;
    }
    terms.push_back(term(sign));
    while (peek() == '+' || peek() == '-') {
      sign = s[i] == '-' ? -1 : 1;
      ++i;
      terms.push_back(term(sign));
    }
    return terms;
  }
  std::string op() {
    skip();
    for (std::string_view o : {"<=", ">=", "==", "<", ">"}) {
      if (s.substr(i, o.size()) == o) {
        i += o.size();
        return std::string(o);
      }
    }
    fail("expected a comparison");
  }
};

std::optional<double> eval_side(const std::vector<Rule::Term>& terms, const BalanceSheet& sheet) {
  double v = 0;
  for (const auto& t : terms) {
    if (!t.label) {
      v += t.coef;
      continue;
    }
    const auto a = label_amount(sheet, *t.label);
    if (!a) return std::nullopt;
    v += t.coef * static_cast<double>(*a) / 100.0;
  }
  return v;
}

}  // namespace

std::string_view to_string(FlagCode code) { return info(code).name; }

std::optional<FlagCode> parse_flag_code(std::string_view name) {
  for (const auto& i : kCodes) {
    if (i.name == name) return i.code;
  }
  return std::nullopt;
}

std::string_view to_string(Severity s) { return s == Severity::kRed ? "red" : "yellow"; }
Severity severity_of(FlagCode code) { return info(code).severity; }
bool is_carried(FlagCode code) { return info(code).carried; }

std::string_view to_string(Side s) {
  switch (s) {
    case Side::kAsset: return "asset";
    case Side::kLiabilityEquity: return "liability_equity";
    case Side::kHeader: return "header";
    case Side::kTotal: return "total";
  }
  return "?";
}

std::string flags_to_json(const std::vector<Flag>& flags) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& f : flags) {
    nlohmann::ordered_json j;
    j["code"] = to_string(f.code);
    j["severity"] = to_string(f.severity);
    j["detail"] = f.detail;
    j["row"] = f.row ? nlohmann::ordered_json(*f.row) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr.dump(1) + "\n";
}

std::vector<Flag> flags_from_json(std::string_view text) {
  std::vector<Flag> out;
  try {
    for (const auto& j : nlohmann::json::parse(text.begin(), text.end())) {
      const auto code = parse_flag_code(j.at("code").get<std::string>());
      if (!code) throw Error(ErrorCode::kParse, "flags: unknown code " + j.at("code").dump());
      Flag f{*code, j.at("severity") == "red" ? Severity::kRed : Severity::kYellow,
             j.at("detail").get<std::string>(), std::nullopt};
      if (!j.at("row").is_null()) f.row = j.at("row").get<int>();
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("flags: {}", e.what()));
  }
  return out;
}

Grid cells_from_layout(const layout::LayoutModel& layout, const ocr::OcrPage& page,
                       double low_confidence) {
  (void)page;
  Grid g;
  const auto& v = layout.v_delims;
  g.columns = static_cast<int>(v.size()) + 1;
  g.value_column = v.size() >= 2 ? static_cast<int>(v.size()) - 1 : (v.size() == 1 ? 1 : -1);
  g.header_indeterminate = layout.header_indeterminate;
  auto column_of = [&](const Box& b) {
    int best = 0;
    double best_share = -1;
    for (int c = 0; c < g.columns; ++c) {
      const double lo = c == 0 ? -1e18 : v[c - 1];
      const double hi = c + 1 == g.columns ? 1e18 : v[c];
      const double share = std::min<double>(b.x1, hi) - std::max<double>(b.x0, lo);
      if (share > best_share) {
        best_share = share;
        best = c;
      }
    }
    return best;
  };
  auto inside_table = [&](const Box& b) {
    if (layout.table_regions.empty()) return true;
    return std::any_of(layout.table_regions.begin(), layout.table_regions.end(),
                       [&](const Box& r) {
                         return b.center_x() >= r.x0 && b.center_x() <= r.x1 &&
                                b.center_y() >= r.y0 && b.center_y() <= r.y1;
                       });
  };
  for (int i = 0; i < static_cast<int>(layout.rows.size()); ++i) {
    const auto& row = layout.rows[i];
    GridRow gr;
    gr.row_id = i;
    gr.cells.assign(g.columns, "");
    gr.header = std::find(layout.headers.begin(), layout.headers.end(), i) != layout.headers.end();
    gr.chain_merged = row.chain_merged;
    gr.continuation_of = row.continuation_of;
    for (const auto& w : row.words) {
      auto& cell = gr.cells[column_of(w.bbox)];
      if (!cell.empty()) cell += ' ';
      cell += w.text;
      if (w.confidence < low_confidence) gr.low_confidence = true;
      if (!gr.header && !inside_table(w.bbox)) gr.low_confidence = true;
    }
    g.rows.push_back(std::move(gr));
  }
  return g;
}

Vocabulary parse_vocabulary(std::string_view text) {
  Vocabulary v;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto tab = line.find('\t');
    VocabEntry e;
    e.label = trim(line.substr(0, tab));
    if (tab != std::string::npos) {
      try {
        e.frequency = std::stoll(trim(line.substr(tab + 1)));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, "vocabulary: bad frequency in line '" + line + "'");
      }
    }
    v.push_back(std::move(e));
  }
  return v;
}

std::string normalize_label(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      if (space && !out.empty()) out += ' ';
      space = false;
      out += static_cast<char>(std::tolower(u));
    } else {
      space = true;
    }
  }
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::optional<LabelMatch> match_label(std::string_view raw, const Vocabulary& vocab,
                                      std::size_t max_edit) {
  if (vocab.empty()) throw Error(ErrorCode::kInvalidArgument, "match_label: empty vocabulary");
  const std::string key = normalize_label(raw);
  for (const auto& e : vocab) {
    if (normalize_label(e.label) == key) return LabelMatch{e.label, 0};
  }
  const VocabEntry* best = nullptr;
  std::size_t best_d = 0;
  for (const auto& e : vocab) {
    const std::string n = normalize_label(e.label);
    const std::size_t len_gap = n.size() > key.size() ? n.size() - key.size() : key.size() - n.size();
    if (len_gap > max_edit) continue;
    const std::size_t d = edit_distance(key, n);
    if (d > max_edit) continue;
    if (!best || e.frequency > best->frequency ||
        (e.frequency == best->frequency && (d < best_d || (d == best_d && e.label < best->label)))) {
      best = &e;
      best_d = d;
    }
  }
  if (!best) return std::nullopt;
  return LabelMatch{best->label, best_d};
}

AbbrevMap parse_abbreviations(std::string_view text) {
  AbbrevMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kParse, "abbreviations: expected 'abbrev<TAB>expansion' in '" + line + "'");
    }
    m[trim(line.substr(0, tab))] = trim(line.substr(tab + 1));
  }
  return m;
}

DittoResult resolve_ditto_and_abbrev(const std::vector<std::string>& tokens, const AbbrevMap& abbrevs,
                                     const std::optional<std::string>& prior_label) {
  DittoResult out;
  std::vector<std::string> parts;
  for (const auto& t : tokens) {
    if (t == "do." || t == "do") {
      if (!prior_label) {
        out.ditto_without_prior = true;
        parts.push_back(t);
      } else {
        parts.push_back(*prior_label);
      }
      continue;
    }
    auto it = abbrevs.find(t);
    parts.push_back(it != abbrevs.end() ? it->second : t);
  }
  out.label = join(parts);
  return out;
}

std::vector<ParagraphItem> tokenize_paragraph(std::string_view text) {
  const auto tokens = split_ws(text);
  auto group = [](const std::string& t, bool head) {
    if (t.empty() || t.size() > 3 || !std::all_of(t.begin(), t.end(), ::isdigit)) return false;
    return head || t.size() == 3;
  };
  std::vector<ParagraphItem> out;
  std::vector<std::string> label;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (group(tokens[i], true)) {
      std::size_t j = i + 1;
      while (j < tokens.size() && group(tokens[j], false)) ++j;
      const bool followed_by_word =
          j == tokens.size() || std::isalpha(static_cast<unsigned char>(tokens[j][0]));
      if (j - i >= 2 || followed_by_word) {
        std::string value;
        for (std::size_t k = i; k < j; ++k) {
          if (!value.empty()) value += ',';
          value += tokens[k];
        }
        out.push_back({join(label), value});
        label.clear();
        i = j;
        continue;
      }
    }
    label.push_back(tokens[i]);
    ++i;
  }
  if (!label.empty()) out.push_back({join(label), ""});
  return out;
}

std::vector<Rule> parse_rules(std::string_view text) {
  std::vector<Rule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kParse, "rules: expected 'rule_id<TAB>expression' in '" + line + "'");
    }
    Rule r;
    r.id = trim(line.substr(0, tab));
    r.text = trim(line.substr(tab + 1));
    RuleLexer lex{r.text};
    r.lhs = lex.side();
    r.op = lex.op();
    r.rhs = lex.side();
    if (!lex.eof()) lex.fail("trailing input");
    rules.push_back(std::move(r));
  }
  return rules;
}

BalanceSheet assemble_balance_sheet(const Grid& grid, const ExtractConfig& config) {
  BalanceSheet sheet;
  sheet.year = config.year;
  std::map<int, std::vector<std::string>> continuation_text;
  for (const auto& r : grid.rows) {
    if (r.continuation_of) continuation_text[*r.continuation_of].push_back(join(r.cells));
  }
  std::optional<std::string> prior;
  for (const auto& gr : grid.rows) {
    if (gr.continuation_of) continue;
    SheetRecord rec;
    rec.row_id = gr.row_id;
    if (gr.low_confidence) rec.flags.push_back(FlagCode::kLowConfidence);
    if (gr.chain_merged) rec.flags.push_back(FlagCode::kChainMerged);
    if (gr.header) {
      rec.side = Side::kHeader;
      rec.label_raw = join(gr.cells);
      sheet.records.push_back(std::move(rec));
      continue;
    }
    std::vector<std::string> label_cells;
    if (grid.value_column >= 0) {
      for (int c = 0; c < static_cast<int>(gr.cells.size()); ++c) {
        if (c == grid.value_column) rec.raw_value = gr.cells[c];
        else label_cells.push_back(gr.cells[c]);
      }
    } else {
      auto tokens = split_ws(join(gr.cells));
      if (tokens.size() >= 2 && has_digit(tokens.back())) {
        rec.raw_value = tokens.back();
        tokens.pop_back();
      }
      label_cells = tokens;
    }
    if (auto it = continuation_text.find(gr.row_id); it != continuation_text.end()) {
      for (const auto& t : it->second) label_cells.push_back(t);
    }
    const DittoResult d = resolve_ditto_and_abbrev(split_ws(join(label_cells)), config.abbreviations, prior);
    rec.label_raw = d.label;
    if (d.ditto_without_prior) rec.flags.push_back(FlagCode::kDittoWithoutPrior);
    if (!rec.label_raw.empty()) prior = rec.label_raw;
    fill_label(rec, config);
    fill_value(rec, config);
    sheet.records.push_back(std::move(rec));
  }
  if (grid.header_indeterminate) sheet.flags.push_back(FlagCode::kIndeterminateHeader);
  assign_sides(sheet, config);
  return sheet;
}

void ValidationContext::add(const BalanceSheet& sheet, const ExtractConfig& config) {
  if (sheet.charter.empty()) return;
  ++charter_year_count[{sheet.charter, sheet.year}];
  if (auto cap = label_amount(sheet, config.capital_label)) capital[sheet.charter][sheet.year] = *cap;
}

std::vector<Flag> validate_sheet(const BalanceSheet& sheet, const ValidationContext& context,
                                 const ExtractConfig& config) {
  std::vector<Flag> out;
  for (const auto& code : sheet.flags) {
    out.push_back({code, severity_of(code), carried_detail(code), std::nullopt});
  }
  for (const auto& r : sheet.records) {
    for (auto code : r.flags) {
      if (is_carried(code)) out.push_back({code, severity_of(code), carried_detail(code), r.row_id});
    }
    const std::string v = trim(r.raw_value);
    if (!v.empty()) {
      const auto fixed = repair_token(v, config.repair);
      const AmountParse p = parse_amount(fixed.text);
      if (p.error == AmountError::kLeadingZero) {
        out.push_back({FlagCode::kLeadingZero, Severity::kRed,
                       fmt::format("'{}' has a leading zero", v), r.row_id});
      } else if (p.error == AmountError::kBadNumeric) {
        out.push_back({FlagCode::kBadNumeric, Severity::kRed,
                       fmt::format("'{}' is not a well-formed amount", v), r.row_id});
      }
    }
    if (r.side != Side::kHeader && !r.label_canonical && !config.vocabulary.empty()) {
      out.push_back({FlagCode::kUnknownLabel, Severity::kYellow,
                     fmt::format("no vocabulary entry within {} edits of '{}'", config.max_edit,
                                 r.label_raw),
                     r.row_id});
    }
  }
  for (auto& f : identity_flags(sheet)) out.push_back(std::move(f));
  if (sheet.charter.empty()) {
    out.push_back({FlagCode::kMissingCharter, Severity::kRed, "no charter number in the header",
                   std::nullopt});
  } else {
    auto it = context.charter_year_count.find({sheet.charter, sheet.year});
    if (it != context.charter_year_count.end() && it->second > 1) {
      out.push_back({FlagCode::kDupCharter, Severity::kRed,
                     fmt::format("charter {} appears on {} sheets for {}", sheet.charter,
                                 it->second, sheet.year),
                     std::nullopt});
    }
    const auto cap = label_amount(sheet, config.capital_label);
    auto hist = context.capital.find(sheet.charter);
    if (cap && hist != context.capital.end()) {
      auto prev = hist->second.lower_bound(sheet.year);
      if (prev != hist->second.begin()) {
        --prev;
        if (prev->second != *cap) {
          out.push_back({FlagCode::kCapitalChanged, Severity::kYellow,
                         fmt::format("capital {} in {} was {} in {}", format_cents(*cap),
                                     sheet.year, format_cents(prev->second), prev->first),
                         std::nullopt});
        }
      }
    }
  }
  for (const auto& rule : config.rules) {
    const auto l = eval_side(rule.lhs, sheet);
    const auto r = eval_side(rule.rhs, sheet);
    if (!l || !r) continue;
    const double d = *l - *r;
    constexpr double kEps = 1e-6;
    bool ok = true;
    if (rule.op == "<=") ok = d <= kEps;
    else if (rule.op == ">=") ok = d >= -kEps;
    else if (rule.op == "==") ok = std::abs(d) <= kEps;
    else if (rule.op == "<") ok = d < -kEps;
    else if (rule.op == ">") ok = d > kEps;
    if (!ok) {
      out.push_back({FlagCode::kRuleViolation, Severity::kYellow,
                     fmt::format("{}: {} (left {:.2f}, right {:.2f})", rule.id, rule.text, *l, *r),
                     std::nullopt});
    }
  }
  return out;
}

IdentityStatus identity_status(const BalanceSheet& sheet) {
  IdentityStatus s;
  const Totals t = totals_of(sheet);
  const auto flags = identity_flags(sheet);
  if (flags.empty()) return s;
  s.balanced = false;
  s.detail = flags.front().detail;
  if (t.asset_total && t.asset_total->amount && t.asset_total->amount->value() != t.asset_sum) {
    s.difference = std::abs(t.asset_total->amount->value() - t.asset_sum);
  } else if (t.liab_total && t.liab_total->amount && t.liab_total->amount->value() != t.liab_sum) {
    s.difference = std::abs(t.liab_total->amount->value() - t.liab_sum);
  } else if (t.asset_total && t.liab_total && t.asset_total->amount && t.liab_total->amount) {
    s.difference = std::abs(t.asset_total->amount->value() - t.liab_total->amount->value());
  }
  return s;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, "csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string records_to_csv(const BalanceSheet& sheet, const std::vector<Flag>& flags) {
  std::string out = "row,label,raw_value,amount,flags\n";
  for (const auto& r : sheet.records) {
    std::set<std::string_view> codes;
    for (const auto& f : flags) {
      if (f.row == r.row_id) codes.insert(to_string(f.code));
    }
    for (auto c : r.flags) codes.insert(to_string(c));
    // Sheet-level carried flags ride on the first row so the file alone
    // reproduces them.
    if (&r == &sheet.records.front()) {
      for (auto c : sheet.flags) codes.insert(to_string(c));
    }
    std::string joined;
    for (auto c : codes) {
      if (!joined.empty()) joined += ';';
      joined += c;
    }
    out += fmt::format("{},{},{},{},{}\n", r.row_id, csv_escape(r.label()), csv_escape(r.raw_value),
                       r.amount ? r.amount->canonical() : "", joined);
  }
  return out;
}

std::vector<CsvRow> read_records_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"row", "label", "raw_value", "amount", "flags"}) {
    throw Error(ErrorCode::kParse, "records csv: expected header row,label,raw_value,amount,flags");
  }
  std::vector<CsvRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) {
      throw Error(ErrorCode::kParse, fmt::format("records csv: line {} has {} fields", i + 1, r.size()));
    }
    CsvRow c;
    try {
      c.row = std::stoi(r[0]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, fmt::format("records csv: line {} has a bad row id", i + 1));
    }
    c.label = r[1];
    c.raw_value = r[2];
    c.amount = r[3];
    std::string_view f = r[4];
    while (!f.empty()) {
      const auto semi = f.find(';');
      c.flags.emplace_back(f.substr(0, semi));
      if (semi == std::string_view::npos) break;
      f.remove_prefix(semi + 1);
    }
    out.push_back(std::move(c));
  }
  return out;
}

BalanceSheet sheet_from_rows(const std::vector<CsvRow>& rows, const ExtractConfig& config) {
  BalanceSheet sheet;
  sheet.year = config.year;
  for (const auto& row : rows) {
    SheetRecord rec;
    rec.row_id = row.row;
    rec.label_raw = row.label;
    rec.raw_value = row.raw_value;
    for (const auto& f : row.flags) {
      const auto code = parse_flag_code(f);
      if (!code || !is_carried(*code)) continue;
      if (*code == FlagCode::kIndeterminateHeader) {
        if (std::find(sheet.flags.begin(), sheet.flags.end(), *code) == sheet.flags.end()) {
          sheet.flags.push_back(*code);
        }
        continue;
      }
      rec.flags.push_back(*code);
    }
    fill_label(rec, config);
    fill_value(rec, config);
    sheet.records.push_back(std::move(rec));
  }
  assign_sides(sheet, config);
  return sheet;
}

}  // namespace ledgerscan::extract
