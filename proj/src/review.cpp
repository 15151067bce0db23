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

#include "ledgerscan/review.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/chrono.h>
#include <fmt/core.h>

#include "json.hpp"
#include "ledgerscan/amount.hpp"

namespace ledgerscan::review {

using nlohmann::ordered_json;
using extract::CsvRow;
using extract::Flag;
using extract::Severity;

std::optional<Filter> parse_filter(std::string_view name) {
  if (name == "all") return Filter::kAll;
  if (name == "flagged") return Filter::kFlagged;
  if (name == "red_only") return Filter::kRedOnly;
  if (name == "unreviewed") return Filter::kUnreviewed;
  return std::nullopt;
}

namespace {

std::pair<std::size_t, std::size_t> count_severity(const std::vector<Flag>& flags) {
  std::size_t red = 0;
  for (const auto& f : flags) red += f.severity == Severity::kRed;
  return {red, flags.size() - red};
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

ordered_json flag_json(const Flag& f) {
  ordered_json j;
  j["code"] = extract::to_string(f.code);
  j["severity"] = extract::to_string(f.severity);
  j["detail"] = f.detail;
  j["row"] = f.row ? ordered_json(*f.row) : ordered_json(nullptr);
  return j;
}

ordered_json edits_json(const std::vector<Edit>& edits) {
  ordered_json a = ordered_json::array();
  for (const auto& e : edits) a.push_back({{"row_id", e.row_id}, {"field", e.field}, {"value", e.value}});
  return a;
}

std::vector<Edit> edits_from(const nlohmann::json& a) {
  std::vector<Edit> out;
  for (const auto& e : a) {
    out.push_back({e.at("row_id").get<int>(), e.at("field").get<std::string>(), e.at("value").get<std::string>()});
  }
  return out;
}

}  // namespace

void apply_edits(std::vector<CsvRow>& rows, const std::vector<Edit>& edits) {
  for (const auto& e : edits) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const CsvRow& r) { return r.row == e.row_id; });
    if (it == rows.end()) throw Error(ErrorCode::kInvalidArgument, fmt::format("no row {}", e.row_id));
    if (e.field == "label") {
      it->label = e.value;
    } else if (e.field == "amount") {
      it->raw_value = e.value;
      it->amount.clear();
    } else {
      throw Error(ErrorCode::kInvalidArgument, "field must be label or amount, got '" + e.field + "'");
    }
    // A reviewer has looked at the row; recognition-time doubts no longer apply.
    std::erase_if(it->flags, [](const std::string& code) {
      const auto c = extract::parse_flag_code(code);
      return c && extract::is_carried(*c) && *c != extract::FlagCode::kIndeterminateHeader;
    });
  }
}

ReviewService::ReviewService(Workspace ws, pipeline::PipelineConfig config)
    : ws_(std::move(ws)), config_(std::move(config)) {}

std::mutex& ReviewService::page_mutex(int page_id) {
  std::lock_guard lock(mutexes_guard_);
  auto& m = mutexes_[page_id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

std::vector<PageSummary> ReviewService::list_pages(Filter filter) const {
  std::vector<PageSummary> out;
  for (int id : ws_.page_ids()) {
    const PageEntry e = ws_.entry(id);
    PageSummary s{id, e.version, e.status, e.artifacts.count("flags") > 0, e.reviewed};
    if (s.validated) {
      std::tie(s.red, s.yellow) = count_severity(extract::flags_from_json(ws_.load_artifact(id, "flags").first));
    }
    const bool keep = filter == Filter::kAll || (filter == Filter::kFlagged && s.red + s.yellow > 0) ||
                      (filter == Filter::kRedOnly && s.red > 0) || (filter == Filter::kUnreviewed && !s.reviewed);
    if (keep) out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const PageSummary& a, const PageSummary& b) {
    return a.red != b.red ? a.red > b.red : a.page_id < b.page_id;
  });
  return out;
}

Bundle ReviewService::get_bundle(int page_id) const {
  const PageEntry e = ws_.entry(page_id);
  if (!e.artifacts.count("records")) {
    throw Error(ErrorCode::kNotYetProduced, fmt::format("page {}: not yet extracted", page_id));
  }
  Bundle b;
  b.page_id = page_id;
  b.version = e.version;
  b.reviewed = e.reviewed;
  b.has_processed = e.artifacts.count("processed") > 0;
  const auto rows = extract::read_records_csv(ws_.load_artifact(page_id, "records").first);
  if (e.artifacts.count("flags")) b.flags = extract::flags_from_json(ws_.load_artifact(page_id, "flags").first);
  const auto sheet = extract::sheet_from_rows(rows, config_.extract);
  b.bank_name = sheet.bank_name;
  b.city = sheet.city;
  b.charter = sheet.charter;
  b.identity = extract::identity_status(sheet);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    BundleRecord r{rows[i], std::string(extract::to_string(sheet.records[i].side)), {}};
    for (const auto& f : b.flags) {
      if (f.row == rows[i].row) r.flags.push_back(f);
    }
    b.records.push_back(std::move(r));
  }
  std::tie(b.red, b.yellow) = count_severity(b.flags);
  return b;
}

extract::ValidationContext ReviewService::context_excluding(int page_id) const {
  extract::ValidationContext ctx;
  for (int id : ws_.page_ids()) {
    if (id == page_id) continue;
    for (const char* kind : {"records", "extracted"}) {
      if (!ws_.has_artifact(id, kind)) continue;
      ctx.add(extract::sheet_from_rows(extract::read_records_csv(ws_.load_artifact(id, kind).first), config_.extract),
              config_.extract);
      break;
    }
  }
  return ctx;
}

ReviewService::Validated ReviewService::validate_rows(int page_id, const std::vector<CsvRow>& rows) const {
  const auto sheet = extract::sheet_from_rows(rows, config_.extract);
  auto ctx = context_excluding(page_id);
  ctx.add(sheet, config_.extract);
  const auto flags = extract::validate_sheet(sheet, ctx, config_.extract);
  return {extract::records_to_csv(sheet, flags), extract::flags_to_json(flags)};
}

Bundle ReviewService::apply_corrections(int page_id, const CorrectionSet& c) {
  std::lock_guard lock(page_mutex(page_id));
  const PageEntry e = ws_.entry(page_id);
  if (e.version != c.base_version) {
    throw Error(ErrorCode::kConflict, fmt::format("page {}: version {} is stale, current version is {}", page_id,
                                                  c.base_version, e.version));
  }
  if (!e.artifacts.count("records")) {
    throw Error(ErrorCode::kNotYetProduced, fmt::format("page {}: not yet extracted", page_id));
  }
  if (c.edits.empty()) throw Error(ErrorCode::kInvalidArgument, "no edits");
  auto rows = extract::read_records_csv(ws_.load_artifact(page_id, "records").first);
  apply_edits(rows, c.edits);
  const auto v = validate_rows(page_id, rows);
  const std::uint64_t version =
      ws_.store_artifacts(page_id, {{"records", v.records_csv}, {"flags", v.flags_json}}, c.base_version);
  ordered_json audit;
  audit["time"] = now_utc();
  audit["action"] = "edit";
  audit["reviewer"] = c.reviewer;
  audit["base_version"] = c.base_version;
  audit["version"] = version;
  audit["edits"] = edits_json(c.edits);
  ws_.append_audit(page_id, audit.dump());
  return get_bundle(page_id);
}

std::uint64_t ReviewService::promote(int page_id, const std::string& reviewer) {
  std::lock_guard lock(page_mutex(page_id));
  const Bundle b = get_bundle(page_id);
  if (b.red > 0) {
    std::vector<Flag> red;
    for (const auto& f : b.flags) {
      if (f.severity == Severity::kRed) red.push_back(f);
    }
    throw PromotionRefused(fmt::format("page {}: {} red flag(s) remain", page_id, b.red), std::move(red));
  }
  ws_.store_artifact(page_id, "truth", ws_.load_artifact(page_id, "records").first);
  const std::uint64_t version = ws_.set_reviewed(page_id, true);
  ordered_json audit;
  audit["time"] = now_utc();
  audit["action"] = "promote";
  audit["reviewer"] = reviewer;
  audit["version"] = version;
  ws_.append_audit(page_id, audit.dump());
  return version;
}

std::string ReviewService::replay(int page_id) const {
  auto rows = extract::read_records_csv(ws_.load_artifact(page_id, "extracted").first);
  std::vector<std::pair<std::uint64_t, std::vector<Edit>>> steps;
  for (const auto& line : ws_.read_audit(page_id)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("action", "") != "edit") continue;
    steps.emplace_back(j.at("version").get<std::uint64_t>(), edits_from(j.at("edits")));
  }
  std::stable_sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [version, edits] : steps) apply_edits(rows, edits);
  return validate_rows(page_id, rows).records_csv;
}

std::string bundle_to_json(const Bundle& b) {
  ordered_json j;
  j["page_id"] = b.page_id;
  j["version"] = b.version;
  j["reviewed"] = b.reviewed;
  j["images"] = {{"raw", fmt::format("/api/pages/{}/image?version=raw", b.page_id)},
                 {"processed", b.has_processed ? ordered_json(fmt::format("/api/pages/{}/image?version=processed",
                                                                          b.page_id))
                                               : ordered_json(nullptr)}};
  j["header"] = {{"bank_name", b.bank_name}, {"city", b.city}, {"charter", b.charter}};
  ordered_json records = ordered_json::array();
  for (const auto& r : b.records) {
    ordered_json rj;
    rj["row_id"] = r.row.row;
    rj["label"] = r.row.label;
    rj["raw_value"] = r.row.raw_value;
    rj["amount"] = r.row.amount;
    rj["side"] = r.side;
    rj["carried"] = r.row.flags;
    ordered_json fl = ordered_json::array();
    for (const auto& f : r.flags) fl.push_back(flag_json(f));
    rj["flags"] = std::move(fl);
    records.push_back(std::move(rj));
  }
  j["records"] = std::move(records);
  ordered_json flags = ordered_json::array();
  for (const auto& f : b.flags) flags.push_back(flag_json(f));
  j["flags"] = std::move(flags);
  j["identity"] = {{"balanced", b.identity.balanced},
                   {"difference_cents", b.identity.difference},
                   {"difference", format_cents(b.identity.difference)},
                   {"detail", b.identity.detail}};
  j["red"] = b.red;
  j["yellow"] = b.yellow;
  return j.dump();
}

std::string summaries_to_json(const std::vector<PageSummary>& pages) {
  ordered_json a = ordered_json::array();
  for (const auto& s : pages) {
    a.push_back({{"page_id", s.page_id},
                 {"version", s.version},
                 {"status", s.status},
                 {"validated", s.validated},
                 {"reviewed", s.reviewed},
                 {"red", s.red},
                 {"yellow", s.yellow}});
  }
  return ordered_json{{"pages", std::move(a)}}.dump();
}

CorrectionSet corrections_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    CorrectionSet c;
    c.base_version = j.at("base_version").get<std::uint64_t>();
    c.edits = edits_from(j.at("edits"));
    c.reviewer = j.value("reviewer", "");
    if (c.reviewer.empty()) throw Error(ErrorCode::kInvalidArgument, "reviewer is required");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("correction set: ") + e.what());
  }
}

}  // namespace ledgerscan::review
