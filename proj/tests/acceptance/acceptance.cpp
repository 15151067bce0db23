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


// Acceptance checks. One line per criterion with the measurement and the
// wall time; exits non-zero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include <fmt/core.h>

#include "httplib.h"
#include "json.hpp"
#include "ledgerscan/amount.hpp"
#include "ledgerscan/ensemble.hpp"
#include "ledgerscan/extract.hpp"
#include "ledgerscan/image_ops.hpp"
#include "ledgerscan/layout.hpp"
#include "ledgerscan/metrics.hpp"
#include "ledgerscan/ocr.hpp"
#include "ledgerscan/pipeline.hpp"
#include "ledgerscan/review.hpp"
#include "ledgerscan/synth.hpp"
#include "ledgerscan/tuning.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ledgerscan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kPageErrorTarget = 0.9539;
constexpr double kPageErrorTol = 0.0005;
constexpr std::size_t kGrammarMaxLen = 8;
constexpr int kBinarizeImages = 50;
constexpr int kLocalImages = 20;
constexpr double kForeEdgeIou = 0.98;
constexpr int kForeEdgeTrials = 100;
constexpr int kForeEdgeRequired = 95;
constexpr double kGridTolPx = 2.0;
constexpr double kGridSalt = 0.005;
constexpr double kEnsembleNoise = 0.05;
constexpr double kEnsembleCerMax = 0.02;
constexpr int kEnsembleAmounts = 1000;
constexpr int kRecallSheets = 50;
constexpr int kCorpusPages = 10;
constexpr double kFieldAccuracyMin = 0.99;
constexpr int kEdgeGray = 90, kPaperGray = 180;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome page_error() {
  const double p = metrics::page_error_probability(0.95, 60);
  return {std::abs(p - kPageErrorTarget) <= kPageErrorTol, fmt::format("P(0.95, 60) = {:.6f}", p)};
}

ensemble::WordCluster cluster_of(const std::vector<std::string>& texts) {
  ensemble::WordCluster c;
  const char* names[] = {"google", "microsoft", "tesseract"};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ocr::OcrWord w;
    w.text = texts[i];
    w.bbox = {0, 0, 30, 10};
    w.confidence = 0.9;
    c.members.push_back({names[i], w});
  }
  c.consensus_bbox = {0, 0, 30, 10};
  return c;
}

Outcome vote_examples() {
  const auto a = ensemble::vote_word(cluster_of({"123", "120", "123"}));
  const auto b = ensemble::vote_word(cluster_of({"23", "120", "153"}));
  return {a.text == "123" && b.text == "123",
          fmt::format("(123,120,123) -> {} by {}; (23,120,153) -> {} by {}", a.text, ensemble::to_string(a.method),
                      b.text, ensemble::to_string(b.method))};
}

Outcome amount_grammar() {
  const auto ok = parse_amount("123,456.00");
  const auto lz = parse_amount("023,456.00");
  const auto bn = parse_amount("123,4.56");
  const bool examples = ok.ok() && ok.amount->value() == 12345600 && lz.error == AmountError::kLeadingZero &&
                        bn.error == AmountError::kBadNumeric;
  static constexpr char kAlphabet[] = "0123456789,.";
  std::size_t checked = 0, accepted = 0, mismatches = 0;
  std::string first;
  std::string s;
  for (std::size_t len = 1; len <= kGrammarMaxLen; ++len) {
    std::vector<int> idx(len, 0);
    s.assign(len, '0');
    while (true) {
      for (std::size_t i = 0; i < len; ++i) s[i] = kAlphabet[idx[i]];
      const bool mine = parse_amount(s).ok();
      if (mine != oracle::amount_grammar_accepts(s) && mismatches++ == 0) first = s;
      accepted += mine;
      ++checked;
      std::size_t k = len;
      while (k > 0 && ++idx[k - 1] == 12) idx[--k] = 0;
      if (k == 0) break;
    }
  }
  return {examples && mismatches == 0,
          fmt::format("examples {}; {} strings up to {} chars, {} accepted, {} disagree with the reference{}",
                      examples ? "ok" : "wrong", checked, kGrammarMaxLen, accepted, mismatches,
                      mismatches ? " (first '" + first + "')" : "")};
}

Outcome repair_examples() {
  const auto& table = default_repair_map();
  const auto a = repair_token("1O9", table).text;
  const auto b = repair_token("1GB", table).text;
  const auto c = repair_token("BOND", table).text;
  return {a == "109" && b == "168" && c == "BOND", fmt::format("1O9 -> {}, 1GB -> {}, BOND -> {}", a, b, c)};
}

Outcome otsu_reference() {
  std::mt19937_64 rng(50);
  int equal = 0;
  for (int i = 0; i < kBinarizeImages; ++i) {
    const Raster img = oracle::random_gray(rng, 64, 64);
    equal += image::otsu_threshold(img) == oracle::otsu_bruteforce(img);
  }
  return {equal == kBinarizeImages, fmt::format("{}/{} thresholds equal the exhaustive search", equal,
                                                kBinarizeImages)};
}

Outcome local_reference() {
  std::mt19937_64 rng(20);
  int equal = 0, total = 0;
  for (int i = 0; i < kLocalImages; ++i) {
    const int w = 16 + static_cast<int>(rng() % 113), h = 16 + static_cast<int>(rng() % 113);
    const Raster img = oracle::random_gray(rng, w, h);
    for (int window : {15, 31}) {
      image::BinarizeParams sp{.method = image::BinarizeMethod::kSauvola, .window = window};
      image::BinarizeParams wp{.method = image::BinarizeMethod::kWolf, .window = window};
      equal += image::binarize(img, sp) == oracle::sauvola_naive(img, window, 0.2, 128.0);
      equal += image::binarize(img, wp) == oracle::wolf_naive(img, window, 0.5);
      total += 2;
    }
  }
  return {equal == total, fmt::format("{}/{} outputs identical to the per-pixel window reference", equal, total)};
}

Outcome fore_edges() {
  int good = 0;
  double worst = 1.0;
  for (int i = 0; i < kForeEdgeTrials; ++i) {
    const auto c = fixture::fore_edge_composite(1000 + i, 480, 360);
    const double v = fixture::crop_iou(image::remove_fore_edges(c.image, {}).crop_box, c.page);
    good += v >= kForeEdgeIou;
    worst = std::min(worst, v);
  }
  // Bright regions whose proportions are far from the frame's.
  const std::vector<Box> strips = {{0, 160, 480, 200}, {200, 0, 240, 360}, {20, 20, 460, 70}, {30, 10, 90, 350}};
  int guarded = 0;
  for (const auto& b : strips) {
    Raster img = Raster::gray(480, 360, 15);
    fixture::fill_box(img, b, 230);
    const auto r = image::remove_fore_edges(img, {});
    guarded += !r.crop_box && r.cropped == img;
  }
  const bool pass = good >= kForeEdgeRequired && guarded == static_cast<int>(strips.size());
  return {pass, fmt::format("{}/{} crops with IoU >= {} (worst {:.4f}); {}/{} strip images left uncropped", good,
                            kForeEdgeTrials, kForeEdgeIou, worst, guarded, strips.size())};
}

Outcome hough_grid() {
  const std::vector<int> hs{80, 330, 560}, vs{60, 240, 430, 610};
  const Raster img = fixture::grid_page(680, 640, hs, vs, kGridSalt, 8);
  layout::HoughParams hp;
  hp.min_len = 200;
  const auto segs = layout::detect_line_segments(layout::detect_edges(img), hp);
  const auto d = layout::consolidate_delimiters(segs, img.width(), img.height());
  double worst = 0;
  bool pass = d.h.size() == hs.size() && d.v.size() == vs.size();
  if (pass) {
    for (std::size_t i = 0; i < hs.size(); ++i) worst = std::max(worst, std::abs(d.h[i] - hs[i]));
    for (std::size_t i = 0; i < vs.size(); ++i) worst = std::max(worst, std::abs(d.v[i] - vs[i]));
    pass = worst <= kGridTolPx;
  }
  return {pass, fmt::format("{} horizontal / {} vertical delimiters from {} segments, max offset {:.2f} px",
                            d.h.size(), d.v.size(), segs.size(), worst)};
}

Outcome ensemble_cer() {
  std::mt19937_64 rng(1000);
  std::vector<ocr::TruthWord> truth;
  for (int i = 0; i < kEnsembleAmounts; ++i) {
    const int y = 10 + (i % 100) * 20, x = 10 + (i / 100) * 150;
    truth.push_back({fixture::random_amount(rng), {x, y, x + 110, y + 14}});
  }
  std::vector<ocr::OcrPage> pages;
  for (std::uint64_t seed : {11, 12, 13}) {
    ocr::NoiseModel noise;
    noise.substitution_prob = kEnsembleNoise;
    noise.seed = seed;
    pages.push_back(ocr::mock_ocr(truth, 1600, 2100, noise, "mock" + std::to_string(seed)));
  }
  auto page_cer = [&](const ocr::OcrPage& p) {
    double sum = 0;
    for (const auto& t : truth) {
      auto it = std::find_if(p.words.begin(), p.words.end(),
                             [&](const ocr::OcrWord& w) { return iou(w.bbox, t.bbox) > 0.5; });
      sum += it == p.words.end() ? 1.0 : metrics::cer(it->text, t.text);
    }
    return sum / static_cast<double>(truth.size());
  };
  std::vector<double> single;
  for (const auto& p : pages) single.push_back(page_cer(p));
  const double best = *std::min_element(single.begin(), single.end());
  const double ens = page_cer(ensemble::ensemble_pages(pages));
  return {ens <= best && ens < kEnsembleCerMax,
          fmt::format("single CER {:.4f} {:.4f} {:.4f}, ensemble {:.4f}", single[0], single[1], single[2], ens)};
}

struct FixtureSheet {
  extract::Grid grid;
  std::vector<int> value_rows;
  std::vector<int> asset_items;
};

FixtureSheet balanced_sheet(std::mt19937_64& rng, int index) {
  static const std::vector<std::string> assets = {"Loans and discounts",        "Overdrafts",
                                                  "Due from national banks",    "Checks and other cash items",
                                                  "Lawful money reserve in bank", "Premiums on U.S. bonds"};
  static const std::vector<std::string> liabilities = {"Capital stock paid in", "Surplus fund", "Undivided profits",
                                                       "Individual deposits subject to check"};
  FixtureSheet s;
  s.grid.columns = 4;
  s.grid.value_column = 2;
  auto add = [&](std::string label, std::string value, bool header = false) {
    extract::GridRow r;
    r.row_id = static_cast<int>(s.grid.rows.size());
    r.cells = {"", std::move(label), std::move(value), ""};
    r.header = header;
    if (!r.cells[2].empty()) s.value_rows.push_back(r.row_id);
    s.grid.rows.push_back(std::move(r));
    return s.grid.rows.back().row_id;
  };
  add(fmt::format("First National Bank, Galena. No. {}", 1000 + index), "", true);
  add("Resources", "");
  std::int64_t total = 0;
  for (const auto& l : assets) {
    const std::int64_t v = 100 + static_cast<std::int64_t>(rng() % 90000000);
    total += v;
    s.asset_items.push_back(add(l, format_cents(v)));
  }
  add("Total", format_cents(total));
  add("Liabilities", "");
  std::int64_t rest = total;
  for (std::size_t i = 0; i + 1 < liabilities.size(); ++i) {
    const std::int64_t v = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(rest / 4));
    rest -= v;
    add(liabilities[i], format_cents(v));
  }
  add(liabilities.back(), format_cents(rest));
  add("Total", format_cents(total));
  return s;
}

bool identity_flagged(const extract::Grid& g, const extract::ExtractConfig& config) {
  const auto flags = extract::validate_sheet(extract::assemble_balance_sheet(g, config), {}, config);
  return std::any_of(flags.begin(), flags.end(),
                     [](const extract::Flag& f) { return f.code == extract::FlagCode::kIdentityMismatch; });
}

Outcome validation_recall() {
  extract::ExtractConfig config;
  config.vocabulary = extract::parse_vocabulary(synth::vocabulary_tsv());
  config.year = 1900;
  std::mt19937_64 rng(77);
  std::size_t changes = 0, caught = 0, pairs = 0, pair_flags = 0, clean_flags = 0;
  for (int n = 0; n < kRecallSheets; ++n) {
    const FixtureSheet s = balanced_sheet(rng, n);
    clean_flags += identity_flagged(s.grid, config);
    for (int row : s.value_rows) {
      const std::string original = s.grid.rows[row].cells[2];
      for (std::size_t pos = 0; pos < original.size(); ++pos) {
        if (!std::isdigit(static_cast<unsigned char>(original[pos]))) continue;
        for (char d = '0'; d <= '9'; ++d) {
          if (d == original[pos]) continue;
          extract::Grid g = s.grid;
          g.rows[row].cells[2][pos] = d;
          ++changes;
          caught += identity_flagged(g, config);
        }
      }
    }
    // +1 on one asset item and -1 on another in the last place.
    for (std::size_t i = 0; i < s.asset_items.size(); ++i) {
      for (std::size_t j = 0; j < s.asset_items.size(); ++j) {
        const std::string& a = s.grid.rows[s.asset_items[i]].cells[2];
        const std::string& b = s.grid.rows[s.asset_items[j]].cells[2];
        if (i == j || a.back() == '9' || b.back() == '0') continue;
        if ((a.find('.') == std::string::npos) != (b.find('.') == std::string::npos)) continue;
        extract::Grid g = s.grid;
        g.rows[s.asset_items[i]].cells[2].back() += 1;
        g.rows[s.asset_items[j]].cells[2].back() -= 1;
        ++pairs;
        pair_flags += identity_flagged(g, config);
      }
    }
  }
  const bool pass = changes > 0 && caught == changes && pairs > 0 && pair_flags == 0 && clean_flags == 0;
  return {pass, fmt::format("{}/{} single-digit changes flagged; {}/{} compensating pairs flagged; {} unperturbed "
                            "sheets flagged",
                            caught, changes, pair_flags, pairs, clean_flags)};
}

std::vector<std::string> outputs(const Workspace& ws) {
  std::vector<std::string> out;
  for (int id : ws.page_ids()) {
    out.push_back(ws.load_artifact(id, "records").first);
    out.push_back(ws.load_artifact(id, "flags").first);
  }
  return out;
}

Outcome end_to_end() {
  fixture::TempDir dir("acceptance-e2e");
  synth::CorpusOptions o;
  o.pages = kCorpusPages;
  synth::write_corpus(dir.path() / "images", o);
  const auto config = pipeline::load_config(dir.path() / "images" / "pipeline.conf");
  auto a = Workspace::open(dir.path() / "images", dir.path() / "cache-a");
  auto b = Workspace::open(dir.path() / "images", dir.path() / "cache-b");
  std::size_t failures = pipeline::run_pipeline(a, config, a.page_ids(), {}).failures();
  failures += pipeline::run_pipeline(b, config, b.page_ids(), {}).failures();
  const auto first = outputs(a);
  failures += pipeline::run_pipeline(a, config, a.page_ids(), {}).failures();
  const bool fresh_equal = first == outputs(b);
  const bool rerun_equal = first == outputs(a);
  double hits = 0;
  std::size_t fields = 0;
  for (int id : a.page_ids()) {
    const auto m = metrics::field_accuracy(extract::read_records_csv(a.load_artifact(id, "records").first),
                                           extract::read_records_csv(a.load_artifact(id, "truth").first));
    hits += m.value * static_cast<double>(m.n);
    fields += m.n;
  }
  const double acc = fields ? hits / static_cast<double>(fields) : 0.0;
  return {failures == 0 && fresh_equal && rerun_equal && acc >= kFieldAccuracyMin,
          fmt::format("{} pages, {} failed; identical across workspaces {}, on rerun {}; field accuracy {:.4f} over "
                      "{} fields",
                      a.page_ids().size(), failures, fresh_equal, rerun_equal, acc, fields)};
}

Outcome tuning_grid() {
  const auto spec = tuning::parse_tuning_spec(
      "objective = crop_iou\nholdout_fraction = 0.2\nseed = 5\nparam binarize_tau = 100..200 step 10\n");
  std::vector<int> pages(20);
  std::iota(pages.begin(), pages.end(), 1);
  std::mutex mu;
  std::vector<int> order;  // page of every evaluation, in call order
  const auto r = tuning::grid_search(spec, pages, [&](const tuning::ParamSet& p, int page) {
    {
      std::lock_guard lock(mu);
      order.push_back(page);
    }
    image::ForeEdgeParams fp;
    fp.binarize_tau = std::stoi(p.at(0).second);
    const auto c = fixture::fore_edge_composite(700 + page, 480, 360, {20, kEdgeGray, kPaperGray, 6});
    return fixture::crop_iou(image::remove_fore_edges(c.image, fp).crop_box, c.page);
  });
  const int tau = std::stoi(r.best.at(0).second);
  const std::set<int> holdout(r.holdout_pages.begin(), r.holdout_pages.end());
  // Holdout pages may only appear after the last training evaluation.
  std::size_t last_train = 0, first_holdout = order.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (holdout.count(order[i])) {
      first_holdout = std::min(first_holdout, i);
    } else {
      last_train = i;
    }
  }
  const std::size_t holdout_calls = order.size() - static_cast<std::size_t>(std::count_if(
                                                        order.begin(), order.end(),
                                                        [&](int p) { return !holdout.count(p); }));
  const bool isolated = !holdout.empty() && first_holdout > last_train && holdout_calls == holdout.size();
  return {tau > kEdgeGray && tau < kPaperGray && isolated,
          fmt::format("best tau {} (train IoU {:.4f}, holdout {:.4f}); {} holdout evaluations, all after training",
                      tau, r.train_metric, r.holdout_metric.value_or(-1.0), holdout_calls)};
}

Outcome review_contract() {
  fixture::TempDir dir("acceptance-review");
  synth::CorpusOptions o;
  o.pages = 2;
  synth::write_corpus(dir.path() / "images", o);
  const auto config = pipeline::load_config(dir.path() / "images" / "pipeline.conf");
  auto ws = Workspace::open(dir.path() / "images", dir.path() / "cache");
  if (pipeline::run_pipeline(ws, config, ws.page_ids(), {}).failures()) return {false, "pipeline failed"};
  review::ReviewService service(ws, config);
  review::ReviewServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread thread([&] { server.serve(); });
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(30, 0);

  auto put = [&](std::uint64_t base, int row, const std::string& value) {
    json j;
    j["base_version"] = base;
    j["reviewer"] = "acceptance";
    j["edits"] = json::array({{{"row_id", row}, {"field", "amount"}, {"value", value}}});
    return c.Put("/api/pages/1/records", j.dump(), "application/json");
  };
  auto has_mismatch = [](const json& flags) {
    return std::any_of(flags.begin(), flags.end(), [](const json& f) { return f["code"] == "IDENTITY_MISMATCH"; });
  };
  std::string detail;
  bool pass = false;
  try {
    const json before = json::parse(c.Get("/api/pages/1")->body);
    json loans;
    for (const auto& r : before["records"]) {
      if (r["label"] == "Loans and discounts") loans = r;
    }
    const std::string good = format_cents(amount_from_canonical(loans["amount"].get<std::string>())->value());
    const std::string bad = format_cents(amount_from_canonical(good)->value() + 1000);
    const int row = loans["row_id"];
    const auto perturbed = put(before["version"], row, bad);
    const json pj = json::parse(perturbed->body);
    const bool broke = perturbed->status == 200 && !pj["identity"]["balanced"] && has_mismatch(pj["flags"]);
    const auto truth_before = ws.has_artifact(1, "truth") ? ws.load_artifact(1, "truth").first : "";
    const auto refused = c.Post("/api/pages/1/truth", R"({"reviewer":"acceptance"})", "application/json");
    const auto truth_after_refusal = ws.has_artifact(1, "truth") ? ws.load_artifact(1, "truth").first : "";
    const auto stale = put(before["version"], row, good);
    const bool stale_ok = stale->status == 409 && json::parse(c.Get("/api/pages/1")->body)["version"] == pj["version"];
    const auto fixed = put(pj["version"], row, good);
    const json fj = json::parse(fixed->body);
    const bool fixed_ok = fixed->status == 200 && fj["identity"]["balanced"] && !has_mismatch(fj["flags"]);
    const auto promoted = c.Post("/api/pages/1/truth", R"({"reviewer":"acceptance"})", "application/json");
    const bool truth_kept = truth_after_refusal == truth_before;
    pass = broke && refused->status == 422 && truth_kept && stale_ok && fixed_ok && promoted->status == 200;
    detail = fmt::format("perturb -> balanced={} mismatch={}; promote while red -> {}; stale PUT -> {}; fix -> "
                         "balanced={}; promote -> {}",
                         static_cast<bool>(pj["identity"]["balanced"]), has_mismatch(pj["flags"]), refused->status,
                         stale->status, static_cast<bool>(fj["identity"]["balanced"]), promoted->status);
  } catch (const std::exception& e) {
    detail = std::string("error: ") + e.what();
  }
  server.stop();
  thread.join();
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"page error probability", page_error},
      {"word voting examples", vote_examples},
      {"amount grammar", amount_grammar},
      {"amount repair examples", repair_examples},
      {"otsu threshold", otsu_reference},
      {"sauvola and wolf thresholds", local_reference},
      {"fore-edge removal", fore_edges},
      {"table grid recovery", hough_grid},
      {"ensemble error rate", ensemble_cer},
      {"validation recall", validation_recall},
      {"end-to-end corpus", end_to_end},
      {"parameter tuning", tuning_grid},
      {"review http contract", review_contract},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    fmt::print("{} [{}] {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail, secs);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
