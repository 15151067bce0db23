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

#include "ledgerscan/synth.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <fmt/core.h>

#include "ledgerscan/amount.hpp"
#include "ledgerscan/error.hpp"
#include "ledgerscan/extract.hpp"
#include "ledgerscan/workspace.hpp"

namespace fs = std::filesystem;

namespace ledgerscan::synth {

namespace {

constexpr int kPitch = 9;       // px per character
constexpr int kRowPitch = 40;
constexpr int kTableTop = 200;
constexpr int kRuleLeft = 100, kRuleMid = 800, kRuleRight = 1100;
constexpr int kLabelX = 120, kIndentX = 150, kValueRight = 1080;
constexpr std::uint8_t kInk = 25, kPaper = 235;

struct Item {
  std::string canonical;
  std::string printed;       // first line as printed
  std::string continuation;  // printed on an indented second line
};

const std::vector<Item> kAssets = {
    {"Loans and discounts", "Loans and discounts", ""},
    {"Overdrafts", "Overdrafts", ""},
    {"U.S. bonds to secure circulation", "U.S. bonds to secure circulation", ""},
    {"Premiums on U.S. bonds", "Premiums on U.S. bonds", ""},
    {"Stocks, securities, etc.", "Stocks, securities, etc.", ""},
    {"Banking house, furniture, and fixtures", "Banking house, furniture, and fixtures", ""},
    {"Due from national banks", "Due from national banks", ""},
    {"Due from approved reserve agents", "Due from approved reserve agents", ""},
    {"Checks and other cash items", "Checks and other cash items", ""},
    {"Notes of other national banks", "Notes of other Nat'l banks", ""},
    {"Lawful money reserve in bank", "Lawful money reserve in bank", ""},
    {"Redemption fund with U.S. Treasurer", "Redemption fund with", "U.S. Treasurer"},
};

const std::vector<Item> kLiabilities = {
    {"Capital stock paid in", "Capital stock paid in", ""},
    {"Surplus fund", "Surplus fund", ""},
    {"Undivided profits", "Undivided profits", ""},
    {"National bank notes outstanding", "National bank notes outstanding", ""},
    {"Due to other national banks", "Due to other national banks", ""},
    {"Individual deposits subject to check", "Individual deposits subject to check", ""},
    {"Demand certificates of deposit", "Demand certificates of deposit", ""},
};

const std::set<std::string> kOptional = {"Overdrafts", "Premiums on U.S. bonds", "Stocks, securities, etc.",
                                         "Due to other national banks", "Demand certificates of deposit"};

const std::vector<std::string> kTowns = {"Springfield", "Marietta", "Galena",   "Red Wing", "Keokuk",
                                         "Natchez",     "Oswego",   "Bangor",   "Laramie",  "Helena",
                                         "Dubuque",     "Paducah",  "Sedalia",  "Bozeman",  "Elmira"};
const std::vector<std::string> kNames = {"First National Bank", "Citizens National Bank", "Merchants National Bank",
                                         "Farmers National Bank", "Second National Bank"};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

int glyph_height(char c) { return 9 + static_cast<unsigned char>(c) * 7 % 5; }

/// Draws a word as character blocks sitting on `baseline`; returns its box.
Box draw_word(Raster& img, int x, int baseline, const std::string& text, double scale) {
  const int pitch = static_cast<int>(std::lround(kPitch * scale));
  const int glyph_w = static_cast<int>(std::lround(6 * scale));
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const int cx = x + static_cast<int>(i) * pitch;
    int top = baseline - static_cast<int>(std::lround(glyph_height(c) * scale)), bottom = baseline, w = glyph_w;
    if (c == '.' || c == ',') {
      top = baseline - 3;
      bottom = c == ',' ? baseline + 2 : baseline;
      w = 3;
    } else if (c == '\'') {
      top = baseline - static_cast<int>(std::lround(12 * scale));
      bottom = top + 4;
      w = 2;
    }
    for (int y = std::max(0, top); y < std::min(img.height(), bottom); ++y) {
      for (int xx = std::max(0, cx); xx < std::min(img.width(), cx + w); ++xx) img.at(xx, y) = kInk;
    }
  }
  const int width = static_cast<int>(text.size()) * pitch - (pitch - glyph_w);
  return {x, baseline - static_cast<int>(std::lround(14 * scale)), x + width, baseline + 3};
}

void draw_rect(Raster& img, int x0, int y0, int x1, int y1) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.at(x, y) = kInk;
  }
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto j = s.find(' ', i);
    out.push_back(s.substr(i, j == std::string::npos ? std::string::npos : j - i));
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

struct Line {
  std::string label;  // printed
  std::string value;  // printed
  bool indent = false;
};

std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Random cents value; whole dollars when `whole`.
std::int64_t money(std::mt19937_64& rng, std::int64_t lo_dollars, std::int64_t hi_dollars, bool whole = false) {
  const std::int64_t d = uniform(rng, lo_dollars, hi_dollars);
  return d * 100 + (whole ? 0 : uniform(rng, 0, 99));
}

SynthPage make_page(const CorpusOptions& o, int index, std::set<int>& charters) {
  std::mt19937_64 rng(mix(o.seed, static_cast<std::uint64_t>(index)));
  SynthPage page;
  page.index = index;
  page.stem = fmt::format("page_{:04d}", index);

  int charter = 0;
  do {
    charter = static_cast<int>(uniform(rng, 1000, 9999));
  } while (!charters.insert(charter).second);
  const std::string header = fmt::format("{}, {}. No. {}", kNames[uniform(rng, 0, kNames.size() - 1)],
                                         kTowns[(index - 1) % kTowns.size()], charter);

  // Amounts in cents; the sheet balances by construction.
  const std::int64_t capital = 100 * 25000 * uniform(rng, 1, 8);
  std::map<std::string, std::int64_t> v;
  v["Capital stock paid in"] = capital;
  v["Surplus fund"] = capital / 100 * uniform(rng, 5, 100);
  v["Surplus fund"] -= v["Surplus fund"] % 100;
  v["Undivided profits"] = money(rng, 500, capital / 500);
  v["National bank notes outstanding"] = capital / 4 * uniform(rng, 1, 4);
  v["Due to other national banks"] = money(rng, 1000, capital / 400);
  v["Demand certificates of deposit"] = money(rng, 500, capital / 500);
  v["Individual deposits subject to check"] = money(rng, capital / 100, capital / 25);
  v["U.S. bonds to secure circulation"] = v["National bank notes outstanding"];
  v["Redemption fund with U.S. Treasurer"] = v["National bank notes outstanding"] / 20;
  v["Overdrafts"] = money(rng, 10, 3000);
  v["Premiums on U.S. bonds"] = money(rng, 100, 8000, true);
  v["Stocks, securities, etc."] = money(rng, 500, 40000);
  v["Banking house, furniture, and fixtures"] = money(rng, 2000, 30000, true);
  v["Due from national banks"] = money(rng, 1000, 60000);
  v["Due from approved reserve agents"] = money(rng, 1000, 90000);
  v["Checks and other cash items"] = money(rng, 50, 5000);
  v["Notes of other national banks"] = money(rng, 100, 9000, true);
  v["Lawful money reserve in bank"] = money(rng, 2000, 60000);

  std::set<std::string> present;
  for (const auto* list : {&kAssets, &kLiabilities}) {
    for (const auto& it : *list) {
      if (!kOptional.count(it.canonical) || uniform(rng, 0, 9) < 7) present.insert(it.canonical);
    }
  }
  auto side_sum = [&](const std::vector<Item>& items, const std::string& skip) {
    std::int64_t s = 0;
    for (const auto& it : items) {
      if (present.count(it.canonical) && it.canonical != skip) s += v[it.canonical];
    }
    return s;
  };
  const std::int64_t liabilities = side_sum(kLiabilities, "");
  std::int64_t loans = liabilities - side_sum(kAssets, "Loans and discounts");
  if (loans < capital) {
    v["Individual deposits subject to check"] += capital - loans;
    loans = capital;
  }
  v["Loans and discounts"] = loans;
  const std::int64_t total = side_sum(kAssets, "");
  if (total != side_sum(kLiabilities, "")) throw std::logic_error("synthetic sheet does not balance");

  std::vector<Line> lines;
  auto section = [&](const std::string& name, const std::vector<Item>& items) {
    lines.push_back({name, "", false});
    page.rows.push_back({name, ""});
    for (const auto& it : items) {
      if (!present.count(it.canonical)) continue;
      const std::string value = format_cents(v[it.canonical]);
      lines.push_back({it.printed, value, false});
      if (!it.continuation.empty()) lines.push_back({it.continuation, "", true});
      page.rows.push_back({it.canonical, value});
    }
    const std::string t = format_cents(total);
    lines.push_back({"Total", t, false});
    page.rows.push_back({"Total", t});
  };
  page.rows.push_back({"", ""});
  section("Resources", kAssets);
  section("Liabilities", kLiabilities);

  // Render.
  const int table_bottom = kTableTop + static_cast<int>(lines.size()) * kRowPitch + 20;
  Raster img(o.width, o.height, 1, kPaper);
  std::normal_distribution<double> grain(0.0, 4.0);
  for (auto& px : img.data()) px = static_cast<std::uint8_t>(std::clamp(kPaper + grain(rng), 200.0, 255.0));
  draw_rect(img, kRuleLeft, kTableTop, kRuleRight + 2, kTableTop + 2);
  draw_rect(img, kRuleLeft, table_bottom, kRuleRight + 2, table_bottom + 2);
  for (int x : {kRuleLeft, kRuleMid, kRuleRight}) draw_rect(img, x, kTableTop, x + 2, table_bottom + 2);

  const double header_scale = 2.0;
  const int header_w = static_cast<int>(header.size()) * static_cast<int>(std::lround(kPitch * header_scale));
  int x = (o.width - header_w) / 2;
  for (const auto& w : split_words(header)) {
    page.words.push_back({w, draw_word(img, x, 140, w, header_scale)});
    x += static_cast<int>((w.size() + 1) * std::lround(kPitch * header_scale));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int baseline = kTableTop + 28 + static_cast<int>(i) * kRowPitch;
    x = lines[i].indent ? kIndentX : kLabelX;
    for (const auto& w : split_words(lines[i].label)) {
      page.words.push_back({w, draw_word(img, x, baseline, w, 1.0)});
      x += static_cast<int>(w.size() + 1) * kPitch;
    }
    if (!lines[i].value.empty()) {
      const int width = static_cast<int>(lines[i].value.size()) * kPitch - 3;
      page.words.push_back({lines[i].value, draw_word(img, kValueRight - width, baseline, lines[i].value, 1.0)});
    }
  }
  page.image = std::move(img);

  // Recorded engine payloads.
  for (std::size_t k = 0; k < o.engines.size(); ++k) {
    const auto engine = ocr::parse_engine(o.engines[k]);
    if (!engine) throw Error(ErrorCode::kInvalidArgument, "synth: unknown engine " + o.engines[k]);
    ocr::NoiseModel noise;
    noise.substitution_prob = o.substitution;
    noise.random_unmapped = false;
    noise.seed = mix(mix(o.seed, static_cast<std::uint64_t>(index)), k + 1);
    ocr::OcrPage p = ocr::mock_ocr(page.words, o.width, o.height, noise, o.engines[k]);
    std::mt19937_64 jr(noise.seed ^ 0x5bd1e995ULL);
    for (auto& w : p.words) {
      Box b = w.bbox;
      b.x0 += static_cast<int>(uniform(jr, -o.jitter, o.jitter));
      b.x1 += static_cast<int>(uniform(jr, -o.jitter, o.jitter));
      b.y0 += static_cast<int>(uniform(jr, -o.jitter, o.jitter));
      b.y1 += static_cast<int>(uniform(jr, -o.jitter, o.jitter));
      b = intersect(b, {0, 0, o.width, o.height});
      if (b.valid()) w.bbox = b;
    }
    page.native[o.engines[k]] = ocr::encode_native(*engine, p);
  }

  std::string csv = "row,label,raw_value,amount,flags\n";
  for (std::size_t i = 0; i < page.rows.size(); ++i) {
    const auto& r = page.rows[i];
    const std::string label = r.label.empty() ? header : r.label;
    const std::string amount = r.value.empty() ? "" : parse_amount(r.value).amount->canonical();
    csv += fmt::format("{},{},{},{},\n", i, extract::csv_escape(label), extract::csv_escape(r.value), amount);
  }
  page.truth_csv = std::move(csv);
  return page;
}

}  // namespace

std::vector<SynthPage> make_corpus(const CorpusOptions& options) {
  if (options.pages < 1) throw Error(ErrorCode::kInvalidArgument, "synth: need at least one page");
  if (options.width < kRuleRight + 40 || options.height < 1400) {
    throw Error(ErrorCode::kInvalidArgument, "synth: page must be at least 1140x1400");
  }
  std::set<int> charters;
  std::vector<SynthPage> out;
  for (int i = 1; i <= options.pages; ++i) out.push_back(make_page(options, i, charters));
  return out;
}

std::string vocabulary_tsv() {
  std::string out = "# label\tfrequency\n";
  std::int64_t f = 900;
  for (const auto* list : {&kAssets, &kLiabilities}) {
    for (const auto& it : *list) out += fmt::format("{}\t{}\n", it.canonical, f -= 20);
  }
  out += "Resources\t1000\nLiabilities\t1000\nTotal\t2000\n";
  return out;
}

std::string abbreviations_tsv() { return "Nat'l\tnational\nCo.\tCompany\n"; }

std::string rules_txt() {
  return "min_capital\t[Capital stock paid in] >= 25000\n"
         "surplus\t[Surplus fund] <= [Capital stock paid in]\n"
         "circulation\t[National bank notes outstanding] <= [Capital stock paid in]\n"
         "redemption\t[Redemption fund with U.S. Treasurer] >= 0.05 * [National bank notes outstanding]\n";
}

std::string pipeline_conf(const CorpusOptions& options) {
  std::string engines;
  for (const auto& e : options.engines) engines += (engines.empty() ? "" : ", ") + e;
  return fmt::format(
      "# synthetic balance sheets, {} pages\n"
      "image_ops = grayscale, binarize\n"
      "image_ops.binarize.method = otsu\n"
      "engines = {}\n"
      "ensemble = on\n"
      "extract.vocabulary = vocabulary.tsv\n"
      "extract.abbreviations = abbreviations.tsv\n"
      "extract.rules = rules.txt\n"
      "extract.year = {}\n"
      "output.formats = csv\n",
      options.pages, engines, options.year);
}

void write_corpus(const fs::path& dir, const CorpusOptions& options) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "synth: cannot create " + dir.string());
  for (const auto& p : make_corpus(options)) {
    write_png(p.image, dir / (p.stem + ".png"));
    for (const auto& [engine, payload] : p.native) write_file_atomic(dir / (p.stem + "." + engine + ".native"), payload);
    write_file_atomic(dir / (p.stem + ".truth.json"),
                      ocr::truth_words_to_json(p.words, p.image.width(), p.image.height()));
    write_file_atomic(dir / (p.stem + ".truth.csv"), p.truth_csv);
  }
  write_file_atomic(dir / "vocabulary.tsv", vocabulary_tsv());
  write_file_atomic(dir / "abbreviations.tsv", abbreviations_tsv());
  write_file_atomic(dir / "rules.txt", rules_txt());
  write_file_atomic(dir / "pipeline.conf", pipeline_conf(options));
}

}  // namespace ledgerscan::synth
