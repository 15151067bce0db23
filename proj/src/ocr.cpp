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

#include "ledgerscan/ocr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include "json.hpp"

#include "ledgerscan/error.hpp"

namespace ledgerscan::ocr {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void parse_fail(std::string_view engine, const std::string& what) {
  throw Error(ErrorCode::kParse, fmt::format("{} payload: {}", engine, what));
}

json parse_json(std::string_view engine, std::string_view payload) {
  try {
    return json::parse(payload.begin(), payload.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse,
                fmt::format("{} payload: malformed JSON at byte {}", engine, e.byte));
  }
}

const json& field(std::string_view engine, const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    parse_fail(engine, fmt::format("missing field '{}'", key));
  }
  return obj.at(key);
}

template <typename T>
T get_as(std::string_view engine, const json& v, const char* what) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    parse_fail(engine, fmt::format("field '{}' has the wrong type", what));
  }
}

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

Box clamp_box(Box b, int w, int h) {
  if (w > 0) {
    b.x0 = std::clamp(b.x0, 0, w - 1);
    b.x1 = std::clamp(b.x1, b.x0 + 1, w);
  }
  if (h > 0) {
    b.y0 = std::clamp(b.y0, 0, h - 1);
    b.y1 = std::clamp(b.y1, b.y0 + 1, h);
  }
  return b;
}

double overlap_ratio(const Box& a, const Box& b) {
  const int inter = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const int hmin = std::min(a.height(), b.height());
  return inter > 0 && hmin > 0 ? static_cast<double>(inter) / hmin : 0.0;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

void mark_inferred(OcrPage& page, const std::string& level) {
  if (std::find(page.inferred_levels.begin(), page.inferred_levels.end(), level) ==
      page.inferred_levels.end()) {
    page.inferred_levels.push_back(level);
  }
}

// Axis-aligned hull of a flat [x0,y0,x1,y1,...] polygon or a vertex list.
Box hull_of_points(const std::vector<std::pair<double, double>>& pts) {
  double minx = pts[0].first, maxx = minx, miny = pts[0].second, maxy = miny;
  for (auto [x, y] : pts) {
    minx = std::min(minx, x);
    maxx = std::max(maxx, x);
    miny = std::min(miny, y);
    maxy = std::max(maxy, y);
  }
  return {static_cast<int>(std::lround(minx)), static_cast<int>(std::lround(miny)),
          static_cast<int>(std::lround(maxx)), static_cast<int>(std::lround(maxy))};
}

Box google_box(std::string_view engine, const json& obj) {
  const json& verts = field(engine, field(engine, obj, "boundingBox"), "vertices");
  if (!verts.is_array() || verts.empty()) parse_fail(engine, "empty vertex list");
  std::vector<std::pair<double, double>> pts;
  for (const auto& v : verts) {
    // The service omits zero-valued coordinates.
    pts.emplace_back(v.value("x", 0.0), v.value("y", 0.0));
  }
  return hull_of_points(pts);
}

Box flat_polygon_box(std::string_view engine, const json& arr) {
  if (!arr.is_array() || arr.size() < 4 || arr.size() % 2 != 0) {
    parse_fail(engine, "boundingBox must be an even-length number list");
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < arr.size(); i += 2) {
    pts.emplace_back(get_as<double>(engine, arr[i], "boundingBox"),
                     get_as<double>(engine, arr[i + 1], "boundingBox"));
  }
  return hull_of_points(pts);
}

OcrPage normalize_google(std::string_view payload) {
  constexpr std::string_view kName = "google";
  json root = parse_json(kName, payload);
  if (root.contains("responses")) {
    const json& r = root.at("responses");
    if (!r.is_array() || r.empty()) parse_fail(kName, "empty responses");
    root = r.at(0);
  }
  const json& pages = field(kName, field(kName, root, "fullTextAnnotation"), "pages");
  if (!pages.is_array() || pages.empty()) parse_fail(kName, "no pages");
  const json& pg = pages.at(0);
  OcrPage page;
  page.engine = "google";
  page.width = get_as<int>(kName, field(kName, pg, "width"), "width");
  page.height = get_as<int>(kName, field(kName, pg, "height"), "height");
  int block_id = 0, par_id = 0;
  for (const auto& block : pg.value("blocks", json::array())) {
    for (const auto& par : block.value("paragraphs", json::array())) {
      for (const auto& word : par.value("words", json::array())) {
        OcrWord w;
        double conf_sum = 0;
        for (const auto& sym : field(kName, word, "symbols")) {
          w.text += get_as<std::string>(kName, field(kName, sym, "text"), "text");
          const double c = sym.value("confidence", 1.0);
          w.char_confidence.push_back(c);
          conf_sum += c;
        }
        if (w.text.empty()) continue;
        w.bbox = clamp_box(google_box(kName, word), page.width, page.height);
        w.confidence = word.contains("confidence")
                           ? get_as<double>(kName, word.at("confidence"), "confidence")
                           : conf_sum / static_cast<double>(w.char_confidence.size());
        w.paragraph = par_id;
        w.block = block_id;
        page.words.push_back(std::move(w));
      }
      ++par_id;
    }
    ++block_id;
  }
  synthesize_lines(page);
  return page;
}

Box textract_box(std::string_view engine, const json& blk, int w, int h) {
  const json& bb = field(engine, field(engine, blk, "Geometry"), "BoundingBox");
  const double left = get_as<double>(engine, field(engine, bb, "Left"), "Left");
  const double top = get_as<double>(engine, field(engine, bb, "Top"), "Top");
  const double bw = get_as<double>(engine, field(engine, bb, "Width"), "Width");
  const double bh = get_as<double>(engine, field(engine, bb, "Height"), "Height");
  return {static_cast<int>(std::lround(left * w)), static_cast<int>(std::lround(top * h)),
          static_cast<int>(std::lround((left + bw) * w)),
          static_cast<int>(std::lround((top + bh) * h))};
}

std::vector<std::string> child_ids(const json& blk) {
  std::vector<std::string> ids;
  for (const auto& rel : blk.value("Relationships", json::array())) {
    if (rel.value("Type", "") != "CHILD") continue;
    for (const auto& id : rel.value("Ids", json::array())) ids.push_back(id.get<std::string>());
  }
  return ids;
}

OcrPage normalize_amazon(std::string_view payload, const NormalizeOptions& opt) {
  constexpr std::string_view kName = "amazon";
  if (!opt.page_size) {
    throw Error(ErrorCode::kInvalidArgument,
                "amazon payload uses page-relative coordinates; page size required");
  }
  const auto [pw, ph] = *opt.page_size;
  const json root = parse_json(kName, payload);
  const json& blocks = field(kName, root, "Blocks");
  if (!blocks.is_array()) parse_fail(kName, "Blocks is not a list");
  OcrPage page;
  page.engine = "amazon";
  page.width = pw;
  page.height = ph;
  std::map<std::string, std::size_t> word_index;
  std::map<std::string, const json*> by_id;
  for (const auto& blk : blocks) {
    const auto type = get_as<std::string>(kName, field(kName, blk, "BlockType"), "BlockType");
    const auto id = blk.value("Id", std::string());
    by_id[id] = &blk;
    if (type != "WORD") continue;
    OcrWord w;
    w.text = get_as<std::string>(kName, field(kName, blk, "Text"), "Text");
    w.bbox = clamp_box(textract_box(kName, blk, pw, ph), pw, ph);
    w.confidence = std::clamp(blk.value("Confidence", 100.0) / 100.0, 0.0, 1.0);
    word_index[id] = page.words.size();
    page.words.push_back(std::move(w));
  }
  int line_id = 0;
  for (const auto& blk : blocks) {
    if (blk.at("BlockType") != "LINE") continue;
    for (const auto& cid : child_ids(blk)) {
      auto it = word_index.find(cid);
      if (it == word_index.end()) parse_fail(kName, "LINE references unknown WORD " + cid);
      page.words[it->second].line = line_id;
    }
    ++line_id;
  }
  for (auto& w : page.words) {
    if (!w.line) w.line = line_id++;
  }
  for (const auto& blk : blocks) {
    if (blk.at("BlockType") != "TABLE") continue;
    Table t;
    for (const auto& cid : child_ids(blk)) {
      auto it = by_id.find(cid);
      if (it == by_id.end() || it->second->value("BlockType", "") != "CELL") continue;
      const json& cell = *it->second;
      TableCell c;
      c.row = cell.value("RowIndex", 1) - 1;
      c.col = cell.value("ColumnIndex", 1) - 1;
      c.bbox = textract_box(kName, cell, pw, ph);
      for (const auto& wid : child_ids(cell)) {
        auto wi = word_index.find(wid);
        if (wi == word_index.end()) continue;
        if (!c.text.empty()) c.text += ' ';
        c.text += page.words[wi->second].text;
      }
      t.rows = std::max(t.rows, c.row + 1);
      t.cols = std::max(t.cols, c.col + 1);
      t.cells.push_back(std::move(c));
    }
    page.tables.push_back(std::move(t));
  }
  synthesize_paragraphs(page);
  return page;
}

OcrPage normalize_microsoft(std::string_view payload) {
  constexpr std::string_view kName = "microsoft";
  const json root = parse_json(kName, payload);
  const json& results = field(kName, field(kName, root, "analyzeResult"), "readResults");
  if (!results.is_array() || results.empty()) parse_fail(kName, "no readResults");
  const json& pg = results.at(0);
  if (pg.value("unit", "pixel") != "pixel") parse_fail(kName, "only pixel units are supported");
  OcrPage page;
  page.engine = "microsoft";
  page.width = static_cast<int>(std::lround(get_as<double>(kName, field(kName, pg, "width"), "width")));
  page.height = static_cast<int>(std::lround(get_as<double>(kName, field(kName, pg, "height"), "height")));
  int line_id = 0;
  for (const auto& line : pg.value("lines", json::array())) {
    for (const auto& word : field(kName, line, "words")) {
      OcrWord w;
      w.text = get_as<std::string>(kName, field(kName, word, "text"), "text");
      w.bbox = clamp_box(flat_polygon_box(kName, field(kName, word, "boundingBox")),
                         page.width, page.height);
      w.confidence = std::clamp(word.value("confidence", 1.0), 0.0, 1.0);
      w.line = line_id;
      page.words.push_back(std::move(w));
    }
    ++line_id;
  }
  synthesize_paragraphs(page);
  return page;
}

OcrPage normalize_tesseract(std::string_view payload) {
  constexpr std::string_view kName = "tesseract";
  static constexpr std::array<std::string_view, 12> kHeader = {
      "level", "page_num", "block_num", "par_num", "line_num", "word_num",
      "left",  "top",      "width",     "height",  "conf",     "text"};
  OcrPage page;
  page.engine = "tesseract";
  std::map<std::pair<int, int>, int> par_ids;
  std::map<std::tuple<int, int, int>, int> line_ids;
  std::size_t offset = 0;
  bool header_seen = false;
  while (offset < payload.size()) {
    std::size_t end = payload.find('\n', offset);
    if (end == std::string_view::npos) end = payload.size();
    std::string_view line = payload.substr(offset, end - offset);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_start = offset;
    offset = end + 1;
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::size_t s = 0;
    for (int i = 0; i < 11; ++i) {
      const std::size_t tab = line.find('\t', s);
      if (tab == std::string_view::npos) break;
      cols.push_back(line.substr(s, tab - s));
      s = tab + 1;
    }
    cols.push_back(line.substr(std::min(s, line.size())));
    if (cols.size() < 11) {
      parse_fail(kName, fmt::format("truncated row at byte {}", line_start));
    }
    if (!header_seen) {
      for (std::size_t i = 0; i < 11; ++i) {
        if (cols[i] != kHeader[i]) parse_fail(kName, "missing TSV header at byte 0");
      }
      header_seen = true;
      continue;
    }
    std::array<int, 10> num{};
    for (std::size_t i = 0; i < 10; ++i) {
      const auto [p, ec] = std::from_chars(cols[i].data(), cols[i].data() + cols[i].size(), num[i]);
      if (ec != std::errc() || p != cols[i].data() + cols[i].size()) {
        parse_fail(kName, fmt::format("bad integer in column {} at byte {}", kHeader[i],
                                      line_start + (cols[i].data() - line.data())));
      }
    }
    double conf = -1;
    {
      const std::string c(cols[10]);
      char* endp = nullptr;
      conf = std::strtod(c.c_str(), &endp);
      if (c.empty() || *endp != '\0') {
        parse_fail(kName, fmt::format("bad confidence at byte {}",
                                      line_start + (cols[10].data() - line.data())));
      }
    }
    const int level = num[0];
    if (level == 1) {
      page.width = num[8];
      page.height = num[9];
      continue;
    }
    if (level != 5) continue;
    const std::string_view text = cols.size() > 11 ? cols[11] : std::string_view();
    if (text.empty() || text.find_first_not_of(' ') == std::string_view::npos) continue;
    OcrWord w;
    w.text = std::string(text);
    w.bbox = clamp_box({num[6], num[7], num[6] + num[8], num[7] + num[9]}, page.width,
                       page.height);
    w.confidence = std::clamp(conf / 100.0, 0.0, 1.0);
    const int block = num[2];
    const auto pkey = std::pair{block, num[3]};
    const auto lkey = std::tuple{block, num[3], num[4]};
    if (!par_ids.contains(pkey)) par_ids.emplace(pkey, static_cast<int>(par_ids.size()));
    if (!line_ids.contains(lkey)) line_ids.emplace(lkey, static_cast<int>(line_ids.size()));
    w.block = block;
    w.paragraph = par_ids.at(pkey);
    w.line = line_ids.at(lkey);
    page.words.push_back(std::move(w));
  }
  if (!header_seen) parse_fail(kName, "missing TSV header at byte 0");
  return page;
}

// Fills in any missing hierarchy on a copy so encoders can nest words.
OcrPage with_hierarchy(OcrPage page) {
  const bool lines = std::all_of(page.words.begin(), page.words.end(),
                                 [](const OcrWord& w) { return w.line.has_value(); });
  if (!lines) synthesize_lines(page);
  const bool pars = std::all_of(page.words.begin(), page.words.end(),
                                [](const OcrWord& w) { return w.paragraph.has_value(); });
  if (!pars) synthesize_paragraphs(page);
  for (auto& w : page.words) {
    if (!w.block) w.block = 0;
  }
  return page;
}

// Groups word indices by a key, preserving first-appearance order of keys.
template <typename Key>
std::vector<std::vector<std::size_t>> group_by(const OcrPage& page,
                                               std::vector<std::size_t> idx, Key key) {
  std::vector<std::vector<std::size_t>> groups;
  std::map<int, std::size_t> slot;
  for (auto i : idx) {
    const int k = key(page.words[i]);
    auto [it, fresh] = slot.emplace(k, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

json vertices(const Box& b) {
  return json::array({{{"x", b.x0}, {"y", b.y0}},
                      {{"x", b.x1}, {"y", b.y0}},
                      {{"x", b.x1}, {"y", b.y1}},
                      {{"x", b.x0}, {"y", b.y1}}});
}

json flat_polygon(const Box& b) {
  return json::array({b.x0, b.y0, b.x1, b.y0, b.x1, b.y1, b.x0, b.y1});
}

Box unite_all(const OcrPage& page, const std::vector<std::size_t>& idx) {
  Box b = page.words[idx[0]].bbox;
  for (auto i : idx) b = unite(b, page.words[i].bbox);
  return b;
}

std::string join_text(const OcrPage& page, const std::vector<std::size_t>& idx) {
  std::string s;
  for (auto i : idx) {
    if (!s.empty()) s += ' ';
    s += page.words[i].text;
  }
  return s;
}

std::string encode_google(const OcrPage& in) {
  const OcrPage page = with_hierarchy(in);
  std::vector<std::size_t> all(page.words.size());
  std::iota(all.begin(), all.end(), 0);
  json blocks = json::array();
  for (const auto& bidx : group_by(page, all, [](const OcrWord& w) { return *w.block; })) {
    json pars = json::array();
    for (const auto& pidx :
         group_by(page, bidx, [](const OcrWord& w) { return *w.paragraph; })) {
      json words = json::array();
      for (auto i : pidx) {
        const OcrWord& w = page.words[i];
        const auto chars = utf8_chars(w.text);
        json symbols = json::array();
        const int n = static_cast<int>(chars.size());
        for (int c = 0; c < n; ++c) {
          const int sx0 = w.bbox.x0 + w.bbox.width() * c / n;
          const int sx1 = std::max(sx0 + 1, w.bbox.x0 + w.bbox.width() * (c + 1) / n);
          const double conf = c < static_cast<int>(w.char_confidence.size())
                                  ? w.char_confidence[c]
                                  : w.confidence;
          symbols.push_back({{"boundingBox", {{"vertices", vertices({sx0, w.bbox.y0, sx1, w.bbox.y1})}}},
                             {"text", chars[c]},
                             {"confidence", conf}});
        }
        words.push_back({{"boundingBox", {{"vertices", vertices(w.bbox)}}},
                         {"symbols", symbols},
                         {"confidence", w.confidence}});
      }
      pars.push_back({{"boundingBox", {{"vertices", vertices(unite_all(page, pidx))}}},
                      {"words", words}});
    }
    blocks.push_back({{"boundingBox", {{"vertices", vertices(unite_all(page, bidx))}}},
                      {"paragraphs", pars},
                      {"blockType", "TEXT"}});
  }
  json root = {{"responses",
                json::array({{{"fullTextAnnotation",
                               {{"pages", json::array({{{"width", page.width},
                                                        {"height", page.height},
                                                        {"blocks", blocks}}})},
                                {"text", ""}}}}})}};
  return root.dump(1);
}

std::string encode_amazon(const OcrPage& in) {
  const OcrPage page = with_hierarchy(in);
  const double W = page.width, H = page.height;
  auto geometry = [&](const Box& b) {
    return json{{"BoundingBox",
                 {{"Width", b.width() / W},
                  {"Height", b.height() / H},
                  {"Left", b.x0 / W},
                  {"Top", b.y0 / H}}}};
  };
  json blocks = json::array();
  std::vector<std::size_t> all(page.words.size());
  std::iota(all.begin(), all.end(), 0);
  const auto lines = group_by(page, all, [](const OcrWord& w) { return *w.line; });
  json page_children = json::array();
  for (std::size_t l = 0; l < lines.size(); ++l) page_children.push_back(fmt::format("line-{}", l));
  blocks.push_back({{"BlockType", "PAGE"},
                    {"Id", "page-1"},
                    {"Geometry", geometry({0, 0, page.width, page.height})},
                    {"Relationships", json::array({{{"Type", "CHILD"}, {"Ids", page_children}}})}});
  for (std::size_t l = 0; l < lines.size(); ++l) {
    json ids = json::array();
    double conf = 0;
    for (auto i : lines[l]) {
      ids.push_back(fmt::format("word-{}", i));
      conf += page.words[i].confidence;
    }
    blocks.push_back({{"BlockType", "LINE"},
                      {"Id", fmt::format("line-{}", l)},
                      {"Text", join_text(page, lines[l])},
                      {"Confidence", 100.0 * conf / static_cast<double>(lines[l].size())},
                      {"Geometry", geometry(unite_all(page, lines[l]))},
                      {"Relationships", json::array({{{"Type", "CHILD"}, {"Ids", ids}}})}});
  }
  for (std::size_t i = 0; i < page.words.size(); ++i) {
    const OcrWord& w = page.words[i];
    blocks.push_back({{"BlockType", "WORD"},
                      {"Id", fmt::format("word-{}", i)},
                      {"Text", w.text},
                      {"TextType", "PRINTED"},
                      {"Confidence", 100.0 * w.confidence},
                      {"Geometry", geometry(w.bbox)}});
  }
  for (std::size_t t = 0; t < page.tables.size(); ++t) {
    json cell_ids = json::array();
    for (std::size_t c = 0; c < page.tables[t].cells.size(); ++c) {
      const TableCell& cell = page.tables[t].cells[c];
      const std::string id = fmt::format("cell-{}-{}", t, c);
      cell_ids.push_back(id);
      json words = json::array();
      for (std::size_t i = 0; i < page.words.size(); ++i) {
        const Box inter = intersect(page.words[i].bbox, cell.bbox);
        if (inter.area() * 2 > page.words[i].bbox.area()) words.push_back(fmt::format("word-{}", i));
      }
      json blk = {{"BlockType", "CELL"},
                  {"Id", id},
                  {"RowIndex", cell.row + 1},
                  {"ColumnIndex", cell.col + 1},
                  {"Geometry", geometry(cell.bbox)}};
      if (!words.empty()) blk["Relationships"] = json::array({{{"Type", "CHILD"}, {"Ids", words}}});
      blocks.push_back(blk);
    }
    blocks.push_back({{"BlockType", "TABLE"},
                      {"Id", fmt::format("table-{}", t)},
                      {"Relationships", json::array({{{"Type", "CHILD"}, {"Ids", cell_ids}}})}});
  }
  return json{{"DocumentMetadata", {{"Pages", 1}}}, {"Blocks", blocks}}.dump(1);
}

std::string encode_microsoft(const OcrPage& in) {
  const OcrPage page = with_hierarchy(in);
  std::vector<std::size_t> all(page.words.size());
  std::iota(all.begin(), all.end(), 0);
  json lines = json::array();
  for (const auto& lidx : group_by(page, all, [](const OcrWord& w) { return *w.line; })) {
    json words = json::array();
    for (auto i : lidx) {
      const OcrWord& w = page.words[i];
      words.push_back({{"boundingBox", flat_polygon(w.bbox)},
                       {"text", w.text},
                       {"confidence", w.confidence}});
    }
    lines.push_back({{"boundingBox", flat_polygon(unite_all(page, lidx))},
                     {"text", join_text(page, lidx)},
                     {"words", words}});
  }
  json root = {{"status", "succeeded"},
               {"analyzeResult",
                {{"version", "3.2"},
                 {"readResults", json::array({{{"page", 1},
                                               {"angle", 0},
                                               {"width", page.width},
                                               {"height", page.height},
                                               {"unit", "pixel"},
                                               {"lines", lines}}})}}}};
  return root.dump(1);
}

std::string encode_tesseract(const OcrPage& in) {
  const OcrPage page = with_hierarchy(in);
  std::string out = "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext\n";
  auto row = [&](int level, int b, int p, int l, int w, const Box& box, double conf,
                 const std::string& text) {
    out += fmt::format("{}\t1\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", level, b, p, l, w,
                       box.x0, box.y0, box.width(), box.height(), conf, text);
  };
  row(1, 0, 0, 0, 0, {0, 0, page.width, page.height}, -1, "");
  std::vector<std::size_t> all(page.words.size());
  std::iota(all.begin(), all.end(), 0);
  int bnum = 0;
  for (const auto& bidx : group_by(page, all, [](const OcrWord& w) { return *w.block; })) {
    ++bnum;
    row(2, bnum, 0, 0, 0, unite_all(page, bidx), -1, "");
    int pnum = 0;
    for (const auto& pidx :
         group_by(page, bidx, [](const OcrWord& w) { return *w.paragraph; })) {
      ++pnum;
      row(3, bnum, pnum, 0, 0, unite_all(page, pidx), -1, "");
      int lnum = 0;
      for (const auto& lidx : group_by(page, pidx, [](const OcrWord& w) { return *w.line; })) {
        ++lnum;
        row(4, bnum, pnum, lnum, 0, unite_all(page, lidx), -1, "");
        int wnum = 0;
        for (auto i : lidx) {
          row(5, bnum, pnum, lnum, ++wnum, page.words[i].bbox, 100.0 * page.words[i].confidence,
              page.words[i].text);
        }
      }
    }
  }
  return out;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

void check_invariants(const OcrPage& page) {
  std::map<int, std::optional<int>> line_par;
  std::map<int, std::optional<int>> par_block;
  for (std::size_t i = 0; i < page.words.size(); ++i) {
    const OcrWord& w = page.words[i];
    const Box& b = w.bbox;
    if (!(b.x0 < b.x1 && b.y0 < b.y1)) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("word {}: empty bbox", i));
    }
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > page.width || b.y1 > page.height) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("word {}: bbox outside page", i));
    }
    if (!(w.confidence >= 0.0 && w.confidence <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("word {}: confidence out of range", i));
    }
    if (w.line) {
      auto [it, fresh] = line_par.emplace(*w.line, w.paragraph);
      if (!fresh && it->second != w.paragraph) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("line {} belongs to two paragraphs", *w.line));
      }
    }
    if (w.paragraph) {
      auto [it, fresh] = par_block.emplace(*w.paragraph, w.block);
      if (!fresh && it->second != w.block) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("paragraph {} belongs to two blocks", *w.paragraph));
      }
    }
  }
}

std::string to_json(const OcrPage& page) {
  auto opt = [](const std::optional<int>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json words = ordered_json::array();
  for (const auto& w : page.words) {
    ordered_json j;
    j["text"] = w.text;
    j["bbox"] = {w.bbox.x0, w.bbox.y0, w.bbox.x1, w.bbox.y1};
    j["conf"] = w.confidence;
    j["line"] = opt(w.line);
    j["par"] = opt(w.paragraph);
    j["block"] = opt(w.block);
    if (!w.char_confidence.empty()) j["char_conf"] = w.char_confidence;
    words.push_back(std::move(j));
  }
  ordered_json root;
  root["engine"] = page.engine;
  root["page_size"] = {{"w", page.width}, {"h", page.height}};
  root["words"] = std::move(words);
  root["inferred_levels"] = page.inferred_levels;
  if (!page.tables.empty()) {
    ordered_json tables = ordered_json::array();
    for (const auto& t : page.tables) {
      ordered_json cells = ordered_json::array();
      for (const auto& c : t.cells) {
        cells.push_back({{"row", c.row},
                         {"col", c.col},
                         {"text", c.text},
                         {"bbox", {c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1}}});
      }
      tables.push_back({{"rows", t.rows}, {"cols", t.cols}, {"cells", cells}});
    }
    root["tables"] = std::move(tables);
  }
  return root.dump(1) + "\n";
}

OcrPage from_json(std::string_view text) {
  constexpr std::string_view kName = "ocr";
  const json root = parse_json(kName, text);
  auto box = [&](const json& a) {
    if (!a.is_array() || a.size() != 4) parse_fail(kName, "bbox must have 4 numbers");
    return Box{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
  };
  auto opt = [](const json& j, const char* k) -> std::optional<int> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<int>();
  };
  OcrPage page;
  try {
    page.engine = field(kName, root, "engine").get<std::string>();
    const json& size = field(kName, root, "page_size");
    page.width = field(kName, size, "w").get<int>();
    page.height = field(kName, size, "h").get<int>();
    for (const auto& j : field(kName, root, "words")) {
      OcrWord w;
      w.text = field(kName, j, "text").get<std::string>();
      w.bbox = box(field(kName, j, "bbox"));
      w.confidence = field(kName, j, "conf").get<double>();
      w.line = opt(j, "line");
      w.paragraph = opt(j, "par");
      w.block = opt(j, "block");
      if (j.contains("char_conf")) w.char_confidence = j.at("char_conf").get<std::vector<double>>();
      page.words.push_back(std::move(w));
    }
    page.inferred_levels = root.value("inferred_levels", std::vector<std::string>{});
    for (const auto& t : root.value("tables", json::array())) {
      Table tab;
      tab.rows = t.at("rows").get<int>();
      tab.cols = t.at("cols").get<int>();
      for (const auto& c : t.at("cells")) {
        tab.cells.push_back({c.at("row").get<int>(), c.at("col").get<int>(),
                             c.at("text").get<std::string>(), box(c.at("bbox"))});
      }
      page.tables.push_back(std::move(tab));
    }
  } catch (const json::exception& e) {
    parse_fail(kName, e.what());
  }
  return page;
}

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::kGoogle: return "google";
    case Engine::kAmazon: return "amazon";
    case Engine::kMicrosoft: return "microsoft";
    case Engine::kTesseract: return "tesseract";
  }
  return "unknown";
}

std::optional<Engine> parse_engine(std::string_view name) {
  for (auto e : {Engine::kGoogle, Engine::kAmazon, Engine::kMicrosoft, Engine::kTesseract}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

OcrPage normalize(Engine engine, std::string_view payload, const NormalizeOptions& options) {
  OcrPage page;
  switch (engine) {
    case Engine::kGoogle: page = normalize_google(payload); break;
    case Engine::kAmazon: page = normalize_amazon(payload, options); break;
    case Engine::kMicrosoft: page = normalize_microsoft(payload); break;
    case Engine::kTesseract: page = normalize_tesseract(payload); break;
  }
  check_invariants(page);
  return page;
}

OcrPage normalize(std::string_view engine, std::string_view payload,
                  const NormalizeOptions& options) {
  const auto e = parse_engine(engine);
  if (!e) throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown engine '{}'", engine));
  return normalize(*e, payload, options);
}

std::string encode_native(Engine engine, const OcrPage& page) {
  switch (engine) {
    case Engine::kGoogle: return encode_google(page);
    case Engine::kAmazon: return encode_amazon(page);
    case Engine::kMicrosoft: return encode_microsoft(page);
    case Engine::kTesseract: return encode_tesseract(page);
  }
  return {};
}

void synthesize_lines(OcrPage& page, double min_overlap) {
  const std::size_t n = page.words.size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (page.words[i].paragraph != page.words[j].paragraph) continue;
      if (overlap_ratio(page.words[i].bbox, page.words[j].bbox) >= min_overlap) uf.join(i, j);
    }
  }
  struct Extent {
    int y0 = 0, x0 = 0;
    std::size_t root = 0;
  };
  std::map<std::size_t, Extent> ext;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uf.find(i);
    auto [it, fresh] = ext.emplace(r, Extent{page.words[i].bbox.y0, page.words[i].bbox.x0, r});
    if (!fresh) {
      it->second.y0 = std::min(it->second.y0, page.words[i].bbox.y0);
      it->second.x0 = std::min(it->second.x0, page.words[i].bbox.x0);
    }
  }
  std::vector<Extent> order;
  for (auto& [r, e] : ext) order.push_back(e);
  std::sort(order.begin(), order.end(), [](const Extent& a, const Extent& b) {
    return std::tie(a.y0, a.x0, a.root) < std::tie(b.y0, b.x0, b.root);
  });
  std::map<std::size_t, int> id;
  for (std::size_t k = 0; k < order.size(); ++k) id[order[k].root] = static_cast<int>(k);
  for (std::size_t i = 0; i < n; ++i) page.words[i].line = id.at(uf.find(i));
  mark_inferred(page, "line");
}

void synthesize_paragraphs(OcrPage& page, double gap_factor) {
  if (page.words.empty()) return;
  if (!std::all_of(page.words.begin(), page.words.end(),
                   [](const OcrWord& w) { return w.line.has_value(); })) {
    synthesize_lines(page);
  }
  std::map<int, std::pair<int, int>> span;  // line -> (y0, y1)
  for (const auto& w : page.words) {
    auto [it, fresh] = span.emplace(*w.line, std::pair{w.bbox.y0, w.bbox.y1});
    if (!fresh) {
      it->second.first = std::min(it->second.first, w.bbox.y0);
      it->second.second = std::max(it->second.second, w.bbox.y1);
    }
  }
  std::vector<std::pair<std::pair<int, int>, int>> lines;  // ((y0,y1), id)
  for (auto& [id, s] : span) lines.push_back({s, id});
  std::sort(lines.begin(), lines.end());
  std::vector<int> gaps;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    gaps.push_back(std::max(0, lines[i].first.first - lines[i - 1].first.second));
  }
  double median = 0;
  if (!gaps.empty()) {
    auto sorted = gaps;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    median = sorted[sorted.size() / 2];
  }
  const double limit = gap_factor * std::max(median, 1.0);
  std::map<int, int> par_of;
  int par = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0 && gaps[i - 1] > limit) ++par;
    par_of[lines[i].second] = par;
  }
  const bool blocks_missing = std::any_of(page.words.begin(), page.words.end(),
                                          [](const OcrWord& w) { return !w.block; });
  for (auto& w : page.words) {
    w.paragraph = par_of.at(*w.line);
    if (blocks_missing) w.block = 0;
  }
  mark_inferred(page, "paragraph");
  if (blocks_missing) mark_inferred(page, "block");
}

std::vector<std::size_t> reading_order(const OcrPage& page) {
  std::map<int, int> line_top;
  for (const auto& w : page.words) {
    const int l = w.line.value_or(-1);
    auto [it, fresh] = line_top.emplace(l, w.bbox.y0);
    if (!fresh) it->second = std::min(it->second, w.bbox.y0);
  }
  std::vector<std::size_t> idx(page.words.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& wa = page.words[a];
    const auto& wb = page.words[b];
    const int la = wa.line.value_or(-1), lb = wb.line.value_or(-1);
    const int ta = line_top.at(la), tb = line_top.at(lb);
    return std::tie(ta, la, wa.bbox.x0) < std::tie(tb, lb, wb.bbox.x0);
  });
  return idx;
}

std::map<char, char> NoiseModel::default_confusions() {
  return {{'0', 'O'}, {'O', '0'}, {'1', 'l'}, {'l', '1'}, {'6', 'G'},
          {'G', '6'}, {'8', 'B'}, {'B', '8'}, {'5', 'S'}, {'S', '5'}};
}

void NoiseModel::validate() const {
  auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!ok(substitution_prob) || !ok(deletion_prob)) {
    throw Error(ErrorCode::kInvalidArgument, "noise probabilities must lie in [0,1]");
  }
}

OcrPage mock_ocr(const std::vector<TruthWord>& truth, int width, int height,
                 const NoiseModel& noise, std::string engine) {
  noise.validate();
  static constexpr std::string_view kAlnum =
      "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
  std::mt19937_64 rng(noise.seed);
  OcrPage page;
  page.engine = std::move(engine);
  page.width = width;
  page.height = height;
  for (const auto& tw : truth) {
    OcrWord w;
    w.bbox = clamp_box(tw.bbox, width, height);
    double conf = 1.0;
    for (char c : tw.text) {
      const double u_del = uniform01(rng);
      const double u_sub = uniform01(rng);
      if (u_del < noise.deletion_prob) {
        conf *= 0.5;
        continue;
      }
      char out = c;
      if (u_sub < noise.substitution_prob) {
        if (auto it = noise.confusion_table.find(c); it != noise.confusion_table.end()) {
          out = it->second;
        } else if (noise.random_unmapped) {
          do {
            out = kAlnum[rng() % kAlnum.size()];
          } while (out == c);
        }
      }
      if (out != c) conf *= 0.5;
      w.text += out;
    }
    if (w.text.empty()) continue;
    w.confidence = std::clamp(conf, 0.3, 0.99);
    page.words.push_back(std::move(w));
  }
  synthesize_lines(page);
  synthesize_paragraphs(page);
  return page;
}

std::string truth_words_to_json(const std::vector<TruthWord>& words, int width, int height) {
  ordered_json arr = ordered_json::array();
  for (const auto& w : words) {
    arr.push_back({{"text", w.text}, {"bbox", {w.bbox.x0, w.bbox.y0, w.bbox.x1, w.bbox.y1}}});
  }
  ordered_json root;
  root["page_size"] = {{"w", width}, {"h", height}};
  root["words"] = std::move(arr);
  return root.dump(1) + "\n";
}

std::vector<TruthWord> truth_words_from_json(std::string_view text, int* width, int* height) {
  constexpr std::string_view kName = "truth words";
  const json root = parse_json(kName, text);
  std::vector<TruthWord> out;
  try {
    if (width) *width = root.at("page_size").at("w").get<int>();
    if (height) *height = root.at("page_size").at("h").get<int>();
    for (const auto& j : root.at("words")) {
      const auto& b = j.at("bbox");
      out.push_back({j.at("text").get<std::string>(),
                     {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                      b.at(3).get<int>()}});
    }
  } catch (const json::exception& e) {
    parse_fail(kName, e.what());
  }
  return out;
}

}  // namespace ledgerscan::ocr
