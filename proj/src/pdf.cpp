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

// Just enough PDF to pull scanned page images out: indirect objects, the
// page tree and image XObjects with Flate, DCT or no compression.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include <fmt/core.h>
#include <zlib.h>

#include "ledgerscan/error.hpp"
#include "ledgerscan/workspace.hpp"

namespace ledgerscan {

namespace {

struct Obj {
  enum Kind { kNull, kBool, kNum, kName, kStr, kArr, kDict, kRef } kind = kNull;
  double num = 0;
  std::string str;
  std::vector<Obj> arr;
  std::shared_ptr<std::map<std::string, Obj>> dict;
  int ref = 0;

  const Obj* get(const std::string& key) const {
    if (kind != kDict) return nullptr;
    auto it = dict->find(key);
    return it == dict->end() ? nullptr : &it->second;
  }
};

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kParse, "pdf: " + what); }

bool is_delim(char c) {
  return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' ||
         c == '}' || c == '/' || c == '%';
}
bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\0'; }

class Parser {
 public:
  Parser(std::string_view s, std::size_t pos) : s_(s), i_(pos) {}

  std::size_t pos() const { return i_; }

  void skip_ws() {
    while (i_ < s_.size()) {
      if (is_space(s_[i_])) {
        ++i_;
      } else if (s_[i_] == '%') {
        while (i_ < s_.size() && s_[i_] != '\n' && s_[i_] != '\r') ++i_;
      } else {
        break;
      }
    }
  }

  std::string_view word() {
    skip_ws();
    const std::size_t b = i_;
    while (i_ < s_.size() && !is_space(s_[i_]) && !is_delim(s_[i_])) ++i_;
    return s_.substr(b, i_ - b);
  }

  Obj value() {
    skip_ws();
    if (i_ >= s_.size()) fail("unexpected end of file");
    const char c = s_[i_];
    Obj o;
    if (c == '/') {
      ++i_;
      o.kind = Obj::kName;
      o.str = std::string(word());
    } else if (c == '[') {
      ++i_;
      o.kind = Obj::kArr;
      for (skip_ws(); i_ < s_.size() && s_[i_] != ']'; skip_ws()) o.arr.push_back(value());
      ++i_;
    } else if (c == '<' && i_ + 1 < s_.size() && s_[i_ + 1] == '<') {
      i_ += 2;
      o.kind = Obj::kDict;
      o.dict = std::make_shared<std::map<std::string, Obj>>();
      for (skip_ws(); i_ + 1 < s_.size() && !(s_[i_] == '>' && s_[i_ + 1] == '>'); skip_ws()) {
        Obj key = value();
        if (key.kind != Obj::kName) fail(fmt::format("dictionary key is not a name at byte {}", i_));
        (*o.dict)[key.str] = value();
      }
      i_ += 2;
    } else if (c == '<') {
      const auto close = s_.find('>', i_);
      if (close == std::string_view::npos) fail("unterminated hex string");
      o.kind = Obj::kStr;
      i_ = close + 1;
    } else if (c == '(') {
      int depth = 0;
      do {
        if (s_[i_] == '\\') ++i_;
        else if (s_[i_] == '(') ++depth;
        else if (s_[i_] == ')') --depth;
        ++i_;
      } while (i_ < s_.size() && depth > 0);
      o.kind = Obj::kStr;
    } else {
      const std::string_view w = word();
      if (w.empty()) fail(fmt::format("unexpected '{}' at byte {}", c, i_));
      if (w == "true" || w == "false") {
        o.kind = Obj::kBool;
        o.num = w == "true";
      } else if (w == "null") {
        o.kind = Obj::kNull;
      } else {
        o.kind = Obj::kNum;
        try {
          o.num = std::stod(std::string(w));
        } catch (const std::exception&) {
          fail(fmt::format("bad token '{}' at byte {}", w, i_));
        }
        // "n g R" is a reference.
        const std::size_t save = i_;
        const std::string_view g = word();
        const std::string_view r = word();
        if (!g.empty() && std::all_of(g.begin(), g.end(), ::isdigit) && r == "R") {
          o.kind = Obj::kRef;
          o.ref = static_cast<int>(o.num);
        } else {
          i_ = save;
        }
      }
    }
    return o;
  }

 private:
  std::string_view s_;
  std::size_t i_;
};

struct Indirect {
  Obj value;
  std::optional<std::string_view> stream;
};

class Document {
 public:
  explicit Document(std::string_view data) : s_(data) {
    if (s_.substr(0, 5) != "%PDF-") fail("missing %PDF header");
    index();
  }

  const Obj& resolve(const Obj& o, int depth = 0) const {
    if (o.kind != Obj::kRef) return o;
    if (depth > 32) fail("reference loop");
    return resolve(object(o.ref).value, depth + 1);
  }

  const Indirect& object(int id) const {
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    auto off = offsets_.find(id);
    if (off == offsets_.end()) fail(fmt::format("object {} not found", id));
    Parser p(s_, off->second);
    Indirect ind;
    ind.value = p.value();
    p.skip_ws();
    const std::size_t at = p.pos();
    if (s_.substr(at, 6) == "stream") {
      std::size_t b = at + 6;
      if (b < s_.size() && s_[b] == '\r') ++b;
      if (b < s_.size() && s_[b] == '\n') ++b;
      std::size_t len = 0;
      const Obj* l = ind.value.get("Length");
      if (l && resolve(*l).kind == Obj::kNum) len = static_cast<std::size_t>(resolve(*l).num);
      if (!l || b + len > s_.size() || s_.substr(b + len).find("endstream") > 4) {
        const auto end = s_.find("endstream", b);
        if (end == std::string_view::npos) fail(fmt::format("object {} has an unterminated stream", id));
        len = end - b;
        while (len > 0 && (s_[b + len - 1] == '\n' || s_[b + len - 1] == '\r')) --len;
      }
      ind.stream = s_.substr(b, len);
    }
    return cache_.emplace(id, std::move(ind)).first->second;
  }

  /// Page dictionaries in document order, with inherited attributes merged.
  std::vector<Obj> pages() const {
    std::optional<int> catalog;
    if (const auto t = s_.rfind("trailer"); t != std::string_view::npos) {
      Parser p(s_, t + 7);
      const Obj trailer = p.value();
      if (const Obj* root = trailer.get("Root"); root && root->kind == Obj::kRef) catalog = root->ref;
    }
    if (!catalog) {
      for (const auto& [id, off] : offsets_) {
        const Obj* type = object(id).value.get("Type");
        if (type && type->kind == Obj::kName && type->str == "Catalog") catalog = id;
      }
    }
    if (!catalog) fail("no document catalog");
    const Obj* root = object(*catalog).value.get("Pages");
    if (!root) fail("catalog has no page tree");
    std::vector<Obj> out;
    std::set<int> seen;
    walk(*root, {}, out, seen, 0);
    return out;
  }

 private:
  void index() {
    for (std::size_t at = s_.find("obj"); at != std::string_view::npos; at = s_.find("obj", at + 3)) {
      if (at + 3 < s_.size() && !is_space(s_[at + 3]) && !is_delim(s_[at + 3])) continue;
      std::size_t j = at;
      auto back_spaces = [&] {
        const std::size_t k = j;
        while (j > 0 && is_space(s_[j - 1])) --j;
        return j < k;
      };
      auto back_digits = [&] {
        const std::size_t k = j;
        while (j > 0 && std::isdigit(static_cast<unsigned char>(s_[j - 1]))) --j;
        return j < k;
      };
      if (!back_spaces() || !back_digits()) continue;
      if (!back_spaces()) continue;
      const std::size_t num_end = j;
      if (!back_digits()) continue;
      if (j > 0 && !is_space(s_[j - 1]) && !is_delim(s_[j - 1])) continue;
      const int id = std::stoi(std::string(s_.substr(j, num_end - j)));
      offsets_[id] = at + 3;  // later definitions win
    }
  }

  void walk(const Obj& node_ref, std::map<std::string, Obj> inherited, std::vector<Obj>& out,
            std::set<int>& seen, int depth) const {
    if (depth > 64) fail("page tree too deep");
    if (node_ref.kind == Obj::kRef && !seen.insert(node_ref.ref).second) fail("page tree loop");
    const Obj& node = resolve(node_ref);
    if (node.kind != Obj::kDict) fail("page tree node is not a dictionary");
    for (const char* key : {"Resources", "MediaBox"}) {
      if (const Obj* v = node.get(key)) inherited[key] = *v;
    }
    const Obj* type = node.get("Type");
    const Obj* kids = node.get("Kids");
    if (kids && (!type || type->str == "Pages")) {
      const Obj& arr = resolve(*kids);
      for (const auto& k : arr.arr) walk(k, inherited, out, seen, depth + 1);
      return;
    }
    Obj page = node;
    page.dict = std::make_shared<std::map<std::string, Obj>>(*node.dict);
    for (auto& [k, v] : inherited) page.dict->emplace(k, v);
    out.push_back(std::move(page));
  }

  std::string_view s_;
  std::map<int, std::size_t> offsets_;
  mutable std::map<int, Indirect> cache_;
};

std::string inflate_all(std::string_view in) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) fail("zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
  }
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) fail("corrupt Flate stream");
  return out;
}

Raster resample(const Raster& src, int w, int h) {
  if (src.width() == w && src.height() == h) return src;
  Raster out(w, h, src.channels());
  const double sx = static_cast<double>(src.width()) / w, sy = static_cast<double>(src.height()) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, src.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, src.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double v = (1 - ty) * ((1 - tx) * src.at(x0, y0, c) + tx * src.at(x1, y0, c)) +
                         ty * ((1 - tx) * src.at(x0, y1, c) + tx * src.at(x1, y1, c));
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return out;
}

Raster decode_xobject(const Document& doc, const Indirect& img) {
  const Obj& d = img.value;
  if (!img.stream) fail("image XObject has no stream");
  std::vector<std::string> filters;
  if (const Obj* f = d.get("Filter")) {
    const Obj& fr = doc.resolve(*f);
    if (fr.kind == Obj::kName) filters.push_back(fr.str);
    for (const auto& e : fr.arr) filters.push_back(doc.resolve(e).str);
  }
  std::string data(*img.stream);
  for (const auto& f : filters) {
    if (f == "FlateDecode") {
      data = inflate_all(data);
      if (const Obj* parms = d.get("DecodeParms")) {
        const Obj* pred = doc.resolve(*parms).get("Predictor");
        if (pred && doc.resolve(*pred).num > 1) fail("Flate predictors are not supported");
      }
    } else if (f == "DCTDecode") {
      return decode_image({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
    } else {
      fail("unsupported filter " + f);
    }
  }
  auto num = [&](const char* key) -> int {
    const Obj* v = d.get(key);
    if (!v || doc.resolve(*v).kind != Obj::kNum) fail(fmt::format("image lacks /{}", key));
    return static_cast<int>(doc.resolve(*v).num);
  };
  const int w = num("Width"), h = num("Height"), bpc = num("BitsPerComponent");
  int channels = 1;
  if (const Obj* cs = d.get("ColorSpace")) {
    const Obj& c = doc.resolve(*cs);
    if (c.kind == Obj::kName && c.str == "DeviceRGB") {
      channels = 3;
    } else if (c.kind == Obj::kArr && !c.arr.empty() && c.arr[0].str == "ICCBased" && c.arr.size() > 1) {
      const Obj& icc = c.arr[1];
      const Obj* n = icc.kind == Obj::kRef ? doc.object(icc.ref).value.get("N") : icc.get("N");
      channels = n ? static_cast<int>(doc.resolve(*n).num) : 1;
    } else if (!(c.kind == Obj::kName && c.str == "DeviceGray")) {
      fail("unsupported color space");
    }
  }
  if (w <= 0 || h <= 0 || (channels != 1 && channels != 3)) fail("bad image geometry");
  Raster out(w, h, channels);
  if (bpc == 8) {
    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (data.size() < need) fail("image stream is truncated");
    std::copy_n(reinterpret_cast<const std::uint8_t*>(data.data()), need, out.data().begin());
  } else if (bpc == 1 && channels == 1) {
    const std::size_t stride = (static_cast<std::size_t>(w) + 7) / 8;
    if (data.size() < stride * h) fail("image stream is truncated");
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto byte = static_cast<unsigned char>(data[y * stride + x / 8]);
        out.at(x, y) = (byte >> (7 - x % 8)) & 1 ? 255 : 0;
      }
    }
  } else {
    fail(fmt::format("{} bits per component is not supported", bpc));
  }
  return out;
}

Raster page_image(const Document& doc, const Obj& page, int dpi) {
  const Obj* res = page.get("Resources");
  if (!res) fail("page has no resources");
  const Obj* xo = doc.resolve(*res).get("XObject");
  if (!xo) fail("page has no images");
  std::optional<Raster> best;
  for (const auto& [name, ref] : *doc.resolve(*xo).dict) {
    if (ref.kind != Obj::kRef) continue;
    const Indirect& ind = doc.object(ref.ref);
    const Obj* sub = ind.value.get("Subtype");
    if (!sub || sub->str != "Image") continue;
    Raster r = decode_xobject(doc, ind);
    if (!best || r.pixel_count() > best->pixel_count()) best = std::move(r);
  }
  if (!best) fail("page has no images");
  if (const Obj* mb = page.get("MediaBox")) {
    const Obj& box = doc.resolve(*mb);
    if (box.arr.size() == 4) {
      const double pw = doc.resolve(box.arr[2]).num - doc.resolve(box.arr[0]).num;
      const double ph = doc.resolve(box.arr[3]).num - doc.resolve(box.arr[1]).num;
      const int tw = static_cast<int>(std::lround(std::abs(pw) / 72.0 * dpi));
      const int th = static_cast<int>(std::lround(std::abs(ph) / 72.0 * dpi));
      if (tw > 0 && th > 0) return resample(*best, tw, th);
    }
  }
  return *best;
}

}  // namespace

std::vector<PdfPage> read_pdf_pages(std::string_view pdf, int dpi) {
  if (dpi <= 0) throw Error(ErrorCode::kInvalidArgument, "pdf: dpi must be positive");
  Document doc(pdf);
  std::vector<PdfPage> out;
  for (const auto& page : doc.pages()) {
    PdfPage p;
    try {
      p.image = page_image(doc, page, dpi);
    } catch (const Error& e) {
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ledgerscan
