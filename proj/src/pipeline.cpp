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

#include "ledgerscan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "json.hpp"
#include "ledgerscan/error.hpp"
#include "ledgerscan/image_ops.hpp"
#include "ledgerscan/metrics.hpp"

namespace fs = std::filesystem;

namespace ledgerscan::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::stringstream in{std::string(s)};
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfig, fmt::format("config {}: {}", key, what));
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long r = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    bad(key, "expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(r)) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    bad(key, "expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  bad(key, "expected on/off, got '" + v + "'");
}

/// Typed access to an op's parameters; every key must be known to the op.
class OpParams {
 public:
  OpParams(const ImageOp& op, std::set<std::string> allowed) : op_(op) {
    for (const auto& [k, v] : op.params) {
      if (!allowed.count(k)) bad(key(k), fmt::format("unknown parameter for {}", type()));
    }
  }
  std::string type() const { return op_.name.substr(0, op_.name.find(':')); }
  std::string key(const std::string& p) const { return fmt::format("image_ops.{}.{}", op_.name, p); }
  const std::string* find(const std::string& p) const {
    auto it = op_.params.find(p);
    return it == op_.params.end() ? nullptr : &it->second;
  }
  int get_int(const std::string& p, int def) const {
    const auto* v = find(p);
    return v ? static_cast<int>(to_long(key(p), *v)) : def;
  }
  double get_double(const std::string& p, double def) const {
    const auto* v = find(p);
    return v ? to_double(key(p), *v) : def;
  }
  // Module validators report kInvalidArgument; surface them as config errors.
  template <typename F>
  void check(F&& f) const {
    try {
      f();
    } catch (const Error& e) {
      bad("image_ops." + op_.name, e.what());
    }
  }

 private:
  const ImageOp& op_;
};

image::BinarizeParams binarize_params(const ImageOp& op) {
  OpParams p(op, {"method", "tau", "window", "k", "R", "offset"});
  image::BinarizeParams b;
  if (const auto* m = p.find("method")) {
    const auto method = image::parse_binarize_method(*m);
    if (!method) bad(p.key("method"), "unknown method '" + *m + "'");
    b.method = *method;
  }
  b.tau = p.get_int("tau", b.tau);
  b.window = p.get_int("window", b.window);
  if (p.find("k")) b.k = p.get_double("k", 0);
  b.R = p.get_double("R", b.R);
  b.offset = p.get_int("offset", b.offset);
  p.check([&] { b.validate(); });
  return b;
}

image::ForeEdgeParams fore_edge_params(const ImageOp& op) {
  OpParams p(op, {"binarize_tau", "denoise_kernel", "denoise_iterations", "expand_kernel",
                  "expand_iterations", "min_rect_area_fraction", "max_aspect_deviation"});
  image::ForeEdgeParams f;
  f.binarize_tau = p.get_int("binarize_tau", f.binarize_tau);
  f.denoise_kernel = p.get_int("denoise_kernel", f.denoise_kernel);
  f.denoise_iterations = p.get_int("denoise_iterations", f.denoise_iterations);
  f.expand_kernel = p.get_int("expand_kernel", f.expand_kernel);
  f.expand_iterations = p.get_int("expand_iterations", f.expand_iterations);
  f.min_rect_area_fraction = p.get_double("min_rect_area_fraction", f.min_rect_area_fraction);
  f.max_aspect_deviation = p.get_double("max_aspect_deviation", f.max_aspect_deviation);
  p.check([&] { f.validate(); });
  return f;
}

image::DeskewParams deskew_params(const ImageOp& op) {
  OpParams p(op, {"max_angle", "step", "dark_threshold"});
  image::DeskewParams d;
  d.max_angle = p.get_double("max_angle", d.max_angle);
  d.step = p.get_double("step", d.step);
  d.dark_threshold = p.get_int("dark_threshold", d.dark_threshold);
  if (!(d.max_angle > 0 && d.max_angle <= 45)) bad(p.key("max_angle"), "must be in (0,45]");
  if (!(d.step > 0 && d.step <= d.max_angle)) bad(p.key("step"), "must be in (0,max_angle]");
  if (d.dark_threshold < 1 || d.dark_threshold > 255) bad(p.key("dark_threshold"), "must be in [1,255]");
  return d;
}

struct ClaheParams {
  int cols = 8, rows = 8;
  double clip = 2.0;
};

ClaheParams clahe_params(const ImageOp& op) {
  OpParams p(op, {"tile_cols", "tile_rows", "clip_limit"});
  ClaheParams c;
  c.cols = p.get_int("tile_cols", c.cols);
  c.rows = p.get_int("tile_rows", c.rows);
  c.clip = p.get_double("clip_limit", c.clip);
  if (c.cols < 1 || c.rows < 1) bad(p.key("tile_cols"), "tiles must be >= 1");
  return c;
}

struct MorphParams {
  image::MorphOp op = image::MorphOp::kErode;
  int kw = 3, kh = 3, iterations = 1;
};

MorphParams morph_params(const ImageOp& op) {
  OpParams p(op, {"op", "kernel_w", "kernel_h", "iterations"});
  MorphParams m;
  if (const auto* o = p.find("op")) {
    if (*o == "erode") m.op = image::MorphOp::kErode;
    else if (*o == "dilate") m.op = image::MorphOp::kDilate;
    else bad(p.key("op"), "expected erode or dilate");
  }
  m.kw = p.get_int("kernel_w", m.kw);
  m.kh = p.get_int("kernel_h", m.kh);
  m.iterations = p.get_int("iterations", m.iterations);
  if (m.kw < 1 || m.kh < 1) bad(p.key("kernel_w"), "kernel must be >= 1");
  if (m.iterations < 0) bad(p.key("iterations"), "must be >= 0");
  return m;
}

struct PerspectiveParams {
  image::Quad quad;
  int width = 0, height = 0;
};

PerspectiveParams perspective_params(const ImageOp& op) {
  OpParams p(op, {"corners", "width", "height"});
  PerspectiveParams r;
  const auto* c = p.find("corners");
  if (!c) bad(p.key("corners"), "required (x0,y0,...,x3,y3 clockwise from top-left)");
  const auto parts = split_list(*c);
  if (parts.size() != 8) bad(p.key("corners"), "expected 8 numbers");
  for (int i = 0; i < 4; ++i) {
    r.quad.corners[i] = {to_double(p.key("corners"), parts[2 * i]), to_double(p.key("corners"), parts[2 * i + 1])};
  }
  r.width = p.get_int("width", 0);
  r.height = p.get_int("height", 0);
  if (r.width < 2 || r.height < 2) bad(p.key("width"), "output width and height must be >= 2");
  p.check([&] { image::homography_to_quad(r.quad, r.width, r.height); });
  return r;
}

void validate_op(const ImageOp& op) {
  const std::string type = op.name.substr(0, op.name.find(':'));
  if (type == "grayscale" || type == "equalize") {
    OpParams p(op, {});
  } else if (type == "clahe") {
    clahe_params(op);
  } else if (type == "binarize") {
    binarize_params(op);
  } else if (type == "morphology") {
    morph_params(op);
  } else if (type == "fore_edge") {
    fore_edge_params(op);
  } else if (type == "deskew") {
    deskew_params(op);
  } else if (type == "perspective") {
    perspective_params(op);
  } else {
    bad("image_ops", fmt::format("unknown op '{}'", op.name));
  }
}

/// Least-squares affine fit of the quad corners onto the output rectangle;
/// exact for parallelograms.
Affine fit_affine(const image::Quad& q, int w, int h) {
  const Point dst[4] = {{0, 0}, {double(w - 1), 0}, {double(w - 1), double(h - 1)}, {0, double(h - 1)}};
  double m[3][3] = {}, bx[3] = {}, by[3] = {};
  for (int i = 0; i < 4; ++i) {
    const double v[3] = {q.corners[i].x, q.corners[i].y, 1};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += v[r] * v[c];
      bx[r] += v[r] * dst[i].x;
      by[r] += v[r] * dst[i].y;
    }
  }
  auto det3 = [](double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  auto solve = [&](const double* b) {
    std::array<double, 3> x{};
    for (int k = 0; k < 3; ++k) {
      double t[3][3];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) t[r][c] = c == k ? b[r] : m[r][c];
      }
      x[k] = det3(t) / d;
    }
    return x;
  };
  const auto ax = solve(bx), ay = solve(by);
  return {ax[0], ax[1], ax[2], ay[0], ay[1], ay[2]};
}

std::uint64_t mix_seed(std::uint64_t seed, int page_id, std::string_view engine) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (char c : engine) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  h = (h ^ static_cast<std::uint64_t>(page_id)) * 1099511628211ULL;
  return h;
}

std::vector<ocr::OcrWord> map_words(const std::vector<ocr::OcrWord>& words, const Affine& t, int w, int h) {
  std::vector<ocr::OcrWord> out;
  for (auto word : words) {
    if (!t.is_identity()) word.bbox = transform_box(t, word.bbox);
    word.bbox = intersect(word.bbox, {0, 0, w, h});
    if (word.bbox.valid()) out.push_back(std::move(word));
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_entries(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, fmt::format("config line {}: expected key = value", n));
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::kConfig, fmt::format("config line {}: empty key", n));
    if (out.count(key)) throw Error(ErrorCode::kConfig, fmt::format("config line {}: duplicate key {}", n, key));
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

PipelineConfig build_config(const std::map<std::string, std::string>& entries, const fs::path& base_dir) {
  PipelineConfig c;
  c.entries = entries;
  std::set<std::string> used;
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };
  auto get_double = [&](const std::string& key, double& target) {
    if (const auto* v = get(key)) target = to_double(key, *v);
  };
  auto get_int = [&](const std::string& key, int& target) {
    if (const auto* v = get(key)) target = static_cast<int>(to_long(key, *v));
  };
  auto read_path = [&](const std::string& key) -> std::optional<std::string> {
    const auto* v = get(key);
    if (!v) return std::nullopt;
    fs::path p(*v);
    if (p.is_relative()) p = base_dir / p;
    try {
      return read_file(p);
    } catch (const Error&) {
      bad(key, "cannot read " + p.string());
    }
  };

  // Image operations, in the order given.
  if (const auto* ops = get("image_ops")) {
    std::set<std::string> names;
    for (const auto& name : split_list(*ops)) {
      if (!names.insert(name).second) bad("image_ops", "duplicate op '" + name + "'; name repeats as op:label");
      c.image_ops.push_back({name, {}});
    }
  }
  for (const auto& [key, value] : entries) {
    if (key.rfind("image_ops.", 0) != 0) continue;
    const std::string rest = key.substr(10);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos) bad(key, "expected image_ops.<op>.<param>");
    const std::string op = rest.substr(0, dot);
    auto it = std::find_if(c.image_ops.begin(), c.image_ops.end(), [&](const ImageOp& o) { return o.name == op; });
    if (it == c.image_ops.end()) bad(key, fmt::format("op '{}' is not listed in image_ops", op));
    it->params[rest.substr(dot + 1)] = value;
    used.insert(key);
  }
  for (const auto& op : c.image_ops) validate_op(op);

  // Recognition.
  if (const auto* e = get("engines")) c.engines = split_list(*e);
  if (c.engines.empty()) bad("engines", "at least one engine is required");
  for (const auto& e : c.engines) {
    if (e.rfind("mock", 0) != 0 && !ocr::parse_engine(e)) bad("engines", "unknown engine '" + e + "'");
  }
  if (const auto* v = get("ocr.mock.substitution")) c.mock_noise.substitution_prob = to_double("ocr.mock.substitution", *v);
  if (const auto* v = get("ocr.mock.deletion")) c.mock_noise.deletion_prob = to_double("ocr.mock.deletion", *v);
  if (const auto* v = get("ocr.mock.seed")) c.mock_noise.seed = static_cast<std::uint64_t>(to_long("ocr.mock.seed", *v));
  if (const auto* v = get("ocr.mock.random_unmapped")) c.mock_noise.random_unmapped = to_bool("ocr.mock.random_unmapped", *v);
  try {
    c.mock_noise.validate();
  } catch (const Error& e) {
    bad("ocr.mock", e.what());
  }

  // Consensus.
  if (const auto* v = get("ensemble")) c.ensemble = to_bool("ensemble", *v);
  if (const auto* v = get("ensemble.weights")) {
    const auto w = ensemble::parse_weights(*v);
    if (!w) bad("ensemble.weights", "expected uniform or confidence");
    c.ensemble_config.weights = *w;
  }
  get_double("ensemble.iou_min", c.ensemble_config.iou_min);
  if (!(c.ensemble_config.iou_min > 0 && c.ensemble_config.iou_min <= 1)) bad("ensemble.iou_min", "must be in (0,1]");
  if (const auto* v = get("ensemble.max_length_spread")) {
    const long n = to_long("ensemble.max_length_spread", *v);
    if (n < 0) bad("ensemble.max_length_spread", "must be >= 0");
    c.ensemble_config.max_length_spread = static_cast<std::size_t>(n);
  }

  // Layout.
  auto& L = c.layout;
  get_double("layout.canny_low", L.canny_low);
  get_double("layout.canny_high", L.canny_high);
  get_double("layout.canny_sigma", L.canny_sigma);
  get_int("layout.hough.vote_threshold", L.hough.vote_threshold);
  get_int("layout.hough.max_gap", L.hough.max_gap);
  if (const auto* v = get("layout.hough.samples")) {
    const long n = to_long("layout.hough.samples", *v);
    if (n < 0) bad("layout.hough.samples", "must be >= 0");
    L.hough.samples = static_cast<std::size_t>(n);
  }
  if (const auto* v = get("layout.hough.seed")) L.hough.seed = static_cast<std::uint64_t>(to_long("layout.hough.seed", *v));
  get_double("layout.hough.min_len_frac", L.hough_min_len_frac);
  get_double("layout.angle_tol", L.consolidate.angle_tol);
  get_double("layout.merge_dist", L.consolidate.merge_dist);
  get_double("layout.min_span_frac", L.consolidate.min_span_frac);
  get_double("layout.y_overlap_min", L.y_overlap_min);
  if (const auto* v = get("layout.indent_min")) L.indent_min = to_double("layout.indent_min", *v);
  get_double("layout.center_tol_frac", L.headers.center_tol_frac);
  get_double("layout.height_ratio_min", L.headers.height_ratio_min);
  get_double("layout.gap_ratio_min", L.headers.gap_ratio_min);
  try {
    L.validate();
  } catch (const Error& e) {
    bad("layout", e.what());
  }

  // Extraction.
  auto& X = c.extract;
  try {
    if (auto t = read_path("extract.vocabulary")) X.vocabulary = extract::parse_vocabulary(*t);
    if (auto t = read_path("extract.abbreviations")) X.abbreviations = extract::parse_abbreviations(*t);
    if (auto t = read_path("extract.rules")) X.rules = extract::parse_rules(*t);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    bad("extract", e.what());
  }
  get_int("extract.year", X.year);
  if (const auto* v = get("extract.header_pattern")) {
    try {
      std::regex re(*v);
      if (re.mark_count() < 3) bad("extract.header_pattern", "needs three groups: name, city, charter");
    } catch (const std::regex_error&) {
      bad("extract.header_pattern", "invalid regular expression");
    }
    X.header_pattern = *v;
  }
  if (const auto* v = get("extract.max_edit")) {
    const long n = to_long("extract.max_edit", *v);
    if (n < 0) bad("extract.max_edit", "must be >= 0");
    X.max_edit = static_cast<std::size_t>(n);
  }
  if (const auto* v = get("extract.asset_sections")) X.asset_sections = split_list(*v);
  if (const auto* v = get("extract.liability_sections")) X.liability_sections = split_list(*v);
  if (const auto* v = get("extract.total_labels")) X.total_labels = split_list(*v);
  if (const auto* v = get("extract.capital_label")) X.capital_label = *v;
  get_double("extract.low_confidence", c.low_confidence);
  if (!(c.low_confidence >= 0 && c.low_confidence <= 1)) bad("extract.low_confidence", "must be in [0,1]");

  // Output and execution.
  if (const auto* v = get("output.formats")) {
    for (const auto& f : split_list(*v)) {
      if (f == "csv") continue;
      if (f == "layout_image") c.annotated_layout = true;
      else bad("output.formats", "unknown format '" + f + "'");
    }
  }
  if (const auto* v = get("workers")) {
    const long n = to_long("workers", *v);
    if (n < 0 || n > 256) bad("workers", "must be in [0,256]");
    c.workers = static_cast<unsigned>(n);
  }

  for (const auto& [key, value] : entries) {
    if (!used.count(key)) bad(key, "unknown key");
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::kConfig, "cannot read config " + path.string());
  }
  return build_config(parse_config_entries(text), path.parent_path());
}

std::map<std::string, std::string> with_overrides(std::map<std::string, std::string> entries,
                                                  const tuning::ParamSet& params) {
  for (const auto& [k, v] : params) entries[k] = v;
  return entries;
}

ProcessedImage apply_image_ops(const Raster& raw, const std::vector<ImageOp>& ops) {
  ProcessedImage out{raw, {}};
  for (const auto& op : ops) {
    const std::string type = op.name.substr(0, op.name.find(':'));
    Raster& img = out.image;
    const bool gray_needed = type != "grayscale" && type != "perspective";
    if (gray_needed && img.channels() != 1) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("{} needs a grayscale image; add grayscale first", op.name));
    }
    if (type == "grayscale") {
      if (img.channels() != 1) img = image::to_grayscale(img);
    } else if (type == "equalize") {
      img = image::equalize(img);
    } else if (type == "clahe") {
      const auto p = clahe_params(op);
      img = image::clahe(img, p.cols, p.rows, p.clip);
    } else if (type == "binarize") {
      img = image::binarize(img, binarize_params(op));
    } else if (type == "morphology") {
      const auto p = morph_params(op);
      img = image::morphology(img, p.op, p.kw, p.kh, p.iterations);
    } else if (type == "fore_edge") {
      auto r = image::remove_fore_edges(img, fore_edge_params(op));
      if (r.crop_box) out.transform = Affine::translation(-r.crop_box->x0, -r.crop_box->y0).after(out.transform);
      img = std::move(r.cropped);
    } else if (type == "deskew") {
      const int w = img.width(), h = img.height();
      auto r = image::deskew(img, deskew_params(op));
      if (r.angle != 0.0) out.transform = image::rotation_transform(w, h, -r.angle).after(out.transform);
      img = std::move(r.rotated);
    } else if (type == "perspective") {
      const auto p = perspective_params(op);
      img = image::perspective_correct(img, p.quad, p.width, p.height);
      out.transform = fit_affine(p.quad, p.width, p.height).after(out.transform);
    } else {
      throw Error(ErrorCode::kConfig, "unknown image op " + op.name);
    }
  }
  return out;
}

PageSource load_page_source(const Workspace& ws, int page_id) {
  PageSource s;
  s.page_id = page_id;
  s.raw = ws.raw_image(page_id);
  const PageEntry e = ws.entry(page_id);
  for (const auto& [kind, info] : e.artifacts) {
    if (kind.rfind("native:", 0) == 0) s.native[kind.substr(7)] = ws.load_artifact(page_id, kind).first;
  }
  if (e.artifacts.count("mock_truth")) s.mock_truth = ws.load_artifact(page_id, "mock_truth").first;
  return s;
}

ocr::OcrPage recognize(const std::string& engine, const PageSource& source, const ProcessedImage& processed,
                       const PipelineConfig& config) {
  const int w = processed.image.width(), h = processed.image.height();
  if (auto it = source.native.find(engine); it != source.native.end()) {
    ocr::NormalizeOptions opt;
    opt.page_size = std::pair{source.raw.width(), source.raw.height()};
    ocr::OcrPage page = ocr::normalize(engine, it->second, opt);
    page.width = w;
    page.height = h;
    page.words = map_words(page.words, processed.transform, w, h);
    return page;
  }
  if (engine.rfind("mock", 0) == 0 && source.mock_truth) {
    auto truth = ocr::truth_words_from_json(*source.mock_truth);
    std::vector<ocr::TruthWord> mapped;
    for (auto& t : truth) {
      Box b = processed.transform.is_identity() ? t.bbox : transform_box(processed.transform, t.bbox);
      b = intersect(b, {0, 0, w, h});
      if (b.valid()) mapped.push_back({t.text, b});
    }
    ocr::NoiseModel noise = config.mock_noise;
    noise.seed = mix_seed(noise.seed, source.page_id, engine);
    return ocr::mock_ocr(mapped, w, h, noise, engine);
  }
  throw Error(ErrorCode::kUnavailable,
              fmt::format("page {}: engine unavailable: {} (no recorded payload{})", source.page_id, engine,
                          engine.rfind("mock", 0) == 0 ? " and no mock truth" : ""));
}

PageResult extract_page(const PageSource& source, const PipelineConfig& config) {
  PageResult r;
  r.processed = apply_image_ops(source.raw, config.image_ops);
  for (const auto& e : config.engines) r.ocr.push_back(recognize(e, source, r.processed, config));
  if (config.ensemble && r.ocr.size() > 1) {
    r.consensus = ensemble::ensemble_pages(r.ocr, config.ensemble_config);
  } else {
    r.consensus = r.ocr.front();
  }
  r.layout = layout::analyze(r.processed.image, r.consensus, config.layout);
  const auto grid = extract::cells_from_layout(r.layout, r.consensus, config.low_confidence);
  r.sheet = extract::assemble_balance_sheet(grid, config.extract);
  return r;
}

ocr::OcrPage run_ocr(Workspace& ws, int page_id, const std::string& engine, const PipelineConfig& config) {
  const std::string kind = "ocr:" + engine;
  const PageEntry e = ws.entry(page_id);
  auto version_of = [&](const std::string& k) -> std::uint64_t {
    auto it = e.artifacts.find(k);
    return it == e.artifacts.end() ? 0 : it->second.version;
  };
  if (auto it = e.artifacts.find(kind); it != e.artifacts.end()) {
    const std::uint64_t v = it->second.version;
    if (v > version_of("processed") && v > version_of("native:" + engine) && v > version_of("mock_truth")) {
      return ocr::from_json(ws.load_artifact(page_id, kind).first);
    }
  }
  const PageSource source = load_page_source(ws, page_id);
  ProcessedImage processed{source.raw, e.transform};
  if (e.artifacts.count("processed")) {
    const auto bytes = ws.load_artifact(page_id, "processed").first;
    processed.image = decode_image({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  }
  ocr::OcrPage page = recognize(engine, source, processed, config);
  ws.store_artifact(page_id, kind, ocr::to_json(page));
  return page;
}

std::size_t RunReport::failures() const {
  return static_cast<std::size_t>(std::count_if(pages.begin(), pages.end(), [](const PageReport& p) { return !p.ok; }));
}

std::string RunReport::to_text() const {
  std::string out;
  std::size_t red = 0, yellow = 0, records = 0;
  for (const auto& p : pages) {
    if (p.ok) {
      out += fmt::format("page {:04d}: {} records, {} red, {} yellow\n", p.page_id, p.records, p.red, p.yellow);
      red += p.red;
      yellow += p.yellow;
      records += p.records;
    } else {
      out += fmt::format("page {:04d}: FAILED {}\n", p.page_id, p.error);
    }
  }
  out += fmt::format("{} pages, {} failed, {} records, {} red, {} yellow\n", pages.size(), failures(), records, red,
                     yellow);
  return out;
}

unsigned worker_count(unsigned configured) {
  if (const char* env = std::getenv("PIPELINE_WORKERS"); env && *env) {
    try {
      const long n = std::stol(env);
      if (n >= 1 && n <= 256) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kConfig, fmt::format("PIPELINE_WORKERS='{}' is not in [1,256]", env));
  }
  if (configured > 0) return configured;
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  if (workers <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

void store_if_changed(Workspace& ws, int page_id, const std::string& kind, const std::string& payload) {
  if (ws.has_artifact(page_id, kind) && ws.load_artifact(page_id, kind).first == payload) return;
  ws.store_artifact(page_id, kind, payload);
}

void extract_stage(Workspace& ws, const PipelineConfig& config, int page_id) {
  const PageSource source = load_page_source(ws, page_id);
  const ProcessedImage processed = apply_image_ops(source.raw, config.image_ops);
  const auto png = encode_png(processed.image);
  store_if_changed(ws, page_id, "processed", std::string(png.begin(), png.end()));
  ws.set_transform(page_id, processed.transform);
  std::vector<ocr::OcrPage> pages;
  for (const auto& e : config.engines) pages.push_back(run_ocr(ws, page_id, e, config));
  const ocr::OcrPage consensus =
      config.ensemble && pages.size() > 1 ? ensemble::ensemble_pages(pages, config.ensemble_config) : pages.front();
  if (pages.size() > 1 && config.ensemble) store_if_changed(ws, page_id, "ocr:ensemble", ocr::to_json(consensus));
  const auto model = layout::analyze(processed.image, consensus, config.layout);
  store_if_changed(ws, page_id, "layout", layout::to_json(model));
  if (config.annotated_layout) {
    const auto annotated = encode_png(layout::render_annotated(processed.image, model));
    store_if_changed(ws, page_id, "layout_image", std::string(annotated.begin(), annotated.end()));
  }
  const auto grid = extract::cells_from_layout(model, consensus, config.low_confidence);
  const auto sheet = extract::assemble_balance_sheet(grid, config.extract);
  store_if_changed(ws, page_id, "extracted", extract::records_to_csv(sheet, {}));
}

}  // namespace

RunReport run_pipeline(Workspace& ws, const PipelineConfig& config, const std::vector<int>& pages,
                       const RunOptions& options) {
  if (pages.empty()) throw Error(ErrorCode::kInvalidArgument, "no pages selected");
  for (int id : pages) (void)ws.entry(id);
  const unsigned workers = worker_count(config.workers);
  RunReport report;
  report.pages.resize(pages.size());
  for (std::size_t i = 0; i < pages.size(); ++i) report.pages[i].page_id = pages[i];

  if (options.extract) {
    parallel_for(pages.size(), workers, [&](std::size_t i) {
      PageReport& r = report.pages[i];
      try {
        if (ws.entry(r.page_id).status != "ok") {
          throw Error(ErrorCode::kNotYetProduced, "raw image missing: " + ws.entry(r.page_id).error);
        }
        extract_stage(ws, config, r.page_id);
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    });
  }
  if (options.validate) {
    // Dataset context first, from every page that has been extracted.
    extract::ValidationContext context;
    std::map<int, extract::BalanceSheet> sheets;
    for (int id : ws.page_ids()) {
      if (!ws.has_artifact(id, "extracted")) continue;
      try {
        sheets[id] = extract::sheet_from_rows(extract::read_records_csv(ws.load_artifact(id, "extracted").first),
                                              config.extract);
        context.add(sheets[id], config.extract);
      } catch (const Error&) {
        // Reported below if the page is selected.
      }
    }
    parallel_for(pages.size(), workers, [&](std::size_t i) {
      PageReport& r = report.pages[i];
      if (!r.ok) return;
      try {
        auto it = sheets.find(r.page_id);
        if (it == sheets.end()) {
          throw Error(ErrorCode::kNotYetProduced, fmt::format("page {}: nothing extracted", r.page_id));
        }
        const auto flags = extract::validate_sheet(it->second, context, config.extract);
        ws.store_artifacts(r.page_id, {{"records", extract::records_to_csv(it->second, flags)},
                                       {"flags", extract::flags_to_json(flags)}});
        r.records = it->second.records.size();
        for (const auto& f : flags) (f.severity == extract::Severity::kRed ? r.red : r.yellow)++;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    });
  }
  return report;
}

std::string render_flag_report(const Workspace& ws, const std::vector<int>& pages) {
  struct Row {
    int id;
    std::size_t red = 0, yellow = 0;
    bool validated = true;
  };
  std::vector<Row> rows;
  std::map<std::string, std::size_t> by_code;
  std::size_t red = 0, yellow = 0;
  for (int id : pages) {
    Row r{id};
    if (!ws.has_artifact(id, "flags")) {
      r.validated = false;
    } else {
      for (const auto& f : extract::flags_from_json(ws.load_artifact(id, "flags").first)) {
        ++by_code[std::string(extract::to_string(f.code))];
        (f.severity == extract::Severity::kRed ? r.red : r.yellow)++;
      }
      red += r.red;
      yellow += r.yellow;
    }
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.validated != b.validated) return a.validated;
    return a.red != b.red ? a.red > b.red : a.id < b.id;
  });
  std::string out = fmt::format("{} red, {} yellow\n", red, yellow);
  for (const auto& [code, n] : by_code) out += fmt::format("  {:<22}{}\n", code, n);
  for (const auto& r : rows) {
    out += r.validated ? fmt::format("page {:04d}: {} red, {} yellow\n", r.id, r.red, r.yellow)
                       : fmt::format("page {:04d}: not validated\n", r.id);
  }
  return out;
}

std::vector<int> parse_page_selection(std::string_view text, int page_count) {
  std::set<int> out;
  for (const auto& part : split_list(text)) {
    const auto dash = part.find('-');
    long lo = 0, hi = 0;
    try {
      lo = std::stol(part.substr(0, dash));
      hi = dash == std::string::npos ? lo : std::stol(part.substr(dash + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad page selection '" + part + "'");
    }
    if (lo < 1 || hi < lo || hi > page_count) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("page selection '{}' outside 1-{}", part, page_count));
    }
    for (long p = lo; p <= hi; ++p) out.insert(static_cast<int>(p));
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "no pages selected");
  return {out.begin(), out.end()};
}

double evaluate_page(const Workspace& ws, const std::map<std::string, std::string>& entries,
                     const fs::path& base_dir, const tuning::ParamSet& params, int page_id,
                     const std::string& objective) {
  const PipelineConfig config = build_config(with_overrides(entries, params), base_dir);
  const auto truth = extract::read_records_csv(ws.load_artifact(page_id, "truth").first);
  const PageResult r = extract_page(load_page_source(ws, page_id), config);
  const auto records = extract::read_records_csv(extract::records_to_csv(r.sheet, {}));
  if (objective == "field_accuracy") return metrics::field_accuracy(records, truth).value;
  if (objective == "cer") {
    // Mean CER over truth amounts, matched by label and occurrence.
    std::map<std::pair<std::string, int>, std::string> got;
    std::map<std::string, int> seen;
    for (const auto& row : records) {
      const std::string l = extract::normalize_label(row.label);
      got[{l, seen[l]++}] = row.raw_value;
    }
    seen.clear();
    double sum = 0;
    std::size_t n = 0;
    for (const auto& row : truth) {
      const std::string l = extract::normalize_label(row.label);
      const int k = seen[l]++;
      if (row.raw_value.empty()) continue;
      auto it = got.find({l, k});
      sum += it == got.end() ? 1.0 : metrics::cer(it->second, row.raw_value);
      ++n;
    }
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "cer: truth has no values");
    return sum / static_cast<double>(n);
  }
  throw Error(ErrorCode::kConfig, "objective '" + objective + "' cannot be computed per page");
}

}  // namespace ledgerscan::pipeline
