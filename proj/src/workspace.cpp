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

#include "ledgerscan/workspace.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <random>
#include <regex>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "json.hpp"
#include "ledgerscan/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace ledgerscan {

namespace {

const std::regex kEngineName("[a-z0-9_-]+");

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff" ||
         ext == ".bmp";
}

std::string page_dir(int page_id) { return fmt::format("pages/{:04d}", page_id); }

}  // namespace

std::string artifact_path(int page_id, std::string_view kind) {
  const std::string dir = page_dir(page_id);
  static const std::map<std::string, std::string, std::less<>> fixed = {
      {"processed", "processed.png"}, {"layout", "layout.json"},   {"layout_image", "layout.png"},
      {"records", "records.csv"},     {"extracted", "extracted.csv"}, {"flags", "flags.json"},
      {"truth", "truth.csv"},         {"mock_truth", "mock_truth.json"}};
  if (auto it = fixed.find(kind); it != fixed.end()) return dir + "/" + it->second;
  for (auto [prefix, sub, ext] : {std::tuple{"ocr:", "ocr", ".json"}, std::tuple{"native:", "ocr", ".native"}}) {
    const std::string_view pre(prefix);
    if (kind.substr(0, pre.size()) == pre) {
      const std::string engine(kind.substr(pre.size()));
      if (!std::regex_match(engine, kEngineName)) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("bad engine name in artifact kind '{}'", kind));
      }
      return fmt::format("{}/{}/{}{}", dir, sub, engine, ext);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown artifact kind '{}'", kind));
}

std::string manifest_to_json(const Manifest& m) {
  ordered_json root;
  root["source"] = m.source;
  root["source_kind"] = m.source_kind;
  root["dpi"] = m.dpi;
  root["config"] = m.config;
  ordered_json pages = ordered_json::array();
  for (const auto& p : m.pages) {
    ordered_json j;
    j["page_id"] = p.page_id;
    j["raw_image"] = p.raw_image;
    j["status"] = p.status;
    j["error"] = p.error;
    j["width"] = p.width;
    j["height"] = p.height;
    j["version"] = p.version;
    j["reviewed"] = p.reviewed;
    j["transform"] = p.transform.coefficients();
    ordered_json arts = ordered_json::object();
    for (const auto& [kind, a] : p.artifacts) arts[kind] = {{"path", a.path}, {"version", a.version}};
    j["artifacts"] = std::move(arts);
    pages.push_back(std::move(j));
  }
  root["pages"] = std::move(pages);
  return root.dump(1) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  Manifest m;
  try {
    const json root = json::parse(text.begin(), text.end());
    m.source = root.at("source").get<std::string>();
    m.source_kind = root.at("source_kind").get<std::string>();
    m.dpi = root.at("dpi").get<int>();
    m.config = root.value("config", std::map<std::string, std::string>{});
    for (const auto& j : root.at("pages")) {
      PageEntry p;
      p.page_id = j.at("page_id").get<int>();
      p.raw_image = j.at("raw_image").get<std::string>();
      p.status = j.at("status").get<std::string>();
      p.error = j.value("error", "");
      p.width = j.value("width", 0);
      p.height = j.value("height", 0);
      p.version = j.at("version").get<std::uint64_t>();
      p.reviewed = j.value("reviewed", false);
      if (j.contains("transform")) {
        const auto t = j.at("transform").get<std::array<double, 6>>();
        p.transform = {t[0], t[1], t[2], t[3], t[4], t[5]};
      }
      for (const auto& [kind, a] : j.at("artifacts").items()) {
        p.artifacts[kind] = {a.at("path").get<std::string>(), a.at("version").get<std::uint64_t>()};
      }
      m.pages.push_back(std::move(p));
    }
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, fmt::format("manifest: malformed JSON at byte {}", e.byte));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("manifest: {}", e.what()));
  }
  for (std::size_t i = 0; i < m.pages.size(); ++i) {
    if (m.pages[i].page_id != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::kParse, "manifest: page ids must be 1..n in order");
    }
  }
  return m;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  static std::atomic<std::uint64_t> counter{0};
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.parent_path() /
                       fmt::format(".{}.tmp{}-{}", path.filename().string(),
                                   std::hash<std::thread::id>{}(std::this_thread::get_id()), counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, fmt::format("cannot replace {}", path.string()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace::State {
  fs::path root;
  mutable std::mutex manifest_mu;  // guards `manifest` and manifest.json
  Manifest manifest;
  mutable std::mutex locks_mu;
  mutable std::map<int, std::unique_ptr<std::shared_mutex>> page_locks;

  std::shared_mutex& lock_for(int page_id) const {
    std::lock_guard g(locks_mu);
    auto& slot = page_locks[page_id];
    if (!slot) slot = std::make_unique<std::shared_mutex>();
    return *slot;
  }

  void save_locked() const { write_file_atomic(root / "manifest.json", manifest_to_json(manifest)); }

  PageEntry& entry_locked(int page_id) {
    if (page_id < 1 || page_id > static_cast<int>(manifest.pages.size())) {
      throw Error(ErrorCode::kNotFound, fmt::format("unknown page {}", page_id));
    }
    return manifest.pages[page_id - 1];
  }
};

namespace {

void import_sidecars(Workspace& ws, int page_id, const fs::path& image) {
  const fs::path dir = image.parent_path();
  const std::string stem = image.stem().string();
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    if (name.rfind(stem + ".", 0) != 0 || f == image) continue;
    const std::string rest = name.substr(stem.size() + 1);
    if (rest == "truth.json") {
      ws.store_artifact(page_id, "mock_truth", read_file(f));
    } else if (rest == "truth.csv") {
      ws.store_artifact(page_id, "truth", read_file(f));
    } else if (rest.size() > 7 && rest.substr(rest.size() - 7) == ".native") {
      ws.store_artifact(page_id, "native:" + rest.substr(0, rest.size() - 7), read_file(f));
    }
  }
}

}  // namespace

Workspace Workspace::open(const fs::path& source, const fs::path& cache, int dpi) {
  if (dpi <= 0) throw Error(ErrorCode::kInvalidArgument, "dpi must be positive");
  std::error_code ec;
  if (!fs::exists(source, ec)) throw Error(ErrorCode::kNotFound, "source not found: " + source.string());
  const bool is_dir = fs::is_directory(source, ec);
  if (!is_dir) {
    std::ifstream in(source, std::ios::binary);
    char magic[5] = {};
    if (!in || !in.read(magic, 5)) throw Error(ErrorCode::kIo, "unreadable source: " + source.string());
    if (std::string_view(magic, 5) != "%PDF-") {
      throw Error(ErrorCode::kInvalidArgument, "source is neither a PDF nor a directory: " + source.string());
    }
  }
  fs::create_directories(cache, ec);
  if (ec || !fs::is_directory(cache)) throw Error(ErrorCode::kIo, "cache path not writable: " + cache.string());
  {
    const fs::path probe = cache / ".write-probe";
    std::ofstream out(probe);
    if (!out) throw Error(ErrorCode::kIo, "cache path not writable: " + cache.string());
    out.close();
    fs::remove(probe, ec);
  }
  if (fs::exists(cache / "manifest.json")) return open_existing(cache);

  auto state = std::make_shared<State>();
  state->root = cache;
  state->manifest.source = fs::absolute(source).lexically_normal().string();
  state->manifest.source_kind = is_dir ? "images" : "pdf";
  state->manifest.dpi = dpi;
  Workspace ws(state);
  if (!is_dir) {
    std::lock_guard g(state->manifest_mu);
    state->save_locked();
    return ws;
  }
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(source)) {
    const std::string name = e.path().filename().string();
    // Sidecars share the stem and carry a second extension.
    if (e.is_regular_file() && is_image_file(e.path()) && e.path().stem().extension().empty()) {
      images.push_back(e.path());
    }
  }
  std::sort(images.begin(), images.end());
  {
    std::lock_guard g(state->manifest_mu);
    for (std::size_t i = 0; i < images.size(); ++i) {
      PageEntry p;
      p.page_id = static_cast<int>(i) + 1;
      state->manifest.pages.push_back(p);
    }
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const std::string rel = page_dir(id) + "/raw.png";
    std::string status = "ok", error;
    int w = 0, h = 0;
    try {
      const Raster img = read_image(images[i]);
      const auto png = encode_png(img);
      write_file_atomic(cache / rel, {reinterpret_cast<const char*>(png.data()), png.size()});
      w = img.width();
      h = img.height();
    } catch (const Error& e) {
      status = "failed";
      error = e.what();
    }
    {
      std::lock_guard g(state->manifest_mu);
      PageEntry& p = state->entry_locked(id);
      p.status = status;
      p.error = error;
      p.width = w;
      p.height = h;
      if (status == "ok") p.raw_image = rel;
    }
    import_sidecars(ws, id, images[i]);
  }
  std::lock_guard g(state->manifest_mu);
  state->save_locked();
  return ws;
}

Workspace Workspace::open_existing(const fs::path& cache) {
  const fs::path mf = cache / "manifest.json";
  if (!fs::exists(mf)) throw Error(ErrorCode::kNotFound, "no workspace at " + cache.string());
  auto state = std::make_shared<State>();
  state->root = cache;
  state->manifest = manifest_from_json(read_file(mf));
  return Workspace(state);
}

const fs::path& Workspace::root() const { return state_->root; }

Manifest Workspace::manifest() const {
  std::lock_guard g(state_->manifest_mu);
  return state_->manifest;
}

std::vector<int> Workspace::page_ids() const {
  std::lock_guard g(state_->manifest_mu);
  std::vector<int> ids;
  for (const auto& p : state_->manifest.pages) ids.push_back(p.page_id);
  return ids;
}

PageEntry Workspace::entry(int page_id) const {
  std::lock_guard g(state_->manifest_mu);
  return state_->entry_locked(page_id);
}

Description Workspace::describe() const {
  std::lock_guard g(state_->manifest_mu);
  const Manifest& m = state_->manifest;
  Description d;
  d.source = m.source;
  d.source_kind = m.source_kind;
  d.dpi = m.dpi;
  d.pages = m.pages.size();
  if (m.source_kind == "pdf" && m.pages.empty()) {
    try {
      d.pages = read_pdf_pages(read_file(m.source), m.dpi).size();
    } catch (const Error&) {
      d.pages = 0;
    }
  }
  for (const auto& p : m.pages) {
    d.extracted += p.status == "ok";
    d.failed += p.status == "failed";
    d.sizes.emplace_back(p.width, p.height);
  }
  return d;
}

std::size_t Workspace::extract_images() {
  Manifest snapshot = manifest();
  if (snapshot.source_kind != "pdf") throw Error(ErrorCode::kInvalidArgument, "not a PDF workspace");
  const auto pages = read_pdf_pages(read_file(snapshot.source), snapshot.dpi);
  {
    std::lock_guard g(state_->manifest_mu);
    auto& list = state_->manifest.pages;
    while (list.size() < pages.size()) {
      PageEntry p;
      p.page_id = static_cast<int>(list.size()) + 1;
      list.push_back(p);
    }
  }
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    std::unique_lock lock(state_->lock_for(id));
    const PageEntry before = entry(id);
    if (before.status == "ok" && fs::exists(state_->root / before.raw_image)) {
      ++ok;
      continue;
    }
    std::lock_guard g(state_->manifest_mu);
    PageEntry& p = state_->entry_locked(id);
    if (!pages[i].image) {
      p.status = "failed";
      p.error = pages[i].error;
      continue;
    }
    const std::string rel = page_dir(id) + "/raw.png";
    const auto png = encode_png(*pages[i].image);
    write_file_atomic(state_->root / rel, {reinterpret_cast<const char*>(png.data()), png.size()});
    p.raw_image = rel;
    p.status = "ok";
    p.error.clear();
    p.width = pages[i].image->width();
    p.height = pages[i].image->height();
    ++ok;
  }
  std::lock_guard g(state_->manifest_mu);
  state_->save_locked();
  return ok;
}

std::uint64_t Workspace::store_artifact(int page_id, std::string_view kind, std::string_view payload,
                                        std::optional<std::uint64_t> expected_version) {
  return store_artifacts(page_id, {{std::string(kind), std::string(payload)}}, expected_version);
}

std::uint64_t Workspace::store_artifacts(int page_id,
                                         const std::vector<std::pair<std::string, std::string>>& items,
                                         std::optional<std::uint64_t> expected_version) {
  std::vector<std::string> paths;
  for (const auto& [kind, payload] : items) paths.push_back(artifact_path(page_id, kind));
  (void)entry(page_id);
  std::unique_lock lock(state_->lock_for(page_id));
  if (expected_version) {
    const std::uint64_t current = entry(page_id).version;
    if (current != *expected_version) {
      throw Error(ErrorCode::kConflict,
                  fmt::format("page {} is at version {}, not {}", page_id, current, *expected_version));
    }
  }
  std::uint64_t version = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    write_file_atomic(state_->root / paths[i], items[i].second);
    std::lock_guard g(state_->manifest_mu);
    PageEntry& p = state_->entry_locked(page_id);
    version = ++p.version;
    p.artifacts[items[i].first] = {paths[i], version};
    state_->save_locked();
  }
  return version;
}

std::pair<std::string, std::uint64_t> Workspace::load_artifact(int page_id, std::string_view kind) const {
  const std::string path = artifact_path(page_id, kind);
  std::shared_lock lock(state_->lock_for(page_id));
  std::uint64_t version = 0;
  {
    std::lock_guard g(state_->manifest_mu);
    PageEntry& p = const_cast<State&>(*state_).entry_locked(page_id);
    auto it = p.artifacts.find(std::string(kind));
    if (it == p.artifacts.end()) {
      throw Error(ErrorCode::kNotYetProduced, fmt::format("page {}: {} not yet produced", page_id, kind));
    }
    version = it->second.version;
  }
  return {read_file(state_->root / path), version};
}

bool Workspace::has_artifact(int page_id, std::string_view kind) const {
  const PageEntry p = entry(page_id);
  return p.artifacts.count(std::string(kind)) > 0;
}

Raster Workspace::raw_image(int page_id) const {
  const PageEntry p = entry(page_id);
  if (p.raw_image.empty()) {
    throw Error(ErrorCode::kNotYetProduced, fmt::format("page {}: raw image not yet produced", page_id));
  }
  std::shared_lock lock(state_->lock_for(page_id));
  return read_image(state_->root / p.raw_image);
}

void Workspace::set_transform(int page_id, const Affine& transform) {
  std::unique_lock lock(state_->lock_for(page_id));
  std::lock_guard g(state_->manifest_mu);
  state_->entry_locked(page_id).transform = transform;
  state_->save_locked();
}

std::uint64_t Workspace::set_reviewed(int page_id, bool reviewed) {
  std::unique_lock lock(state_->lock_for(page_id));
  std::lock_guard g(state_->manifest_mu);
  PageEntry& p = state_->entry_locked(page_id);
  p.reviewed = reviewed;
  state_->save_locked();
  return p.version;
}

void Workspace::set_config(const std::map<std::string, std::string>& config) {
  std::lock_guard g(state_->manifest_mu);
  state_->manifest.config = config;
  state_->save_locked();
}

void Workspace::append_audit(int page_id, std::string_view line) {
  (void)entry(page_id);
  std::unique_lock lock(state_->lock_for(page_id));
  const fs::path path = state_->root / page_dir(page_id) / "audit.log";
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
  out << line << '\n';
}

std::vector<std::string> Workspace::read_audit(int page_id) const {
  (void)entry(page_id);
  std::shared_lock lock(state_->lock_for(page_id));
  std::vector<std::string> lines;
  std::ifstream in(state_->root / page_dir(page_id) / "audit.log");
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace ledgerscan
