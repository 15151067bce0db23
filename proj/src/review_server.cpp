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

#include <fmt/core.h>

#include "httplib.h"
#include "json.hpp"
#include "ledgerscan/review.hpp"

namespace ledgerscan::review {

namespace {

constexpr const char* kIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>ledgerscan review</title></head>
<body><p>The review UI is not installed. The API lives under <code>/api/pages</code>.</p></body></html>
)";

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kNotYetProduced: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kRefused: return 422;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, const Error& e, std::optional<std::uint64_t> version = std::nullopt) {
  nlohmann::ordered_json j;
  j["error"] = std::string(to_string(e.code()));
  j["message"] = e.what();
  if (version) j["current_version"] = *version;
  send_json(res, status_for(e.code()), j.dump());
}

}  // namespace

struct ReviewServer::Impl {
  ReviewService& service;
  httplib::Server server;
  int port = -1;

  explicit Impl(ReviewService& s) : service(s) {}

  /// Runs `body` for a page route, mapping errors and stamping the version.
  template <typename F>
  void page_route(const httplib::Request& req, httplib::Response& res, F&& body) {
    int id = 0;
    try {
      id = std::stoi(req.matches[1]);
    } catch (const std::exception&) {
      send_error(res, Error(ErrorCode::kNotFound, "no such page"));
      return;
    }
    std::optional<std::uint64_t> version;
    try {
      version = service.page_version(id);
    } catch (const Error& e) {
      send_error(res, e);
      return;
    }
    try {
      body(id);
      version = service.page_version(id);
    } catch (const PromotionRefused& e) {
      nlohmann::ordered_json j;
      j["error"] = "refused";
      j["message"] = e.what();
      j["flags"] = nlohmann::json::parse(extract::flags_to_json(e.flags()));
      send_json(res, 422, j.dump());
    } catch (const Error& e) {
      version = service.page_version(id);
      send_error(res, e, e.code() == ErrorCode::kConflict ? version : std::nullopt);
    } catch (const std::exception& e) {
      send_error(res, Error(ErrorCode::kIo, e.what()));
    }
    res.set_header("X-Page-Version", std::to_string(*version));
  }
};

ReviewServer::ReviewServer(ReviewService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  Impl* self = impl_.get();

  srv.Get("/api/pages", [self](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.has_param("filter") ? req.get_param_value("filter") : "all";
    const auto filter = parse_filter(name);
    if (!filter) {
      send_error(res, Error(ErrorCode::kInvalidArgument, "filter must be all, flagged, red_only or unreviewed"));
      return;
    }
    send_json(res, 200, summaries_to_json(self->service.list_pages(*filter)));
  });
  srv.Get(R"(/api/pages/(\d+))", [self](const httplib::Request& req, httplib::Response& res) {
    self->page_route(req, res, [&](int id) { send_json(res, 200, bundle_to_json(self->service.get_bundle(id))); });
  });
  srv.Get(R"(/api/pages/(\d+)/image)", [self](const httplib::Request& req, httplib::Response& res) {
    self->page_route(req, res, [&](int id) {
      const std::string which = req.has_param("version") ? req.get_param_value("version") : "raw";
      std::string png;
      if (which == "raw") {
        const auto bytes = encode_png(self->service.workspace().raw_image(id));
        png.assign(bytes.begin(), bytes.end());
      } else if (which == "processed") {
        png = self->service.workspace().load_artifact(id, "processed").first;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "version must be raw or processed");
      }
      res.status = 200;
      res.set_content(png, "image/png");
    });
  });
  srv.Put(R"(/api/pages/(\d+)/records)", [self](const httplib::Request& req, httplib::Response& res) {
    self->page_route(req, res, [&](int id) {
      const auto bundle = self->service.apply_corrections(id, corrections_from_json(req.body));
      send_json(res, 200, bundle_to_json(bundle));
    });
  });
  srv.Post(R"(/api/pages/(\d+)/truth)", [self](const httplib::Request& req, httplib::Response& res) {
    self->page_route(req, res, [&](int id) {
      std::string reviewer;
      if (!req.body.empty()) {
        const auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kInvalidArgument, "body must be a JSON object");
        reviewer = j.value("reviewer", "");
      }
      const auto version = self->service.promote(id, reviewer);
      send_json(res, 200, nlohmann::ordered_json{{"page_id", id}, {"truth_version", version}}.dump());
    });
  });

  if (static_dir && std::filesystem::is_directory(*static_dir)) {
    srv.set_mount_point("/", static_dir->string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kIndex, "text/html"); });
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  impl_->port = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (impl_->port < 0) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
  return impl_->port;
}

void ReviewServer::serve() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace ledgerscan::review
