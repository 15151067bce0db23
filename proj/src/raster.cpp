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

#include "ledgerscan/raster.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ledgerscan/error.hpp"

namespace ledgerscan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kNotYetProduced: return "not yet produced";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kUnavailable: return "unavailable";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kConfig: return "invalid configuration";
    case ErrorCode::kRefused: return "refused";
  }
  return "unknown";
}

Raster::Raster(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::kInvalidArgument, "raster: bad dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Raster::Raster(int width, int height, int channels,
               std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels),
      data_(std::move(data)) {
  if (width < 0 || height < 0 || (channels != 1 && channels != 3) ||
      data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::kInvalidArgument,
                "raster: data length does not match width*height*channels");
  }
}

bool Raster::is_binary() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](std::uint8_t v) { return v == 0 || v == 255; });
}

namespace {

cv::Mat to_mat(const Raster& img) {
  if (img.channels() == 1) {
    cv::Mat m(img.height(), img.width(), CV_8UC1);
    std::copy(img.data().begin(), img.data().end(), m.data);
    return m;
  }
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  // OpenCV stores BGR.
  auto src = img.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    m.data[3 * i + 0] = src[3 * i + 2];
    m.data[3 * i + 1] = src[3 * i + 1];
    m.data[3 * i + 2] = src[3 * i + 0];
  }
  return m;
}

Raster from_mat(const cv::Mat& m) {
  if (m.depth() != CV_8U) {
    throw Error(ErrorCode::kParse, "image: only 8-bit images are supported");
  }
  const int w = m.cols, h = m.rows;
  if (m.channels() <= 2) {
    // Gray, or gray+alpha where alpha is dropped.
    Raster out(w, h, 1);
    const int step = m.channels();
    for (int y = 0; y < h; ++y) {
      const std::uint8_t* p = m.ptr<std::uint8_t>(y);
      auto r = out.row(y);
      for (int x = 0; x < w; ++x) r[x] = p[step * x];
    }
    return out;
  }
  Raster out(w, h, 3);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* p = m.ptr<std::uint8_t>(y);
    auto r = out.row(y);
    const int step = m.channels();
    for (int x = 0; x < w; ++x) {
      r[3 * x + 0] = p[step * x + 2];
      r[3 * x + 1] = p[step * x + 1];
      r[3 * x + 2] = p[step * x + 0];
    }
  }
  return out;
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::kParse, "image: empty payload");
  std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
  cv::Mat m = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw Error(ErrorCode::kParse, "image: cannot decode payload");
  return from_mat(m);
}

std::vector<std::uint8_t> encode_png(const Raster& img) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_mat(img), out)) {
    throw Error(ErrorCode::kIo, "image: PNG encoding failed");
  }
  return out;
}

Raster read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "image not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

void write_png(const Raster& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ledgerscan
