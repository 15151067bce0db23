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

// Writes small PDFs with one image per page for workspace tests.

#pragma once

#include <string>
#include <vector>

#include <fmt/core.h>
#include <zlib.h>

#include "ledgerscan/raster.hpp"

namespace fixture {

enum class PdfImageEncoding { kFlate, kRaw, kPng, kCorruptFlate };

struct PdfPageSpec {
  ledgerscan::Raster image;
  double width_pt = 0, height_pt = 0;  // MediaBox; 0 = image size at 72 dpi
  PdfImageEncoding encoding = PdfImageEncoding::kFlate;
};

inline std::string make_pdf(const std::vector<PdfPageSpec>& pages) {
  std::string out = "%PDF-1.4\n%\xe2\xe3\xcf\xd3\n";
  std::vector<std::size_t> offsets;
  auto begin_obj = [&](int id) {
    if (static_cast<int>(offsets.size()) < id) offsets.resize(id);
    offsets[id - 1] = out.size();
    out += fmt::format("{} 0 obj\n", id);
  };
  const int n = static_cast<int>(pages.size());
  // 1 catalog, 2 page tree, then per page: page, image, content.
  begin_obj(1);
  out += "<< /Type /Catalog /Pages 2 0 R >>\nendobj\n";
  begin_obj(2);
  std::string kids;
  for (int i = 0; i < n; ++i) kids += fmt::format("{} 0 R ", 3 + 3 * i);
  out += fmt::format("<< /Type /Pages /Count {} /Kids [ {}] >>\nendobj\n", n, kids);
  for (int i = 0; i < n; ++i) {
    const auto& spec = pages[i];
    const auto& img = spec.image;
    const int page_id = 3 + 3 * i, image_id = page_id + 1, content_id = page_id + 2;
    const double w = spec.width_pt > 0 ? spec.width_pt : img.width();
    const double h = spec.height_pt > 0 ? spec.height_pt : img.height();
    begin_obj(page_id);
    out += fmt::format(
        "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {} {}] /Resources << /XObject << /Im0 {} 0 R >> >> "
        "/Contents {} 0 R >>\nendobj\n",
        w, h, image_id, content_id);
    std::string data(reinterpret_cast<const char*>(img.data().data()), img.data().size());
    std::string filter;
    if (spec.encoding == PdfImageEncoding::kFlate || spec.encoding == PdfImageEncoding::kCorruptFlate) {
      uLongf len = compressBound(static_cast<uLong>(data.size()));
      std::string z(len, '\0');
      compress(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(data.data()),
               static_cast<uLong>(data.size()));
      z.resize(len);
      if (spec.encoding == PdfImageEncoding::kCorruptFlate) {
        for (std::size_t k = 2; k < z.size(); k += 3) z[k] = static_cast<char>(z[k] ^ 0x5a);
      }
      data = z;
      filter = "/Filter /FlateDecode ";
    } else if (spec.encoding == PdfImageEncoding::kPng) {
      const auto png = ledgerscan::encode_png(img);
      data.assign(png.begin(), png.end());
      filter = "/Filter /PNGDecode ";  // deliberately unsupported
    }
    begin_obj(image_id);
    out += fmt::format(
        "<< /Type /XObject /Subtype /Image /Width {} /Height {} /ColorSpace /{} /BitsPerComponent 8 {}"
        "/Length {} >>\nstream\n",
        img.width(), img.height(), img.channels() == 3 ? "DeviceRGB" : "DeviceGray", filter, data.size());
    out += data;
    out += "\nendstream\nendobj\n";
    const std::string content = fmt::format("q {} 0 0 {} 0 0 cm /Im0 Do Q", w, h);
    begin_obj(content_id);
    out += fmt::format("<< /Length {} >>\nstream\n{}\nendstream\nendobj\n", content.size(), content);
  }
  const std::size_t xref = out.size();
  out += fmt::format("xref\n0 {}\n0000000000 65535 f \n", offsets.size() + 1);
  for (auto off : offsets) out += fmt::format("{:010d} 00000 n \n", off);
  out += fmt::format("trailer\n<< /Size {} /Root 1 0 R >>\nstartxref\n{}\n%%EOF\n", offsets.size() + 1, xref);
  return out;
}

}  // namespace fixture
