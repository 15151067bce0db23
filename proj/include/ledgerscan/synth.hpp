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

#pragma once

// Deterministic synthetic balance-sheet corpus: rendered page images with
// ruled tables, per-engine recorded OCR payloads and the records they hold.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ledgerscan/ocr.hpp"
#include "ledgerscan/raster.hpp"

namespace ledgerscan::synth {

struct CorpusOptions {
  int pages = 10;
  int width = 1200;
  int height = 1600;
  int year = 1900;
  std::uint64_t seed = 1900;
  std::vector<std::string> engines = {"google", "microsoft", "tesseract"};
  /// Per-character confusion probability of each recorded engine.
  double substitution = 0.02;
  int jitter = 2;  // max bbox displacement per engine, px
};

struct TruthRow {
  std::string label;  // canonical label, empty for the bank header
  std::string value;  // as printed, empty when the row has none
};

struct SynthPage {
  int index = 0;  // 1-based
  std::string stem;
  Raster image;
  std::vector<ocr::TruthWord> words;
  std::vector<TruthRow> rows;
  std::map<std::string, std::string> native;  // engine -> payload
  std::string truth_csv;
};

std::vector<SynthPage> make_corpus(const CorpusOptions& options = {});

std::string vocabulary_tsv();
std::string abbreviations_tsv();
std::string rules_txt();
/// Pipeline configuration for the corpus; file paths are relative to it.
std::string pipeline_conf(const CorpusOptions& options = {});

/// Writes images with their sidecars (<stem>.<engine>.native,
/// <stem>.truth.json, <stem>.truth.csv) plus vocabulary.tsv,
/// abbreviations.tsv, rules.txt and pipeline.conf.
void write_corpus(const std::filesystem::path& dir, const CorpusOptions& options = {});

}  // namespace ledgerscan::synth
