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

// Consensus over several engines' readings of the same page: spatial word
// matching, then token and right-aligned character voting.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ledgerscan/ocr.hpp"

namespace ledgerscan::ensemble {

struct Member {
  std::string engine;
  ocr::OcrWord word;
};

struct WordCluster {
  std::vector<Member> members;  // seed first
  Box consensus_bbox;
};

enum class Weights { kUniform, kConfidence };
enum class VoteMethod { kUnanimous, kTokenMajority, kCharVote, kTokenFallback };

std::string_view to_string(VoteMethod m);
std::string_view to_string(Weights w);
std::optional<Weights> parse_weights(std::string_view name);

struct VoteResult {
  std::string text;
  double confidence = 0.0;
  VoteMethod method = VoteMethod::kUnanimous;
  std::map<std::string, bool> supporters;  // engine -> member text == result
  bool low_confidence = false;
};

/// Greedy matching seeded by the most confident unmatched word. Each other
/// engine contributes its unmatched word of highest IoU with the seed, if
/// that IoU reaches iou_min. Pages must share a page size.
std::vector<WordCluster> cluster_words(const std::vector<ocr::OcrPage>& pages,
                                       double iou_min = 0.3);

/// Strict token plurality (by member count) wins outright. Otherwise the
/// strings are right-aligned and each column takes the weighted plurality
/// over characters and blank. Ties go to the larger summed confidence, then
/// to the alphabetically first engine. When member lengths differ by more
/// than max_length_spread the column vote is skipped in favour of a token
/// vote by summed weight, and the result is marked low-confidence.
VoteResult vote_word(const WordCluster& cluster, Weights weights = Weights::kUniform,
                     std::size_t max_length_spread = 2);

struct Config {
  double iou_min = 0.3;
  Weights weights = Weights::kUniform;
  std::size_t max_length_spread = 2;
};

/// Consensus page named "ensemble". Word confidences are the vote shares;
/// line/paragraph/block ids are re-synthesized from the consensus boxes.
ocr::OcrPage ensemble_pages(const std::vector<ocr::OcrPage>& pages, const Config& config = {});

}  // namespace ledgerscan::ensemble
