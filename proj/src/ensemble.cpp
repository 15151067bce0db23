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

#include "ledgerscan/ensemble.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/core.h>

#include "ledgerscan/error.hpp"

namespace ledgerscan::ensemble {

namespace {

struct Ref {
  std::size_t page;
  std::size_t word;
};

double weight_of(const Member& m, Weights w) {
  return w == Weights::kUniform ? 1.0 : m.word.confidence;
}

// Ordering for "better" candidates under the shared tie-break rule.
struct Tally {
  double weight = 0;
  double conf = 0;
  std::string first_engine;  // alphabetically smallest supporter
};

bool beats(const Tally& a, const Tally& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  if (a.conf != b.conf) return a.conf > b.conf;
  return a.first_engine < b.first_engine;
}

void add_to(Tally& t, const Member& m, double w) {
  t.weight += w;
  t.conf += m.word.confidence;
  if (t.first_engine.empty() || m.engine < t.first_engine) t.first_engine = m.engine;
}

}  // namespace

std::string_view to_string(VoteMethod m) {
  switch (m) {
    case VoteMethod::kUnanimous: return "unanimous";
    case VoteMethod::kTokenMajority: return "token_majority";
    case VoteMethod::kCharVote: return "char_vote";
    case VoteMethod::kTokenFallback: return "token_fallback";
  }
  return "?";
}

std::string_view to_string(Weights w) {
  return w == Weights::kUniform ? "uniform" : "confidence";
}

std::optional<Weights> parse_weights(std::string_view name) {
  if (name == "uniform") return Weights::kUniform;
  if (name == "confidence") return Weights::kConfidence;
  return std::nullopt;
}

std::vector<WordCluster> cluster_words(const std::vector<ocr::OcrPage>& pages, double iou_min) {
  if (pages.empty()) return {};
  for (const auto& p : pages) {
    if (p.width != pages[0].width || p.height != pages[0].height) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("page size mismatch: {} is {}x{}, {} is {}x{}", pages[0].engine,
                              pages[0].width, pages[0].height, p.engine, p.width, p.height));
    }
  }
  std::vector<Ref> order;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    for (std::size_t w = 0; w < pages[p].words.size(); ++w) order.push_back({p, w});
  }
  auto word = [&](const Ref& r) -> const ocr::OcrWord& { return pages[r.page].words[r.word]; };
  std::stable_sort(order.begin(), order.end(), [&](const Ref& a, const Ref& b) {
    const double ca = word(a).confidence, cb = word(b).confidence;
    if (ca != cb) return ca > cb;
    return std::tie(pages[a.page].engine, a.page, a.word) <
           std::tie(pages[b.page].engine, b.page, b.word);
  });
  std::vector<std::vector<bool>> used(pages.size());
  for (std::size_t p = 0; p < pages.size(); ++p) used[p].assign(pages[p].words.size(), false);

  std::vector<WordCluster> clusters;
  for (const Ref& seed : order) {
    if (used[seed.page][seed.word]) continue;
    used[seed.page][seed.word] = true;
    WordCluster c;
    c.members.push_back({pages[seed.page].engine, word(seed)});
    c.consensus_bbox = word(seed).bbox;
    for (std::size_t p = 0; p < pages.size(); ++p) {
      if (p == seed.page) continue;
      std::optional<std::size_t> best;
      double best_iou = iou_min;
      for (std::size_t w = 0; w < pages[p].words.size(); ++w) {
        if (used[p][w]) continue;
        const double v = iou(word(seed).bbox, pages[p].words[w].bbox);
        if (v < iou_min || v <= 0.0) continue;
        if (!best || v > best_iou ||
            (v == best_iou && pages[p].words[w].confidence > pages[p].words[*best].confidence)) {
          best = w;
          best_iou = v;
        }
      }
      if (best) {
        used[p][*best] = true;
        c.members.push_back({pages[p].engine, pages[p].words[*best]});
        c.consensus_bbox = unite(c.consensus_bbox, pages[p].words[*best].bbox);
      }
    }
    clusters.push_back(std::move(c));
  }
  return clusters;
}

VoteResult vote_word(const WordCluster& cluster, Weights weights, std::size_t max_length_spread) {
  VoteResult r;
  const auto& ms = cluster.members;
  if (ms.empty()) return r;
  double total_weight = 0;
  for (const auto& m : ms) total_weight += weight_of(m, weights);
  auto share = [&](double w) { return total_weight > 0 ? w / total_weight : 0.0; };
  auto finish = [&](std::string text, double conf, VoteMethod method) {
    r.text = std::move(text);
    r.confidence = std::clamp(conf, 0.0, 1.0);
    r.method = method;
    for (const auto& m : ms) r.supporters[m.engine] = m.word.text == r.text;
    return r;
  };

  // Token level: vote counts decide, weights only enter the tie-break.
  std::map<std::string, std::pair<int, Tally>> tokens;
  for (const auto& m : ms) {
    auto& [count, tally] = tokens[m.word.text];
    ++count;
    add_to(tally, m, weight_of(m, weights));
  }
  if (tokens.size() == 1) {
    return finish(ms[0].word.text, 1.0, VoteMethod::kUnanimous);
  }
  std::vector<std::pair<std::string, std::pair<int, Tally>>> ranked(tokens.begin(), tokens.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return beats(a.second.second, b.second.second);
  });
  if (ranked[0].second.first > ranked[1].second.first) {
    return finish(ranked[0].first, share(ranked[0].second.second.weight),
                  VoteMethod::kTokenMajority);
  }

  std::size_t lo = ms[0].word.text.size(), hi = lo;
  for (const auto& m : ms) {
    lo = std::min(lo, m.word.text.size());
    hi = std::max(hi, m.word.text.size());
  }
  if (hi - lo > max_length_spread) {
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return beats(a.second.second, b.second.second);
    });
    r.low_confidence = true;
    return finish(ranked[0].first, share(ranked[0].second.second.weight),
                  VoteMethod::kTokenFallback);
  }

  // Right-aligned column vote; '\0' stands for the blank pad.
  std::string out;
  double min_share = 1.0;
  for (std::size_t col = 0; col < hi; ++col) {  // col counts from the right
    std::map<char, Tally> votes;
    for (const auto& m : ms) {
      const auto& t = m.word.text;
      const char c = col < t.size() ? t[t.size() - 1 - col] : '\0';
      add_to(votes[c], m, weight_of(m, weights));
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (beats(it->second, best->second)) best = it;
    }
    min_share = std::min(min_share, share(best->second.weight));
    if (best->first != '\0') out.push_back(best->first);
  }
  std::reverse(out.begin(), out.end());
  return finish(std::move(out), min_share, VoteMethod::kCharVote);
}

ocr::OcrPage ensemble_pages(const std::vector<ocr::OcrPage>& pages, const Config& config) {
  if (pages.empty()) throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least one page");
  ocr::OcrPage out;
  out.engine = "ensemble";
  out.width = pages[0].width;
  out.height = pages[0].height;
  for (const auto& cluster : cluster_words(pages, config.iou_min)) {
    const VoteResult v = vote_word(cluster, config.weights, config.max_length_spread);
    if (v.text.empty()) continue;
    ocr::OcrWord w;
    w.text = v.text;
    w.bbox = cluster.consensus_bbox;
    w.confidence = v.confidence;
    out.words.push_back(std::move(w));
  }
  ocr::synthesize_lines(out);
  ocr::synthesize_paragraphs(out);
  // Stable reading order makes the serialization independent of the
  // confidence-driven clustering order.
  const auto order = ocr::reading_order(out);
  std::vector<ocr::OcrWord> sorted;
  sorted.reserve(order.size());
  for (auto i : order) sorted.push_back(out.words[i]);
  out.words = std::move(sorted);
  return out;
}

}  // namespace ledgerscan::ensemble
