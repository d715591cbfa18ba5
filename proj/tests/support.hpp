#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "deepck/lm/bigram.hpp"

namespace testsupport {

using deepck::lm::BigramBackend;
using deepck::lm::TokenId;
using deepck::lm::Vocabulary;

/// Bigram model whose rows are integer weights, so the oracle can rank and multiply
/// exact values without going through the backend. Row 0 is sequence start, row i+1
/// follows token i. Ids: words in order, then <unk>, then the end-of-term token.
struct WeightedBigram {
  std::vector<std::string> words;
  std::vector<std::vector<int>> weights;
  BigramBackend backend;

  std::size_t vocab_size() const { return words.size() + 2; }

  double prob(std::optional<TokenId> prev, TokenId next) const {
    const auto& row = weights[prev ? static_cast<std::size_t>(*prev) + 1 : 0];
    double total = 0;
    for (int w : row) total += w;
    return row[static_cast<std::size_t>(next)] / total;
  }
};

inline std::vector<std::string> make_words(std::size_t n, const std::string& stem = "t") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

inline WeightedBigram random_bigram(std::size_t num_words, std::mt19937_64& gen, int max_weight = 6,
                                   int min_weight = 0) {
  auto words = make_words(num_words);
  WeightedBigram wb{words, {}, BigramBackend(Vocabulary(words))};
  const std::size_t v = wb.vocab_size();
  std::uniform_int_distribution<int> w(min_weight, max_weight);
  for (std::size_t r = 0; r <= v; ++r) {
    std::vector<int> row(v);
    int sum = 0;
    for (auto& x : row) sum += (x = w(gen));
    if (sum == 0) row[r % v] = 1;
    double total = 0;
    for (int x : row) total += x;
    std::map<TokenId, double> probs;
    for (std::size_t j = 0; j < v; ++j) probs[static_cast<TokenId>(j)] = row[j] / total;
    std::optional<TokenId> prev;
    if (r > 0) prev = static_cast<TokenId>(r - 1);
    wb.backend.set_row_probabilities(prev, probs);
    wb.weights.push_back(std::move(row));
  }
  return wb;
}

/// Backend that puts probability 1 on each next word of `sentence` (every word must be
/// distinct so the rows do not clash).
inline BigramBackend deterministic_backend(const std::vector<std::string>& sentence,
                                           const std::vector<std::string>& extra_words = {}) {
  std::vector<std::string> words = sentence;
  for (const auto& w : extra_words)
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  BigramBackend b{Vocabulary(words)};
  const auto& v = b.vocabulary();
  std::optional<TokenId> prev;
  for (const auto& w : sentence) {
    b.set_row_probabilities(prev, {{v.id(w), 1.0}});
    prev = v.id(w);
  }
  b.set_row_probabilities(prev, {{*b.descriptor().end_of_term, 1.0}});
  return b;
}

}  // namespace testsupport
