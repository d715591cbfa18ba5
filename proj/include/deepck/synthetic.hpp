#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "deepck/core_types.hpp"
#include "deepck/nn/layers.hpp"

namespace deepck {

/// Synthetic triple classification task with a planted lexical signal.
///
/// Every triple gets a unique two-syllable head and tail ("ban dok", "sil tup").
/// Each term appears in `sentences_per_term` corpus lines of the form
///   "<filler> <term> <filler> <cue> <filler>"
/// where the cue word comes from the positive list for valid triples and from the
/// negative list otherwise; with probability `noise` a sentence carries a cue from the
/// wrong list. Relations are drawn uniformly from a fixed list and carry no signal.
struct SyntheticConfig {
  std::size_t num_triples = 2500;
  std::size_t sentences_per_term = 3;
  double noise = 0.05;
  double positive_rate = 0.5;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  std::vector<LabeledTriple> triples;
  std::vector<std::string> sentences;  // one per corpus line, shuffled
};

inline const std::vector<std::string>& synthetic_positive_cues() {
  static const std::vector<std::string> v{"gladly", "surely", "truly", "rightly"};
  return v;
}

inline const std::vector<std::string>& synthetic_negative_cues() {
  static const std::vector<std::string> v{"never", "hardly", "barely", "rarely"};
  return v;
}

inline SyntheticData make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.num_triples == 0) throw InvalidArgument("synthetic set needs at least one triple");
  if (cfg.sentences_per_term == 0) throw InvalidArgument("sentences_per_term must be >= 1");
  if (cfg.noise < 0.0 || cfg.noise > 1.0 || cfg.positive_rate < 0.0 || cfg.positive_rate > 1.0)
    throw InvalidArgument("noise and positive_rate must lie in [0, 1]");

  static const std::string consonants = "bdfgkmnprstvz";
  static const std::string vowels = "aeiou";
  auto syllables = [&](char coda) {
    std::vector<std::string> out;
    for (char c : consonants)
      for (char v : vowels) out.push_back(std::string{c, v, coda});
    return out;
  };
  const auto head_syl = syllables('n'), tail_syl = syllables('l');
  const std::size_t space = head_syl.size() * head_syl.size();
  if (cfg.num_triples > space) throw InvalidArgument("synthetic set supports at most " + std::to_string(space) + " triples");

  static const std::vector<std::string> relations{"AtLocation", "CapableOf", "UsedFor", "HasProperty", "PartOf"};
  static const std::vector<std::string> fillers{"the", "a", "some", "often", "seen", "with", "near", "by",
                                                "old", "small", "many", "here"};

  nn::Rng rng(cfg.seed);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.index(v.size())]; };
  auto names = [&](const std::vector<std::string>& syl) {
    std::vector<std::size_t> idx(space);
    for (std::size_t i = 0; i < space; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < cfg.num_triples; ++i)
      out.push_back(syl[idx[i] / syl.size()] + ' ' + syl[idx[i] % syl.size()]);
    return out;
  };
  const auto heads = names(head_syl);
  const auto tails = names(tail_syl);

  SyntheticData data;
  auto emit = [&](const std::string& term, int label) {
    for (std::size_t s = 0; s < cfg.sentences_per_term; ++s) {
      const bool flip = rng.uniform() < cfg.noise;
      const bool positive = (label == 1) != flip;
      const auto& cue = pick(positive ? synthetic_positive_cues() : synthetic_negative_cues());
      data.sentences.push_back(pick(fillers) + ' ' + term + ' ' + pick(fillers) + ' ' + cue + ' ' + pick(fillers) + '.');
    }
  };
  for (std::size_t i = 0; i < cfg.num_triples; ++i) {
    const int label = rng.uniform() < cfg.positive_rate ? 1 : 0;
    data.triples.push_back(LabeledTriple::make(heads[i], pick(relations), tails[i], label));
    emit(heads[i], label);
    emit(tails[i], label);
  }
  std::shuffle(data.sentences.begin(), data.sentences.end(), rng.engine());
  return data;
}

}  // namespace deepck
