#pragma once

#include <cstddef>
#include <vector>

#include "deepck/classifier.hpp"
#include "deepck/corpus.hpp"
#include "deepck/eval.hpp"
#include "deepck/stopwords.hpp"
#include "deepck/synthetic.hpp"

namespace deepck {

/// Synthetic task split into train and held-out examples with evidence already retrieved.
struct SyntheticSplit {
  Corpus corpus;
  lm::Vocabulary vocab;
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> heldout;
};

inline SyntheticSplit prepare_synthetic(const SyntheticConfig& cfg, std::size_t train_count, std::size_t k,
                                        const StopWords& stopwords = default_stopwords()) {
  auto data = make_synthetic(cfg);
  if (train_count >= data.triples.size()) throw InvalidArgument("train_count must leave held-out triples");
  SyntheticSplit out{Corpus::from_sentences(data.sentences), {}, {}, {}};
  auto texts = data.sentences;
  for (const auto& t : data.triples) texts.push_back(rephrase_relation(t.relation).phrase);
  out.vocab = nn::build_vocabulary(texts);
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    const auto& t = data.triples[i];
    TrainingExample ex{select_evidence(t, out.corpus, k, stopwords), *t.label};
    (i < train_count ? out.train : out.heldout).push_back(std::move(ex));
  }
  return out;
}

/// Small classifier shape used for the synthetic experiments.
inline ClassifierConfig small_classifier_config() {
  ClassifierConfig c;
  c.encoder_layers = 2;
  c.encoder_heads = 4;
  c.hidden_dim = 64;
  c.ffn_dim = 128;
  c.pool_heads = 4;
  c.k = 3;
  c.learning_rate = 1e-3;
  c.train_steps = 600;
  c.batch_size = 8;
  c.max_positions = 64;
  c.seed = 0;
  return c;
}

inline std::vector<int> predict_labels(const ContextClassifier& model, const std::vector<TrainingExample>& examples,
                                       const Corpus& corpus, Strategy strategy, std::size_t k) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(model.predict(ex.evidence, corpus, strategy, k).label);
  return out;
}

inline std::vector<int> gold_labels(const std::vector<TrainingExample>& examples) {
  std::vector<int> out;
  for (const auto& ex : examples) out.push_back(ex.label);
  return out;
}

}  // namespace deepck
