#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "deepck/corpus.hpp"
#include "deepck/ensemble.hpp"
#include "deepck/nn/encoder.hpp"

namespace deepck {

struct ClassifierConfig {
  std::size_t encoder_layers = 24;
  std::size_t encoder_heads = 16;
  std::size_t hidden_dim = 1024;
  std::size_t pool_heads = 8;
  std::size_t k = 3;
  double learning_rate = 1e-5;
  std::size_t train_steps = 24000;
  std::uint64_t seed = 0;
  // Not fixed by the method itself; sized for the default architecture.
  std::size_t ffn_dim = 4096;
  std::size_t batch_size = 8;
  std::size_t max_positions = 512;
  double max_grad_norm = 0.0;

  void validate() const {
    if (k < 1) throw InvalidArgument("K must be >= 1");
    if (encoder_layers < 1 || encoder_heads < 1 || hidden_dim < 1 || pool_heads < 1 || ffn_dim < 1 ||
        batch_size < 1 || max_positions < 8)
      throw InvalidArgument("classifier dimensions must be positive");
    if (hidden_dim % pool_heads != 0) throw InvalidArgument("pool_heads must divide hidden_dim");
    if (hidden_dim % encoder_heads != 0) throw InvalidArgument("encoder_heads must divide hidden_dim");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  }

  nn::TransformerShape encoder_shape() const {
    return {encoder_layers, encoder_heads, hidden_dim, ffn_dim, max_positions};
  }
};

inline void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"encoder_layers", c.encoder_layers}, {"encoder_heads", c.encoder_heads},
                     {"hidden_dim", c.hidden_dim},         {"pool_heads", c.pool_heads},
                     {"k", c.k},                           {"learning_rate", c.learning_rate},
                     {"train_steps", c.train_steps},       {"seed", c.seed},
                     {"ffn_dim", c.ffn_dim},               {"batch_size", c.batch_size},
                     {"max_positions", c.max_positions},   {"max_grad_norm", c.max_grad_norm}};
}

inline void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  j.at("encoder_layers").get_to(c.encoder_layers);
  j.at("encoder_heads").get_to(c.encoder_heads);
  j.at("hidden_dim").get_to(c.hidden_dim);
  j.at("pool_heads").get_to(c.pool_heads);
  j.at("k").get_to(c.k);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("train_steps").get_to(c.train_steps);
  j.at("seed").get_to(c.seed);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_positions").get_to(c.max_positions);
  j.at("max_grad_norm").get_to(c.max_grad_norm);
}

/// <cls> s^h <sep> R <sep> s^t, with the spans that feed the pooling block.
struct AssembledInput {
  std::vector<lm::TokenId> ids;
  TokenSpan span_cls;
  TokenSpan span_head;
  TokenSpan span_relation;
  TokenSpan span_tail;

  std::size_t size() const { return ids.size(); }

  /// Token rows gathered into the pooled sequence, <cls> first.
  std::vector<Eigen::Index> pooled_rows() const {
    std::vector<Eigen::Index> rows;
    for (const auto* s : {&span_cls, &span_head, &span_relation, &span_tail})
      for (auto i = s->begin; i < s->end; ++i) rows.push_back(static_cast<Eigen::Index>(i));
    return rows;
  }
};

namespace detail {

/// First run of `term` among the word tokens of `seq` (compared lowercased);
/// punctuation tokens between words are skipped, mirroring corpus matching.
inline std::optional<TokenSpan> locate_term(const lm::TokenSequence& seq, std::string_view source,
                                            std::string_view term) {
  const auto needle = text::content_words(term);
  if (needle.empty()) return std::nullopt;
  std::vector<std::size_t> word_idx;
  std::vector<std::string> words;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto& o = seq.offsets[i];
    auto piece = source.substr(o.begin, o.end - o.begin);
    if (!piece.empty() && text::is_word_char(piece.front())) {
      word_idx.push_back(i);
      words.push_back(text::to_lower(piece));
    }
  }
  auto it = std::search(words.begin(), words.end(), needle.begin(), needle.end());
  if (it == words.end()) return std::nullopt;
  const auto first = static_cast<std::size_t>(it - words.begin());
  return TokenSpan{word_idx[first], word_idx[first + needle.size() - 1] + 1};
}

}  // namespace detail

/// Builds the classifier input for one evidence pair. Over-long inputs are trimmed from
/// the sentences' far ends (start of s^h, end of s^t) before their near ends, the longer
/// sentence first; term spans are never cut.
inline AssembledInput assemble_input(const EvidencePair& pair, const LabeledTriple& triple, const Corpus& corpus,
                                     const nn::EncoderBackend& encoder) {
  const auto hs = head_text(pair, corpus, triple);
  const auto ts = tail_text(pair, corpus, triple);
  const auto h_seq = encoder.tokenize(hs);
  const auto t_seq = encoder.tokenize(ts);
  const auto r_seq = encoder.tokenize(pair.relation_phrase.phrase);
  const auto h_span = detail::locate_term(h_seq, hs, triple.head);
  const auto t_span = detail::locate_term(t_seq, ts, triple.tail);
  if (!h_span) throw AssemblyError("head term '" + triple.head + "' not found in head sentence");
  if (!t_span) throw AssemblyError("tail term '" + triple.tail + "' not found in tail sentence");

  const std::size_t window = encoder.descriptor().context_window;
  const std::size_t fixed = 3 + r_seq.size();
  std::size_t hb = 0, he = h_seq.size(), tb = 0, te = t_seq.size();
  while (fixed + (he - hb) + (te - tb) > window) {
    auto trim_head = [&] {
      if (hb < h_span->begin) return ++hb, true;
      if (he > h_span->end) return --he, true;
      return false;
    };
    auto trim_tail = [&] {
      if (te > t_span->end) return --te, true;
      if (tb < t_span->begin) return ++tb, true;
      return false;
    };
    const bool head_first = (he - hb) >= (te - tb);
    const bool done = head_first ? (trim_head() || trim_tail()) : (trim_tail() || trim_head());
    if (!done) throw AssemblyError("term spans do not fit the encoder window");
  }

  AssembledInput in;
  in.ids.push_back(encoder.cls_id());
  in.span_cls = {0, 1};
  for (auto i = hb; i < he; ++i) in.ids.push_back(h_seq.ids[i]);
  in.span_head = {1 + h_span->begin - hb, 1 + h_span->end - hb};
  in.ids.push_back(encoder.sep_id());
  const std::size_t r0 = in.ids.size();
  in.ids.insert(in.ids.end(), r_seq.ids.begin(), r_seq.ids.end());
  in.span_relation = {r0, in.ids.size()};
  in.ids.push_back(encoder.sep_id());
  const std::size_t t0 = in.ids.size();
  for (auto i = tb; i < te; ++i) in.ids.push_back(t_seq.ids[i]);
  in.span_tail = {t0 + t_span->begin - tb, t0 + t_span->end - tb};
  return in;
}

/// Self-attention over the pooled token rows followed by a 2 x d_v projection of the
/// <cls> row and a softmax.
class PoolingHead {
 public:
  PoolingHead(std::size_t dim, std::size_t heads, nn::Rng& rng)
      : attention_(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(heads), rng),
        weight_(nn::leaf(nn::xavier(2, static_cast<Eigen::Index>(dim), rng))) {}

  /// `pooled` rows: <cls>, head, relation, tail tokens. Returns a 1 x 2 distribution.
  nn::Var forward(const nn::Var& pooled) const {
    auto h = attention_(pooled);
    auto cls = nn::gather_rows(h, {0});
    return nn::softmax_rows(nn::matmul(cls, nn::transpose(weight_)));
  }

  nn::ParamList parameters() const {
    nn::ParamList out;
    attention_.collect(out, "pool.attention");
    out.push_back({"pool.weight", weight_});
    return out;
  }

  nn::MultiHeadAttention& attention() { return attention_; }
  const nn::Var& weight() const { return weight_; }

 private:
  nn::MultiHeadAttention attention_;
  nn::Var weight_;  // 2 x d_v
};

inline nn::Var forward_graph(const AssembledInput& input, const nn::EncoderBackend& encoder,
                             const PoolingHead& head) {
  lm::require_encoding(encoder);
  auto e = encoder.encode_graph(input.ids);
  return head.forward(nn::gather_rows(e, input.pooled_rows()));
}

inline ProbPair forward(const AssembledInput& input, const nn::EncoderBackend& encoder, const PoolingHead& head) {
  const auto p = forward_graph(input, encoder, head)->value;
  return {p(0, 0), p(0, 1)};
}

struct TrainingExample {
  EvidenceSet evidence;
  int label = 0;
};

struct LossPoint {
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainReport {
  std::vector<LossPoint> loss_curve;
  std::size_t clamped_steps = 0;
};

/// Encoder plus pooling head.
class ContextClassifier {
 public:
  ContextClassifier(std::shared_ptr<nn::EncoderBackend> encoder, ClassifierConfig config)
      : encoder_(std::move(encoder)), config_(config) {
    config_.validate();
    lm::require_encoding(*encoder_);
    if (encoder_->descriptor().hidden_dim != config_.hidden_dim)
      throw InvalidArgument("encoder hidden size does not match classifier config");
    nn::Rng rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
    head_.emplace(config_.hidden_dim, config_.pool_heads, rng);
  }

  /// Fresh transformer encoder over `vocab`, shaped by `config`.
  static ContextClassifier create(const lm::Vocabulary& vocab, const ClassifierConfig& config) {
    config.validate();
    return ContextClassifier(std::make_shared<nn::TransformerEncoder>(vocab, config.encoder_shape(), config.seed),
                             config);
  }

  const nn::EncoderBackend& encoder() const { return *encoder_; }
  std::shared_ptr<nn::EncoderBackend> encoder_ptr() const { return encoder_; }
  const PoolingHead& head() const { return *head_; }
  PoolingHead& head() { return *head_; }
  const ClassifierConfig& config() const { return config_; }

  nn::ParamList parameters() const {
    auto out = encoder_->parameters();
    for (auto& p : out) p.name = "encoder." + p.name;
    auto h = head_->parameters();
    out.insert(out.end(), h.begin(), h.end());
    return out;
  }

  std::vector<AssembledInput> assemble(const EvidenceSet& ev, const Corpus& corpus) const {
    std::vector<AssembledInput> out;
    for (const auto& p : ev.pairs) out.push_back(assemble_input(p, ev.triple, corpus, *encoder_));
    return out;
  }

  /// Per-pair distributions over the first min(K, available) evidence pairs.
  std::vector<ProbPair> predict_pairs(const EvidenceSet& ev, const Corpus& corpus, std::size_t k = 0) const {
    if (k == 0) k = config_.k;
    std::vector<ProbPair> out;
    const auto n = std::min(k, ev.pairs.size());
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(forward(assemble_input(ev.pairs[i], ev.triple, corpus, *encoder_), *encoder_, *head_));
    return out;
  }

  PredictionBundle predict(const EvidenceSet& ev, const Corpus& corpus, Strategy strategy = Strategy::avg,
                           std::size_t k = 0) const {
    return ensemble(predict_pairs(ev, corpus, k), strategy);
  }

 private:
  std::shared_ptr<nn::EncoderBackend> encoder_;
  ClassifierConfig config_;
  std::optional<PoolingHead> head_;
};

/// Loss graph for one example: mean over its inputs of -log p[gold] (floored at 1e-12).
inline nn::Var example_loss(const std::vector<AssembledInput>& inputs, int gold, const nn::EncoderBackend& encoder,
                            const PoolingHead& head, bool* clamped = nullptr) {
  std::vector<nn::Var> terms;
  for (const auto& in : inputs) {
    auto p = forward_graph(in, encoder, head);
    if (clamped && !(p->value(0, gold) > kProbabilityFloor)) *clamped = true;
    terms.push_back(nn::log_at(p, 0, gold, kProbabilityFloor));
  }
  return nn::scale(nn::sum_scalars(terms), -1.0 / static_cast<double>(terms.size()));
}

namespace detail {

/// Minibatch Adam loop shared by the context model and the baseline. `loss_of(i)`
/// builds the loss graph of example i.
inline TrainReport run_training(const nn::ParamList& params, std::size_t n, const ClassifierConfig& config,
                                const std::function<nn::Var(std::size_t, bool*)>& loss_of) {
  if (n == 0) throw InvalidArgument("training set is empty");
  TrainReport report;
  if (config.train_steps == 0) return report;
  nn::Adam opt(params, config.learning_rate, config.max_grad_norm);
  nn::Rng rng(config.seed + 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;
  for (std::size_t step = 1; step <= config.train_steps; ++step) {
    opt.zero_grad();
    double total = 0.0;
    bool clamped = false;
    const std::size_t batch = std::min(config.batch_size, n);
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      auto loss = nn::scale(loss_of(order[cursor++], &clamped), 1.0 / static_cast<double>(batch));
      total += loss->value(0, 0);
      nn::backward(loss);
    }
    if (!std::isfinite(total))
      throw TrainingError("non-finite loss at step " + std::to_string(step));
    opt.step();
    if (clamped) ++report.clamped_steps;
    report.loss_curve.push_back({step, total});
  }
  return report;
}

}  // namespace detail

/// Minimizes the K-averaged NLL with Adam for config().train_steps minibatch steps.
/// Examples with fewer than K evidence pairs average over what they have.
inline TrainReport train(ContextClassifier& model, const std::vector<TrainingExample>& dataset, const Corpus& corpus) {
  if (dataset.empty()) throw InvalidArgument("training set is empty");
  if (!model.encoder().descriptor().supports_training)
    throw CapabilityError("encoder '" + model.encoder().descriptor().name + "' is not trainable");
  std::vector<std::vector<AssembledInput>> inputs;
  inputs.reserve(dataset.size());
  const auto k = model.config().k;
  for (const auto& ex : dataset) {
    if (ex.label != 0 && ex.label != 1) throw InvalidArgument("training label must be 0 or 1");
    auto all = model.assemble(ex.evidence, corpus);
    if (all.size() > k) all.resize(k);
    inputs.push_back(std::move(all));
  }
  return detail::run_training(model.parameters(), dataset.size(), model.config(), [&](std::size_t i, bool* clamped) {
    return example_loss(inputs[i], dataset[i].label, model.encoder(), model.head(), clamped);
  });
}

/// Triple-concatenation classifier: <cls> + rendered triple, linear softmax on <cls>.
class BaselineClassifier {
 public:
  BaselineClassifier(std::shared_ptr<nn::EncoderBackend> encoder, ClassifierConfig config)
      : encoder_(std::move(encoder)), config_(config) {
    config_.validate();
    lm::require_encoding(*encoder_);
    nn::Rng rng(config_.seed ^ 0x5bd1e995ULL);
    weight_ = nn::leaf(nn::xavier(2, static_cast<Eigen::Index>(encoder_->descriptor().hidden_dim), rng));
  }

  static BaselineClassifier create(const lm::Vocabulary& vocab, const ClassifierConfig& config) {
    config.validate();
    return BaselineClassifier(std::make_shared<nn::TransformerEncoder>(vocab, config.encoder_shape(), config.seed),
                              config);
  }

  std::vector<lm::TokenId> input_ids(const LabeledTriple& t) const {
    auto seq = encoder_->tokenize(render_template(t).text);
    std::vector<lm::TokenId> ids{encoder_->cls_id()};
    ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
    return ids;
  }

  nn::Var forward_graph(const std::vector<lm::TokenId>& ids) const {
    auto cls = nn::gather_rows(encoder_->encode_graph(ids), {0});
    return nn::softmax_rows(nn::matmul(cls, nn::transpose(weight_)));
  }

  ProbPair classify(const LabeledTriple& t) const {
    const auto p = forward_graph(input_ids(t))->value;
    return {p(0, 0), p(0, 1)};
  }

  nn::ParamList parameters() const {
    auto out = encoder_->parameters();
    for (auto& p : out) p.name = "encoder." + p.name;
    out.push_back({"baseline.weight", weight_});
    return out;
  }

  const nn::EncoderBackend& encoder() const { return *encoder_; }
  std::shared_ptr<nn::EncoderBackend> encoder_ptr() const { return encoder_; }
  const ClassifierConfig& config() const { return config_; }
  const nn::Var& weight() const { return weight_; }

 private:
  std::shared_ptr<nn::EncoderBackend> encoder_;
  ClassifierConfig config_;
  nn::Var weight_;
};

inline ProbPair baseline_triple_classify(const LabeledTriple& t, const BaselineClassifier& model) {
  lm::require_encoding(model.encoder());
  return model.classify(t);
}

inline TrainReport train_baseline(BaselineClassifier& model, const std::vector<LabeledTriple>& dataset) {
  std::vector<std::vector<lm::TokenId>> inputs;
  for (const auto& t : dataset) {
    if (!t.label) throw InvalidArgument("baseline training triples need labels");
    inputs.push_back(model.input_ids(t));
  }
  return detail::run_training(model.parameters(), dataset.size(), model.config(), [&](std::size_t i, bool* clamped) {
    auto p = model.forward_graph(inputs[i]);
    const int gold = *dataset[i].label;
    if (!(p->value(0, gold) > kProbabilityFloor)) *clamped = true;
    return nn::scale(nn::log_at(p, 0, gold, kProbabilityFloor), -1.0);
  });
}

}  // namespace deepck
