#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "deepck/lm/backend.hpp"

namespace deepck::lm {

/// Table-driven bigram scorer: P(next | last token of prefix). Rows absent from the
/// table fall back to uniform. Rows hold unnormalized logits, so the model is also
/// trainable by gradient descent on those logits.
///
/// Table file lines are "prev next probability"; prev "*" is the sequence-start row.
/// Probability left over in a row is spread evenly over the tokens it does not list.
class BigramBackend final : public TrainableScorer {
 public:
  static constexpr std::string_view kStartSymbol = "*";

  explicit BigramBackend(Vocabulary vocab, std::string name = "toy-bigram",
                         std::size_t context_window = 1024)
      : vocab_(std::move(vocab)) {
    vocab_.add(kEndOfTermToken);
    desc_.name = std::move(name);
    desc_.vocab_size = vocab_.size();
    desc_.supports_scoring = true;
    desc_.supports_training = true;
    desc_.context_window = context_window;
    desc_.unk = vocab_.unk();
    desc_.end_of_term = *vocab_.find(kEndOfTermToken);
    desc_.validate();
    fallback_.assign(vocab_.size(), 0.0);
  }

  /// Uniform model over exactly `vocab_size` tokens (words "w0", "w1", ... plus specials).
  static BigramBackend uniform(std::size_t vocab_size, std::size_t context_window = 1024) {
    if (vocab_size < 2) throw InvalidArgument("uniform backend needs at least 2 tokens");
    std::vector<std::string> words;
    for (std::size_t i = 0; i + 2 < vocab_size; ++i) words.push_back("w" + std::to_string(i));
    return BigramBackend(Vocabulary(words), "toy-uniform", context_window);
  }

  static BigramBackend load_table(std::istream& in, std::string name = "toy-bigram",
                                  std::size_t context_window = 1024) {
    struct Entry {
      std::string prev, next;
      double p;
      std::size_t line;
    };
    std::vector<Entry> entries;
    std::vector<std::string> order;
    std::unordered_map<std::string, bool> seen;
    auto note = [&](const std::string& w) {
      if (w == kStartSymbol) return;
      auto lw = text::to_lower(w);
      if (seen.emplace(lw, true).second) order.push_back(lw);
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      text::strip_cr(line);
      if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
      auto f = text::split_ws(line);
      if (f.size() != 3) throw ParseError(lineno, "expected 'prev next probability'");
      double p = 0.0;
      try {
        std::size_t used = 0;
        p = std::stod(f[2], &used);
        if (used != f[2].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError(lineno, "bad probability '" + f[2] + "'");
      }
      if (!(p >= 0.0 && p <= 1.0)) throw ParseError(lineno, "probability outside [0, 1]");
      if (f[1] == kStartSymbol) throw ParseError(lineno, "'*' may only appear as prev token");
      note(f[0]);
      note(f[1]);
      entries.push_back({f[0], f[1], p, lineno});
    }
    BigramBackend b(Vocabulary(order), std::move(name), context_window);
    std::map<std::optional<TokenId>, std::map<TokenId, double>> rows;
    for (const auto& e : entries) {
      std::optional<TokenId> prev;
      if (e.prev != kStartSymbol) prev = b.vocab_.id(e.prev);
      auto& row = rows[prev];
      const auto next = b.vocab_.id(e.next);
      if (row.contains(next)) throw ParseError(e.line, "duplicate entry for '" + e.prev + " " + e.next + "'");
      row[next] = e.p;
    }
    for (const auto& [prev, row] : rows) {
      try {
        b.set_row_probabilities(prev, row);
      } catch (const InvalidArgument& ex) {
        throw ParseError(0, ex.what());
      }
    }
    return b;
  }

  /// `prev` empty selects the sequence-start row.
  void set_row_probabilities(std::optional<TokenId> prev, const std::map<TokenId, double>& probs) {
    const std::size_t v = vocab_.size();
    double listed = 0.0;
    for (const auto& [id, p] : probs) {
      check_id(id);
      if (!(p >= 0.0)) throw InvalidArgument("negative probability");
      listed += p;
    }
    if (listed > 1.0 + 1e-9) throw InvalidArgument("row probabilities sum to more than 1");
    const std::size_t unlisted = v - probs.size();
    double rest = unlisted > 0 ? std::max(0.0, 1.0 - listed) / static_cast<double>(unlisted) : 0.0;
    if (rest < 1e-15) rest = 0.0;
    std::vector<double> logits(v);
    for (std::size_t j = 0; j < v; ++j) {
      auto it = probs.find(static_cast<TokenId>(j));
      const double p = it != probs.end() ? it->second : rest;
      logits[j] = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
    set_row_logits(prev, std::move(logits));
  }

  void set_row_logits(std::optional<TokenId> prev, std::vector<double> logits) {
    if (logits.size() != vocab_.size()) throw InvalidArgument("logit row has wrong length");
    if (prev) check_id(*prev);
    rows_[row_key(prev)] = std::move(logits);
  }

  /// Adds `c` to every stored pre-softmax score, fallback row included.
  void shift_logits(double c) {
    for (auto& [k, row] : rows_)
      for (auto& v : row) v += c;
    for (auto& v : fallback_) v += c;
  }

  const Vocabulary& vocabulary() const { return vocab_; }
  const BackendDescriptor& descriptor() const override { return desc_; }

  TokenSequence tokenize(std::string_view text) const override { return vocab_.tokenize(text); }
  std::string detokenize(std::span<const TokenId> ids) const override { return vocab_.detokenize(ids); }

  NextTokenDistribution next_token_logprobs(const TokenSequence& prefix) const override {
    check_window(prefix.size());
    std::optional<TokenId> prev;
    if (!prefix.empty()) prev = prefix.ids.back();
    return {log_softmax(row(prev))};
  }

  double accumulate_masked_nll(const TokenSequence& seq, std::span<const bool> mask) override {
    if (mask.size() != seq.size()) throw InvalidArgument("loss mask length mismatch");
    check_window(seq.size());
    double nll = 0.0;
    for (std::size_t l = 0; l < seq.size(); ++l) {
      if (!mask[l]) continue;
      std::optional<TokenId> prev;
      if (l > 0) prev = seq.ids[l - 1];
      const auto lp = log_softmax(row(prev));
      const auto target = static_cast<std::size_t>(seq.ids[l]);
      nll -= lp[target];
      auto& g = grads_[row_key(prev)];
      if (g.empty()) g.assign(vocab_.size(), 0.0);
      for (std::size_t j = 0; j < lp.size(); ++j) g[j] += std::exp(lp[j]);
      g[target] -= 1.0;
    }
    return nll;
  }

  void apply_gradients(double learning_rate) override {
    for (auto& [k, g] : grads_) {
      auto it = rows_.find(k);
      if (it == rows_.end()) it = rows_.emplace(k, fallback_).first;
      for (std::size_t j = 0; j < g.size(); ++j) it->second[j] -= learning_rate * g[j];
    }
    grads_.clear();
  }

  /// Logit rows keyed by previous token (-1 is sequence start).
  const std::map<TokenId, std::vector<double>>& rows() const { return rows_; }

 private:
  static TokenId row_key(std::optional<TokenId> prev) { return prev ? *prev : -1; }

  const std::vector<double>& row(std::optional<TokenId> prev) const {
    auto it = rows_.find(row_key(prev));
    return it == rows_.end() ? fallback_ : it->second;
  }

  void check_id(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size())
      throw InvalidArgument("token id " + std::to_string(id) + " out of range");
  }

  Vocabulary vocab_;
  BackendDescriptor desc_;
  std::map<TokenId, std::vector<double>> rows_;
  std::map<TokenId, std::vector<double>> grads_;
  std::vector<double> fallback_;
};

}  // namespace deepck::lm
