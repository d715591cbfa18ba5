#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "deepck/lm/backend.hpp"
#include "deepck/nn/layers.hpp"

namespace deepck::nn {

/// Bidirectional encoder whose forward pass is differentiable.
class EncoderBackend : public lm::Backend {
 public:
  /// Last-layer token representations as a graph node (rows = tokens).
  virtual Var encode_graph(std::span<const lm::TokenId> ids) const = 0;
  virtual ParamList parameters() const = 0;
  virtual const lm::Vocabulary& vocabulary() const = 0;

  lm::TokenSequence tokenize(std::string_view text) const override { return vocabulary().tokenize(text); }
  std::string detokenize(std::span<const lm::TokenId> ids) const override { return vocabulary().detokenize(ids); }

  Eigen::MatrixXd encode(const lm::TokenSequence& sequence) const override {
    check_window(sequence.size());
    return encode_graph(sequence.ids)->value;
  }

  lm::TokenId cls_id() const { return *descriptor().cls; }
  lm::TokenId sep_id() const { return *descriptor().sep; }

 protected:
  static lm::BackendDescriptor make_descriptor(std::string name, const lm::Vocabulary& vocab, std::size_t dim,
                                               std::size_t window) {
    lm::BackendDescriptor d;
    d.name = std::move(name);
    d.vocab_size = vocab.size();
    d.supports_encoding = true;
    d.supports_training = true;
    d.context_window = window;
    d.hidden_dim = dim;
    d.sharing = lm::Sharing::concurrent_reads;
    d.cls = vocab.find(lm::kClsToken);
    d.sep = vocab.find(lm::kSepToken);
    d.unk = vocab.unk();
    d.validate();
    return d;
  }

  static lm::Vocabulary with_specials(lm::Vocabulary v) {
    v.add(lm::kClsToken);
    v.add(lm::kSepToken);
    return v;
  }

  void check_ids(std::span<const lm::TokenId> ids) const {
    check_window(ids.size());
    for (auto id : ids)
      if (id < 0 || static_cast<std::size_t>(id) >= descriptor().vocab_size)
        throw InvalidArgument("token id " + std::to_string(id) + " outside encoder vocabulary");
  }
};

/// Embedding lookup only: row i of the output is the table row of token i.
class LinearEncoder final : public EncoderBackend {
 public:
  LinearEncoder(lm::Vocabulary vocab, std::size_t dim, std::uint64_t seed, std::size_t window = 512)
      : vocab_(with_specials(std::move(vocab))) {
    Rng rng(seed);
    table_ = leaf(xavier(static_cast<Eigen::Index>(vocab_.size()), static_cast<Eigen::Index>(dim), rng));
    desc_ = make_descriptor("toy-linear-encoder", vocab_, dim, window);
  }

  /// Hand-set table; its row count must equal the vocabulary size after specials are added.
  LinearEncoder(lm::Vocabulary vocab, Matrix table, std::size_t window = 512) : vocab_(with_specials(std::move(vocab))) {
    if (static_cast<std::size_t>(table.rows()) != vocab_.size())
      throw InvalidArgument("embedding table rows must equal vocabulary size");
    const auto dim = static_cast<std::size_t>(table.cols());
    table_ = leaf(std::move(table));
    desc_ = make_descriptor("toy-linear-encoder", vocab_, dim, window);
  }

  Var encode_graph(std::span<const lm::TokenId> ids) const override {
    check_ids(ids);
    return gather_rows(table_, {ids.begin(), ids.end()});
  }

  ParamList parameters() const override { return {{"embedding", table_}}; }
  const lm::Vocabulary& vocabulary() const override { return vocab_; }
  const lm::BackendDescriptor& descriptor() const override { return desc_; }

 private:
  lm::Vocabulary vocab_;
  lm::BackendDescriptor desc_;
  Var table_;
};

struct TransformerShape {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t dim = 64;
  std::size_t ffn_dim = 256;
  std::size_t max_positions = 512;
};

/// Pre-norm transformer encoder with learned positions and a final layer norm.
class TransformerEncoder final : public EncoderBackend {
 public:
  TransformerEncoder(lm::Vocabulary vocab, TransformerShape shape, std::uint64_t seed)
      : vocab_(with_specials(std::move(vocab))), shape_(shape) {
    if (shape.layers < 1 || shape.dim < 1 || shape.ffn_dim < 1 || shape.max_positions < 1)
      throw InvalidArgument("transformer dimensions must be positive");
    Rng rng(seed);
    const auto d = static_cast<Eigen::Index>(shape.dim);
    tokens_ = leaf(xavier(static_cast<Eigen::Index>(vocab_.size()), d, rng));
    positions_ = leaf(xavier(static_cast<Eigen::Index>(shape.max_positions), d, rng) * 0.1);
    for (std::size_t l = 0; l < shape.layers; ++l) {
      Block b;
      b.norm1 = LayerNorm(d);
      b.attention = MultiHeadAttention(d, static_cast<Eigen::Index>(shape.heads), rng);
      b.norm2 = LayerNorm(d);
      b.ffn_in = Linear(d, static_cast<Eigen::Index>(shape.ffn_dim), rng);
      b.ffn_out = Linear(static_cast<Eigen::Index>(shape.ffn_dim), d, rng);
      blocks_.push_back(std::move(b));
    }
    final_norm_ = LayerNorm(d);
    desc_ = make_descriptor("toy-transformer", vocab_, shape.dim, shape.max_positions);
  }

  Var encode_graph(std::span<const lm::TokenId> ids) const override {
    check_ids(ids);
    std::vector<Eigen::Index> pos(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<Eigen::Index>(i);
    Var x = add(gather_rows(tokens_, {ids.begin(), ids.end()}), gather_rows(positions_, std::move(pos)));
    for (const auto& b : blocks_) {
      x = add(x, b.attention(b.norm1(x)));
      x = add(x, b.ffn_out(gelu(b.ffn_in(b.norm2(x)))));
    }
    return final_norm_(x);
  }

  ParamList parameters() const override {
    ParamList out{{"tokens", tokens_}, {"positions", positions_}};
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const auto p = "layer" + std::to_string(l);
      blocks_[l].norm1.collect(out, p + ".norm1");
      blocks_[l].attention.collect(out, p + ".attention");
      blocks_[l].norm2.collect(out, p + ".norm2");
      blocks_[l].ffn_in.collect(out, p + ".ffn_in");
      blocks_[l].ffn_out.collect(out, p + ".ffn_out");
    }
    final_norm_.collect(out, "final_norm");
    return out;
  }

  const lm::Vocabulary& vocabulary() const override { return vocab_; }
  const lm::BackendDescriptor& descriptor() const override { return desc_; }
  const TransformerShape& shape() const { return shape_; }

 private:
  struct Block {
    LayerNorm norm1;
    MultiHeadAttention attention;
    LayerNorm norm2;
    Linear ffn_in, ffn_out;
  };

  lm::Vocabulary vocab_;
  TransformerShape shape_;
  lm::BackendDescriptor desc_;
  Var tokens_, positions_;
  std::vector<Block> blocks_;
  LayerNorm final_norm_;
};

/// Vocabulary of tokens seen at least `min_count` times, most frequent first
/// (ties alphabetical).
inline lm::Vocabulary build_vocabulary(const std::vector<std::string>& texts, std::size_t min_count = 1) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts)
    for (const auto& p : text::split_words(t)) ++counts[text::to_lower(p.text)];
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  for (const auto& [w, c] : items)
    if (c >= min_count && w != lm::kUnkToken) words.push_back(w);
  return lm::Vocabulary(words);
}

}  // namespace deepck::nn
