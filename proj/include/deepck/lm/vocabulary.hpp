#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deepck/error.hpp"
#include "deepck/text.hpp"

namespace deepck::lm {

using TokenId = std::int32_t;

/// Byte range of one token in the source text.
struct CharOffset {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const CharOffset&, const CharOffset&) = default;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<CharOffset> offsets;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  /// Prefix of the first n tokens.
  TokenSequence prefix(std::size_t n) const {
    TokenSequence out;
    out.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
    if (offsets.size() >= n)
      out.offsets.assign(offsets.begin(), offsets.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  void push_back(TokenId id, CharOffset off = {}) {
    ids.push_back(id);
    offsets.push_back(off);
  }
};

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEndOfTermToken = "</t>";
inline constexpr std::string_view kClsToken = "<cls>";
inline constexpr std::string_view kSepToken = "<sep>";

/// Word-level vocabulary with a lowercase, whitespace-and-punctuation tokenizer.
/// Ids follow insertion order; `<unk>` is appended when the word list lacks it.
class Vocabulary {
 public:
  Vocabulary() { add(kUnkToken); }

  explicit Vocabulary(const std::vector<std::string>& words) {
    for (const auto& w : words) {
      if (find(w)) throw InvalidArgument("duplicate vocabulary entry '" + w + "'");
      add(w);
    }
    add(kUnkToken);
  }

  TokenId add(std::string_view word) {
    auto w = text::to_lower(word);
    if (auto it = index_.find(w); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(words_.size());
    index_.emplace(w, id);
    words_.push_back(std::move(w));
    return id;
  }

  std::optional<TokenId> find(std::string_view word) const {
    auto it = index_.find(text::to_lower(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id(std::string_view word) const { return find(word).value_or(unk()); }
  TokenId unk() const { return index_.at(std::string(kUnkToken)); }

  const std::string& word(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
      throw InvalidArgument("token id " + std::to_string(id) + " out of range");
    return words_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  TokenSequence tokenize(std::string_view s) const {
    TokenSequence out;
    for (const auto& piece : text::split_words(s)) out.push_back(id(piece.text), {piece.begin, piece.end});
    return out;
  }

  std::string detokenize(std::span<const TokenId> ids) const {
    std::string out;
    for (auto id : ids) {
      if (!out.empty()) out += ' ';
      out += word(id);
    }
    return out;
  }

  void save(std::ostream& out) const {
    for (const auto& w : words_) out << w << '\n';
  }

  static Vocabulary load(std::istream& in) {
    Vocabulary v;
    v.words_.clear();
    v.index_.clear();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      text::strip_cr(line);
      if (line.empty()) continue;
      if (v.find(line)) throw ParseError(lineno, "duplicate vocabulary entry '" + line + "'");
      v.add(line);
    }
    v.add(kUnkToken);
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace deepck::lm
