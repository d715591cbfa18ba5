#pragma once

#include <cctype>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "deepck/error.hpp"
#include "deepck/text.hpp"

namespace deepck {

/// A (head, relation, tail) knowledge record with an optional binary validity label
/// (0 = fictitious, 1 = valid).
struct LabeledTriple {
  std::string head;
  std::string relation;
  std::string tail;
  std::optional<int> label;

  /// Validating constructor; terms are trimmed.
  static LabeledTriple make(std::string_view head, std::string_view relation,
                            std::string_view tail, std::optional<int> label = std::nullopt) {
    LabeledTriple t{std::string(text::trim(head)), std::string(text::trim(relation)),
                    std::string(text::trim(tail)), label};
    t.validate();
    return t;
  }

  void validate() const {
    if (text::split_ws(head).empty()) throw InvalidArgument("triple head is empty");
    if (text::split_ws(tail).empty()) throw InvalidArgument("triple tail is empty");
    if (relation.empty()) throw InvalidArgument("triple relation is empty");
    for (char c : relation)
      if (text::is_space(c)) throw InvalidArgument("relation '" + relation + "' contains whitespace");
    if (label && *label != 0 && *label != 1)
      throw InvalidArgument("label must be 0 or 1");
  }

  /// Identity used for set operations: lowercased, whitespace-normalized fields.
  std::string key() const {
    return text::to_lower(text::normalize_ws(head)) + '\t' + text::to_lower(relation) + '\t' +
           text::to_lower(text::normalize_ws(tail));
  }

  LabeledTriple unlabeled() const { return {head, relation, tail, std::nullopt}; }

  friend bool operator==(const LabeledTriple&, const LabeledTriple&) = default;
};

struct RelationPhrase {
  std::string relation;
  std::string phrase;

  std::size_t word_count() const { return text::split_ws(phrase).size(); }
  friend bool operator==(const RelationPhrase&, const RelationPhrase&) = default;
};

/// Token index range [begin, end).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool overlaps(const TokenSpan& o) const { return begin < o.end && o.begin < end; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Template rendering of a triple. Token spans count whitespace tokens; char spans
/// are byte ranges into `text` and let backends with other tokenizers find the terms.
struct RenderedSentence {
  std::string text;
  std::optional<TokenSpan> head_span;
  std::optional<TokenSpan> tail_span;
  TokenSpan head_chars;
  TokenSpan tail_chars;

  std::size_t token_count() const { return text::split_ws(text).size(); }
};

/// Splits a camel-case identifier at lowercase->uppercase boundaries and lowercases it:
/// "CapableOf" -> "capable of".
inline RelationPhrase rephrase_relation(std::string_view relation) {
  if (relation.empty()) throw InvalidArgument("relation identifier is empty");
  std::string phrase;
  for (std::size_t i = 0; i < relation.size(); ++i) {
    const auto c = static_cast<unsigned char>(relation[i]);
    if (i > 0 && std::isupper(c) && std::islower(static_cast<unsigned char>(relation[i - 1])))
      phrase += ' ';
    phrase += static_cast<char>(std::tolower(c));
  }
  return {std::string(relation), phrase};
}

/// Bare "head phrase tail" concatenation.
inline RenderedSentence render_template(const LabeledTriple& triple) {
  const auto phrase = rephrase_relation(triple.relation).phrase;
  const auto head = text::normalize_ws(triple.head);
  const auto tail = text::normalize_ws(triple.tail);
  const std::size_t m = text::split_ws(head).size();
  const std::size_t n = text::split_ws(phrase).size();
  const std::size_t k = text::split_ws(tail).size();

  RenderedSentence out;
  out.text = head + ' ' + phrase + ' ' + tail;
  out.head_span = TokenSpan{0, m};
  out.tail_span = TokenSpan{m + n, m + n + k};
  out.head_chars = {0, head.size()};
  const std::size_t tail_begin = head.size() + 1 + phrase.size() + 1;
  out.tail_chars = {tail_begin, tail_begin + tail.size()};
  return out;
}

/// Reads "head\trelation\ttail[\tlabel]" records. Blank lines and '#' comments are skipped.
inline std::vector<LabeledTriple> parse_triple_file(std::istream& in) {
  std::vector<LabeledTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    text::strip_cr(line);
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != 3 && fields.size() != 4)
      throw ParseError(lineno, "expected 3 or 4 tab-separated fields, got " +
                                   std::to_string(fields.size()));
    std::optional<int> label;
    if (fields.size() == 4) {
      const auto f = text::trim(fields[3]);
      if (f == "0")
        label = 0;
      else if (f == "1")
        label = 1;
      else
        throw ParseError(lineno, "label must be 0 or 1, got '" + std::string(f) + "'");
    }
    try {
      out.push_back(LabeledTriple::make(fields[0], fields[1], fields[2], label));
    } catch (const InvalidArgument& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

inline void write_triple_file(std::ostream& out, const std::vector<LabeledTriple>& triples) {
  for (const auto& t : triples) {
    out << t.head << '\t' << t.relation << '\t' << t.tail;
    if (t.label) out << '\t' << *t.label;
    out << '\n';
  }
}

}  // namespace deepck
