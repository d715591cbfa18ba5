#pragma once

#include <istream>
#include <string>
#include <unordered_set>

#include "deepck/text.hpp"

namespace deepck {

using StopWords = std::unordered_set<std::string>;

/// English function words used when no stop-word file is given.
inline const StopWords& default_stopwords() {
  static const StopWords words = {
      "a",       "about",   "above",  "after",   "again",  "against", "all",     "am",
      "an",      "and",     "any",    "are",     "as",     "at",      "be",      "because",
      "been",    "before",  "being",  "below",   "between", "both",   "but",     "by",
      "can",     "could",   "did",    "do",      "does",   "doing",   "down",    "during",
      "each",    "few",     "for",    "from",    "further", "had",    "has",     "have",
      "having",  "he",      "her",    "here",    "hers",   "herself", "him",     "himself",
      "his",     "how",     "i",      "if",      "in",     "into",    "is",      "it",
      "its",     "itself",  "just",   "me",      "more",   "most",    "my",      "myself",
      "no",      "nor",     "not",    "now",     "of",     "off",     "on",      "once",
      "only",    "or",      "other",  "our",     "ours",   "ourselves", "out",   "over",
      "own",     "same",    "she",    "should",  "so",     "some",    "such",    "than",
      "that",    "the",     "their",  "theirs",  "them",   "themselves", "then", "there",
      "these",   "they",    "this",   "those",   "through", "to",     "too",     "under",
      "until",   "up",      "very",   "was",     "we",     "were",    "what",    "when",
      "where",   "which",   "while",  "who",     "whom",   "why",     "will",    "with",
      "would",   "you",     "your",   "yours",   "yourself", "yourselves", "also", "may",
      "might",   "must",    "shall",  "upon",    "us",     "yet",     "ever",    "every",
      "s",       "t",       "don",    "didn",    "doesn",  "isn",     "wasn",    "won",
      "ll",      "re",      "ve",     "d",       "m",      "o",       "y",       "ain",
  };
  return words;
}

/// One word per line; blank lines and '#' comments ignored. Words are lowercased.
inline StopWords read_stopwords(std::istream& in) {
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    auto w = text::trim(line);
    if (w.empty() || w.front() == '#') continue;
    out.insert(text::to_lower(w));
  }
  return out;
}

}  // namespace deepck
