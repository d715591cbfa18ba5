#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "deepck/corpus.hpp"

using namespace deepck;

namespace {

Corpus lines(std::vector<std::string> s) { return Corpus::from_sentences(std::move(s)); }

}  // namespace

TEST(Ingest, Terminators) {
  std::istringstream in("A b. C d.");
  const auto c = Corpus::ingest(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.sentence(0).text, "A b.");
  EXPECT_EQ(c.sentence(1).text, "C d.");
  EXPECT_EQ(c.sentence(1).tokens, (std::vector<std::string>{"c", "d"}));
}

TEST(Ingest, Empty) {
  std::istringstream in("");
  EXPECT_TRUE(Corpus::ingest(in).empty());
}

TEST(Ingest, LineMode) {
  std::istringstream in("no stop here\nsecond. still second\n\nthird!");
  EXPECT_EQ(Corpus::ingest(in, true).size(), 3u);
}

TEST(Ingest, InnerPeriodsAndTrailingText) {
  std::istringstream in("Pi is 3.14 or so! Is it?  trailing words");
  const auto c = Corpus::ingest(in);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.sentence(0).text, "Pi is 3.14 or so!");
  EXPECT_EQ(c.sentence(2).text, "trailing words");
}

TEST(Ingest, IndexMatchesTokens) {
  std::istringstream in("The cat sat. The dog ran! A cat ran?");
  const auto c = Corpus::ingest(in);
  for (const auto& [tok, ids] : c.term_index()) {
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    for (auto id : ids) {
      const auto& t = c.sentence(id).tokens;
      EXPECT_NE(std::find(t.begin(), t.end(), tok), t.end());
    }
  }
  for (const auto& s : c.sentences())
    for (const auto& tok : s.tokens) {
      const auto& ids = c.term_index().at(tok);
      EXPECT_TRUE(std::binary_search(ids.begin(), ids.end(), s.id));
    }
}

TEST(FindSentences, MultiWordTerm) {
  const auto c = lines({"He went to bath to take a bath only after work.", "A bath is nice.", "Take the bath."});
  EXPECT_EQ(c.find_sentences("take a bath"), (std::vector<SentenceId>{0}));
  EXPECT_EQ(c.find_sentences("BATH"), (std::vector<SentenceId>{0, 1, 2}));
  EXPECT_TRUE(c.find_sentences("submarine").empty());
  EXPECT_TRUE(c.find_sentences("take bath").empty());
}

TEST(Overlap, Examples) {
  const auto& sw = default_stopwords();
  EXPECT_EQ(overlap_score(text::content_words("red apples fall"), text::content_words("blue cars honk"), sw), 0u);
  const auto s = text::content_words("whales swim deep oceans");
  EXPECT_EQ(overlap_score(s, s, sw), 4u);
  const std::vector<std::string> s1{"finally", "rinse", "hair", "completely", "wash", "shampoo"};
  const std::vector<std::string> s2{"went", "bath", "take", "find", "shampoo", "used"};
  EXPECT_EQ(overlap_score(s1, s2, sw), 1u);
}

TEST(Overlap, StopwordsAndDuplicatesIgnored) {
  const StopWords sw{"the", "a"};
  EXPECT_EQ(overlap_score({"the", "cat", "cat", "a"}, {"cat", "the", "a"}, sw), 1u);
}

TEST(Evidence, SharedSentencePairsWithItself) {
  const auto c = lines({"Whales live in the ocean.", "Birds fly."});
  const auto ev = select_evidence(LabeledTriple::make("whale", "AtLocation", "ocean"), c, 1, default_stopwords());
  // "whale" does not match "whales"; use exact terms
  const auto ev2 = select_evidence(LabeledTriple::make("whales", "AtLocation", "ocean"), c, 1, default_stopwords());
  EXPECT_TRUE(ev.fallback_used);
  ASSERT_EQ(ev2.pairs.size(), 1u);
  EXPECT_FALSE(ev2.fallback_used);
  EXPECT_EQ(*ev2.pairs[0].head_sentence_id, 0u);
  EXPECT_EQ(*ev2.pairs[0].tail_sentence_id, 0u);
  EXPECT_EQ(ev2.pairs[0].relation_phrase.phrase, "at location");
}

TEST(Evidence, Exhaustion) {
  const auto c = lines({"the apple fell", "an apple pie", "tall tree", "a tree grows", "tree bark", "nothing"});
  const auto ev = select_evidence(LabeledTriple::make("apple", "AtLocation", "tree"), c, 10, default_stopwords());
  ASSERT_EQ(ev.pairs.size(), 6u);
  std::set<std::pair<SentenceId, SentenceId>> seen;
  for (std::size_t i = 0; i < ev.pairs.size(); ++i) {
    const auto& p = ev.pairs[i];
    seen.insert({*p.head_sentence_id, *p.tail_sentence_id});
    if (i > 0) {
      const auto& q = ev.pairs[i - 1];
      EXPECT_TRUE(std::tuple(q.overlap * -1.0, *q.head_sentence_id, *q.tail_sentence_id) <
                  std::tuple(p.overlap * -1.0, *p.head_sentence_id, *p.tail_sentence_id));
    }
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Evidence, FallbackAndErrors) {
  const auto c = lines({"nothing relevant here"});
  const auto t = LabeledTriple::make("apple", "Is", "red");
  const auto ev = select_evidence(t, c, 3, default_stopwords());
  EXPECT_TRUE(ev.fallback_used);
  ASSERT_EQ(ev.pairs.size(), 1u);
  EXPECT_TRUE(ev.pairs[0].is_fallback());
  EXPECT_EQ(head_text(ev.pairs[0], c, t), "apple is red");
  EXPECT_THROW(select_evidence(t, c, 0, default_stopwords()), InvalidArgument);
}

TEST(Evidence, CapKeepsMostRecent) {
  std::vector<std::string> s;
  for (int i = 0; i < 10; ++i) s.push_back("apple number " + std::to_string(i));
  s.push_back("red things");
  const auto c = lines(s);
  const auto ev = select_evidence(LabeledTriple::make("apple", "Is", "red"), c, 10, default_stopwords(), 3);
  ASSERT_EQ(ev.pairs.size(), 3u);
  for (const auto& p : ev.pairs) EXPECT_GE(*p.head_sentence_id, 7u);
}

TEST(Evidence, Deterministic) {
  const auto c = lines({"sun is hot and bright", "the sun sets", "hot tea", "hot bright sun day"});
  const auto t = LabeledTriple::make("sun", "HasProperty", "hot");
  const auto a = select_evidence(t, c, 3, default_stopwords());
  const auto b = select_evidence(t, c, 3, default_stopwords());
  EXPECT_EQ(a.pairs, b.pairs);
}

TEST(Evidence, JsonlRoundTrip) {
  const auto c = lines({"the apple fell", "a tree grows", "apple tree"});
  std::vector<EvidenceSet> sets{select_evidence(LabeledTriple::make("apple", "AtLocation", "tree", 1), c, 3, default_stopwords()),
                                select_evidence(LabeledTriple::make("kiwi", "Is", "green"), c, 3, default_stopwords())};
  std::stringstream buf;
  for (const auto& e : sets) write_evidence_jsonl(buf, e);
  const auto back = read_evidence_jsonl(buf);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].triple, sets[i].triple);
    EXPECT_EQ(back[i].pairs, sets[i].pairs);
    EXPECT_EQ(back[i].fallback_used, sets[i].fallback_used);
  }
}

TEST(Stopwords, ReadFile) {
  std::istringstream in("# comment\nThe\n  of \n\n");
  const auto sw = read_stopwords(in);
  EXPECT_EQ(sw, (StopWords{"the", "of"}));
}
