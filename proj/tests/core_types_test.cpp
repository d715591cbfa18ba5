#include <gtest/gtest.h>

#include <sstream>

#include "deepck/core_types.hpp"

using namespace deepck;

TEST(ParseTriples, FourFieldLine) {
  std::istringstream in("whale\tAtLocation\tocean\t1\n");
  const auto t = parse_triple_file(in);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (LabeledTriple{"whale", "AtLocation", "ocean", 1}));
}

TEST(ParseTriples, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(parse_triple_file(in).empty());
}

TEST(ParseTriples, WrongFieldCountReportsLine) {
  std::istringstream in("a\tR\n");
  try {
    parse_triple_file(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ParseTriples, BadLabelReportsLine) {
  std::istringstream in("# header\napple\tIs\tred\t1\napple\tIs\tblue\t2\n");
  try {
    parse_triple_file(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseTriples, ThreeFieldsAreUnlabeled) {
  std::istringstream in("apple\tIs\tred\r\n");
  const auto t = parse_triple_file(in);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_FALSE(t[0].label);
  EXPECT_EQ(t[0].tail, "red");
}

TEST(ParseTriples, RoundTrip) {
  const std::vector<LabeledTriple> src{{"whale", "AtLocation", "ocean", 1},
                                       {"take a bath", "HasSubevent", "wash hair", 0},
                                       {"apple", "Is", "red", std::nullopt}};
  std::stringstream buf;
  write_triple_file(buf, src);
  auto once = parse_triple_file(buf);
  EXPECT_EQ(once, src);
  std::stringstream again;
  write_triple_file(again, once);
  EXPECT_EQ(parse_triple_file(again), src);
}

TEST(Triple, RejectsEmptyFields) {
  EXPECT_THROW(LabeledTriple::make(" ", "Is", "red"), InvalidArgument);
  EXPECT_THROW(LabeledTriple::make("apple", "", "red"), InvalidArgument);
  EXPECT_THROW(LabeledTriple::make("apple", "Is", ""), InvalidArgument);
  EXPECT_THROW(LabeledTriple::make("apple", "Is", "red", 3), InvalidArgument);
}

TEST(Triple, KeyIgnoresCaseAndSpacing) {
  EXPECT_EQ(LabeledTriple::make("Take  a Bath", "HasSubevent", "wash").key(),
            LabeledTriple::make("take a bath", "hassubevent", "WASH").key());
}

TEST(Rephrase, Examples) {
  EXPECT_EQ(rephrase_relation("CapableOf").phrase, "capable of");
  EXPECT_EQ(rephrase_relation("Is").phrase, "is");
  EXPECT_EQ(rephrase_relation("HasSubevent").phrase, "has subevent");
  EXPECT_EQ(rephrase_relation("AtLocation").phrase, "at location");
  EXPECT_EQ(rephrase_relation("HasSubevent").word_count(), 2u);
  EXPECT_THROW(rephrase_relation(""), InvalidArgument);
}

TEST(Rephrase, KnownRelations) {
  const std::pair<const char*, const char*> cases[] = {
      {"UsedFor", "used for"},       {"HasPrerequisite", "has prerequisite"}, {"MotivatedByGoal", "motivated by goal"},
      {"CausesDesire", "causes desire"}, {"HasProperty", "has property"},     {"IsA", "is a"},
      {"PartOf", "part of"},         {"ReceivesAction", "receives action"},   {"Desires", "desires"}};
  for (const auto& [rel, phrase] : cases) EXPECT_EQ(rephrase_relation(rel).phrase, phrase) << rel;
}

TEST(Render, Examples) {
  EXPECT_EQ(render_template(LabeledTriple::make("apple", "Is", "red")).text, "apple is red");
  const auto w = render_template(LabeledTriple::make("whale", "AtLocation", "ocean"));
  EXPECT_EQ(w.text, "whale at location ocean");
  EXPECT_EQ(*w.head_span, (TokenSpan{0, 1}));
  EXPECT_EQ(*w.tail_span, (TokenSpan{3, 4}));
  EXPECT_EQ(w.text.substr(w.tail_chars.begin, w.tail_chars.size()), "ocean");
}

TEST(Render, DuplicateTermsGetDisjointSpans) {
  const auto r = render_template(LabeledTriple::make("x", "Is", "x"));
  EXPECT_EQ(r.text, "x is x");
  EXPECT_FALSE(r.head_span->overlaps(*r.tail_span));
  EXPECT_NE(*r.head_span, *r.tail_span);
}

TEST(Render, SpansCoverTerms) {
  const auto t = LabeledTriple::make("take a  bath", "HasSubevent", "wash your hair");
  const auto r = render_template(t);
  const auto words = text::split_ws(r.text);
  EXPECT_EQ(words.size(), r.token_count());
  EXPECT_EQ(r.head_span->size(), 3u);
  EXPECT_EQ(r.tail_span->size(), 3u);
  EXPECT_EQ(words[r.tail_span->begin], "wash");
  EXPECT_EQ(r.tail_span->end, words.size());
}
