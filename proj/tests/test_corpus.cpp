#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gujiseg/corpus.hpp"
#include "oracle.hpp"

using namespace gujiseg;

namespace {

std::vector<Document> parse(const std::string& text, CorpusFormat f) {
  std::istringstream in(text);
  return parse_corpus(in, f);
}

Document doc(const std::u32string& text) { return {"d", text}; }

std::vector<Label> labels(std::string_view s) {
  std::vector<Label> out;
  for (char c : s) out.push_back(c == 'M' ? Label::M : Label::O);
  return out;
}

}  // namespace

TEST(ParseCorpus, BlocksSeparatedByBlankLine) {
  const auto docs = parse("天地玄黃\n\n宇宙洪荒\n", CorpusFormat::Blocks);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].id, "0001");
  EXPECT_EQ(docs[1].id, "0002");
  EXPECT_EQ(docs[1].raw_text, U"宇宙洪荒");
}

TEST(ParseCorpus, EmptySourceIsEmptyList) {
  EXPECT_TRUE(parse("", CorpusFormat::Blocks).empty());
  EXPECT_TRUE(parse("", CorpusFormat::Lines).empty());
}

TEST(ParseCorpus, HeaderNamesRecord) {
  const auto docs = parse("#ID tang-001\n孝敬天啟，動必以禮。\n", CorpusFormat::Blocks);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].id, "tang-001");
  EXPECT_EQ(docs[0].raw_text, U"孝敬天啟，動必以禮。");
}

TEST(ParseCorpus, MultiLineBlockKeepsLineBreaks) {
  const auto docs = parse("天地\r\n玄黃\r\n", CorpusFormat::Blocks);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].raw_text, U"天地\n玄黃");
}

TEST(ParseCorpus, LinesUseLineNumbers) {
  const auto docs = parse("天地\n\n玄黃\n", CorpusFormat::Lines);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].id, "0001");
  EXPECT_EQ(docs[1].id, "0003");
}

TEST(ParseCorpus, MalformedUtf8ReportsByteOffset) {
  const std::string bad = std::string("天地\n") + "\xE7\x8E" + "\n";
  try {
    parse(bad, CorpusFormat::Lines);
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.offset(), 7u);
  }
  EXPECT_THROW(parse("\xEF\xBB\xBF天", CorpusFormat::Lines), DecodeError);
  EXPECT_THROW(parse("\xC0\xAF", CorpusFormat::Lines), DecodeError);  // overlong
  EXPECT_THROW(parse("\xED\xA0\x80", CorpusFormat::Lines), DecodeError);  // surrogate
}

TEST(ParseCorpus, DuplicateIdsRejected) {
  EXPECT_THROW(parse("#ID a\n天\n\n#ID a\n地\n", CorpusFormat::Blocks), ParseError);
}

TEST(Labelize, SampleSentence) {
  const auto s = labelize(doc(U"孝敬天啟，動必以禮。"));
  EXPECT_EQ(s.chars, U"孝敬天啟動必以禮");
  EXPECT_EQ(s.labels, labels("OOOMOOOM"));
}

TEST(Labelize, OnlyMarksIsEmptySequence) {
  EXPECT_THROW(labelize(doc(U"。，；")), EmptySequenceError);
}

TEST(Labelize, ConsecutiveMarksCollapse) {
  const auto s = labelize(doc(U"天。。地"));
  EXPECT_EQ(s.chars, U"天地");
  EXPECT_EQ(s.labels, labels("MO"));
}

TEST(Labelize, DiscardCharactersAreSkippedBeforeMarks) {
  const auto s = labelize(doc(U"「天」。地、人："));
  EXPECT_EQ(s.chars, U"天地人");
  EXPECT_EQ(s.labels, labels("MOO"));
}

TEST(Labelize, LeadingMarksDropped) {
  const auto s = labelize(doc(U"。，天地"));
  EXPECT_EQ(s.labels, labels("OO"));
}

TEST(Labelize, SupplementaryPlaneCharactersKept) {
  const auto s = labelize(doc(U"𠀀天。"));
  EXPECT_EQ(s.chars, U"𠀀天");
  EXPECT_EQ(s.labels, labels("OM"));
}

TEST(Labelize, OverlappingSetsRejected) {
  EXPECT_THROW(labelize(doc(U"天"), make_charset(U"。"), make_charset(U"。")),
               std::invalid_argument);
}

TEST(Labelize, RoundTripThroughRender) {
  std::mt19937_64 rng(7);
  const auto abc = oracle::alphabet(12);
  const auto boundary = default_boundary_set();
  const auto discard = default_discard_set();
  for (int iter = 0; iter < 200; ++iter) {
    LabeledSequence s;
    const std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      s.chars.push_back(abc[rng() % abc.size()]);
      s.labels.push_back(rng() % 4 == 0 ? Label::M : Label::O);
    }
    const auto again = labelize(Document{"x", render(s.chars, s.labels, U'。')}, boundary, discard);
    EXPECT_EQ(again.chars, s.chars);
    EXPECT_EQ(again.labels, s.labels);
    for (char32_t c : again.chars) EXPECT_FALSE(boundary.contains(c));
  }
}

TEST(FilterShort, KeepsStrictlyLonger) {
  std::vector<LabeledSequence> docs;
  for (std::size_t len : {10, 30, 31, 480}) {
    LabeledSequence s;
    s.chars.assign(len, U'天');
    s.labels.assign(len, Label::O);
    docs.push_back(s);
  }
  const auto kept = filter_short(docs, 30);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].size(), 31u);
  EXPECT_EQ(kept[1].size(), 480u);
  EXPECT_EQ(filter_short(docs, 0).size(), 4u);
  EXPECT_TRUE(filter_short({}, 30).empty());
}

TEST(CorpusStats, SampleSentence) {
  const auto st = corpus_stats({labelize(doc(U"孝敬天啟，動必以禮。"))});
  EXPECT_EQ(st.doc_count, 1u);
  EXPECT_EQ(st.char_token_count, 8u);
  EXPECT_EQ(st.char_type_count, 8u);
  EXPECT_EQ(st.boundary_mark_count, 2u);
  EXPECT_DOUBLE_EQ(st.mean_chars_per_doc, 8.0);
}

TEST(CorpusStats, EmptyAndTypeToken) {
  const auto empty = corpus_stats({});
  EXPECT_EQ(empty.doc_count, 0u);
  EXPECT_EQ(empty.char_token_count, 0u);
  EXPECT_EQ(empty.mean_chars_per_doc, 0.0);
  const auto st = corpus_stats({labelize(doc(U"天")), labelize(doc(U"天"))});
  EXPECT_EQ(st.char_token_count, 2u);
  EXPECT_EQ(st.char_type_count, 1u);
}

TEST(LabeledCorpusFile, RoundTrip) {
  const std::vector<LabeledSequence> docs = {labelize(Document{"a", U"孝敬天啟，動必以禮。"}),
                                             labelize(Document{"b", U"天。地"})};
  std::stringstream io;
  write_labeled_corpus(io, docs);
  EXPECT_EQ(read_labeled_corpus(io), docs);
}

TEST(LabeledCorpusFile, BadLabelReportsLine) {
  std::istringstream in("天\tO\n地\tX\n");
  try {
    read_labeled_corpus(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
