#include <gtest/gtest.h>

#include <fstream>

#include "sluxfer/corpus.hpp"
#include "sluxfer/error.hpp"
#include "synthetic.hpp"

namespace sluxfer {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream o(p);
  o << s;
}

TEST(Corpus, RepairsOrphanInsideTag) {
  const auto dir = testing::scratch_dir("corpus-repair");
  write_text(dir / "one.tsv", "# intent: order\nplease\tO\npizza\tI-Dish\n");
  std::size_t repairs = 0;
  const auto utts = load_split(dir / "one.tsv", DataFormat::kConllTsv, &repairs);
  ASSERT_EQ(utts.size(), 1u);
  EXPECT_EQ(utts[0].bio_tags, (std::vector<std::string>{"O", "B-Dish"}));
  EXPECT_EQ(repairs, 1u);
  EXPECT_TRUE(is_valid_bio(utts[0].bio_tags));
}

TEST(Corpus, BioHelpers) {
  EXPECT_FALSE(is_valid_bio({"O", "I-X"}));
  EXPECT_FALSE(is_valid_bio({"B-Y", "I-X"}));
  EXPECT_TRUE(is_valid_bio({"B-X", "I-X", "O", "B-Y"}));
  EXPECT_FALSE(split_tag("X-foo"));
  EXPECT_FALSE(split_tag("B-"));
  std::vector<std::string> tags = {"I-X", "I-X", "B-Y", "I-X"};
  EXPECT_EQ(repair_bio(tags), 2u);
  EXPECT_EQ(tags, (std::vector<std::string>{"B-X", "I-X", "B-Y", "B-X"}));
}

TEST(Corpus, ParseErrorsCarryLineNumbers) {
  const auto dir = testing::scratch_dir("corpus-errors");
  write_text(dir / "bad.tsv", "# intent: a\nhello\tO\nworld\tQ-X\n");
  try {
    load_split(dir / "bad.tsv", DataFormat::kConllTsv);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(dir / "notab.tsv", "# intent: a\nhello O\n");
  EXPECT_THROW(load_split(dir / "notab.tsv", DataFormat::kConllTsv), FormatError);
  write_text(dir / "nointent.tsv", "hello\tO\n");
  EXPECT_THROW(load_split(dir / "nointent.tsv", DataFormat::kConllTsv), FormatError);
}

TEST(Corpus, LabelSpaceMembershipIsValidated) {
  const auto data = testing::make_dataset(testing::Domain::kTravel, 30, 10, 10, 1);
  const auto dir = testing::scratch_dir("corpus-labels");
  testing::write_dataset(data, dir);
  const auto loaded = load_labeled(dir, DataFormat::kConllTsv);
  EXPECT_EQ(loaded.train, data.train);
  EXPECT_EQ(loaded.label_space, data.label_space);
  const LabelSpace narrow({"book_flight"}, {"city"});
  EXPECT_THROW(load_labeled(dir, DataFormat::kConllTsv, narrow), ValidationError);
}

TEST(Corpus, JsonFormatRoundTrips) {
  const auto data = testing::make_dataset(testing::Domain::kMedia, 20, 5, 5, 3);
  const auto dir = testing::scratch_dir("corpus-json");
  write_split(dir / "train.json", data.train, DataFormat::kJson);
  write_split(dir / "dev.json", data.dev, DataFormat::kJson);
  write_split(dir / "test.json", data.test, DataFormat::kJson);
  const auto loaded = load_labeled(dir, DataFormat::kJson);
  EXPECT_EQ(loaded.train, data.train);
  EXPECT_EQ(loaded.test, data.test);
}

TEST(Corpus, UnlabeledDedupAndCounts) {
  const auto dir = testing::scratch_dir("corpus-unlabeled");
  write_text(dir / "dup.txt", "a b\na b\n");
  const auto dup = load_unlabeled({dir / "dup.txt"});
  EXPECT_EQ(dup.sentences.size(), 1u);
  EXPECT_EQ(dup.token_count, 2u);

  write_text(dir / "f1.txt", "one two\n");
  write_text(dir / "f2.txt", "three four five\n\n");
  write_text(dir / "f3.txt", "six seven eight nine ten\n");
  const auto three = load_unlabeled({dir / "f1.txt", dir / "f2.txt", dir / "f3.txt"});
  EXPECT_EQ(three.token_count, 10u);

  write_text(dir / "empty.txt", "\n\n");
  EXPECT_THROW(load_unlabeled({dir / "empty.txt"}), ValidationError);
}

TEST(Corpus, Vocabulary) {
  const auto v = build_vocab(std::vector<std::vector<std::string>>{{"a", "a", "b"}}, 2);
  EXPECT_EQ(v.num_regular(), 1u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.index("zebra"), Vocabulary::kUnk);

  const auto w = build_vocab(std::vector<std::vector<std::string>>{{"c", "b", "a", "b", "c"}}, 1);
  EXPECT_EQ(w.word(Vocabulary::kNumSpecial), "b");  // ties broken lexicographically
  EXPECT_EQ(w.word(Vocabulary::kNumSpecial + 1), "c");
  EXPECT_EQ(w.word(Vocabulary::kNumSpecial + 2), "a");
}

TEST(Corpus, LowResourceSampling) {
  const auto data = testing::make_dataset(testing::Domain::kTravel, 300, 20, 20, 4);
  const auto a = sample_low_resource(data, 100, 7);
  const auto b = sample_low_resource(data, 100, 7);
  EXPECT_EQ(a.train.size(), 100u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.dev, data.dev);
  EXPECT_EQ(a.test, data.test);
  EXPECT_NE(sample_low_resource(data, 100, 8).train, a.train);
  EXPECT_THROW(sample_low_resource(data, 301, 1), ValidationError);
}

TEST(Corpus, TokenizeLowercases) {
  EXPECT_EQ(tokenize("  Show ME\tflights "), (std::vector<std::string>{"show", "me", "flights"}));
}

}  // namespace
}  // namespace sluxfer
