#include <algorithm>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "kdvqa/error.h"
#include "kdvqa/rng.h"
#include "kdvqa/tokenizer.h"

namespace kdvqa {
namespace {

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize_words("See Fig. 3, (ok)!"),
            (std::vector<std::string>{"see", "fig", ".", "3", ",", "(", "ok", ")", "!"}));
  EXPECT_TRUE(tokenize_words("  ").empty());
}

TEST(BuildVocab, FrequencyThenLexicographic) {
  const auto v = build_vocab({"a b b"}, 8, 1);
  ASSERT_EQ(v.size(), 7);
  EXPECT_EQ(v.token_of(5), "b");
  EXPECT_EQ(v.token_of(6), "a");
  EXPECT_LT(v.id_of("b"), v.id_of("a"));
}

TEST(BuildVocab, SpecialsOnlyWhenEmpty) {
  const auto v = build_vocab({}, 10, 1);
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}));
}

TEST(BuildVocab, MinCount) {
  const auto v = build_vocab({"x y", "y z"}, 10, 2);
  EXPECT_EQ(v.content_size(), 1);
  EXPECT_TRUE(v.contains("y"));
  EXPECT_FALSE(v.contains("x"));
}

TEST(BuildVocab, MaxSizeCapsAndRejectsTinySizes) {
  const auto v = build_vocab({"a a a b b c"}, 7, 1);
  EXPECT_EQ(v.size(), 7);
  EXPECT_FALSE(v.contains("c"));
  try {
    build_vocab({"a"}, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(BuildVocab, PermutationInvariant) {
  std::vector<std::string> sentences = {"the cell grew", "The dose, the rate.", "cell cell dose", "rate of growth"};
  const auto reference = build_vocab(sentences, 50, 1);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    rng.shuffle(std::span(sentences));
    EXPECT_EQ(build_vocab(sentences, 50, 1), reference);
  }
}

TEST(Vocabulary, BijectionAndRange) {
  const auto v = build_vocab({"alpha beta gamma beta"}, 20, 1);
  for (int id = 0; id < v.size(); ++id) EXPECT_EQ(v.id_of(v.token_of(id)), id);
  EXPECT_EQ(v.id_of("delta"), kUnkId);
  try {
    (void)v.token_of(v.size() + 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
  }
  EXPECT_EQ(vocabulary_from_json(to_json(v)), v);
}

TEST(Encode, Examples) {
  const Vocabulary v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "b"});
  EXPECT_EQ(encode("b a", v, 16).ids, (std::vector<int>{kClsId, 6, 5, kSepId}));
  EXPECT_EQ(encode("", v, 16).ids, (std::vector<int>{kClsId, kSepId}));
  EXPECT_EQ(encode("a c", v, 16).ids, (std::vector<int>{kClsId, 5, kUnkId, kSepId}));
  std::string long_text;
  for (int i = 0; i < 100; ++i) long_text += "a ";
  const auto seq = encode(long_text, v, 10);
  ASSERT_EQ(seq.size(), 10u);
  EXPECT_EQ(seq.ids.front(), kClsId);
  EXPECT_EQ(seq.ids.back(), kSepId);
  EXPECT_THROW(encode("a", v, 2), Error);
}

TEST(Decode, Examples) {
  const Vocabulary v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "alpha", "beta"});
  EXPECT_EQ(decode({{kClsId, 5, kSepId}}, v), "a");
  EXPECT_EQ(decode(encode("Alpha beta", v, 16), v), "alpha beta");
  try {
    decode({{kClsId, v.size() + 1, kSepId}}, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
  }
}

TEST(Decode, RoundTripProperty) {
  const std::vector<std::string> words = {"Cell", "dose", "RATE", "fig", ".", "3", "growth", ",", "x"};
  Rng rng(8);
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) {
    std::string s;
    for (int k = 0; k < 6; ++k) s += words[rng.uniform_index(words.size())] + " ";
    corpus.push_back(s);
  }
  const auto v = build_vocab(corpus, 100, 1);
  for (const auto& s : corpus) {
    const auto tokens = tokenize_words(s);
    std::string expected;
    for (const auto& t : tokens) expected += (expected.empty() ? "" : " ") + t;
    EXPECT_EQ(decode(encode(s, v, 64), v), expected);
  }
}

}  // namespace
}  // namespace kdvqa
