#include <cmath>

#include <gtest/gtest.h>

#include "kdvqa/error.h"
#include "kdvqa/mlm.h"
#include "kdvqa/rng.h"

namespace kdvqa {
namespace {

Vocabulary vocab_of(int content) {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (int i = 0; i < content; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary(tokens);
}

TokenSequence sequence(int content_tokens, int vocab_content, Rng& rng) {
  TokenSequence s;
  s.ids.push_back(kClsId);
  for (int i = 0; i < content_tokens; ++i) {
    s.ids.push_back(kSpecialTokenCount + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(vocab_content))));
  }
  s.ids.push_back(kSepId);
  return s;
}

TEST(MaskedCount, Examples) {
  EXPECT_EQ(masked_count(20), 3);
  EXPECT_EQ(masked_count(1), 1);
  EXPECT_EQ(masked_count(10), 2);  // 1.5 rounds half up
  EXPECT_EQ(masked_count(3), 1);
}

TEST(MaskedCount, RoundingBoundForAllLengths) {
  for (int m = 1; m <= 200; ++m) {
    const int k = masked_count(m);
    // Independent oracle: round-half-up of 0.15 m with a floor of one.
    const int oracle = std::max(1, static_cast<int>(std::floor(0.15 * m + 0.5 + 1e-9)));
    EXPECT_EQ(k, oracle) << m;
    const double rate = static_cast<double>(k) / m;
    EXPECT_GE(rate, 0.15 - 1.0 / m) << m;
    EXPECT_LE(rate, 0.15 + 1.0 / m) << m;
  }
}

TEST(MaskSequence, InvariantsHold) {
  const auto v = vocab_of(30);
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    auto src = sequence(1 + static_cast<int>(rng.uniform_index(40)), 30, rng);
    if (trial % 3 == 0) src.ids[1] = kUnkId;
    int maskable = 0;
    for (int id : src.ids) maskable += id >= kSpecialTokenCount ? 1 : 0;
    if (maskable == 0) continue;
    const auto ex = mask_sequence(src, v, rng);
    ASSERT_EQ(ex.input.size(), src.size());
    ASSERT_EQ(ex.labels.size(), src.size());
    int selected = 0;
    std::size_t action = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (ex.labels[i] == kIgnoreLabel) {
        EXPECT_EQ(ex.input.ids[i], src.ids[i]);
        continue;
      }
      ++selected;
      EXPECT_GE(src.ids[i], kSpecialTokenCount) << "selected a special position";
      EXPECT_EQ(ex.labels[i], src.ids[i]);
      ASSERT_LT(action, ex.actions.size());
      switch (ex.actions[action++]) {
        case MaskAction::kMask: EXPECT_EQ(ex.input.ids[i], kMaskId); break;
        case MaskAction::kKeep: EXPECT_EQ(ex.input.ids[i], src.ids[i]); break;
        case MaskAction::kRandom: EXPECT_GE(ex.input.ids[i], kSpecialTokenCount); break;
      }
    }
    EXPECT_EQ(selected, ex.selection_count);
    EXPECT_EQ(selected, masked_count(maskable));
  }
}

TEST(MaskSequence, NoMaskablePositionIsPreconditionError) {
  const auto v = vocab_of(3);
  Rng rng(2);
  try {
    mask_sequence({{kClsId, kUnkId, kSepId}}, v, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

TEST(MaskSequence, DeterministicForFixedState) {
  const auto v = vocab_of(50);
  Rng a(77), b(77), gen(5);
  const auto src = sequence(30, 50, gen);
  EXPECT_EQ(mask_sequence(src, v, a), mask_sequence(src, v, b));
}

TEST(MaskSequence, ActionFrequencies) {
  const auto v = vocab_of(200);
  Rng rng(2024);
  std::size_t counts[3] = {0, 0, 0};
  std::size_t total = 0;
  while (total < 120000) {
    const auto ex = mask_sequence(sequence(40, 200, rng), v, rng);
    for (auto a : ex.actions) ++counts[static_cast<int>(a)];
    total += ex.actions.size();
  }
  const double n = static_cast<double>(total);
  EXPECT_NEAR(counts[static_cast<int>(MaskAction::kMask)] / n, 0.8, 0.01);
  EXPECT_NEAR(counts[static_cast<int>(MaskAction::kRandom)] / n, 0.1, 0.01);
  EXPECT_NEAR(counts[static_cast<int>(MaskAction::kKeep)] / n, 0.1, 0.01);
}

TEST(MaskSequence, SelectionIsUniformOverPositions) {
  const auto v = vocab_of(20);
  Rng rng(31);
  Rng gen(1);
  const auto src = sequence(10, 20, gen);
  std::vector<int> hits(src.size(), 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const auto ex = mask_sequence(src, v, rng);
    for (std::size_t i = 0; i < src.size(); ++i) hits[i] += ex.labels[i] != kIgnoreLabel ? 1 : 0;
  }
  // k = 2 of 10 positions: each is selected with probability 0.2.
  for (std::size_t i = 1; i + 1 < src.size(); ++i) EXPECT_NEAR(hits[i] / double(trials), 0.2, 0.015);
  EXPECT_EQ(hits.front(), 0);
  EXPECT_EQ(hits.back(), 0);
}

TEST(MlmDataset, SkipsEmptySentences) {
  const auto v = build_vocab({"alpha beta gamma"}, 20, 1);
  const auto ds = build_mlm_dataset(std::vector<std::string>{"alpha beta", "", "gamma"}, v, 16, 9);
  EXPECT_EQ(ds.examples.size(), 2u);
  EXPECT_EQ(ds.skipped, 1u);
  EXPECT_EQ(ds.source_index, (std::vector<std::size_t>{0, 2}));
  EXPECT_THROW(build_mlm_dataset(std::vector<std::string>{"", "zzz"}, v, 16, 9), Error);
}

TEST(MlmDataset, DeterministicAndSeedSensitive) {
  std::vector<std::string> sentences;
  std::string words;
  for (int i = 0; i < 12; ++i) words += "w" + std::to_string(i) + " ";
  for (int i = 0; i < 50; ++i) sentences.push_back(words);
  const auto v = build_vocab(sentences, 50, 1);
  const auto a = build_mlm_dataset(sentences, v, 32, 100);
  const auto b = build_mlm_dataset(sentences, v, 32, 100);
  const auto c = build_mlm_dataset(sentences, v, 32, 101);
  ASSERT_EQ(a.examples.size(), 50u);
  EXPECT_EQ(a.examples, b.examples);
  EXPECT_NE(a.examples, c.examples);
  // Per-sentence streams: a subset reproduces the matching examples.
  std::vector<TokenSequence> seqs;
  for (const auto& s : sentences) seqs.push_back(encode(s, v, 32));
  const auto d = build_mlm_dataset(seqs, v, 100);
  EXPECT_EQ(d.examples, a.examples);
}

}  // namespace
}  // namespace kdvqa
