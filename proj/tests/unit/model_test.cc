#include <cmath>

#include <gtest/gtest.h>

#include "kdvqa/error.h"
#include "kdvqa/losses.h"
#include "kdvqa/mlm.h"
#include "kdvqa/model.h"
#include "kdvqa/ops.h"
#include "kdvqa/rng.h"

namespace kdvqa {
namespace {

EncoderConfig small_encoder(int vocab = 40, int d = 32) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.max_len = 24;
  c.hidden = d;
  c.heads = 4;
  c.ff = 2 * d;
  c.layers = 2;
  return c;
}

MatcherConfig small_matcher(int d = 32) {
  MatcherConfig c;
  c.layers = 2;
  c.heads = 4;
  c.hidden = d;
  c.ff = 2 * d;
  c.max_rois = 16;
  return c;
}

TokenSequence random_ids(std::size_t content, int vocab, Rng& rng) {
  TokenSequence s;
  s.ids.push_back(kClsId);
  for (std::size_t i = 0; i < content; ++i)
    s.ids.push_back(kSpecialTokenCount + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(vocab - kSpecialTokenCount))));
  s.ids.push_back(kSepId);
  return s;
}

Tensor random_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Real> v(n * d);
  for (auto& x : v) x = static_cast<Real>(rng.normal());
  return Tensor({n, d}, std::move(v));
}

std::vector<Real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Encoder, OutputShape) {
  const auto cfg = small_encoder();
  const Encoder enc(cfg, init_parameters(encoder_parameter_specs(cfg), 1));
  Rng rng(2);
  const auto h = enc.encode_sequence(random_ids(10, cfg.vocab_size, rng), nullptr);
  EXPECT_EQ(h.shape(), (Shape{12, 32}));
}

TEST(Encoder, EvalModeIsDeterministicTrainModeIsNot) {
  const auto cfg = small_encoder();
  const Encoder enc(cfg, init_parameters(encoder_parameter_specs(cfg), 1));
  Rng gen(3);
  const auto ids = random_ids(8, cfg.vocab_size, gen);
  EXPECT_EQ(values(enc.encode_sequence(ids, nullptr)), values(enc.encode_sequence(ids, nullptr)));
  Rng a(5), b(6);
  EXPECT_NE(values(enc.encode_sequence(ids, &a)), values(enc.encode_sequence(ids, &b)));
}

TEST(Encoder, TokenOrderMatters) {
  const auto cfg = small_encoder();
  const Encoder enc(cfg, init_parameters(encoder_parameter_specs(cfg), 1));
  TokenSequence s{{kClsId, 7, 8, 9, kSepId}};
  TokenSequence t{{kClsId, 9, 8, 7, kSepId}};
  const auto hs = enc.encode_sequence(s, nullptr), ht = enc.encode_sequence(t, nullptr);
  EXPECT_NE(values(slice(hs, 0, 0, 1)), values(slice(ht, 0, 0, 1)));
}

TEST(Encoder, PaddingDoesNotChangeValidPositions) {
  const auto cfg = small_encoder();
  const Encoder enc(cfg, init_parameters(encoder_parameter_specs(cfg), 1));
  Rng gen(4);
  const std::vector<TokenSequence> batch = {random_ids(3, cfg.vocab_size, gen), random_ids(9, cfg.vocab_size, gen)};
  std::size_t padded = 0;
  const auto h = enc.encode_batch(batch, nullptr, &padded);
  ASSERT_EQ(padded, 11u);
  const auto alone = enc.encode_sequence(batch[0], nullptr);
  const auto row = slice(h, 0, 0, 5);
  for (std::size_t i = 0; i < alone.numel(); ++i) EXPECT_NEAR(row.data()[i], alone.data()[i], 1e-5);
}

TEST(Encoder, TooLongSequenceIsRangeError) {
  const auto cfg = small_encoder();
  const Encoder enc(cfg, init_parameters(encoder_parameter_specs(cfg), 1));
  Rng gen(4);
  try {
    enc.encode_sequence(random_ids(30, cfg.vocab_size, gen), nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
  }
}

std::size_t encoder_count(std::size_t v, std::size_t len, std::size_t d, std::size_t ff, std::size_t layers) {
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t ffn = d * ff + ff + ff * d + d;
  return v * d + len * d + 2 * d + layers * (attention + 2 * d + ffn + 2 * d) + d * v + v;
}

std::size_t matcher_count(std::size_t rois, std::size_t d, std::size_t ff, std::size_t layers, bool positions) {
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t ffn = d * ff + ff + ff * d + d;
  return (positions ? rois * d : 0) + layers * (2 * attention + 3 * 2 * d + ffn) + d + 1;
}

TEST(Parameters, ClosedFormCounts) {
  const auto cfg = small_encoder();
  EXPECT_EQ(init_parameters(encoder_parameter_specs(cfg), 0).element_count(), encoder_count(40, 24, 32, 64, 2));
  auto m = small_matcher();
  EXPECT_EQ(init_parameters(matcher_parameter_specs(m), 0).element_count(), matcher_count(16, 32, 64, 2, true));
  m.roi_positions = false;
  EXPECT_EQ(init_parameters(matcher_parameter_specs(m), 0).element_count(), matcher_count(16, 32, 64, 2, false));
}

TEST(Parameters, RandomConfigsHaveConsistentShapes) {
  Rng rng(9);
  for (int t = 0; t < 8; ++t) {
    EncoderConfig cfg;
    cfg.heads = static_cast<int>(1 + rng.uniform_index(3));
    cfg.hidden = cfg.heads * static_cast<int>(2 + rng.uniform_index(4));
    cfg.ff = static_cast<int>(4 + rng.uniform_index(20));
    cfg.layers = static_cast<int>(1 + rng.uniform_index(2));
    cfg.vocab_size = static_cast<int>(6 + rng.uniform_index(30));
    cfg.max_len = static_cast<int>(4 + rng.uniform_index(10));
    const auto params = init_parameters(encoder_parameter_specs(cfg), t);
    EXPECT_EQ(params.element_count(), encoder_count(cfg.vocab_size, cfg.max_len, cfg.hidden, cfg.ff, cfg.layers));
    const Encoder enc(cfg, params);
    const std::size_t len = 2 + rng.uniform_index(static_cast<std::uint64_t>(cfg.max_len - 1));
    const auto h = enc.encode_sequence(random_ids(len - 2, cfg.vocab_size, rng), nullptr);
    EXPECT_EQ(h.shape(), (Shape{len, static_cast<std::size_t>(cfg.hidden)}));
    EXPECT_EQ(enc.mlm_logits(h).shape(), (Shape{len, static_cast<std::size_t>(cfg.vocab_size)}));
  }
}

TEST(Parameters, CheckRejectsWrongShapes) {
  const auto cfg = small_encoder();
  auto params = init_parameters(encoder_parameter_specs(cfg), 0);
  EXPECT_NO_THROW(check_parameters(params, encoder_parameter_specs(cfg)));
  auto other = cfg;
  other.vocab_size = 41;
  EXPECT_THROW(check_parameters(params, encoder_parameter_specs(other)), Error);
}

TEST(MlmHead, ZeroHeadGivesLogVocab) {
  const auto cfg = small_encoder();
  auto params = init_parameters(encoder_parameter_specs(cfg), 1);
  for (const auto* name : {"mlm_head.weight", "mlm_head.bias"}) {
    Tensor t = params.at(name);
    for (auto& v : t.data()) v = 0;
  }
  const Encoder enc(cfg, params);
  Rng gen(1);
  const auto h = enc.encode_sequence(random_ids(5, cfg.vocab_size, gen), nullptr);
  const std::vector<int> labels = {kIgnoreLabel, 10, 11, 12, 13, 14, kIgnoreLabel};
  EXPECT_NEAR(cross_entropy_masked(enc.mlm_logits(h), labels).item(), std::log(40.0), 1e-5);
}

TEST(Matcher, OneLogitPerRoi) {
  const auto cfg = small_matcher();
  const Matcher m(cfg, init_parameters(matcher_parameter_specs(cfg), 2));
  Rng rng(1);
  const auto logits = m.forward(random_rows(7, 32, rng), random_rows(5, 32, rng), nullptr);
  EXPECT_EQ(logits.shape(), (Shape{7}));
}

TEST(Matcher, PermutationEquivariantWithoutRoiPositions) {
  auto cfg = small_matcher();
  cfg.roi_positions = false;
  const Matcher m(cfg, init_parameters(matcher_parameter_specs(cfg), 2));
  Rng rng(2);
  const auto rois = random_rows(6, 32, rng), memory = random_rows(4, 32, rng);
  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  const auto base = m.forward(rois, memory, nullptr);
  const auto permuted = m.forward(embedding_lookup(rois, perm), memory, nullptr);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(permuted.data()[i], base.data()[perm[i]], 1e-5);
}

TEST(Matcher, TooManyRoisIsRangeError) {
  const auto cfg = small_matcher();
  const Matcher m(cfg, init_parameters(matcher_parameter_specs(cfg), 2));
  Rng rng(3);
  try {
    m.forward(random_rows(17, 32, rng), random_rows(3, 32, rng), nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
  }
}

TEST(PredictAnswerSet, Examples) {
  const std::vector<double> some = {2.0, -1.0, 0.5, -3.0};
  EXPECT_EQ(predict_answer_set<double>(some, 0.5), (std::set<int>{0, 2}));
  const std::vector<double> none = {-2.0, -0.5, -0.7};
  EXPECT_EQ(predict_answer_set<double>(none, 0.5), (std::set<int>{1}));
  const std::vector<double> tie = {-1.0, -1.0};
  EXPECT_EQ(predict_answer_set<double>(tie, 0.5), (std::set<int>{0}));
  EXPECT_TRUE(predict_answer_set<double>(std::vector<double>{}, 0.5).empty());
}

TEST(PredictAnswerSet, NeverEmpty) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> logits(1 + rng.uniform_index(10));
    for (auto& x : logits) x = rng.normal() * 4;
    const auto set = predict_answer_set<double>(logits, 0.5);
    EXPECT_FALSE(set.empty());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (logits[i] > 0) EXPECT_TRUE(set.contains(static_cast<int>(i)));
    }
  }
}

}  // namespace
}  // namespace kdvqa
