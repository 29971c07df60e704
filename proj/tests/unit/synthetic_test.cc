#include <regex>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "kdvqa/error.h"
#include "kdvqa/selection.h"
#include "kdvqa/synthetic.h"

namespace kdvqa {
namespace {

SyntheticConfig small(int train_docs) {
  SyntheticConfig c;
  c.documents_per_split = {{Split::kTrain, train_docs}, {Split::kValidation, 0}, {Split::kTest, 0}};
  return c;
}

TEST(Synthetic, SameSeedGivesIdenticalBytes) {
  const auto cfg = small(5);
  const Corpus a = generate_synthetic(cfg, 7);
  const Corpus b = generate_synthetic(cfg, 7);
  EXPECT_EQ(documents_jsonl(a), documents_jsonl(b));
  EXPECT_EQ(questions_jsonl(a), questions_jsonl(b));
  EXPECT_EQ(a.documents().size(), 5u);
  for (const auto& d : a.documents()) {
    EXPECT_GE(d.rois.size(), 8u);
    EXPECT_LE(d.rois.size(), 12u);
  }
  EXPECT_NE(documents_jsonl(a), documents_jsonl(generate_synthetic(cfg, 8)));
}

TEST(Synthetic, RatioFourToOneGivesEightyTwenty) {
  auto cfg = small(25);
  cfg.questions_per_document = 4;
  const Corpus c = generate_synthetic(cfg, 3);
  ASSERT_EQ(c.questions().size(), 100u);
  int pr = 0, cr = 0;
  for (const auto& q : c.questions()) (q.category == QuestionCategory::kPR ? pr : cr)++;
  EXPECT_EQ(pr, 80);
  EXPECT_EQ(cr, 20);
}

TEST(Synthetic, KeywordFractionNearConfigured) {
  auto cfg = small(250);
  cfg.keyword_question_fraction = 0.6;
  const Corpus c = generate_synthetic(cfg, 11);
  ASSERT_EQ(c.questions().size(), 1000u);
  const auto lexicon = KeywordLexicon::default_lexicon();
  int keyword = 0;
  for (const auto& q : c.questions()) keyword += question_has_keyword(q, lexicon) ? 1 : 0;
  EXPECT_GE(keyword, 550);
  EXPECT_LE(keyword, 650);
}

TEST(Synthetic, KeywordGoldRoiMentionsTheReferencedObject) {
  auto cfg = small(60);
  cfg.abbreviation_rate = 0.5;
  const Corpus c = generate_synthetic(cfg, 5);
  const std::regex ref(R"((Figure|Table) (\d+))");
  int checked = 0;
  for (const auto& q : c.questions()) {
    std::smatch m;
    if (!std::regex_search(q.text, m, ref)) continue;
    ASSERT_EQ(q.category, QuestionCategory::kPR);
    ASSERT_EQ(q.answer_indices.size(), 1u);
    const auto& text = c.at(q.doc_id).rois[static_cast<std::size_t>(*q.answer_indices.begin())].text;
    const std::string full = m[1].str() + " " + m[2].str();
    const std::string abbreviated = m[1].str().substr(0, 3) + ". " + m[2].str();
    // Whole-number match: "Figure 1" must not be satisfied by "Figure 12".
    const std::regex exact("(" + full + "|" + std::regex_replace(abbreviated, std::regex(R"(\.)"), R"(\.)") +
                           R"()(?!\d))");
    EXPECT_TRUE(std::regex_search(text, exact)) << q.text << " -> " << text;
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Synthetic, OnlyCrQuestionsHaveSeveralAnswers) {
  const Corpus c = generate_synthetic(small(80), 9);
  bool saw_multi = false;
  for (const auto& q : c.questions()) {
    if (q.category == QuestionCategory::kPR) EXPECT_EQ(q.answer_indices.size(), 1u) << q.text;
    if (q.answer_indices.size() > 1) saw_multi = true;
  }
  EXPECT_TRUE(saw_multi);
}

TEST(Synthetic, SplitsAndIdsFollowTheConfig) {
  SyntheticConfig cfg;
  cfg.documents_per_split = {{Split::kTrain, 3}, {Split::kValidation, 2}, {Split::kTest, 1}};
  const Corpus c = generate_synthetic(cfg, 1);
  EXPECT_EQ(c.documents_in(Split::kTrain).size(), 3u);
  EXPECT_EQ(c.documents_in(Split::kValidation).size(), 2u);
  EXPECT_EQ(c.documents_in(Split::kTest).size(), 1u);
  EXPECT_EQ(c.documents()[3].doc_id, "validation-0000");
}

TEST(Synthetic, FillerKnobBoundsParagraphLength) {
  auto cfg = small(20);
  cfg.max_filler_sentences = 0;
  const Corpus c = generate_synthetic(cfg, 2);
  const auto lexicon = KeywordLexicon::default_lexicon();
  for (const auto& d : c.documents()) {
    for (const auto& r : d.rois) {
      if (r.category != RoiCategory::kText) continue;
      // Topic sentence plus at most one reference sentence.
      EXPECT_LE(split_sentences(r.text, lexicon).size(), 2u) << r.text;
    }
  }
}

TEST(Synthetic, InvalidConfigsAreRejected) {
  auto expect_config_error = [](const SyntheticConfig& cfg) {
    try {
      generate_synthetic(cfg, 1);
      ADD_FAILURE() << "accepted an invalid config";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kConfig);
    }
  };
  expect_config_error(small(0));
  auto no_words = small(2);
  no_words.filler_vocabulary.clear();
  expect_config_error(no_words);
  auto keyword_filler = small(2);
  keyword_filler.filler_vocabulary = {"alpha", "tables"};
  expect_config_error(keyword_filler);
  auto bad_rois = small(2);
  bad_rois.rois_min = 10;
  bad_rois.rois_max = 9;
  expect_config_error(bad_rois);
}

TEST(Synthetic, ConfigJsonRoundTrip) {
  auto cfg = small(4);
  cfg.max_reference_number = 5;
  cfg.max_filler_sentences = 1;
  cfg.cr_weight = 2;
  const auto back = synthetic_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

}  // namespace
}  // namespace kdvqa
