#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdvqa/checkpoint.h"
#include "kdvqa/corpus.h"
#include "kdvqa/selection.h"
#include "kdvqa/training.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

// Set equality. Throws Error(kPrecondition) for an empty gold set.
bool exact_match(const std::set<int>& predicted, const std::set<int>& gold);

struct QuestionResult {
  std::string question_id;
  std::string doc_id;
  QuestionCategory category = QuestionCategory::kPR;
  bool keyword = false;
  bool auto_miss = false;  // gold beyond the RoI truncation limit
  std::set<int> predicted;
  std::set<int> gold;
  bool match = false;
};

struct SliceScore {
  std::size_t total = 0;
  std::size_t matches = 0;
  double ema() const { return total == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(total); }
};

struct EvalReport {
  Split split = Split::kValidation;
  SliceScore overall;
  std::map<std::string, SliceScore> by_category;  // "PR", "CR"
  std::map<std::string, SliceScore> by_keyword;   // "keyword", "no_keyword"
  std::size_t auto_miss = 0;
  std::vector<QuestionResult> questions;
};

// Logits over the first n RoIs of the question's document.
using QuestionScorer =
    std::function<std::vector<double>(const QuestionRecord& q, const DocumentRecord& doc, std::size_t n)>;

struct EvalOptions {
  int max_rois = 64;
  double threshold = 0.5;
  int workers = 1;
};

// Scores every question of the split in corpus order.
EvalReport evaluate_with_scorer(const Corpus& corpus, Split split, const KeywordLexicon& lexicon,
                                const EvalOptions& options, const QuestionScorer& scorer);

// Logits drawn uniformly below the threshold, so every prediction is the
// top-1 fallback at a uniformly random RoI.
QuestionScorer random_logit_scorer(std::uint64_t seed);

// Uses the matcher checkpoint's own encoder. With a frozen-encoder matcher and
// an encoder checkpoint supplied, the two encoders must agree.
EvalReport evaluate_split(const Corpus& corpus, Split split, const Checkpoint* encoder_ckpt,
                          const Checkpoint& matcher_ckpt, const KeywordLexicon& lexicon,
                          const EmbeddingCache* cache = nullptr, int workers = 1);

nlohmann::json to_json(const EvalReport& report);
// question_id,doc_id,category,keyword,auto_miss,predicted,gold,match
std::string to_csv(const EvalReport& report);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
