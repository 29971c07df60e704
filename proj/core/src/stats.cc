#include "kdvqa/stats.h"

#include <nlohmann/json.hpp>

namespace kdvqa {

StatsReport corpus_stats(const Corpus& corpus, const KeywordLexicon& lexicon) {
  StatsReport report;
  for (auto split : kAllSplits) {
    auto& s = report.splits[split];
    for (auto c : kAllRoiCategories) s.rois_by_category[c] = 0;
  }
  for (const auto& doc : corpus.documents()) {
    auto& s = report.splits[doc.split];
    ++s.documents;
    for (const auto& roi : doc.rois) ++s.rois_by_category[roi.category];
  }
  for (const auto& q : corpus.questions()) {
    auto& s = report.splits[corpus.split_of(q)];
    ++s.questions;
    if (q.category == QuestionCategory::kPR) {
      ++s.pr_questions;
    } else {
      ++s.cr_questions;
    }
    if (question_has_keyword(q, lexicon)) ++s.keyword_questions;
  }
  return report;
}

nlohmann::json to_json(const StatsReport& report) {
  nlohmann::json j;
  for (const auto& [split, s] : report.splits) {
    nlohmann::json rois;
    for (const auto& [cat, n] : s.rois_by_category) rois[std::string(to_string(cat))] = n;
    j[std::string(to_string(split))] = {
        {"documents", s.documents},        {"questions", s.questions},
        {"pr_questions", s.pr_questions},  {"cr_questions", s.cr_questions},
        {"keyword_questions", s.keyword_questions}, {"rois", rois},
    };
  }
  return j;
}

nlohmann::json to_json(const SelectionReport& report) {
  return {{"total_sentences", report.total_sentences},
          {"selected_sentences", report.selected_sentences},
          {"keyword_hits", report.keyword_hits}};
}

}  // namespace kdvqa
