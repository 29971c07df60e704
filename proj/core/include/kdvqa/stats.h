#pragma once

#include <cstddef>
#include <map>

#include <nlohmann/json_fwd.hpp>

#include "kdvqa/corpus.h"
#include "kdvqa/selection.h"

namespace kdvqa {

struct SplitStats {
  std::size_t documents = 0;
  std::size_t questions = 0;
  std::size_t pr_questions = 0;
  std::size_t cr_questions = 0;
  std::size_t keyword_questions = 0;
  std::map<RoiCategory, std::size_t> rois_by_category;

  bool operator==(const SplitStats&) const = default;
};

struct StatsReport {
  std::map<Split, SplitStats> splits;  // always holds all three splits
};

StatsReport corpus_stats(const Corpus& corpus,
                         const KeywordLexicon& lexicon = KeywordLexicon::default_lexicon());

nlohmann::json to_json(const StatsReport& report);
nlohmann::json to_json(const SelectionReport& report);

}  // namespace kdvqa
