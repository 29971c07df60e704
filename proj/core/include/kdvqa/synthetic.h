#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kdvqa/corpus.h"

namespace kdvqa {

const std::vector<std::string>& default_filler_vocabulary();
const std::vector<std::string>& default_section_topics();

// Knobs for the planted-structure corpus generator.
//
// A generated document is a sequence of sections. Each section opens with a
// title RoI naming its topic, followed by paragraphs (children of the title).
// Some paragraphs carry a sentence referencing "Figure k" or "Table k"; the
// referenced image or table RoI follows the paragraph and is its child.
//
// Questions come in three kinds:
//   keyword PR  "Which paragraph refers to Figure 3?"  -> the referencing paragraph
//   plain PR    "What is the title of the methods section?" -> the title RoI
//   CR          "Which regions belong to the methods section?" -> the title's children
struct SyntheticConfig {
  std::map<Split, int> documents_per_split = {
      {Split::kTrain, 5}, {Split::kValidation, 0}, {Split::kTest, 0}};
  int rois_min = 8;
  int rois_max = 12;
  int rois_per_page = 4;
  std::vector<std::string> filler_vocabulary = default_filler_vocabulary();
  std::vector<std::string> section_topics = default_section_topics();
  int word_clusters = 8;
  // Expected share of paragraphs that reference a figure or table.
  double reference_fraction = 0.3;
  // Share of references written as "Fig. k" / "Tab. k".
  double abbreviation_rate = 0.2;
  int max_reference_number = 9;
  // Filler sentences per paragraph are drawn from [0, max_filler_sentences].
  int max_filler_sentences = 2;
  int questions_per_document = 4;
  int pr_weight = 4;
  int cr_weight = 1;
  // Share of all questions that are keyword PR questions.
  double keyword_question_fraction = 0.6;

  // Throws Error(kConfig).
  void validate() const;
};

Corpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticConfig& config);

}  // namespace kdvqa
