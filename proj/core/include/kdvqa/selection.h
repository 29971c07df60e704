#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kdvqa/corpus.h"

namespace kdvqa {

// Case-insensitive, word-boundary keyword set. Entries are stored lowercase;
// an entry ending in '.' only matches when the period is present in the text.
class KeywordLexicon {
 public:
  // Throws Error(kConfig) for an empty set, empty entries or entries with
  // uppercase ASCII letters.
  explicit KeywordLexicon(std::set<std::string> entries);

  // figure(s), fig(s), table(s), tab(s), plus the period-suffixed abbreviations.
  static KeywordLexicon default_lexicon();

  const std::set<std::string>& entries() const { return entries_; }

  // Period-suffixed entries; these never end a sentence.
  std::vector<std::string> abbreviations() const;

 private:
  std::set<std::string> entries_;
};

struct SelectionReport {
  std::size_t total_sentences = 0;
  std::size_t selected_sentences = 0;
  // Number of selected sentences each entry occurs in.
  std::map<std::string, std::size_t> keyword_hits;
};

struct SelectionResult {
  std::vector<std::string> sentences;
  SelectionReport report;
};

bool contains_keyword(std::string_view sentence, const KeywordLexicon& lexicon);

// Entries of `lexicon` occurring in `sentence`.
std::vector<std::string> matching_keywords(std::string_view sentence, const KeywordLexicon& lexicon);

// Splits after '.', '!' or '?' when followed by whitespace and then an
// uppercase ASCII letter or digit. Tokens ending in one of the lexicon's
// abbreviations ("Fig.", "tabs.") never end a sentence.
std::vector<std::string> split_sentences(std::string_view text);
std::vector<std::string> split_sentences(std::string_view text, const KeywordLexicon& lexicon);

// Every sentence of every non-empty train-split RoI text, in document, RoI and
// sentence order.
std::vector<std::string> split_sentences(const Corpus& corpus, Split split,
                                         const KeywordLexicon& lexicon);

SelectionResult filter_sentences(const std::vector<std::string>& sentences,
                                 const KeywordLexicon& lexicon);

SelectionResult filter_training_sentences(const Corpus& corpus, const KeywordLexicon& lexicon);

// Same rule applied to an arbitrary split (validation sentences for MLM).
SelectionResult filter_split_sentences(const Corpus& corpus, Split split,
                                       const KeywordLexicon& lexicon);

bool question_has_keyword(const QuestionRecord& question, const KeywordLexicon& lexicon);

}  // namespace kdvqa
