#include "kdvqa/selection.h"

#include <algorithm>

#include "kdvqa/error.h"
#include "kdvqa/text.h"

namespace kdvqa {
namespace {

bool occurs_with_boundaries(std::string_view haystack, std::string_view entry) {
  const bool check_left = is_word_byte(entry.front());
  const bool check_right = is_word_byte(entry.back());
  for (std::size_t pos = haystack.find(entry); pos != std::string_view::npos;
       pos = haystack.find(entry, pos + 1)) {
    const bool left_ok = !check_left || pos == 0 || !is_word_byte(haystack[pos - 1]);
    const std::size_t end = pos + entry.size();
    const bool right_ok = !check_right || end == haystack.size() || !is_word_byte(haystack[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool starts_sentence(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

// True when the text up to and including `dot` ends with an abbreviation that
// begins at a word boundary.
bool ends_with_abbreviation(std::string_view text, std::size_t dot,
                            const std::vector<std::string>& abbreviations) {
  const std::string lowered = to_lower_ascii(text.substr(0, dot + 1));
  for (const auto& abbr : abbreviations) {
    if (lowered.size() < abbr.size()) continue;
    const std::size_t start = lowered.size() - abbr.size();
    if (lowered.compare(start, abbr.size(), abbr) != 0) continue;
    if (start == 0 || !is_word_byte(lowered[start - 1])) return true;
  }
  return false;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

KeywordLexicon::KeywordLexicon(std::set<std::string> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) fail(ErrorCode::kConfig, "keyword lexicon must not be empty");
  for (const auto& e : entries_) {
    if (e.empty()) fail(ErrorCode::kConfig, "keyword lexicon entries must be non-empty");
    if (to_lower_ascii(e) != e) {
      fail(ErrorCode::kConfig, "keyword lexicon entry '" + e + "' must be lowercase");
    }
  }
}

KeywordLexicon KeywordLexicon::default_lexicon() {
  return KeywordLexicon({"figure", "figures", "fig", "figs", "table", "tables", "tab", "tabs",
                         "fig.", "figs.", "tab.", "tabs."});
}

std::vector<std::string> KeywordLexicon::abbreviations() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.size() > 1 && e.back() == '.') out.push_back(e);
  }
  return out;
}

std::vector<std::string> matching_keywords(std::string_view sentence,
                                           const KeywordLexicon& lexicon) {
  const std::string lowered = to_lower_ascii(sentence);
  std::vector<std::string> hits;
  for (const auto& entry : lexicon.entries()) {
    if (occurs_with_boundaries(lowered, entry)) hits.push_back(entry);
  }
  return hits;
}

bool contains_keyword(std::string_view sentence, const KeywordLexicon& lexicon) {
  const std::string lowered = to_lower_ascii(sentence);
  return std::any_of(lexicon.entries().begin(), lexicon.entries().end(),
                     [&](const std::string& e) { return occurs_with_boundaries(lowered, e); });
}

std::vector<std::string> split_sentences(std::string_view text) {
  return split_sentences(text, KeywordLexicon::default_lexicon());
}

std::vector<std::string> split_sentences(std::string_view text, const KeywordLexicon& lexicon) {
  const auto abbreviations = lexicon.abbreviations();
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_sentence_end(text[i])) continue;
    std::size_t next = i + 1;
    if (next >= text.size() || !is_space(text[next])) continue;
    while (next < text.size() && is_space(text[next])) ++next;
    if (next >= text.size() || !starts_sentence(text[next])) continue;
    if (text[i] == '.' && ends_with_abbreviation(text, i, abbreviations)) continue;
    const auto sentence = trim(text.substr(start, i + 1 - start));
    if (!sentence.empty()) out.emplace_back(sentence);
    start = next;
    i = next - 1;
  }
  const auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

std::vector<std::string> split_sentences(const Corpus& corpus, Split split,
                                         const KeywordLexicon& lexicon) {
  std::vector<std::string> out;
  for (const auto* doc : corpus.documents_in(split)) {
    for (const auto& roi : doc->rois) {
      if (roi.text.empty()) continue;
      for (auto& s : split_sentences(roi.text, lexicon)) out.push_back(std::move(s));
    }
  }
  return out;
}

SelectionResult filter_sentences(const std::vector<std::string>& sentences,
                                 const KeywordLexicon& lexicon) {
  SelectionResult result;
  result.report.total_sentences = sentences.size();
  for (const auto& entry : lexicon.entries()) result.report.keyword_hits[entry] = 0;
  for (const auto& s : sentences) {
    const auto hits = matching_keywords(s, lexicon);
    if (hits.empty()) continue;
    for (const auto& h : hits) ++result.report.keyword_hits[h];
    result.sentences.push_back(s);
  }
  result.report.selected_sentences = result.sentences.size();
  return result;
}

SelectionResult filter_split_sentences(const Corpus& corpus, Split split,
                                       const KeywordLexicon& lexicon) {
  return filter_sentences(split_sentences(corpus, split, lexicon), lexicon);
}

SelectionResult filter_training_sentences(const Corpus& corpus, const KeywordLexicon& lexicon) {
  return filter_split_sentences(corpus, Split::kTrain, lexicon);
}

bool question_has_keyword(const QuestionRecord& question, const KeywordLexicon& lexicon) {
  return contains_keyword(question.text, lexicon);
}

}  // namespace kdvqa
