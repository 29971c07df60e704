#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace kdvqa {

enum class RoiCategory { kTitle, kText, kImage, kTable };
enum class Split { kTrain, kValidation, kTest };
enum class QuestionCategory { kPR, kCR };

inline constexpr std::array<Split, 3> kAllSplits = {Split::kTrain, Split::kValidation,
                                                   Split::kTest};
inline constexpr std::array<RoiCategory, 4> kAllRoiCategories = {
    RoiCategory::kTitle, RoiCategory::kText, RoiCategory::kImage, RoiCategory::kTable};

std::string_view to_string(RoiCategory c);
std::string_view to_string(Split s);
std::string_view to_string(QuestionCategory c);

// Parsers throw Error(kValidation) on unknown names.
RoiCategory parse_roi_category(std::string_view name);
Split parse_split(std::string_view name);
QuestionCategory parse_question_category(std::string_view name);

struct BoundingBox {
  double x = 0, y = 0, width = 0, height = 0;
  bool operator==(const BoundingBox&) const = default;
};

struct RegionOfInterest {
  int index = 0;
  RoiCategory category = RoiCategory::kText;
  int page = 0;
  std::string text;
  std::optional<int> parent_index;
  std::optional<BoundingBox> bbox;
  bool operator==(const RegionOfInterest&) const = default;
};

struct DocumentRecord {
  std::string doc_id;
  Split split = Split::kTrain;
  int page_count = 1;
  std::vector<RegionOfInterest> rois;
  bool operator==(const DocumentRecord&) const = default;
};

struct QuestionRecord {
  std::string question_id;
  std::string doc_id;
  std::string text;
  QuestionCategory category = QuestionCategory::kPR;
  std::set<int> answer_indices;
  bool operator==(const QuestionRecord&) const = default;
};

// Immutable once built. Documents keep file order; `find` is by id.
class Corpus {
 public:
  Corpus() = default;

  // Validates every record invariant and referential integrity; throws on the
  // first violation.
  Corpus(std::vector<DocumentRecord> documents, std::vector<QuestionRecord> questions);

  const std::vector<DocumentRecord>& documents() const { return documents_; }
  const std::vector<QuestionRecord>& questions() const { return questions_; }

  const DocumentRecord* find(std::string_view doc_id) const;
  const DocumentRecord& at(std::string_view doc_id) const;

  Split split_of(const QuestionRecord& q) const { return at(q.doc_id).split; }

  std::vector<const DocumentRecord*> documents_in(Split split) const;
  std::vector<const QuestionRecord*> questions_in(Split split) const;

  bool operator==(const Corpus& other) const {
    return documents_ == other.documents_ && questions_ == other.questions_;
  }

 private:
  std::vector<DocumentRecord> documents_;
  std::vector<QuestionRecord> questions_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

inline constexpr std::string_view kDocumentsFile = "documents.jsonl";
inline constexpr std::string_view kQuestionsFile = "questions.jsonl";

// Loads <dir>/documents.jsonl and <dir>/questions.jsonl. Every document split
// must be in `expected_splits` (empty set accepts all three).
Corpus load_corpus(const std::filesystem::path& dir, const std::set<Split>& expected_splits = {});

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// One JSON object per line, keys sorted; the same bytes write_corpus emits.
std::string documents_jsonl(const Corpus& corpus);
std::string questions_jsonl(const Corpus& corpus);

}  // namespace kdvqa
