#include "kdvqa/corpus.h"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kdvqa/error.h"

namespace kdvqa {
namespace {

using nlohmann::json;

template <typename T>
T require(const json& obj, const char* key) {
  if (!obj.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return obj.at(key).get<T>();
}

RegionOfInterest parse_roi(const json& j) {
  RegionOfInterest roi;
  roi.index = require<int>(j, "index");
  roi.category = parse_roi_category(require<std::string>(j, "category"));
  roi.page = require<int>(j, "page");
  roi.text = j.value("text", std::string());
  if (j.contains("parent_index") && !j.at("parent_index").is_null()) {
    roi.parent_index = j.at("parent_index").get<int>();
  }
  if (j.contains("bbox") && !j.at("bbox").is_null()) {
    const auto v = j.at("bbox").get<std::vector<double>>();
    if (v.size() != 4) throw std::invalid_argument("bbox must have four numbers");
    roi.bbox = BoundingBox{v[0], v[1], v[2], v[3]};
  }
  return roi;
}

DocumentRecord parse_document(const json& j) {
  DocumentRecord doc;
  doc.doc_id = require<std::string>(j, "doc_id");
  doc.split = parse_split(require<std::string>(j, "split"));
  doc.page_count = require<int>(j, "page_count");
  for (const auto& r : j.at("rois")) doc.rois.push_back(parse_roi(r));
  return doc;
}

QuestionRecord parse_question(const json& j) {
  QuestionRecord q;
  q.question_id = require<std::string>(j, "question_id");
  q.doc_id = require<std::string>(j, "doc_id");
  q.text = require<std::string>(j, "text");
  q.category = parse_question_category(require<std::string>(j, "category"));
  for (int i : j.at("answer_indices").get<std::vector<int>>()) q.answer_indices.insert(i);
  return q;
}

json to_json(const RegionOfInterest& roi) {
  json j;
  j["index"] = roi.index;
  j["category"] = to_string(roi.category);
  j["page"] = roi.page;
  j["text"] = roi.text;
  if (roi.parent_index) j["parent_index"] = *roi.parent_index;
  if (roi.bbox) j["bbox"] = {roi.bbox->x, roi.bbox->y, roi.bbox->width, roi.bbox->height};
  return j;
}

json to_json(const DocumentRecord& doc) {
  json j;
  j["doc_id"] = doc.doc_id;
  j["split"] = to_string(doc.split);
  j["page_count"] = doc.page_count;
  j["rois"] = json::array();
  for (const auto& roi : doc.rois) j["rois"].push_back(to_json(roi));
  return j;
}

json to_json(const QuestionRecord& q) {
  json j;
  j["question_id"] = q.question_id;
  j["doc_id"] = q.doc_id;
  j["text"] = q.text;
  j["category"] = to_string(q.category);
  j["answer_indices"] = std::vector<int>(q.answer_indices.begin(), q.answer_indices.end());
  return j;
}

// Calls `on_line(json, line_number)` for every non-blank line; parse and
// field errors are rethrown as format errors naming file and line.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& on_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      on_line(json::parse(line), line_number);
    } catch (const Error& e) {
      throw Error(e.code(), path.filename().string() + ":" + std::to_string(line_number) + ": " +
                                e.what());
    } catch (const std::exception& e) {
      fail(ErrorCode::kFormat, path.filename().string() + ":" + std::to_string(line_number) +
                                   ": malformed record: " + e.what());
    }
  }
}

void validate_document(const DocumentRecord& doc) {
  const std::string where = "document '" + doc.doc_id + "'";
  if (doc.doc_id.empty()) fail(ErrorCode::kValidation, "empty doc_id");
  if (doc.page_count < 1) fail(ErrorCode::kValidation, where + ": page_count must be positive");
  const int n = static_cast<int>(doc.rois.size());
  for (int i = 0; i < n; ++i) {
    const auto& roi = doc.rois[static_cast<std::size_t>(i)];
    const std::string at = where + " roi " + std::to_string(roi.index);
    if (roi.index != i) {
      fail(ErrorCode::kValidation, where + ": roi indices must be contiguous 0..n-1 in order, got " +
                                       std::to_string(roi.index) + " at position " +
                                       std::to_string(i));
    }
    if (roi.page < 0 || roi.page >= doc.page_count) {
      fail(ErrorCode::kValidation, at + ": page " + std::to_string(roi.page) + " outside 0.." +
                                       std::to_string(doc.page_count - 1));
    }
    if (roi.text.empty() && roi.category != RoiCategory::kImage) {
      fail(ErrorCode::kValidation, at + ": empty text is only allowed for image regions");
    }
    if (roi.parent_index) {
      const int p = *roi.parent_index;
      if (p == i) fail(ErrorCode::kValidation, at + ": roi cannot be its own parent");
      if (p < 0 || p >= n) {
        fail(ErrorCode::kIntegrity, at + ": parent_index " + std::to_string(p) + " does not exist");
      }
    }
    if (roi.bbox) {
      const auto& b = *roi.bbox;
      if (b.x < 0 || b.y < 0 || b.width < 0 || b.height < 0) {
        fail(ErrorCode::kValidation, at + ": bbox values must be non-negative");
      }
    }
  }
  // Parent chains: walking up more than n steps means a cycle.
  for (int i = 0; i < n; ++i) {
    int steps = 0;
    std::optional<int> cur = doc.rois[static_cast<std::size_t>(i)].parent_index;
    while (cur) {
      if (++steps > n) {
        fail(ErrorCode::kValidation, where + ": parent cycle through roi " + std::to_string(i));
      }
      cur = doc.rois[static_cast<std::size_t>(*cur)].parent_index;
    }
  }
}

}  // namespace

std::string_view to_string(RoiCategory c) {
  switch (c) {
    case RoiCategory::kTitle: return "title";
    case RoiCategory::kText: return "text";
    case RoiCategory::kImage: return "image";
    case RoiCategory::kTable: return "table";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string_view to_string(QuestionCategory c) {
  return c == QuestionCategory::kPR ? "PR" : "CR";
}

RoiCategory parse_roi_category(std::string_view name) {
  for (auto c : kAllRoiCategories) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorCode::kValidation, "unknown roi category '" + std::string(name) +
                                   "' (expected title, text, image or table)");
}

Split parse_split(std::string_view name) {
  for (auto s : kAllSplits) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorCode::kValidation, "unknown split '" + std::string(name) + "'");
}

QuestionCategory parse_question_category(std::string_view name) {
  if (name == "PR") return QuestionCategory::kPR;
  if (name == "CR") return QuestionCategory::kCR;
  fail(ErrorCode::kValidation, "unknown question category '" + std::string(name) + "'");
}

Corpus::Corpus(std::vector<DocumentRecord> documents, std::vector<QuestionRecord> questions)
    : documents_(std::move(documents)), questions_(std::move(questions)) {
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    validate_document(documents_[i]);
    if (!by_id_.emplace(documents_[i].doc_id, i).second) {
      fail(ErrorCode::kDuplicate, "duplicate doc_id '" + documents_[i].doc_id + "'");
    }
  }
  std::set<std::string, std::less<>> question_ids;
  for (const auto& q : questions_) {
    if (!question_ids.insert(q.question_id).second) {
      fail(ErrorCode::kDuplicate, "duplicate question_id '" + q.question_id + "'");
    }
    const DocumentRecord* doc = find(q.doc_id);
    if (doc == nullptr) {
      fail(ErrorCode::kIntegrity, "question '" + q.question_id + "' references unknown document '" +
                                      q.doc_id + "'");
    }
    if (q.answer_indices.empty()) {
      fail(ErrorCode::kValidation, "question '" + q.question_id + "' has no answer indices");
    }
    for (int a : q.answer_indices) {
      if (a < 0 || a >= static_cast<int>(doc->rois.size())) {
        fail(ErrorCode::kIntegrity, "question '" + q.question_id + "' answer index " +
                                        std::to_string(a) + " not in document '" + q.doc_id + "'");
      }
    }
  }
}

const DocumentRecord* Corpus::find(std::string_view doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

const DocumentRecord& Corpus::at(std::string_view doc_id) const {
  const DocumentRecord* doc = find(doc_id);
  if (doc == nullptr) fail(ErrorCode::kIntegrity, "unknown document '" + std::string(doc_id) + "'");
  return *doc;
}

std::vector<const DocumentRecord*> Corpus::documents_in(Split split) const {
  std::vector<const DocumentRecord*> out;
  for (const auto& d : documents_) {
    if (d.split == split) out.push_back(&d);
  }
  return out;
}

std::vector<const QuestionRecord*> Corpus::questions_in(Split split) const {
  std::vector<const QuestionRecord*> out;
  for (const auto& q : questions_) {
    if (split_of(q) == split) out.push_back(&q);
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& dir, const std::set<Split>& expected_splits) {
  std::vector<DocumentRecord> documents;
  std::vector<QuestionRecord> questions;
  const auto doc_path = dir / kDocumentsFile;
  const auto question_path = dir / kQuestionsFile;
  if (!std::filesystem::exists(doc_path)) {
    fail(ErrorCode::kIo, "corpus directory " + dir.string() + " has no " + std::string(kDocumentsFile));
  }
  if (!std::filesystem::exists(question_path)) {
    fail(ErrorCode::kIo, "corpus directory " + dir.string() + " has no " + std::string(kQuestionsFile));
  }
  for_each_json_line(doc_path, [&](const json& j, int) {
    auto doc = parse_document(j);
    if (!expected_splits.empty() && !expected_splits.contains(doc.split)) {
      fail(ErrorCode::kValidation, "document '" + doc.doc_id + "' has unexpected split '" +
                                       std::string(to_string(doc.split)) + "'");
    }
    validate_document(doc);
    documents.push_back(std::move(doc));
  });
  for_each_json_line(question_path,
                     [&](const json& j, int) { questions.push_back(parse_question(j)); });
  return Corpus(std::move(documents), std::move(questions));
}

std::string documents_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    out += to_json(d).dump();
    out += '\n';
  }
  return out;
}

std::string questions_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& q : corpus.questions()) {
    out += to_json(q).dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
    out << text;
  };
  write(dir / kDocumentsFile, documents_jsonl(corpus));
  write(dir / kQuestionsFile, questions_jsonl(corpus));
}

}  // namespace kdvqa
