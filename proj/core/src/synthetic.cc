#include "kdvqa/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "kdvqa/error.h"
#include "kdvqa/rng.h"
#include "kdvqa/selection.h"

namespace kdvqa {
namespace {

enum class QuestionKind { kKeywordPR, kTitlePR, kCR };
enum class RefKind { kFigure, kTable };

struct Reference {
  RefKind kind;
  int number;
  int paragraph_index = -1;
};

struct Section {
  std::string topic;
  int cluster;
  int title_index = -1;
  std::vector<int> children;
};

struct Unit {
  bool reference;
};

struct DocumentPlan {
  DocumentRecord record;
  std::vector<Section> sections;
  std::vector<Reference> references;
};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

class Writer {
 public:
  Writer(const SyntheticConfig& cfg, const std::vector<std::string>& filler, Rng& rng)
      : cfg_(cfg), filler_(filler), rng_(rng) {}

  std::string word(int cluster) {
    // Cluster c owns filler words c, c + k, c + 2k, ...
    const auto k = static_cast<std::size_t>(cfg_.word_clusters);
    const auto c = static_cast<std::size_t>(cluster) % k;
    const std::size_t size = (filler_.size() - c + k - 1) / k;
    if (size == 0) return filler_[rng_.uniform_index(filler_.size())];
    return filler_[c + k * rng_.uniform_index(size)];
  }

  std::string filler_sentence(int cluster) {
    switch (rng_.uniform_index(4)) {
      case 0: return "The " + word(cluster) + " of the " + word(cluster) + " was " + word(cluster) + ".";
      case 1: return "We " + word(cluster) + " the " + word(cluster) + " with a " + word(cluster) + " " + word(cluster) + ".";
      case 2: return "Each " + word(cluster) + " is " + word(cluster) + " by the " + word(cluster) + ".";
      default: return "This " + word(cluster) + " shows how " + word(cluster) + " and " + word(cluster) + " " + word(cluster) + ".";
    }
  }

  std::string topic_sentence(const std::string& topic, int cluster) {
    if (rng_.bernoulli(0.5)) {
      return "This " + topic + " section covers the " + word(cluster) + " and the " + word(cluster) + ".";
    }
    return "In the " + topic + " we study the " + word(cluster) + ".";
  }

  std::string reference_sentence(const Reference& ref, const std::string& topic, int cluster) {
    const bool abbreviated = rng_.bernoulli(cfg_.abbreviation_rate);
    std::string name;
    if (ref.kind == RefKind::kFigure) {
      name = abbreviated ? "Fig." : "Figure";
    } else {
      name = abbreviated ? "Tab." : "Table";
    }
    name += " " + std::to_string(ref.number);
    switch (rng_.uniform_index(3)) {
      case 0: return "As shown in " + name + ", the " + topic + " " + word(cluster) + " is " + word(cluster) + ".";
      case 1: return name + " lists the " + topic + " " + word(cluster) + " of each " + word(cluster) + ".";
      default: return "The " + topic + " " + word(cluster) + " results are given in " + name + ".";
    }
  }

  std::string paragraph(const std::string& topic, int cluster, const Reference* ref) {
    std::vector<std::string> sentences;
    const auto extra = rng_.uniform_index(static_cast<std::uint64_t>(cfg_.max_filler_sentences) + 1);
    for (std::uint64_t i = 0; i < extra; ++i) sentences.push_back(filler_sentence(cluster));
    if (ref != nullptr) {
      const auto at = rng_.uniform_index(sentences.size() + 1);
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at),
                       reference_sentence(*ref, topic, cluster));
    }
    std::string text = topic_sentence(topic, cluster);
    for (const auto& s : sentences) text += " " + s;
    return text;
  }

  std::string table_cells(int cluster) {
    std::string text;
    for (int i = 0; i < 3; ++i) {
      if (i > 0) text += " ";
      text += word(cluster) + " " + std::to_string(rng_.uniform_int(10, 99));
    }
    return text;
  }

 private:
  const SyntheticConfig& cfg_;
  const std::vector<std::string>& filler_;
  Rng& rng_;
};

DocumentPlan build_document(const SyntheticConfig& cfg, const std::vector<std::string>& filler,
                            const std::vector<std::string>& topics, std::string doc_id, Split split,
                            int required_references, Rng& rng) {
  Writer writer(cfg, filler, rng);
  const int n = static_cast<int>(rng.uniform_int(cfg.rois_min, cfg.rois_max));
  const int section_cap = std::max(1, std::min(static_cast<int>(topics.size()), n / 2));
  const int section_count = std::clamp(static_cast<int>(std::lround(n / 4.0)), 1, section_cap);
  const int body = n - section_count;

  // Each reference consumes two slots (paragraph + object); every section
  // needs at least one unit.
  const int max_refs = std::max(0, std::min(body / 2, body - section_count));
  const double expected = cfg.reference_fraction * body / (1.0 + cfg.reference_fraction);
  int refs = static_cast<int>(std::floor(expected + rng.uniform()));
  refs = std::clamp(std::max({refs, required_references, 1}), 0,
                    std::min(max_refs, 2 * cfg.max_reference_number));
  const int plain = body - 2 * refs;

  std::vector<Unit> units;
  for (int i = 0; i < refs; ++i) units.push_back({true});
  for (int i = 0; i < plain; ++i) units.push_back({false});
  rng.shuffle(std::span<Unit>(units));

  std::vector<std::size_t> topic_order(topics.size());
  for (std::size_t i = 0; i < topic_order.size(); ++i) topic_order[i] = i;
  rng.shuffle(std::span<std::size_t>(topic_order));

  std::vector<std::vector<Unit>> per_section(static_cast<std::size_t>(section_count));
  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::size_t s = u < per_section.size() ? u : rng.uniform_index(per_section.size());
    per_section[s].push_back(units[u]);
  }

  // Unique (kind, number) pairs within the document.
  std::set<std::pair<int, int>> used;
  auto draw_reference = [&]() {
    for (;;) {
      Reference r{rng.bernoulli(0.5) ? RefKind::kFigure : RefKind::kTable,
                  static_cast<int>(rng.uniform_int(1, cfg.max_reference_number))};
      if (used.emplace(static_cast<int>(r.kind), r.number).second) return r;
    }
  };

  DocumentPlan plan;
  auto& doc = plan.record;
  doc.doc_id = std::move(doc_id);
  doc.split = split;
  auto add_roi = [&](RoiCategory category, std::string text, std::optional<int> parent) {
    RegionOfInterest roi;
    roi.index = static_cast<int>(doc.rois.size());
    roi.category = category;
    roi.page = roi.index / cfg.rois_per_page;
    roi.text = std::move(text);
    roi.parent_index = parent;
    const int slot = roi.index % cfg.rois_per_page;
    roi.bbox = BoundingBox{0.1, 0.05 + 0.22 * slot, 0.8, 0.2};
    doc.rois.push_back(std::move(roi));
    return doc.rois.back().index;
  };

  for (int s = 0; s < section_count; ++s) {
    Section section;
    const std::size_t topic_id = topic_order[static_cast<std::size_t>(s) % topic_order.size()];
    section.topic = topics[topic_id];
    section.cluster = static_cast<int>(topic_id % static_cast<std::size_t>(cfg.word_clusters));
    section.title_index = add_roi(RoiCategory::kTitle, capitalize(section.topic), std::nullopt);
    for (const Unit& unit : per_section[static_cast<std::size_t>(s)]) {
      if (!unit.reference) {
        section.children.push_back(add_roi(
            RoiCategory::kText, writer.paragraph(section.topic, section.cluster, nullptr),
            section.title_index));
        continue;
      }
      Reference ref = draw_reference();
      ref.paragraph_index = add_roi(
          RoiCategory::kText, writer.paragraph(section.topic, section.cluster, &ref),
          section.title_index);
      section.children.push_back(ref.paragraph_index);
      if (ref.kind == RefKind::kFigure) {
        add_roi(RoiCategory::kImage, "", ref.paragraph_index);
      } else {
        add_roi(RoiCategory::kTable, writer.table_cells(section.cluster), ref.paragraph_index);
      }
      plan.references.push_back(ref);
    }
    plan.sections.push_back(std::move(section));
  }
  doc.page_count = static_cast<int>(doc.rois.size() - 1) / cfg.rois_per_page + 1;
  return plan;
}

QuestionRecord make_question(const DocumentPlan& plan, QuestionKind kind, std::size_t pick,
                             std::string question_id, Rng& rng) {
  QuestionRecord q;
  q.question_id = std::move(question_id);
  q.doc_id = plan.record.doc_id;
  if (kind == QuestionKind::kKeywordPR) {
    const Reference& ref = plan.references[pick % plan.references.size()];
    const std::string name =
        (ref.kind == RefKind::kFigure ? "Figure " : "Table ") + std::to_string(ref.number);
    switch (rng.uniform_index(3)) {
      case 0: q.text = "Which paragraph refers to " + name + "?"; break;
      case 1: q.text = "Which text mentions " + name + "?"; break;
      default: q.text = "Where is " + name + " discussed?"; break;
    }
    q.category = QuestionCategory::kPR;
    q.answer_indices = {ref.paragraph_index};
    return q;
  }
  const Section& section = plan.sections[pick % plan.sections.size()];
  if (kind == QuestionKind::kTitlePR) {
    q.text = rng.bernoulli(0.5) ? "What is the title of the " + section.topic + " section?"
                                : "Which heading introduces the " + section.topic + " section?";
    q.category = QuestionCategory::kPR;
    q.answer_indices = {section.title_index};
    return q;
  }
  q.text = rng.bernoulli(0.5) ? "Which regions belong to the " + section.topic + " section?"
                              : "What does the " + section.topic + " section contain?";
  q.category = QuestionCategory::kCR;
  q.answer_indices.insert(section.children.begin(), section.children.end());
  return q;
}

}  // namespace

const std::vector<std::string>& default_filler_vocabulary() {
  static const std::vector<std::string> words = {
      "model",    "sample",   "protein",  "cell",     "signal",   "dose",     "patient",
      "gene",     "rate",     "level",    "method",   "group",    "response", "effect",
      "marker",   "tissue",   "value",    "factor",   "change",   "pathway",  "receptor",
      "measure",  "control",  "cohort",   "assay",    "strain",   "culture",  "variant",
      "therapy",  "outcome",  "score",    "index",    "profile",  "region",   "density",
      "growth",   "binding",  "activity", "function", "sequence", "structure", "network",
      "expression", "mutation", "treatment", "analysis", "stability", "transport", "volume",
      "weight",   "length",   "interval", "baseline", "trial",    "study",    "series",
      "image",    "contrast", "channel",  "layer",    "membrane", "enzyme",   "compound",
      "ligand",   "antibody", "serum",    "plasma",   "neuron",   "muscle",   "organ",
      "blood",    "liver",    "kidney",   "lung",     "heart",    "brain",    "bone",
      "skin",     "virus",    "host",     "vector",   "promoter", "domain",   "residue",
      "peak",     "slope",    "ratio",    "error",    "bias",     "range",    "period",
      "phase",    "state",    "cycle",    "flow",     "pressure", "stable",   "high",
      "low",      "early",    "late",     "strong",
  };
  return words;
}

const std::vector<std::string>& default_section_topics() {
  static const std::vector<std::string> topics = {
      "introduction", "background", "methods",     "results",    "discussion",
      "conclusion",   "evaluation", "experiments", "limitations", "overview",
  };
  return topics;
}

void SyntheticConfig::validate() const {
  int total_docs = 0;
  for (const auto& [split, n] : documents_per_split) {
    if (n < 0) fail(ErrorCode::kConfig, "documents_per_split must be non-negative");
    total_docs += n;
  }
  if (total_docs == 0) fail(ErrorCode::kConfig, "synthetic config has zero documents");
  const auto& filler = filler_vocabulary;
  if (filler.empty()) fail(ErrorCode::kConfig, "synthetic filler vocabulary is empty");
  const auto& topics = section_topics;
  if (topics.empty()) fail(ErrorCode::kConfig, "synthetic section topics are empty");
  const auto lexicon = KeywordLexicon::default_lexicon();
  for (const auto& w : filler) {
    if (w.empty()) fail(ErrorCode::kConfig, "filler words must be non-empty");
    if (contains_keyword(w, lexicon)) {
      fail(ErrorCode::kConfig, "filler word '" + w + "' is a keyword");
    }
  }
  for (const auto& t : topics) {
    if (t.empty() || contains_keyword(t, lexicon)) {
      fail(ErrorCode::kConfig, "invalid section topic '" + t + "'");
    }
  }
  if (rois_min < 4) fail(ErrorCode::kConfig, "rois_min must be at least 4");
  if (rois_max < rois_min) fail(ErrorCode::kConfig, "rois_max must be >= rois_min");
  if (rois_per_page < 1) fail(ErrorCode::kConfig, "rois_per_page must be positive");
  if (word_clusters < 1) fail(ErrorCode::kConfig, "word_clusters must be positive");
  if (max_reference_number < 2) fail(ErrorCode::kConfig, "max_reference_number must be >= 2");
  if (max_filler_sentences < 0) fail(ErrorCode::kConfig, "max_filler_sentences must be >= 0");
  if (reference_fraction < 0 || reference_fraction > 1) {
    fail(ErrorCode::kConfig, "reference_fraction must lie in [0, 1]");
  }
  if (abbreviation_rate < 0 || abbreviation_rate > 1) {
    fail(ErrorCode::kConfig, "abbreviation_rate must lie in [0, 1]");
  }
  if (questions_per_document < 0) fail(ErrorCode::kConfig, "questions_per_document must be >= 0");
  if (pr_weight < 0 || cr_weight < 0 || pr_weight + cr_weight == 0) {
    fail(ErrorCode::kConfig, "pr_weight/cr_weight must be non-negative and not both zero");
  }
  const double pr_share = static_cast<double>(pr_weight) / (pr_weight + cr_weight);
  if (keyword_question_fraction < 0 || keyword_question_fraction > pr_share + 1e-12) {
    fail(ErrorCode::kConfig, "keyword_question_fraction must lie in [0, PR share]");
  }
}

Corpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& filler = config.filler_vocabulary;
  const auto& topics = config.section_topics;
  Rng rng(derive_seed(seed, {hash_tag("synthetic")}));

  std::vector<DocumentRecord> documents;
  std::vector<QuestionRecord> questions;
  for (Split split : kAllSplits) {
    auto it = config.documents_per_split.find(split);
    const int docs = it == config.documents_per_split.end() ? 0 : it->second;
    if (docs == 0) continue;
    const int per_doc = config.questions_per_document;
    const int total = docs * per_doc;
    const int n_pr = static_cast<int>(
        std::lround(static_cast<double>(total) * config.pr_weight /
                    (config.pr_weight + config.cr_weight)));
    const int n_kw = std::min(
        n_pr, static_cast<int>(std::lround(total * config.keyword_question_fraction)));
    std::vector<QuestionKind> kinds;
    kinds.insert(kinds.end(), static_cast<std::size_t>(n_kw), QuestionKind::kKeywordPR);
    kinds.insert(kinds.end(), static_cast<std::size_t>(n_pr - n_kw), QuestionKind::kTitlePR);
    kinds.insert(kinds.end(), static_cast<std::size_t>(total - n_pr), QuestionKind::kCR);
    rng.shuffle(std::span<QuestionKind>(kinds));

    for (int d = 0; d < docs; ++d) {
      const auto first = kinds.begin() + static_cast<std::ptrdiff_t>(d) * per_doc;
      const std::vector<QuestionKind> doc_kinds(first, first + per_doc);
      const int keyword_count = static_cast<int>(
          std::count(doc_kinds.begin(), doc_kinds.end(), QuestionKind::kKeywordPR));
      char id[32];
      std::snprintf(id, sizeof(id), "%s-%04d", std::string(to_string(split)).c_str(), d);
      DocumentPlan plan = build_document(config, filler, topics, id, split, keyword_count, rng);

      std::vector<std::size_t> ref_order(plan.references.size());
      std::vector<std::size_t> section_order(plan.sections.size());
      for (std::size_t i = 0; i < ref_order.size(); ++i) ref_order[i] = i;
      for (std::size_t i = 0; i < section_order.size(); ++i) section_order[i] = i;
      rng.shuffle(std::span<std::size_t>(ref_order));
      rng.shuffle(std::span<std::size_t>(section_order));
      std::size_t next_ref = 0;
      std::size_t next_section = 0;
      for (int k = 0; k < per_doc; ++k) {
        const QuestionKind kind = doc_kinds[static_cast<std::size_t>(k)];
        std::size_t pick = 0;
        if (kind == QuestionKind::kKeywordPR) {
          pick = ref_order[next_ref++ % ref_order.size()];
        } else {
          pick = section_order[next_section++ % section_order.size()];
        }
        questions.push_back(
            make_question(plan, kind, pick, plan.record.doc_id + "-q" + std::to_string(k), rng));
      }
      documents.push_back(std::move(plan.record));
    }
  }
  return Corpus(std::move(documents), std::move(questions));
}

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  if (j.contains("documents_per_split")) {
    c.documents_per_split.clear();
    for (const auto& [name, n] : j.at("documents_per_split").items()) {
      c.documents_per_split[parse_split(name)] = n.get<int>();
    }
  }
  c.rois_min = j.value("rois_min", c.rois_min);
  c.rois_max = j.value("rois_max", c.rois_max);
  c.rois_per_page = j.value("rois_per_page", c.rois_per_page);
  c.filler_vocabulary = j.value("filler_vocabulary", c.filler_vocabulary);
  c.section_topics = j.value("section_topics", c.section_topics);
  c.word_clusters = j.value("word_clusters", c.word_clusters);
  c.reference_fraction = j.value("reference_fraction", c.reference_fraction);
  c.abbreviation_rate = j.value("abbreviation_rate", c.abbreviation_rate);
  c.max_reference_number = j.value("max_reference_number", c.max_reference_number);
  c.max_filler_sentences = j.value("max_filler_sentences", c.max_filler_sentences);
  c.questions_per_document = j.value("questions_per_document", c.questions_per_document);
  c.pr_weight = j.value("pr_weight", c.pr_weight);
  c.cr_weight = j.value("cr_weight", c.cr_weight);
  c.keyword_question_fraction = j.value("keyword_question_fraction", c.keyword_question_fraction);
  return c;
}

nlohmann::json to_json(const SyntheticConfig& c) {
  nlohmann::json splits;
  for (const auto& [split, n] : c.documents_per_split) splits[std::string(to_string(split))] = n;
  return {{"documents_per_split", splits},
          {"rois_min", c.rois_min},
          {"rois_max", c.rois_max},
          {"rois_per_page", c.rois_per_page},
          {"filler_vocabulary", c.filler_vocabulary},
          {"section_topics", c.section_topics},
          {"word_clusters", c.word_clusters},
          {"reference_fraction", c.reference_fraction},
          {"abbreviation_rate", c.abbreviation_rate},
          {"max_reference_number", c.max_reference_number},
          {"max_filler_sentences", c.max_filler_sentences},
          {"questions_per_document", c.questions_per_document},
          {"pr_weight", c.pr_weight},
          {"cr_weight", c.cr_weight},
          {"keyword_question_fraction", c.keyword_question_fraction}};
}

}  // namespace kdvqa
