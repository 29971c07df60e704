#include "kdvqa/evaluation.h"

#include <sstream>

#include "kdvqa/error.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

bool exact_match(const std::set<int>& predicted, const std::set<int>& gold) {
  if (gold.empty()) fail(ErrorCode::kPrecondition, "gold answer set is empty");
  return predicted == gold;
}

EvalReport evaluate_with_scorer(const Corpus& corpus, Split split, const KeywordLexicon& lexicon,
                                const EvalOptions& options, const QuestionScorer& scorer) {
  const auto questions = corpus.questions_in(split);
  EvalReport report;
  report.split = split;
  report.questions.resize(questions.size());
  parallel_for(questions.size(), options.workers, [&](std::size_t i) {
    const auto& q = *questions[i];
    const auto& doc = corpus.at(q.doc_id);
    auto& r = report.questions[i];
    r.question_id = q.question_id;
    r.doc_id = q.doc_id;
    r.category = q.category;
    r.keyword = question_has_keyword(q, lexicon);
    r.gold = q.answer_indices;
    const auto n = std::min(doc.rois.size(), static_cast<std::size_t>(options.max_rois));
    if (!gold_within(q, n)) {
      r.auto_miss = true;
      return;
    }
    const auto logits = scorer(q, doc, n);
    if (logits.size() != n) {
      fail(ErrorCode::kShape, "scorer returned " + std::to_string(logits.size()) + " logits for " +
                                  std::to_string(n) + " RoIs");
    }
    r.predicted = predict_answer_set(std::span<const double>(logits), options.threshold);
    r.match = exact_match(r.predicted, r.gold);
  });
  for (const auto& key : {"PR", "CR"}) report.by_category[key];
  for (const auto& key : {"keyword", "no_keyword"}) report.by_keyword[key];
  for (const auto& r : report.questions) {
    const std::size_t hit = r.match ? 1 : 0;
    for (auto* slice : {&report.overall, &report.by_category[std::string(to_string(r.category))],
                        &report.by_keyword[r.keyword ? "keyword" : "no_keyword"]}) {
      ++slice->total;
      slice->matches += hit;
    }
    if (r.auto_miss) ++report.auto_miss;
  }
  return report;
}

QuestionScorer random_logit_scorer(std::uint64_t seed) {
  return [seed](const QuestionRecord& q, const DocumentRecord&, std::size_t n) {
    Rng rng(derive_seed(seed, {hash_tag(q.question_id)}));
    std::vector<double> logits(n);
    for (auto& x : logits) x = -12.0 + 8.0 * rng.uniform();
    return logits;
  };
}

EvalReport evaluate_split(const Corpus& corpus, Split split, const Checkpoint* encoder_ckpt,
                          const Checkpoint& matcher_ckpt, const KeywordLexicon& lexicon,
                          const EmbeddingCache* cache, int workers) {
  const VqaModel model(matcher_ckpt);
  const auto fingerprint = encoder_fingerprint(matcher_ckpt);
  if (encoder_ckpt != nullptr && matcher_ckpt.meta.encoder_frozen &&
      encoder_fingerprint(*encoder_ckpt) != fingerprint) {
    fail(ErrorCode::kIntegrity, "the matcher checkpoint was trained on a different encoder checkpoint");
  }
  const auto& mcfg = *matcher_ckpt.matcher;
  EvalOptions options{mcfg.max_rois, mcfg.threshold, workers};
  return evaluate_with_scorer(corpus, split, lexicon, options,
                              [&](const QuestionRecord& q, const DocumentRecord& doc, std::size_t n) {
                                NoGradGuard no_grad;
                                const Tensor rois =
                                    roi_embeddings_for(doc, n, model.encoder(), matcher_ckpt.vocab, cache, fingerprint);
                                const Tensor logits = model.logits(rois, model.question_memory(q.text), nullptr);
                                return std::vector<double>(logits.data().begin(), logits.data().end());
                              });
}

namespace {

nlohmann::json slice_json(const SliceScore& s) {
  return {{"total", s.total}, {"matches", s.matches}, {"ema", s.ema()}};
}

std::string join(const std::set<int>& values, char sep) {
  std::string out;
  for (int v : values) {
    if (!out.empty()) out += sep;
    out += std::to_string(v);
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["split"] = to_string(report.split);
  j["overall"] = slice_json(report.overall);
  j["ema"] = report.overall.ema();
  j["auto_miss"] = report.auto_miss;
  for (const auto& [k, s] : report.by_category) j["by_category"][k] = slice_json(s);
  for (const auto& [k, s] : report.by_keyword) j["by_keyword"][k] = slice_json(s);
  j["questions"] = nlohmann::json::array();
  for (const auto& r : report.questions) {
    j["questions"].push_back({{"question_id", r.question_id},
                              {"doc_id", r.doc_id},
                              {"category", to_string(r.category)},
                              {"keyword", r.keyword},
                              {"auto_miss", r.auto_miss},
                              {"predicted", r.predicted},
                              {"gold", r.gold},
                              {"match", r.match}});
  }
  return j;
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "question_id,doc_id,category,keyword,auto_miss,predicted,gold,match\n";
  for (const auto& r : report.questions) {
    out << r.question_id << ',' << r.doc_id << ',' << to_string(r.category) << ',' << (r.keyword ? 1 : 0) << ','
        << (r.auto_miss ? 1 : 0) << ',' << join(r.predicted, ' ') << ',' << join(r.gold, ' ') << ','
        << (r.match ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
