#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdvqa/evaluation.h"
#include "kdvqa/selection.h"
#include "kdvqa/synthetic.h"
#include "kdvqa/training.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

// Everything the stages read. Built from a JSON tree; see README for keys.
struct PipelineConfig {
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 13;
  int workers = 1;
  std::set<std::string> lexicon;  // empty -> default lexicon
  SyntheticConfig synthetic;
  int vocab_max_size = 2000;
  int vocab_min_count = 1;
  EncoderConfig encoder;
  MatcherConfig matcher;
  TrainConfig mlm = TrainConfig::mlm_defaults();
  TrainConfig vqa = TrainConfig::vqa_defaults();
  bool write_csv = true;

  KeywordLexicon keyword_lexicon() const;
  // Throws Error(kConfig).
  void validate() const;
};

// Stage seeds not given explicitly are derived from the global seed and the
// stage name, so stages draw from independent streams.
PipelineConfig pipeline_config_from_json(const nlohmann::json& tree);
nlohmann::json to_json(const PipelineConfig& cfg);

nlohmann::json read_config_tree(const std::filesystem::path& path);
// "a.b.c=value"; value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& tree, std::string_view assignment);

std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage);

struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path vocabulary() const { return root / "vocab.json"; }
  std::filesystem::path encoder_checkpoint() const { return root / "mlm" / "encoder.ckpt"; }
  std::filesystem::path mlm_log() const { return root / "mlm" / "log.jsonl"; }
  std::filesystem::path mlm_summary() const { return root / "mlm" / "summary.json"; }
  std::filesystem::path mlm_timing() const { return root / "mlm" / "timing.jsonl"; }
  std::filesystem::path masked_dump() const { return root / "mlm" / "masked_train.jsonl"; }
  std::filesystem::path embedding_cache() const { return root / "embeddings.cache"; }
  std::filesystem::path matcher_checkpoint() const { return root / "vqa" / "matcher.ckpt"; }
  std::filesystem::path vqa_log() const { return root / "vqa" / "log.jsonl"; }
  std::filesystem::path vqa_summary() const { return root / "vqa" / "summary.json"; }
  std::filesystem::path vqa_timing() const { return root / "vqa" / "timing.jsonl"; }
  std::filesystem::path eval_report(Split split) const;
  std::filesystem::path eval_csv(Split split) const;
};

inline ArtifactPaths artifacts(const PipelineConfig& cfg) { return {cfg.output_dir}; }

// Stage runners. Each reads its inputs from disk, fails with
// Error(kMissingArtifact) naming the command that produces a missing input,
// and writes its outputs plus a manifest entry.
Corpus run_gen_synthetic(const PipelineConfig& cfg);
nlohmann::json run_filter_stats(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& sentences_out,
                                const std::optional<std::filesystem::path>& stats_out);
Vocabulary run_build_vocab(const PipelineConfig& cfg);
TrainLog run_train_mlm(const PipelineConfig& cfg, bool dump_masked = false);
EmbeddingCache run_build_embeddings(const PipelineConfig& cfg);
TrainLog run_train_vqa(const PipelineConfig& cfg);
EvalReport run_evaluate(const PipelineConfig& cfg, Split split);

// Texts the vocabulary is built from: train-split RoI texts (image
// placeholders included) and train-split question texts.
std::vector<std::string> vocabulary_sentences(const Corpus& corpus);

Corpus load_pipeline_corpus(const PipelineConfig& cfg);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
