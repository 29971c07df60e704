#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdvqa/checkpoint.h"
#include "kdvqa/corpus.h"
#include "kdvqa/mlm.h"
#include "kdvqa/selection.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

// Runs fn(0..n-1) on up to `workers` threads. fn must only write to slots it
// owns; the first exception (by index) is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

enum class TrainStage { kMlm, kVqa };
enum class OptimizerKind { kAdam, kAdamW };

struct TrainConfig {
  TrainStage stage = TrainStage::kMlm;
  int epochs = 50;
  double lr = 1e-4;
  double weight_decay = 0.01;
  OptimizerKind optimizer = OptimizerKind::kAdamW;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool remask_each_epoch = true;  // mlm only
  double clip_grad_norm = 0.0;    // 0 disables clipping
  bool freeze_encoder = true;     // vqa only

  static TrainConfig mlm_defaults();
  static TrainConfig vqa_defaults();
  // Throws Error(kConfig).
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Keys absent from `j` keep the values of `defaults`.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  bool improved = false;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  // Eval-mode losses of the freshly initialized model.
  double initial_train_loss = 0.0;
  double initial_validation_loss = 0.0;
  std::size_t train_examples = 0;
  std::size_t validation_examples = 0;
  std::size_t skipped = 0;  // sentences without content tokens, or truncation-dropped questions
};

// Index of the smallest validation loss; ties go to the earliest epoch.
int best_epoch_of(const std::vector<EpochRecord>& epochs);

// One JSON object per epoch. Wall-clock seconds are included only on request
// so that the default log is reproducible byte for byte.
std::string train_log_jsonl(const TrainLog& log, bool include_seconds = false);
nlohmann::json train_log_summary(const TrainLog& log);

struct TrainHooks {
  // Called with the new best checkpoint whenever validation loss improves.
  std::function<void(const Checkpoint&, const EpochRecord&)> on_improvement;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;  // best by validation loss
  TrainLog log;
};

// Keyword-filtered train sentences, validated on the keyword-filtered
// validation split. Throws Error(kPrecondition) when the filter selects
// nothing.
TrainResult train_mlm(const Corpus& corpus, const KeywordLexicon& lexicon, const Vocabulary& vocab,
                      const EncoderConfig& enc_cfg, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Same loop over explicit sentence lists.
TrainResult train_mlm_on_sentences(const std::vector<std::string>& train_sentences,
                                   const std::vector<std::string>& validation_sentences,
                                   const Vocabulary& vocab, const EncoderConfig& enc_cfg,
                                   const TrainConfig& cfg, const TrainHooks& hooks = {});

// The fixed validation masking used by training (one mask per sentence, seeded
// from the training seed).
MlmDataset mlm_validation_dataset(const std::vector<std::string>& sentences, const Vocabulary& vocab,
                                  int max_len, std::uint64_t train_seed);

// Eval-mode cross-entropy averaged over every selected token of the dataset.
double mlm_loss(const Checkpoint& ckpt, const MlmDataset& dataset, int batch_size);

// Per-document RoI embeddings keyed by doc id (row i = RoI i), tagged with the
// fingerprint of the encoder that produced them.
struct EmbeddingCache {
  std::uint32_t fingerprint = 0;
  int hidden = 0;
  std::map<std::string, Tensor> documents;

  // Throws Error(kMissingArtifact) when the document is absent.
  const Tensor& at(const std::string& doc_id) const;
  std::size_t vector_count() const;
};

EmbeddingCache build_embedding_cache(const Corpus& corpus, const Checkpoint& ckpt, int workers = 1);
NamedTensorArchive to_archive(const EmbeddingCache& cache);
EmbeddingCache embedding_cache_from_archive(const NamedTensorArchive& archive);
void write_embedding_cache(const EmbeddingCache& cache, const std::filesystem::path& path);
EmbeddingCache read_embedding_cache(const std::filesystem::path& path);

// First n rows of the cached embeddings, or freshly computed ones when the
// cache is absent or was built by a different encoder.
Tensor roi_embeddings_for(const DocumentRecord& doc, std::size_t n, const Encoder& encoder,
                          const Vocabulary& vocab, const EmbeddingCache* cache, std::uint32_t fingerprint);

// Number of leading RoIs the matcher sees, and whether the gold set survives.
std::size_t usable_roi_count(const DocumentRecord& doc, const MatcherConfig& cfg);
bool gold_within(const QuestionRecord& q, std::size_t n);

// Matcher on top of the (by default frozen) encoder checkpoint; BCE per
// question, mean over the batch. Throws Error(kPrecondition) when every train
// question is dropped.
TrainResult train_vqa(const Corpus& corpus, const Checkpoint& encoder_ckpt, const MatcherConfig& match_cfg,
                      const TrainConfig& cfg, const EmbeddingCache* cache = nullptr,
                      const TrainHooks& hooks = {}, int workers = 1);

// Eval-mode mean BCE over the usable questions of a split.
double vqa_loss(const Checkpoint& matcher_ckpt, const Corpus& corpus, Split split,
                const EmbeddingCache* cache = nullptr, int workers = 1);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
