#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdvqa/archive.h"
#include "kdvqa/corpus.h"
#include "kdvqa/model.h"
#include "kdvqa/tokenizer.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

enum class CheckpointKind { kEncoder, kMatcher };

struct CheckpointMetadata {
  double validation_loss = 0.0;
  int epoch = -1;  // -1 before any training
  std::uint64_t seed = 0;
  bool encoder_frozen = true;
  bool operator==(const CheckpointMetadata&) const = default;
};

// Encoder checkpoints hold encoder.* and mlm_head.*. Matcher checkpoints are
// self-contained: encoder.* (no MLM head) plus matcher.*.
struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kEncoder;
  EncoderConfig encoder;
  std::optional<MatcherConfig> matcher;
  Vocabulary vocab;
  ParameterSet params;
  CheckpointMetadata meta;
};

inline constexpr int kCheckpointVersion = 1;

// Parameter specs the checkpoint must cover exactly.
std::vector<ParameterSpec> checkpoint_specs(const Checkpoint& ckpt);

NamedTensorArchive to_archive(const Checkpoint& ckpt);
// Throws Error(kValidation) when the tensors do not match the configs.
Checkpoint checkpoint_from_archive(const NamedTensorArchive& archive, const std::string& origin = "checkpoint");

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Manifest summary without the parameter buffer: configs, metadata, vocabulary
// size, tensor shapes and the total parameter count.
nlohmann::json describe_checkpoint(const std::filesystem::path& path);

// CRC-32 over the encoder.* tensors and the pooling mode; identifies the
// embedding extractor.
std::uint32_t encoder_fingerprint(const Checkpoint& ckpt);

// Image RoIs carry no text and are embedded from this placeholder.
inline constexpr std::string_view kImagePlaceholder = "[image region]";
std::string_view embedding_text(const RegionOfInterest& roi);

// hidden [len, d] of one [CLS] ... [SEP] sequence -> [1, d].
Tensor pool_hidden(const Tensor& hidden, EmbeddingPooling pooling);

// Eval-mode text embedding, shape [d]; [CLS] or mean-pooled per the encoder
// config.
Tensor extract_embedding(std::string_view text, const Encoder& encoder, const Vocabulary& vocab);
Tensor extract_embedding(std::string_view text, const Checkpoint& ckpt);

// [n, d] stack of the first n RoI embeddings of a document.
Tensor document_embeddings(const DocumentRecord& doc, std::size_t n, const Encoder& encoder,
                           const Vocabulary& vocab);

// Encoder + matcher over a matcher checkpoint.
class VqaModel {
 public:
  explicit VqaModel(const Checkpoint& matcher_ckpt);

  const Encoder& encoder() const { return encoder_; }
  const Matcher& matcher() const { return matcher_; }

  // Eval-mode encoded question, [len, d].
  Tensor question_memory(std::string_view question) const;

  // roi_embeddings [n, d] -> logits [n]. Dropout is active when `rng` is given.
  Tensor logits(const Tensor& roi_embeddings, const Tensor& memory, Rng* rng) const;

 private:
  Vocabulary vocab_;
  Encoder encoder_;
  Matcher matcher_;
};

// roi_embeddings [n, d] scored against the question; train_mode enables
// dropout with a stream derived from `seed`.
Tensor match_logits(const Tensor& roi_embeddings, const TokenSequence& question_ids,
                    const Checkpoint& matcher_ckpt, bool train_mode, std::uint64_t seed = 0);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
