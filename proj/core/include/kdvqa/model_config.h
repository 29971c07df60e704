#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <span>

#include <nlohmann/json_fwd.hpp>

namespace kdvqa {

// Which hidden states make a text's embedding: the [CLS] position, or the
// mean over content positions ([CLS] for empty text).
enum class EmbeddingPooling { kCls, kMean };

struct EncoderConfig {
  int vocab_size = 0;
  int max_len = 64;
  int hidden = 64;
  int heads = 4;
  int ff = 128;
  int layers = 2;
  double dropout = 0.1;
  EmbeddingPooling embedding_pooling = EmbeddingPooling::kCls;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

enum class QuestionMemory { kSequence, kPooled };

struct MatcherConfig {
  int layers = 5;
  int heads = 4;
  int hidden = 64;  // must equal the encoder's hidden size
  int ff = 128;
  int max_rois = 64;
  double threshold = 0.5;
  double dropout = 0.1;
  bool roi_positions = true;
  // kSequence attends over every question token; kPooled over their mean.
  QuestionMemory question_memory = QuestionMemory::kSequence;

  void validate() const;
  bool operator==(const MatcherConfig&) const = default;
};

nlohmann::json to_json(const EncoderConfig& c);
nlohmann::json to_json(const MatcherConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig defaults = {});
MatcherConfig matcher_config_from_json(const nlohmann::json& j, MatcherConfig defaults = {});

// Never-empty prediction rule: every index whose sigmoid exceeds the threshold,
// or the first argmax when none does.
template <typename T>
std::set<int> predict_answer_set(std::span<const T> logits, double threshold) {
  std::set<int> out;
  if (logits.empty()) return out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = static_cast<double>(logits[i]);
    const double p = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    if (p > threshold) out.insert(static_cast<int>(i));
    if (logits[i] > logits[best]) best = i;
  }
  if (out.empty()) out.insert(static_cast<int>(best));
  return out;
}

}  // namespace kdvqa
