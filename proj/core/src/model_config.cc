#include "kdvqa/model_config.h"

#include <nlohmann/json.hpp>

#include "kdvqa/error.h"

namespace kdvqa {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::kConfig, message);
}

}  // namespace

void EncoderConfig::validate() const {
  require(vocab_size > 5, "encoder.vocab_size must exceed the 5 special tokens");
  require(max_len >= 3, "encoder.max_len must be at least 3");
  require(hidden > 0 && heads > 0 && ff > 0 && layers > 0, "encoder sizes must be positive");
  require(hidden % heads == 0, "encoder.hidden must be divisible by encoder.heads");
  require(dropout >= 0 && dropout < 1, "encoder.dropout must lie in [0, 1)");
}

void MatcherConfig::validate() const {
  require(layers >= 1, "matcher.layers must be at least 1");
  require(hidden > 0 && heads > 0 && ff > 0, "matcher sizes must be positive");
  require(hidden % heads == 0, "matcher.hidden must be divisible by matcher.heads");
  require(max_rois >= 1, "matcher.max_rois must be at least 1");
  require(threshold > 0 && threshold < 1, "matcher.threshold must lie in (0, 1)");
  require(dropout >= 0 && dropout < 1, "matcher.dropout must lie in [0, 1)");
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"max_len", c.max_len}, {"hidden", c.hidden},
          {"heads", c.heads},           {"ff", c.ff},           {"layers", c.layers},
          {"dropout", c.dropout},
          {"embedding_pooling", c.embedding_pooling == EmbeddingPooling::kMean ? "mean" : "cls"}};
}

nlohmann::json to_json(const MatcherConfig& c) {
  return {{"layers", c.layers},
          {"heads", c.heads},
          {"hidden", c.hidden},
          {"ff", c.ff},
          {"max_rois", c.max_rois},
          {"threshold", c.threshold},
          {"dropout", c.dropout},
          {"roi_positions", c.roi_positions},
          {"question_memory", c.question_memory == QuestionMemory::kPooled ? "pooled" : "sequence"}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_len = j.value("max_len", c.max_len);
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.ff = j.value("ff", c.ff);
  c.layers = j.value("layers", c.layers);
  c.dropout = j.value("dropout", c.dropout);
  if (j.contains("embedding_pooling")) {
    const auto mode = j.at("embedding_pooling").get<std::string>();
    if (mode == "cls") {
      c.embedding_pooling = EmbeddingPooling::kCls;
    } else if (mode == "mean") {
      c.embedding_pooling = EmbeddingPooling::kMean;
    } else {
      fail(ErrorCode::kConfig, "encoder.embedding_pooling must be 'cls' or 'mean'");
    }
  }
  return c;
}

MatcherConfig matcher_config_from_json(const nlohmann::json& j, MatcherConfig c) {
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.ff = j.value("ff", c.ff);
  c.max_rois = j.value("max_rois", c.max_rois);
  c.threshold = j.value("threshold", c.threshold);
  c.dropout = j.value("dropout", c.dropout);
  c.roi_positions = j.value("roi_positions", c.roi_positions);
  if (j.contains("question_memory")) {
    const auto mode = j.at("question_memory").get<std::string>();
    if (mode == "sequence") {
      c.question_memory = QuestionMemory::kSequence;
    } else if (mode == "pooled") {
      c.question_memory = QuestionMemory::kPooled;
    } else {
      fail(ErrorCode::kConfig, "matcher.question_memory must be 'sequence' or 'pooled'");
    }
  }
  return c;
}

}  // namespace kdvqa
