#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kdvqa/model_config.h"
#include "kdvqa/rng.h"
#include "kdvqa/tensor.h"
#include "kdvqa/tokenizer.h"

namespace kdvqa {

inline namespace KDVQA_REAL_NS {

// Parameters by name; iteration order is name order.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor tensor);
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& at(const std::string& name) const;
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  std::vector<Tensor> list() const;
  // Only entries whose name starts with `prefix`.
  std::vector<Tensor> list(const std::string& prefix) const;
  std::size_t element_count() const;

  // Independent deep copy.
  ParameterSet clone() const;
  void merge(const ParameterSet& other);

 private:
  std::map<std::string, Tensor> tensors_;
};

enum class InitKind { kWeight, kZeros, kOnes };

struct ParameterSpec {
  std::string name;
  Shape shape;
  InitKind init;
};

// Expected parameter names and shapes, in creation order.
std::vector<ParameterSpec> encoder_parameter_specs(const EncoderConfig& cfg);
std::vector<ParameterSpec> matcher_parameter_specs(const MatcherConfig& cfg);

// Weights ~ truncated normal(0, 0.02), biases zero, norm gains one.
ParameterSet init_parameters(const std::vector<ParameterSpec>& specs, std::uint64_t seed);

// Throws Error(kValidation) when names or shapes differ from the specs.
void check_parameters(const ParameterSet& params, const std::vector<ParameterSpec>& specs);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct NormWeights {
  Tensor gamma, beta;
};

struct FeedForwardWeights {
  Tensor w_in, b_in, w_out, b_out;
};

// Multi-head scaled dot-product attention over `batch` rows. queries are
// [batch * q_len, d], memory is [batch * k_len, d]. Keys at or beyond
// key_lengths[b] are ignored (empty span = no padding).
Tensor multi_head_attention(const AttentionWeights& w, const Tensor& queries, const Tensor& memory,
                            std::size_t batch, std::size_t q_len, std::size_t k_len,
                            std::size_t heads, std::span<const int> key_lengths);

// BERT-style encoder: token + learned position embeddings, then post-norm
// blocks of self-attention and a gelu feed-forward, plus an untied MLM head.
// Holds handles into the parameter set, so optimizer updates are visible.
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, const ParameterSet& params);

  const EncoderConfig& config() const { return cfg_; }

  // ids is [batch * length] row-major; rows are padded after lengths[b].
  // Returns [batch * length, d]. Dropout is active only when `rng` is given.
  Tensor forward(std::span<const int> ids, std::size_t batch, std::size_t length,
                 std::span<const int> lengths, Rng* rng) const;

  // Pads to the longest sequence; returns [batch * padded_length, d].
  Tensor encode_batch(std::span<const TokenSequence> sequences, Rng* rng,
                      std::size_t* padded_length) const;

  // [len, d]. Throws Error(kRange) when len > max_len.
  Tensor encode_sequence(const TokenSequence& ids, Rng* rng) const;

  // [rows, vocab].
  Tensor mlm_logits(const Tensor& hidden) const;

 private:
  struct Layer {
    AttentionWeights attention;
    NormWeights attention_norm;
    FeedForwardWeights ffn;
    NormWeights ffn_norm;
  };

  EncoderConfig cfg_;
  Tensor token_embedding_, position_embedding_;
  NormWeights embedding_norm_;
  std::vector<Layer> layers_;
  Tensor head_weight_, head_bias_;
};

// Cross-attention decoder scoring every RoI of one document: RoI embeddings
// are the query sequence, the encoded question is the memory, and a linear
// head gives one logit per RoI.
class Matcher {
 public:
  Matcher(const MatcherConfig& cfg, const ParameterSet& params);

  const MatcherConfig& config() const { return cfg_; }

  // roi_embeddings [n, d], memory [m, d] -> logits [n].
  Tensor forward(const Tensor& roi_embeddings, const Tensor& memory, Rng* rng) const;

 private:
  struct Layer {
    AttentionWeights self_attention;
    NormWeights self_norm;
    AttentionWeights cross_attention;
    NormWeights cross_norm;
    FeedForwardWeights ffn;
    NormWeights ffn_norm;
  };

  MatcherConfig cfg_;
  Tensor roi_position_;
  std::vector<Layer> layers_;
  Tensor head_weight_, head_bias_;
};

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
