#include "kdvqa/model.h"

#include <cmath>

#include "kdvqa/error.h"
#include "kdvqa/ops.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

void ParameterSet::add(const std::string& name, Tensor tensor) {
  if (!tensors_.emplace(name, std::move(tensor)).second) {
    fail(ErrorCode::kDuplicate, "parameter '" + name + "' already exists");
  }
}

const Tensor& ParameterSet::at(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) fail(ErrorCode::kValidation, "missing parameter '" + name + "'");
  return it->second;
}

std::vector<Tensor> ParameterSet::list() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : tensors_) out.push_back(t);
  return out;
}

std::vector<Tensor> ParameterSet::list(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : tensors_) {
    if (name.starts_with(prefix)) out.push_back(t);
  }
  return out;
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& [name, t] : tensors_) {
    auto copy = t.detach();
    copy.set_requires_grad(t.requires_grad());
    out.tensors_.emplace(name, copy);
  }
  return out;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [name, t] : other.tensors_) add(name, t);
}

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void add_linear(std::vector<ParameterSpec>& specs, const std::string& name, std::size_t in,
                std::size_t out) {
  specs.push_back({name + ".weight", {in, out}, InitKind::kWeight});
  specs.push_back({name + ".bias", {out}, InitKind::kZeros});
}

void add_norm(std::vector<ParameterSpec>& specs, const std::string& name, std::size_t d) {
  specs.push_back({name + ".gamma", {d}, InitKind::kOnes});
  specs.push_back({name + ".beta", {d}, InitKind::kZeros});
}

void add_attention(std::vector<ParameterSpec>& specs, const std::string& name, std::size_t d) {
  for (const char* part : {"query", "key", "value", "output"}) add_linear(specs, name + "." + part, d, d);
}

void add_ffn(std::vector<ParameterSpec>& specs, const std::string& name, std::size_t d,
             std::size_t f) {
  add_linear(specs, name + ".in", d, f);
  add_linear(specs, name + ".out", f, d);
}

AttentionWeights attention_weights(const ParameterSet& p, const std::string& name) {
  return {p.at(name + ".query.weight"), p.at(name + ".query.bias"),
          p.at(name + ".key.weight"),   p.at(name + ".key.bias"),
          p.at(name + ".value.weight"), p.at(name + ".value.bias"),
          p.at(name + ".output.weight"), p.at(name + ".output.bias")};
}

NormWeights norm_weights(const ParameterSet& p, const std::string& name) {
  return {p.at(name + ".gamma"), p.at(name + ".beta")};
}

FeedForwardWeights ffn_weights(const ParameterSet& p, const std::string& name) {
  return {p.at(name + ".in.weight"), p.at(name + ".in.bias"), p.at(name + ".out.weight"),
          p.at(name + ".out.bias")};
}

Tensor feed_forward(const FeedForwardWeights& w, const Tensor& x) {
  return linear(gelu(linear(x, w.w_in, w.b_in)), w.w_out, w.b_out);
}

Tensor maybe_dropout(const Tensor& x, double p, Rng* rng) {
  if (rng == nullptr || p == 0) return x;
  return dropout(x, static_cast<Real>(p), *rng);
}

// Post-norm residual: norm(x + dropout(delta)).
Tensor residual(const Tensor& x, const Tensor& delta, const NormWeights& norm, double p, Rng* rng) {
  return layer_norm(add(x, maybe_dropout(delta, p, rng)), norm.gamma, norm.beta);
}

}  // namespace

std::vector<ParameterSpec> encoder_parameter_specs(const EncoderConfig& cfg) {
  cfg.validate();
  const std::size_t d = sz(cfg.hidden);
  std::vector<ParameterSpec> specs;
  specs.push_back({"encoder.token_embedding", {sz(cfg.vocab_size), d}, InitKind::kWeight});
  specs.push_back({"encoder.position_embedding", {sz(cfg.max_len), d}, InitKind::kWeight});
  add_norm(specs, "encoder.embedding_norm", d);
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string layer = "encoder.layer" + std::to_string(i);
    add_attention(specs, layer + ".attention", d);
    add_norm(specs, layer + ".attention_norm", d);
    add_ffn(specs, layer + ".ffn", d, sz(cfg.ff));
    add_norm(specs, layer + ".ffn_norm", d);
  }
  add_linear(specs, "mlm_head", d, sz(cfg.vocab_size));
  return specs;
}

std::vector<ParameterSpec> matcher_parameter_specs(const MatcherConfig& cfg) {
  cfg.validate();
  const std::size_t d = sz(cfg.hidden);
  std::vector<ParameterSpec> specs;
  if (cfg.roi_positions) {
    specs.push_back({"matcher.roi_position", {sz(cfg.max_rois), d}, InitKind::kWeight});
  }
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string layer = "matcher.layer" + std::to_string(i);
    add_attention(specs, layer + ".self_attention", d);
    add_norm(specs, layer + ".self_norm", d);
    add_attention(specs, layer + ".cross_attention", d);
    add_norm(specs, layer + ".cross_norm", d);
    add_ffn(specs, layer + ".ffn", d, sz(cfg.ff));
    add_norm(specs, layer + ".ffn_norm", d);
  }
  add_linear(specs, "matcher.head", d, 1);
  return specs;
}

ParameterSet init_parameters(const std::vector<ParameterSpec>& specs, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  for (const auto& spec : specs) {
    std::vector<Real> values(shape_numel(spec.shape), Real(0));
    if (spec.init == InitKind::kOnes) {
      std::fill(values.begin(), values.end(), Real(1));
    } else if (spec.init == InitKind::kWeight) {
      for (auto& v : values) v = static_cast<Real>(rng.truncated_normal(0.02));
    }
    params.add(spec.name, Tensor(spec.shape, std::move(values), true));
  }
  return params;
}

void check_parameters(const ParameterSet& params, const std::vector<ParameterSpec>& specs) {
  std::set<std::string> expected;
  for (const auto& spec : specs) {
    expected.insert(spec.name);
    if (!params.contains(spec.name)) fail(ErrorCode::kValidation, "missing parameter '" + spec.name + "'");
    const auto& shape = params.at(spec.name).shape();
    if (shape != spec.shape) {
      fail(ErrorCode::kValidation, "parameter '" + spec.name + "' has shape " + shape_string(shape) +
                                       ", expected " + shape_string(spec.shape));
    }
  }
  for (const auto& [name, t] : params.tensors()) {
    if (!expected.contains(name)) fail(ErrorCode::kValidation, "unexpected parameter '" + name + "'");
  }
}

Tensor multi_head_attention(const AttentionWeights& w, const Tensor& queries, const Tensor& memory,
                            std::size_t batch, std::size_t q_len, std::size_t k_len,
                            std::size_t heads, std::span<const int> key_lengths) {
  const std::size_t d = queries.dim(1);
  const std::size_t dh = d / heads;
  auto split_heads = [&](const Tensor& x, std::size_t len) {
    return reshape(permute(reshape(x, {batch, len, heads, dh}), {0, 2, 1, 3}), {batch * heads, len, dh});
  };
  const Tensor q = split_heads(linear(queries, w.wq, w.bq), q_len);
  const Tensor k = split_heads(linear(memory, w.wk, w.bk), k_len);
  const Tensor v = split_heads(linear(memory, w.wv, w.bv), k_len);
  Tensor scores = scale(matmul(q, k, false, true), static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh))));
  if (!key_lengths.empty()) scores = mask_padded_keys(scores, key_lengths, heads);
  const Tensor context = matmul(softmax(scores, 2), v);
  const Tensor merged =
      reshape(permute(reshape(context, {batch, heads, q_len, dh}), {0, 2, 1, 3}), {batch * q_len, d});
  return linear(merged, w.wo, w.bo);
}

Encoder::Encoder(const EncoderConfig& cfg, const ParameterSet& params) : cfg_(cfg) {
  cfg_.validate();
  token_embedding_ = params.at("encoder.token_embedding");
  position_embedding_ = params.at("encoder.position_embedding");
  if (token_embedding_.shape() != Shape{sz(cfg_.vocab_size), sz(cfg_.hidden)}) {
    fail(ErrorCode::kShape, "token embedding shape " + shape_string(token_embedding_.shape()) +
                                " does not match the encoder config");
  }
  embedding_norm_ = norm_weights(params, "encoder.embedding_norm");
  for (int i = 0; i < cfg_.layers; ++i) {
    const std::string layer = "encoder.layer" + std::to_string(i);
    layers_.push_back({attention_weights(params, layer + ".attention"),
                       norm_weights(params, layer + ".attention_norm"),
                       ffn_weights(params, layer + ".ffn"), norm_weights(params, layer + ".ffn_norm")});
  }
  if (params.contains("mlm_head.weight")) {
    head_weight_ = params.at("mlm_head.weight");
    head_bias_ = params.at("mlm_head.bias");
  }
}

Tensor Encoder::forward(std::span<const int> ids, std::size_t batch, std::size_t length,
                        std::span<const int> lengths, Rng* rng) const {
  if (length > sz(cfg_.max_len)) {
    fail(ErrorCode::kRange, "sequence length " + std::to_string(length) + " exceeds max_len " +
                                std::to_string(cfg_.max_len));
  }
  if (ids.size() != batch * length) fail(ErrorCode::kShape, "token id count does not match batch x length");
  if (!lengths.empty() && lengths.size() != batch) fail(ErrorCode::kShape, "one length per batch row expected");

  std::vector<int> positions(batch * length);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < length; ++t) positions[b * length + t] = static_cast<int>(t);
  }
  Tensor x = add(embedding_lookup(token_embedding_, ids), embedding_lookup(position_embedding_, positions));
  x = maybe_dropout(layer_norm(x, embedding_norm_.gamma, embedding_norm_.beta), cfg_.dropout, rng);
  for (const auto& layer : layers_) {
    const Tensor attended =
        multi_head_attention(layer.attention, x, x, batch, length, length, sz(cfg_.heads), lengths);
    x = residual(x, attended, layer.attention_norm, cfg_.dropout, rng);
    x = residual(x, feed_forward(layer.ffn, x), layer.ffn_norm, cfg_.dropout, rng);
  }
  return x;
}

Tensor Encoder::encode_batch(std::span<const TokenSequence> sequences, Rng* rng,
                             std::size_t* padded_length) const {
  std::size_t length = 0;
  for (const auto& s : sequences) length = std::max(length, s.size());
  std::vector<int> ids(sequences.size() * length, kPadId);
  std::vector<int> lengths;
  bool padded = false;
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    std::copy(sequences[b].ids.begin(), sequences[b].ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(b * length));
    lengths.push_back(static_cast<int>(sequences[b].size()));
    padded = padded || sequences[b].size() != length;
  }
  if (padded_length != nullptr) *padded_length = length;
  return forward(ids, sequences.size(), length, padded ? std::span<const int>(lengths) : std::span<const int>(),
                 rng);
}

Tensor Encoder::encode_sequence(const TokenSequence& ids, Rng* rng) const {
  return forward(ids.ids, 1, ids.size(), {}, rng);
}

Tensor Encoder::mlm_logits(const Tensor& hidden) const {
  if (!head_weight_.defined()) fail(ErrorCode::kPrecondition, "this parameter set has no MLM head");
  return linear(hidden, head_weight_, head_bias_);
}

Matcher::Matcher(const MatcherConfig& cfg, const ParameterSet& params) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.roi_positions) roi_position_ = params.at("matcher.roi_position");
  for (int i = 0; i < cfg_.layers; ++i) {
    const std::string layer = "matcher.layer" + std::to_string(i);
    layers_.push_back({attention_weights(params, layer + ".self_attention"),
                       norm_weights(params, layer + ".self_norm"),
                       attention_weights(params, layer + ".cross_attention"),
                       norm_weights(params, layer + ".cross_norm"), ffn_weights(params, layer + ".ffn"),
                       norm_weights(params, layer + ".ffn_norm")});
  }
  head_weight_ = params.at("matcher.head.weight");
  head_bias_ = params.at("matcher.head.bias");
}

Tensor Matcher::forward(const Tensor& roi_embeddings, const Tensor& memory, Rng* rng) const {
  if (roi_embeddings.rank() != 2 || roi_embeddings.dim(1) != sz(cfg_.hidden)) {
    fail(ErrorCode::kShape, "RoI embeddings must be [n, " + std::to_string(cfg_.hidden) + "], got " +
                                shape_string(roi_embeddings.shape()));
  }
  const std::size_t n = roi_embeddings.dim(0);
  if (n == 0) fail(ErrorCode::kShape, "a document needs at least one RoI");
  if (n > sz(cfg_.max_rois)) {
    fail(ErrorCode::kRange, std::to_string(n) + " RoIs exceed max_rois " + std::to_string(cfg_.max_rois) +
                                "; truncate the document to its first max_rois RoIs");
  }
  Tensor mem = memory;
  if (cfg_.question_memory == QuestionMemory::kPooled) {
    const std::size_t m = memory.dim(0);
    mem = matmul(Tensor::full({1, m}, static_cast<Real>(1.0 / static_cast<double>(m))), memory);
  }
  const std::size_t m = mem.dim(0);

  Tensor x = roi_embeddings;
  if (cfg_.roi_positions) x = add(x, slice(roi_position_, 0, 0, n));
  const auto heads = sz(cfg_.heads);
  for (const auto& layer : layers_) {
    x = residual(x, multi_head_attention(layer.self_attention, x, x, 1, n, n, heads, {}), layer.self_norm,
                 cfg_.dropout, rng);
    x = residual(x, multi_head_attention(layer.cross_attention, x, mem, 1, n, m, heads, {}),
                 layer.cross_norm, cfg_.dropout, rng);
    x = residual(x, feed_forward(layer.ffn, x), layer.ffn_norm, cfg_.dropout, rng);
  }
  return reshape(linear(x, head_weight_, head_bias_), {n});
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
