#include "kdvqa/checkpoint.h"

#include "kdvqa/error.h"
#include "kdvqa/ops.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {
namespace {

constexpr std::string_view kEncoderKind = "encoder";
constexpr std::string_view kMatcherKind = "matcher";

std::vector<ParameterSpec> without_mlm_head(std::vector<ParameterSpec> specs) {
  std::erase_if(specs, [](const ParameterSpec& s) { return s.name.starts_with("mlm_head."); });
  return specs;
}

}  // namespace

std::vector<ParameterSpec> checkpoint_specs(const Checkpoint& ckpt) {
  auto specs = encoder_parameter_specs(ckpt.encoder);
  if (ckpt.kind == CheckpointKind::kEncoder) return specs;
  if (!ckpt.matcher) fail(ErrorCode::kValidation, "matcher checkpoint without a matcher config");
  specs = without_mlm_head(std::move(specs));
  auto matcher = matcher_parameter_specs(*ckpt.matcher);
  specs.insert(specs.end(), matcher.begin(), matcher.end());
  return specs;
}

NamedTensorArchive to_archive(const Checkpoint& ckpt) {
  check_parameters(ckpt.params, checkpoint_specs(ckpt));
  NamedTensorArchive archive;
  archive.tensors = ckpt.params.tensors();
  auto& r = archive.records;
  r["checkpoint_version"] = kCheckpointVersion;
  r["kind"] = ckpt.kind == CheckpointKind::kEncoder ? kEncoderKind : kMatcherKind;
  r["encoder_config"] = to_json(ckpt.encoder);
  if (ckpt.matcher) r["matcher_config"] = to_json(*ckpt.matcher);
  r["vocabulary"] = to_json(ckpt.vocab);
  r["metadata"] = {{"validation_loss", ckpt.meta.validation_loss},
                   {"epoch", ckpt.meta.epoch},
                   {"seed", ckpt.meta.seed},
                   {"encoder_frozen", ckpt.meta.encoder_frozen}};
  return archive;
}

Checkpoint checkpoint_from_archive(const NamedTensorArchive& archive, const std::string& origin) {
  Checkpoint ckpt;
  try {
    const auto& r = archive.records;
    const int version = r.at("checkpoint_version").get<int>();
    if (version != kCheckpointVersion) {
      fail(ErrorCode::kFormat, origin + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto kind = r.at("kind").get<std::string>();
    if (kind == kEncoderKind) {
      ckpt.kind = CheckpointKind::kEncoder;
    } else if (kind == kMatcherKind) {
      ckpt.kind = CheckpointKind::kMatcher;
    } else {
      fail(ErrorCode::kFormat, origin + ": unknown checkpoint kind '" + kind + "'");
    }
    ckpt.encoder = encoder_config_from_json(r.at("encoder_config"));
    if (r.contains("matcher_config")) ckpt.matcher = matcher_config_from_json(r.at("matcher_config"));
    ckpt.vocab = vocabulary_from_json(r.at("vocabulary"));
    const auto& m = r.at("metadata");
    ckpt.meta.validation_loss = m.at("validation_loss").get<double>();
    ckpt.meta.epoch = m.at("epoch").get<int>();
    ckpt.meta.seed = m.at("seed").get<std::uint64_t>();
    ckpt.meta.encoder_frozen = m.at("encoder_frozen").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, origin + ": malformed checkpoint records: " + e.what());
  }
  if (ckpt.vocab.size() != ckpt.encoder.vocab_size) {
    fail(ErrorCode::kValidation, origin + ": vocabulary size " + std::to_string(ckpt.vocab.size()) +
                                     " does not match encoder vocab_size " +
                                     std::to_string(ckpt.encoder.vocab_size));
  }
  for (const auto& [name, t] : archive.tensors) {
    auto copy = t.detach();
    copy.set_requires_grad(true);
    ckpt.params.add(name, copy);
  }
  check_parameters(ckpt.params, checkpoint_specs(ckpt));
  return ckpt;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  return serialize_archive(to_archive(ckpt));
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_archive(to_archive(ckpt), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_archive(read_archive(path), path.filename().string());
}

nlohmann::json describe_checkpoint(const std::filesystem::path& path) {
  const auto manifest = read_archive_manifest(path);
  nlohmann::json out;
  try {
    const auto& r = manifest.at("records");
    out["kind"] = r.at("kind");
    out["checkpoint_version"] = r.at("checkpoint_version");
    out["encoder_config"] = r.at("encoder_config");
    if (r.contains("matcher_config")) out["matcher_config"] = r.at("matcher_config");
    out["metadata"] = r.at("metadata");
    out["vocabulary_size"] = r.at("vocabulary").size();
    std::size_t count = 0;
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, entry] : manifest.at("tensors").items()) {
      const auto shape = entry.at("shape").get<Shape>();
      tensors[name] = {{"shape", shape}, {"dtype", entry.at("dtype")}};
      count += shape_numel(shape);
    }
    out["tensors"] = tensors;
    out["parameter_count"] = count;
    out["buffer_bytes"] = manifest.at("buffer_bytes");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, path.filename().string() + ": not a checkpoint: " + e.what());
  }
  return out;
}

std::uint32_t encoder_fingerprint(const Checkpoint& ckpt) {
  NamedTensorArchive archive;
  for (const auto& [name, t] : ckpt.params.tensors()) {
    if (name.starts_with("encoder.")) archive.tensors.emplace(name, t);
  }
  if (ckpt.encoder.embedding_pooling == EmbeddingPooling::kMean) archive.records["embedding_pooling"] = "mean";
  const auto bytes = serialize_archive(archive);
  return crc32_of(bytes.data(), bytes.size());
}

std::string_view embedding_text(const RegionOfInterest& roi) {
  if (roi.category == RoiCategory::kImage && roi.text.empty()) return kImagePlaceholder;
  return roi.text;
}

Tensor pool_hidden(const Tensor& hidden, EmbeddingPooling pooling) {
  const std::size_t content = hidden.dim(0) - 2;
  if (pooling == EmbeddingPooling::kCls || content == 0) return slice(hidden, 0, 0, 1);
  const Tensor weights({1, content}, std::vector<Real>(content, Real(1) / static_cast<Real>(content)));
  return matmul(weights, slice(hidden, 0, 1, content));
}

Tensor extract_embedding(std::string_view text, const Encoder& encoder, const Vocabulary& vocab) {
  NoGradGuard no_grad;
  const auto ids = encode(text, vocab, encoder.config().max_len);
  const Tensor hidden = encoder.encode_sequence(ids, nullptr);
  return reshape(pool_hidden(hidden, encoder.config().embedding_pooling), {hidden.dim(1)});
}

Tensor extract_embedding(std::string_view text, const Checkpoint& ckpt) {
  return extract_embedding(text, Encoder(ckpt.encoder, ckpt.params), ckpt.vocab);
}

Tensor document_embeddings(const DocumentRecord& doc, std::size_t n, const Encoder& encoder,
                           const Vocabulary& vocab) {
  if (n > doc.rois.size()) fail(ErrorCode::kRange, doc.doc_id + ": fewer RoIs than requested");
  const auto d = static_cast<std::size_t>(encoder.config().hidden);
  std::vector<Real> values;
  values.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = extract_embedding(embedding_text(doc.rois[i]), encoder, vocab);
    values.insert(values.end(), row.data().begin(), row.data().end());
  }
  return Tensor({n, d}, std::move(values));
}

namespace {

const MatcherConfig& require_matcher(const Checkpoint& ckpt) {
  if (ckpt.kind != CheckpointKind::kMatcher || !ckpt.matcher) {
    fail(ErrorCode::kPrecondition, "a matcher checkpoint is required");
  }
  return *ckpt.matcher;
}

}  // namespace

VqaModel::VqaModel(const Checkpoint& ckpt)
    : vocab_(ckpt.vocab), encoder_(ckpt.encoder, ckpt.params), matcher_(require_matcher(ckpt), ckpt.params) {}

Tensor VqaModel::question_memory(std::string_view question) const {
  NoGradGuard no_grad;
  return encoder_.encode_sequence(encode(question, vocab_, encoder_.config().max_len), nullptr);
}

Tensor VqaModel::logits(const Tensor& roi_embeddings, const Tensor& memory, Rng* rng) const {
  return matcher_.forward(roi_embeddings, memory, rng);
}

Tensor match_logits(const Tensor& roi_embeddings, const TokenSequence& question_ids,
                    const Checkpoint& matcher_ckpt, bool train_mode, std::uint64_t seed) {
  const VqaModel model(matcher_ckpt);
  Rng rng(seed);
  Rng* dropout_rng = train_mode ? &rng : nullptr;
  const Tensor memory = model.encoder().encode_sequence(question_ids, dropout_rng);
  return model.logits(roi_embeddings, memory, dropout_rng);
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
