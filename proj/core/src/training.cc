#include "kdvqa/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "kdvqa/error.h"
#include "kdvqa/losses.h"
#include "kdvqa/ops.h"
#include "kdvqa/optim.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TrainConfig TrainConfig::mlm_defaults() { return {}; }

TrainConfig TrainConfig::vqa_defaults() {
  TrainConfig c;
  c.stage = TrainStage::kVqa;
  c.epochs = 30;
  c.lr = 5e-5;
  c.weight_decay = 0.0;
  c.optimizer = OptimizerKind::kAdam;
  c.batch_size = 8;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kConfig, "epochs must be at least 1");
  if (!(lr > 0)) fail(ErrorCode::kConfig, "lr must be positive");
  if (batch_size < 1) fail(ErrorCode::kConfig, "batch_size must be at least 1");
  if (weight_decay < 0) fail(ErrorCode::kConfig, "weight_decay must be non-negative");
  if (clip_grad_norm < 0) fail(ErrorCode::kConfig, "clip_grad_norm must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"stage", c.stage == TrainStage::kMlm ? "mlm" : "vqa"},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"optimizer", c.optimizer == OptimizerKind::kAdamW ? "adamw" : "adam"},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"remask_each_epoch", c.remask_each_epoch},
          {"clip_grad_norm", c.clip_grad_norm},
          {"freeze_encoder", c.freeze_encoder}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.remask_each_epoch = j.value("remask_each_epoch", c.remask_each_epoch);
    c.clip_grad_norm = j.value("clip_grad_norm", c.clip_grad_norm);
    c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
    if (j.contains("optimizer")) {
      const auto name = j.at("optimizer").get<std::string>();
      if (name == "adam") {
        c.optimizer = OptimizerKind::kAdam;
      } else if (name == "adamw") {
        c.optimizer = OptimizerKind::kAdamW;
      } else {
        fail(ErrorCode::kConfig, "optimizer must be 'adam' or 'adamw', got '" + name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad training config: ") + e.what());
  }
  return c;
}

int best_epoch_of(const std::vector<EpochRecord>& epochs) {
  int best = -1;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (best < 0 || epochs[i].validation_loss < epochs[static_cast<std::size_t>(best)].validation_loss) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::string train_log_jsonl(const TrainLog& log, bool include_seconds) {
  std::string out;
  for (const auto& e : log.epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"validation_loss", e.validation_loss},
                        {"seed", e.seed},
                        {"improved", e.improved}};
    if (include_seconds) j["seconds"] = e.seconds;
    out += j.dump() + "\n";
  }
  return out;
}

nlohmann::json train_log_summary(const TrainLog& log) {
  return {{"epochs", log.epochs.size()},
          {"best_epoch", log.best_epoch},
          {"best_validation_loss", log.best_validation_loss},
          {"initial_train_loss", log.initial_train_loss},
          {"initial_validation_loss", log.initial_validation_loss},
          {"final_train_loss", log.epochs.empty() ? 0.0 : log.epochs.back().train_loss},
          {"train_examples", log.train_examples},
          {"validation_examples", log.validation_examples},
          {"skipped", log.skipped}};
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void optimizer_step(std::vector<Tensor>& params, OptimizerState& state, const TrainConfig& cfg) {
  if (cfg.clip_grad_norm > 0) clip_grad_norm(params, cfg.clip_grad_norm);
  if (cfg.optimizer == OptimizerKind::kAdamW) {
    adamw_step(params, state);
  } else {
    adam_step(params, state);
  }
  zero_grad(params);
}

AdamHyperparameters hyper_of(const TrainConfig& cfg) {
  AdamHyperparameters h;
  h.lr = cfg.lr;
  h.weight_decay = cfg.optimizer == OptimizerKind::kAdamW ? cfg.weight_decay : 0.0;
  return h;
}

// Padded batch of masked examples -> (loss tensor, selected-token count).
std::pair<Tensor, std::size_t> mlm_batch_loss(const Encoder& encoder, const MlmDataset& data,
                                              std::span<const std::size_t> rows, Rng* rng) {
  std::vector<TokenSequence> inputs;
  for (auto r : rows) inputs.push_back(data.examples[r].input);
  std::size_t length = 0;
  const Tensor hidden = encoder.encode_batch(inputs, rng, &length);
  std::vector<int> labels(rows.size() * length, kIgnoreLabel);
  std::size_t count = 0;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& ex = data.examples[rows[b]];
    std::copy(ex.labels.begin(), ex.labels.end(), labels.begin() + static_cast<std::ptrdiff_t>(b * length));
    count += static_cast<std::size_t>(ex.selection_count);
  }
  return {cross_entropy_masked(encoder.mlm_logits(hidden), labels), count};
}

double mlm_dataset_loss(const Encoder& encoder, const MlmDataset& data, int batch_size) {
  NoGradGuard no_grad;
  std::vector<std::size_t> rows(data.examples.size());
  std::iota(rows.begin(), rows.end(), 0);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto len = std::min<std::size_t>(static_cast<std::size_t>(batch_size), rows.size() - start);
    const auto [loss, n] = mlm_batch_loss(encoder, data, std::span(rows).subspan(start, len), nullptr);
    total += static_cast<double>(loss.item()) * static_cast<double>(n);
    count += n;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

std::vector<TokenSequence> encode_all(const std::vector<std::string>& sentences, const Vocabulary& vocab,
                                      int max_len) {
  std::vector<TokenSequence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode(s, vocab, max_len));
  return out;
}

}  // namespace

MlmDataset mlm_validation_dataset(const std::vector<std::string>& sentences, const Vocabulary& vocab,
                                  int max_len, std::uint64_t train_seed) {
  return build_mlm_dataset(encode_all(sentences, vocab, max_len), vocab,
                           derive_seed(train_seed, {hash_tag("mlm-validation-mask")}));
}

double mlm_loss(const Checkpoint& ckpt, const MlmDataset& dataset, int batch_size) {
  return mlm_dataset_loss(Encoder(ckpt.encoder, ckpt.params), dataset, batch_size);
}

TrainResult train_mlm_on_sentences(const std::vector<std::string>& train_sentences,
                                   const std::vector<std::string>& validation_sentences,
                                   const Vocabulary& vocab, const EncoderConfig& enc_cfg_in,
                                   const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  EncoderConfig enc_cfg = enc_cfg_in;
  enc_cfg.vocab_size = vocab.size();
  enc_cfg.validate();
  if (train_sentences.empty()) {
    fail(ErrorCode::kPrecondition, "no training sentences; check the keyword lexicon");
  }
  if (validation_sentences.empty()) {
    fail(ErrorCode::kPrecondition, "no validation sentences; check the keyword lexicon and the validation split");
  }

  const auto train_ids = encode_all(train_sentences, vocab, enc_cfg.max_len);
  const auto mask_seed = [&](int epoch) {
    return derive_seed(cfg.seed, {hash_tag("mlm-train-mask"), static_cast<std::uint64_t>(epoch)});
  };
  const MlmDataset first = build_mlm_dataset(train_ids, vocab, mask_seed(0));
  const MlmDataset validation = mlm_validation_dataset(validation_sentences, vocab, enc_cfg.max_len, cfg.seed);

  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::kEncoder;
  ckpt.encoder = enc_cfg;
  ckpt.vocab = vocab;
  ckpt.params = init_parameters(encoder_parameter_specs(enc_cfg), derive_seed(cfg.seed, {hash_tag("mlm-init")}));
  ckpt.meta.seed = cfg.seed;
  const Encoder encoder(enc_cfg, ckpt.params);
  auto params = ckpt.params.list();
  OptimizerState state(params, hyper_of(cfg));

  TrainResult result;
  auto& log = result.log;
  log.train_examples = first.examples.size();
  log.validation_examples = validation.examples.size();
  log.skipped = first.skipped;
  log.initial_train_loss = mlm_dataset_loss(encoder, first, cfg.batch_size);
  log.initial_validation_loss = mlm_dataset_loss(encoder, validation, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const MlmDataset remasked =
        cfg.remask_each_epoch && epoch > 0 ? build_mlm_dataset(train_ids, vocab, mask_seed(epoch)) : MlmDataset{};
    const MlmDataset& data = cfg.remask_each_epoch && epoch > 0 ? remasked : first;

    std::vector<std::size_t> order(data.examples.size());
    std::iota(order.begin(), order.end(), 0);
    const auto epoch_seed = derive_seed(cfg.seed, {hash_tag("mlm-epoch"), static_cast<std::uint64_t>(epoch)});
    Rng shuffle_rng(derive_seed(epoch_seed, {hash_tag("shuffle")}));
    shuffle_rng.shuffle(std::span(order));
    Rng dropout_rng(derive_seed(epoch_seed, {hash_tag("dropout")}));

    double total = 0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - s);
      auto [loss, n] = mlm_batch_loss(encoder, data, std::span(order).subspan(s, len), &dropout_rng);
      total += static_cast<double>(loss.item()) * static_cast<double>(n);
      count += n;
      loss.backward();
      optimizer_step(params, state, cfg);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(count);
    rec.validation_loss = mlm_dataset_loss(encoder, validation, cfg.batch_size);
    rec.seed = epoch_seed;
    rec.improved = log.best_epoch < 0 || rec.validation_loss < log.best_validation_loss;
    rec.seconds = seconds_since(start);
    if (rec.improved) {
      log.best_epoch = epoch;
      log.best_validation_loss = rec.validation_loss;
      result.checkpoint = ckpt;
      result.checkpoint.params = ckpt.params.clone();
      result.checkpoint.meta.epoch = epoch;
      result.checkpoint.meta.validation_loss = rec.validation_loss;
      if (hooks.on_improvement) hooks.on_improvement(result.checkpoint, rec);
    }
    log.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return result;
}

TrainResult train_mlm(const Corpus& corpus, const KeywordLexicon& lexicon, const Vocabulary& vocab,
                      const EncoderConfig& enc_cfg, const TrainConfig& cfg, const TrainHooks& hooks) {
  const auto train = filter_training_sentences(corpus, lexicon);
  if (train.sentences.empty()) {
    fail(ErrorCode::kPrecondition, "the keyword filter selected no training sentences from " +
                                       std::to_string(train.report.total_sentences) +
                                       "; extend the keyword lexicon");
  }
  const auto validation = filter_split_sentences(corpus, Split::kValidation, lexicon);
  return train_mlm_on_sentences(train.sentences, validation.sentences, vocab, enc_cfg, cfg, hooks);
}

const Tensor& EmbeddingCache::at(const std::string& doc_id) const {
  const auto it = documents.find(doc_id);
  if (it == documents.end()) {
    fail(ErrorCode::kMissingArtifact, "embedding cache has no entry for document '" + doc_id +
                                          "'; rerun build-embeddings");
  }
  return it->second;
}

std::size_t EmbeddingCache::vector_count() const {
  std::size_t n = 0;
  for (const auto& [id, t] : documents) n += t.dim(0);
  return n;
}

EmbeddingCache build_embedding_cache(const Corpus& corpus, const Checkpoint& ckpt, int workers) {
  const Encoder encoder(ckpt.encoder, ckpt.params);
  const auto& docs = corpus.documents();
  std::vector<Tensor> rows(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    rows[i] = document_embeddings(docs[i], docs[i].rois.size(), encoder, ckpt.vocab);
  });
  EmbeddingCache cache;
  cache.fingerprint = encoder_fingerprint(ckpt);
  cache.hidden = ckpt.encoder.hidden;
  for (std::size_t i = 0; i < docs.size(); ++i) cache.documents.emplace(docs[i].doc_id, rows[i]);
  return cache;
}

namespace {
constexpr std::string_view kDocPrefix = "doc/";
}

NamedTensorArchive to_archive(const EmbeddingCache& cache) {
  NamedTensorArchive archive;
  for (const auto& [id, t] : cache.documents) archive.tensors.emplace(std::string(kDocPrefix) + id, t);
  archive.records = {{"kind", "embedding-cache"},
                     {"encoder_fingerprint", cache.fingerprint},
                     {"hidden", cache.hidden},
                     {"documents", cache.documents.size()}};
  return archive;
}

EmbeddingCache embedding_cache_from_archive(const NamedTensorArchive& archive) {
  EmbeddingCache cache;
  try {
    if (archive.records.at("kind").get<std::string>() != "embedding-cache") {
      fail(ErrorCode::kFormat, "archive is not an embedding cache");
    }
    cache.fingerprint = archive.records.at("encoder_fingerprint").get<std::uint32_t>();
    cache.hidden = archive.records.at("hidden").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed embedding cache records: ") + e.what());
  }
  for (const auto& [name, t] : archive.tensors) {
    if (!name.starts_with(kDocPrefix) || t.rank() != 2 || t.dim(1) != static_cast<std::size_t>(cache.hidden)) {
      fail(ErrorCode::kFormat, "unexpected embedding cache entry '" + name + "'");
    }
    cache.documents.emplace(name.substr(kDocPrefix.size()), t);
  }
  return cache;
}

void write_embedding_cache(const EmbeddingCache& cache, const std::filesystem::path& path) {
  write_archive(to_archive(cache), path);
}

EmbeddingCache read_embedding_cache(const std::filesystem::path& path) {
  return embedding_cache_from_archive(read_archive(path));
}

Tensor roi_embeddings_for(const DocumentRecord& doc, std::size_t n, const Encoder& encoder,
                          const Vocabulary& vocab, const EmbeddingCache* cache, std::uint32_t fingerprint) {
  if (cache != nullptr && cache->fingerprint == fingerprint) {
    const Tensor& all = cache->at(doc.doc_id);
    if (all.dim(0) != doc.rois.size()) {
      fail(ErrorCode::kIntegrity, "embedding cache entry for '" + doc.doc_id + "' has " +
                                      std::to_string(all.dim(0)) + " rows for " +
                                      std::to_string(doc.rois.size()) + " RoIs");
    }
    NoGradGuard no_grad;
    return slice(all, 0, 0, n);
  }
  return document_embeddings(doc, n, encoder, vocab);
}

std::size_t usable_roi_count(const DocumentRecord& doc, const MatcherConfig& cfg) {
  return std::min(doc.rois.size(), static_cast<std::size_t>(cfg.max_rois));
}

bool gold_within(const QuestionRecord& q, std::size_t n) {
  return !q.answer_indices.empty() && static_cast<std::size_t>(*q.answer_indices.rbegin()) < n;
}

namespace {

struct VqaExample {
  const QuestionRecord* question = nullptr;
  const DocumentRecord* document = nullptr;
  TokenSequence question_ids;
  Tensor rois;    // [n, d], fixed
  Tensor memory;  // [len, d], fixed while the encoder is frozen
  std::vector<Real> targets;
};

struct PreparedSplit {
  std::vector<VqaExample> examples;
  std::size_t dropped = 0;
};

PreparedSplit prepare_split(const Corpus& corpus, Split split, const Encoder& encoder, const Vocabulary& vocab,
                            const MatcherConfig& mcfg, const EmbeddingCache* cache, std::uint32_t fingerprint,
                            int workers) {
  PreparedSplit out;
  for (const auto* q : corpus.questions_in(split)) {
    const auto& doc = corpus.at(q->doc_id);
    const std::size_t n = usable_roi_count(doc, mcfg);
    if (!gold_within(*q, n)) {
      ++out.dropped;
      continue;
    }
    VqaExample ex;
    ex.question = q;
    ex.document = &doc;
    ex.question_ids = encode(q->text, vocab, encoder.config().max_len);
    ex.targets.assign(n, Real(0));
    for (int a : q->answer_indices) ex.targets[static_cast<std::size_t>(a)] = Real(1);
    out.examples.push_back(std::move(ex));
  }
  parallel_for(out.examples.size(), workers, [&](std::size_t i) {
    NoGradGuard no_grad;
    auto& ex = out.examples[i];
    ex.rois = roi_embeddings_for(*ex.document, ex.targets.size(), encoder, vocab, cache, fingerprint);
    ex.memory = encoder.encode_sequence(ex.question_ids, nullptr);
  });
  return out;
}

double split_loss(const Matcher& matcher, const std::vector<VqaExample>& examples, int workers) {
  std::vector<double> losses(examples.size());
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    NoGradGuard no_grad;
    const auto& ex = examples[i];
    losses[i] = static_cast<double>(bce_with_logits(matcher.forward(ex.rois, ex.memory, nullptr), ex.targets).item());
  });
  double total = 0;
  for (double l : losses) total += l;
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

// Fresh RoI embeddings and question memory with gradients into the encoder.
std::pair<Tensor, Tensor> encode_with_grad(const VqaExample& ex, const Encoder& encoder, const Vocabulary& vocab,
                                           Rng* rng) {
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < ex.targets.size(); ++i) {
    const auto ids = encode(embedding_text(ex.document->rois[i]), vocab, encoder.config().max_len);
    rows.push_back(pool_hidden(encoder.encode_sequence(ids, rng), encoder.config().embedding_pooling));
  }
  return {concat(rows, 0), encoder.encode_sequence(ex.question_ids, rng)};
}

}  // namespace

TrainResult train_vqa(const Corpus& corpus, const Checkpoint& encoder_ckpt, const MatcherConfig& match_cfg,
                      const TrainConfig& cfg, const EmbeddingCache* cache, const TrainHooks& hooks, int workers) {
  cfg.validate();
  match_cfg.validate();
  if (match_cfg.hidden != encoder_ckpt.encoder.hidden) {
    fail(ErrorCode::kConfig, "matcher.hidden (" + std::to_string(match_cfg.hidden) +
                                 ") must equal the encoder hidden size (" +
                                 std::to_string(encoder_ckpt.encoder.hidden) + ")");
  }

  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::kMatcher;
  ckpt.encoder = encoder_ckpt.encoder;
  ckpt.matcher = match_cfg;
  ckpt.vocab = encoder_ckpt.vocab;
  ckpt.meta.seed = cfg.seed;
  ckpt.meta.encoder_frozen = cfg.freeze_encoder;
  for (const auto& [name, t] : encoder_ckpt.params.tensors()) {
    if (name.starts_with("encoder.")) ckpt.params.add(name, t.detach());
  }
  for (auto& t : ckpt.params.list()) t.set_requires_grad(!cfg.freeze_encoder);
  ckpt.params.merge(init_parameters(matcher_parameter_specs(match_cfg), derive_seed(cfg.seed, {hash_tag("vqa-init")})));

  const Encoder encoder(ckpt.encoder, ckpt.params);
  const Matcher matcher(match_cfg, ckpt.params);
  const auto fingerprint = encoder_fingerprint(ckpt);

  auto train = prepare_split(corpus, Split::kTrain, encoder, ckpt.vocab, match_cfg, cache, fingerprint, workers);
  auto validation =
      prepare_split(corpus, Split::kValidation, encoder, ckpt.vocab, match_cfg, cache, fingerprint, workers);
  if (train.examples.empty()) {
    fail(ErrorCode::kPrecondition, "every training question was dropped (" + std::to_string(train.dropped) +
                                       " with gold RoIs beyond max_rois)");
  }
  if (validation.examples.empty()) {
    fail(ErrorCode::kPrecondition, "the validation split has no usable questions");
  }

  auto params = cfg.freeze_encoder ? ckpt.params.list("matcher.") : ckpt.params.list();
  OptimizerState state(params, hyper_of(cfg));

  TrainResult result;
  auto& log = result.log;
  log.train_examples = train.examples.size();
  log.validation_examples = validation.examples.size();
  log.skipped = train.dropped;
  log.initial_train_loss = split_loss(matcher, train.examples, workers);
  log.initial_validation_loss = split_loss(matcher, validation.examples, workers);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto epoch_seed = derive_seed(cfg.seed, {hash_tag("vqa-epoch"), static_cast<std::uint64_t>(epoch)});
    std::vector<std::size_t> order(train.examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(epoch_seed, {hash_tag("shuffle")}));
    shuffle_rng.shuffle(std::span(order));
    Rng dropout_rng(derive_seed(epoch_seed, {hash_tag("dropout")}));

    double total = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - s);
      Tensor batch_loss;
      for (std::size_t k = 0; k < len; ++k) {
        const auto& ex = train.examples[order[s + k]];
        Tensor rois = ex.rois, memory = ex.memory;
        if (!cfg.freeze_encoder) std::tie(rois, memory) = encode_with_grad(ex, encoder, ckpt.vocab, &dropout_rng);
        const Tensor loss = bce_with_logits(matcher.forward(rois, memory, &dropout_rng), ex.targets);
        total += static_cast<double>(loss.item());
        batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
      }
      scale(batch_loss, Real(1) / static_cast<Real>(len)).backward();
      optimizer_step(params, state, cfg);
    }

    if (!cfg.freeze_encoder) {
      // The encoder moved; refresh the fixed inputs used for validation.
      const auto current = encoder_fingerprint(ckpt);
      validation =
          prepare_split(corpus, Split::kValidation, encoder, ckpt.vocab, match_cfg, cache, current, workers);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(train.examples.size());
    rec.validation_loss = split_loss(matcher, validation.examples, workers);
    rec.seed = epoch_seed;
    rec.improved = log.best_epoch < 0 || rec.validation_loss < log.best_validation_loss;
    rec.seconds = seconds_since(start);
    if (rec.improved) {
      log.best_epoch = epoch;
      log.best_validation_loss = rec.validation_loss;
      result.checkpoint = ckpt;
      result.checkpoint.params = ckpt.params.clone();
      result.checkpoint.meta.epoch = epoch;
      result.checkpoint.meta.validation_loss = rec.validation_loss;
      if (hooks.on_improvement) hooks.on_improvement(result.checkpoint, rec);
    }
    log.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return result;
}

double vqa_loss(const Checkpoint& matcher_ckpt, const Corpus& corpus, Split split, const EmbeddingCache* cache,
                int workers) {
  const VqaModel model(matcher_ckpt);
  const auto prepared = prepare_split(corpus, split, model.encoder(), matcher_ckpt.vocab, *matcher_ckpt.matcher,
                                      cache, encoder_fingerprint(matcher_ckpt), workers);
  return split_loss(model.matcher(), prepared.examples, workers);
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
