#include "kdvqa/pipeline.h"

#include <fstream>
#include <iterator>
#include <sstream>

#include "kdvqa/error.h"
#include "kdvqa/stats.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {
namespace {

constexpr int kStageVersion = 1;

std::filesystem::path path_value(const nlohmann::json& tree, const char* key, const std::filesystem::path& fallback) {
  return tree.contains(key) ? std::filesystem::path(tree.at(key).get<std::string>()) : fallback;
}

const nlohmann::json& section(const nlohmann::json& tree, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!tree.contains(key)) return empty;
  if (!tree.at(key).is_object()) fail(ErrorCode::kConfig, std::string("config section '") + key + "' must be an object");
  return tree.at(key);
}

void require_file(const std::filesystem::path& path, std::string_view producer) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kMissingArtifact,
         path.string() + " not found; run `kdvqa " + std::string(producer) + "` first");
  }
}

void record_stage(const PipelineConfig& cfg, std::string_view stage, const std::vector<std::filesystem::path>& outputs) {
  const auto path = artifacts(cfg).manifest();
  nlohmann::json manifest = nlohmann::json::object();
  if (std::filesystem::exists(path)) {
    try {
      manifest = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception&) {
      manifest = nlohmann::json::object();
    }
  }
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : outputs) files.push_back(std::filesystem::relative(p, cfg.output_dir).generic_string());
  manifest["format"] = "kdvqa-artifacts";
  manifest["stages"][std::string(stage)] = {{"version", kStageVersion}, {"outputs", files}, {"seed", cfg.seed}};
  write_text_file(path, manifest.dump(2) + "\n");
}

Checkpoint load_encoder(const PipelineConfig& cfg) {
  const auto path = artifacts(cfg).encoder_checkpoint();
  require_file(path, "train-mlm");
  return load_checkpoint(path);
}

EmbeddingCache load_cache(const PipelineConfig& cfg, const Checkpoint& encoder) {
  const auto path = artifacts(cfg).embedding_cache();
  require_file(path, "build-embeddings");
  auto cache = read_embedding_cache(path);
  if (cache.fingerprint != encoder_fingerprint(encoder)) {
    fail(ErrorCode::kIntegrity, path.string() + " was built from a different encoder; rerun `kdvqa build-embeddings`");
  }
  return cache;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage) {
  return derive_seed(global_seed, {hash_tag(stage)});
}

KeywordLexicon PipelineConfig::keyword_lexicon() const {
  return lexicon.empty() ? KeywordLexicon::default_lexicon() : KeywordLexicon(lexicon);
}

void PipelineConfig::validate() const {
  if (workers < 1) fail(ErrorCode::kConfig, "workers must be at least 1");
  if (vocab_max_size <= kSpecialTokenCount) fail(ErrorCode::kConfig, "tokenizer.max_size must exceed 5");
  if (vocab_min_count < 1) fail(ErrorCode::kConfig, "tokenizer.min_count must be at least 1");
  keyword_lexicon();
  synthetic.validate();
  EncoderConfig enc = encoder;
  enc.vocab_size = std::max(enc.vocab_size, kSpecialTokenCount + 1);
  enc.validate();
  matcher.validate();
  if (matcher.hidden != encoder.hidden) fail(ErrorCode::kConfig, "matcher.hidden must equal encoder.hidden");
  mlm.validate();
  vqa.validate();
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& tree) {
  if (!tree.is_object()) fail(ErrorCode::kConfig, "config must be a JSON object");
  PipelineConfig cfg;
  try {
    cfg.corpus_dir = path_value(tree, "corpus", cfg.corpus_dir);
    cfg.output_dir = path_value(tree, "output", cfg.output_dir);
    cfg.seed = tree.value("seed", cfg.seed);
    cfg.workers = tree.value("workers", cfg.workers);
    if (tree.contains("lexicon")) cfg.lexicon = tree.at("lexicon").get<std::set<std::string>>();
    cfg.synthetic = synthetic_config_from_json(section(tree, "synthetic"));
    const auto& tok = section(tree, "tokenizer");
    cfg.vocab_max_size = tok.value("max_size", cfg.vocab_max_size);
    cfg.vocab_min_count = tok.value("min_count", cfg.vocab_min_count);
    cfg.encoder = encoder_config_from_json(section(tree, "encoder"));
    MatcherConfig matcher_defaults;
    matcher_defaults.hidden = cfg.encoder.hidden;
    cfg.matcher = matcher_config_from_json(section(tree, "matcher"), matcher_defaults);
    const auto& mlm = section(tree, "train_mlm");
    const auto& vqa = section(tree, "train_vqa");
    cfg.mlm = train_config_from_json(mlm, TrainConfig::mlm_defaults());
    cfg.vqa = train_config_from_json(vqa, TrainConfig::vqa_defaults());
    if (!mlm.contains("seed")) cfg.mlm.seed = stage_seed(cfg.seed, "train-mlm");
    if (!vqa.contains("seed")) cfg.vqa.seed = stage_seed(cfg.seed, "train-vqa");
    cfg.write_csv = section(tree, "evaluate").value("csv", cfg.write_csv);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json j = {{"corpus", cfg.corpus_dir.generic_string()},
                      {"output", cfg.output_dir.generic_string()},
                      {"seed", cfg.seed},
                      {"workers", cfg.workers},
                      {"synthetic", to_json(cfg.synthetic)},
                      {"tokenizer", {{"max_size", cfg.vocab_max_size}, {"min_count", cfg.vocab_min_count}}},
                      {"encoder", to_json(cfg.encoder)},
                      {"matcher", to_json(cfg.matcher)},
                      {"train_mlm", to_json(cfg.mlm)},
                      {"train_vqa", to_json(cfg.vqa)},
                      {"evaluate", {{"csv", cfg.write_csv}}}};
  if (!cfg.lexicon.empty()) j["lexicon"] = cfg.lexicon;
  j["encoder"].erase("vocab_size");
  return j;
}

nlohmann::json read_config_tree(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kConfig, "config file " + path.string() + " not found");
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

void apply_override(nlohmann::json& tree, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorCode::kConfig, "override '" + std::string(assignment) + "' is not of the form key.path=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(ErrorCode::kConfig, "override key '" + key + "' has an empty component");
    if (!node->is_object()) fail(ErrorCode::kConfig, "override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

std::filesystem::path ArtifactPaths::eval_report(Split split) const {
  return root / "eval" / (std::string(to_string(split)) + ".json");
}

std::filesystem::path ArtifactPaths::eval_csv(Split split) const {
  return root / "eval" / (std::string(to_string(split)) + ".csv");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Corpus load_pipeline_corpus(const PipelineConfig& cfg) {
  require_file(cfg.corpus_dir / kDocumentsFile, "gen-synthetic");
  require_file(cfg.corpus_dir / kQuestionsFile, "gen-synthetic");
  return load_corpus(cfg.corpus_dir);
}

std::vector<std::string> vocabulary_sentences(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto* doc : corpus.documents_in(Split::kTrain)) {
    for (const auto& roi : doc->rois) out.emplace_back(embedding_text(roi));
  }
  for (const auto* q : corpus.questions_in(Split::kTrain)) out.push_back(q->text);
  return out;
}

Corpus run_gen_synthetic(const PipelineConfig& cfg) {
  auto corpus = generate_synthetic(cfg.synthetic, stage_seed(cfg.seed, "gen-synthetic"));
  write_corpus(corpus, cfg.corpus_dir);
  return corpus;
}

nlohmann::json run_filter_stats(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& sentences_out,
                                const std::optional<std::filesystem::path>& stats_out) {
  const auto corpus = load_pipeline_corpus(cfg);
  const auto lexicon = cfg.keyword_lexicon();
  const auto selection = filter_training_sentences(corpus, lexicon);
  if (sentences_out) {
    std::string text;
    for (const auto& s : selection.sentences) text += s + "\n";
    write_text_file(*sentences_out, text);
  }
  if (stats_out) write_text_file(*stats_out, to_json(corpus_stats(corpus, lexicon)).dump(2) + "\n");
  return to_json(selection.report);
}

Vocabulary run_build_vocab(const PipelineConfig& cfg) {
  const auto corpus = load_pipeline_corpus(cfg);
  auto vocab = build_vocab(vocabulary_sentences(corpus), cfg.vocab_max_size, cfg.vocab_min_count);
  const auto paths = artifacts(cfg);
  write_text_file(paths.vocabulary(), to_json(vocab).dump() + "\n");
  record_stage(cfg, "build-vocab", {paths.vocabulary()});
  return vocab;
}

TrainLog run_train_mlm(const PipelineConfig& cfg, bool dump_masked) {
  const auto corpus = load_pipeline_corpus(cfg);
  const auto paths = artifacts(cfg);
  require_file(paths.vocabulary(), "build-vocab");
  const auto vocab = vocabulary_from_json(nlohmann::json::parse(read_text_file(paths.vocabulary())));
  const auto lexicon = cfg.keyword_lexicon();
  std::filesystem::create_directories(paths.encoder_checkpoint().parent_path());

  TrainHooks hooks;
  hooks.on_improvement = [&](const Checkpoint& ckpt, const EpochRecord&) {
    save_checkpoint(ckpt, paths.encoder_checkpoint());
  };
  auto result = train_mlm(corpus, lexicon, vocab, cfg.encoder, cfg.mlm, hooks);
  save_checkpoint(result.checkpoint, paths.encoder_checkpoint());
  write_text_file(paths.mlm_log(), train_log_jsonl(result.log));
  write_text_file(paths.mlm_summary(), train_log_summary(result.log).dump(2) + "\n");
  write_text_file(paths.mlm_timing(), train_log_jsonl(result.log, true));
  std::vector<std::filesystem::path> outputs = {paths.encoder_checkpoint(), paths.mlm_log(), paths.mlm_summary()};
  if (dump_masked) {
    const auto train = filter_training_sentences(corpus, lexicon);
    std::vector<TokenSequence> ids;
    for (const auto& s : train.sentences) ids.push_back(encode(s, vocab, cfg.encoder.max_len));
    const auto data = build_mlm_dataset(
        ids, vocab, derive_seed(cfg.mlm.seed, {hash_tag("mlm-train-mask"), std::uint64_t{0}}));
    std::string text;
    for (const auto& ex : data.examples) text += to_json(ex).dump() + "\n";
    write_text_file(paths.masked_dump(), text);
    outputs.push_back(paths.masked_dump());
  }
  record_stage(cfg, "train-mlm", outputs);
  return result.log;
}

EmbeddingCache run_build_embeddings(const PipelineConfig& cfg) {
  const auto corpus = load_pipeline_corpus(cfg);
  const auto encoder = load_encoder(cfg);
  auto cache = build_embedding_cache(corpus, encoder, cfg.workers);
  const auto paths = artifacts(cfg);
  write_embedding_cache(cache, paths.embedding_cache());
  record_stage(cfg, "build-embeddings", {paths.embedding_cache()});
  return cache;
}

TrainLog run_train_vqa(const PipelineConfig& cfg) {
  const auto corpus = load_pipeline_corpus(cfg);
  const auto encoder = load_encoder(cfg);
  const auto cache = load_cache(cfg, encoder);
  const auto paths = artifacts(cfg);
  std::filesystem::create_directories(paths.matcher_checkpoint().parent_path());

  TrainHooks hooks;
  hooks.on_improvement = [&](const Checkpoint& ckpt, const EpochRecord&) {
    save_checkpoint(ckpt, paths.matcher_checkpoint());
  };
  auto result = train_vqa(corpus, encoder, cfg.matcher, cfg.vqa, &cache, hooks, cfg.workers);
  save_checkpoint(result.checkpoint, paths.matcher_checkpoint());
  write_text_file(paths.vqa_log(), train_log_jsonl(result.log));
  write_text_file(paths.vqa_summary(), train_log_summary(result.log).dump(2) + "\n");
  write_text_file(paths.vqa_timing(), train_log_jsonl(result.log, true));
  record_stage(cfg, "train-vqa", {paths.matcher_checkpoint(), paths.vqa_log(), paths.vqa_summary()});
  return result.log;
}

EvalReport run_evaluate(const PipelineConfig& cfg, Split split) {
  const auto corpus = load_pipeline_corpus(cfg);
  const auto encoder = load_encoder(cfg);
  const auto paths = artifacts(cfg);
  require_file(paths.matcher_checkpoint(), "train-vqa");
  const auto matcher = load_checkpoint(paths.matcher_checkpoint());
  std::optional<EmbeddingCache> cache;
  if (matcher.meta.encoder_frozen) cache = load_cache(cfg, encoder);
  auto report = evaluate_split(corpus, split, &encoder, matcher, cfg.keyword_lexicon(),
                               cache ? &*cache : nullptr, cfg.workers);
  write_text_file(paths.eval_report(split), to_json(report).dump(2) + "\n");
  std::vector<std::filesystem::path> outputs = {paths.eval_report(split)};
  if (cfg.write_csv) {
    write_text_file(paths.eval_csv(split), to_csv(report));
    outputs.push_back(paths.eval_csv(split));
  }
  record_stage(cfg, "evaluate-" + std::string(to_string(split)), outputs);
  return report;
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
