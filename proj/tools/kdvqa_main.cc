#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kdvqa/checkpoint.h"
#include "kdvqa/error.h"
#include "kdvqa/pipeline.h"

namespace {

struct GlobalOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::string> corpus;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

kdvqa::PipelineConfig resolve(const GlobalOptions& g) {
  nlohmann::json tree = g.config.empty() ? nlohmann::json::object() : kdvqa::read_config_tree(g.config);
  for (const auto& o : g.overrides) kdvqa::apply_override(tree, o);
  if (g.corpus) tree["corpus"] = *g.corpus;
  if (g.out) tree["output"] = *g.out;
  if (g.seed) tree["seed"] = *g.seed;
  if (g.workers) tree["workers"] = *g.workers;
  return kdvqa::pipeline_config_from_json(tree);
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword-driven document VQA pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("-c,--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a config value, key.path=value (repeatable)");
  app.add_option("--corpus", g.corpus, "Corpus directory (documents.jsonl, questions.jsonl)");
  app.add_option("--out", g.out, "Output directory for artifacts");
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--workers", g.workers, "Maximum worker threads")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus to the corpus directory");

  auto* filter = app.add_subcommand("filter-stats", "Keyword sentence selection report (JSON on stdout)");
  std::optional<std::string> sentences_out, stats_out;
  filter->add_option("--sentences-out", sentences_out, "Write selected sentences, one per line");
  filter->add_option("--stats-out", stats_out, "Write per-split corpus statistics as JSON");

  auto* vocab = app.add_subcommand("build-vocab", "Build the vocabulary from the train split");

  auto* mlm = app.add_subcommand("train-mlm", "Masked-language-model training of the encoder");
  bool dump_masked = false;
  mlm->add_flag("--dump-masked", dump_masked, "Also write the epoch-0 masked training set as JSONL");

  auto* embed = app.add_subcommand("build-embeddings", "Cache RoI embeddings for every document");
  auto* vqa = app.add_subcommand("train-vqa", "Train the RoI matcher on cached embeddings");

  auto* eval = app.add_subcommand("evaluate", "Exact-match evaluation (EvalReport JSON on stdout)");
  std::string split = "validation";
  eval->add_option("--split", split, "train, validation or test")->capture_default_str();

  auto* describe = app.add_subcommand("describe-checkpoint", "Print a checkpoint's manifest and metadata");
  std::string ckpt_path;
  describe->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (describe->parsed()) {
      print(kdvqa::describe_checkpoint(ckpt_path));
      return 0;
    }
    const auto cfg = resolve(g);
    if (gen->parsed()) {
      const auto corpus = kdvqa::run_gen_synthetic(cfg);
      print({{"corpus", cfg.corpus_dir.generic_string()},
             {"documents", corpus.documents().size()},
             {"questions", corpus.questions().size()}});
    } else if (filter->parsed()) {
      std::optional<std::filesystem::path> s, t;
      if (sentences_out) s = *sentences_out;
      if (stats_out) t = *stats_out;
      print(kdvqa::run_filter_stats(cfg, s, t));
    } else if (vocab->parsed()) {
      const auto v = kdvqa::run_build_vocab(cfg);
      print({{"vocabulary_size", v.size()}, {"path", kdvqa::artifacts(cfg).vocabulary().generic_string()}});
    } else if (mlm->parsed()) {
      print(kdvqa::train_log_summary(kdvqa::run_train_mlm(cfg, dump_masked)));
    } else if (embed->parsed()) {
      const auto cache = kdvqa::run_build_embeddings(cfg);
      print({{"documents", cache.documents.size()}, {"vectors", cache.vector_count()}});
    } else if (vqa->parsed()) {
      print(kdvqa::train_log_summary(kdvqa::run_train_vqa(cfg)));
    } else if (eval->parsed()) {
      print(kdvqa::to_json(kdvqa::run_evaluate(cfg, kdvqa::parse_split(split))));
    }
  } catch (const kdvqa::Error& e) {
    std::fprintf(stderr, "kdvqa: error: %s: %s\n", std::string(kdvqa::error_code_name(e.code())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kdvqa: error: internal: %s\n", e.what());
    return 2;
  }
  return 0;
}
