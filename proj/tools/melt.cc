// melt: entity-aware masked-LM data pipeline.
//
//   melt ingest | extract | embed | neighbors | graph | curriculum | emit
//   melt analyze overlap
//   melt run --config melt.json
//   melt report --run out/

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "melt/conll.h"
#include "melt/corpus.h"
#include "melt/curriculum.h"
#include "melt/embedding.h"
#include "melt/entities.h"
#include "melt/graph.h"
#include "melt/masking.h"
#include "melt/pipeline.h"

namespace fs = std::filesystem;
using namespace melt;

namespace {

void RequireFile(const std::string &path, const char *what) {
  if (!fs::exists(path)) throw InputError(std::string(what) + " not found: " + path);
}

struct IngestArgs {
  std::string input, conll, vocab_out = "vocab.tsv", tokens_out = "tokens.jsonl";
  int min_count = 5;
  int workers = 1;
};

int Ingest(const IngestArgs &a) {
  std::vector<TokenizedDocument> docs;
  if (!a.conll.empty()) {
    RequireFile(a.conll, "CoNLL file");
    docs = TokensFromConll(ReadConllFile(a.conll));
  } else {
    if (a.input.empty()) throw InputError("ingest needs --input or --conll");
    RequireFile(a.input, "corpus");
    CorpusReadStats stats;
    docs = TokenizeCorpus(ReadCorpus(a.input, &stats), a.workers, &stats);
    spdlog::info("{} documents read, {} skipped as invalid UTF-8",
                 stats.documents_read, stats.skipped_invalid_utf8);
  }
  Vocabulary vocab = BuildVocabulary(docs, a.min_count);
  WriteTokensFile(docs, a.tokens_out);
  vocab.WriteTsvFile(a.vocab_out);
  std::printf("%zu documents, %lld tokens, vocabulary %zu\n", docs.size(),
              static_cast<long long>(CountTokens(docs)), vocab.size());
  return kExitOk;
}

struct ExtractArgs {
  std::string tokens, dict, out = "seeds.tsv";
  int workers = 1;
};

int Extract(const ExtractArgs &a) {
  RequireFile(a.tokens, "tokens");
  RequireFile(a.dict, "dictionary");
  SeedEntitySet seeds = ExtractCorpusEntities(
      ReadTokensFile(a.tokens), Dictionary::LoadFile(a.dict), a.workers);
  seeds.WriteTsvFile(a.out);
  std::printf("%zu seed entities\n", seeds.size());
  return kExitOk;
}

struct EmbedArgs {
  std::string tokens, vocab, out = "emb.vec", lr_decay = "linear";
  EmbeddingHyperparams hp;
  bool binary = false;
};

int Embed(EmbedArgs a) {
  RequireFile(a.tokens, "tokens");
  RequireFile(a.vocab, "vocabulary");
  if (a.lr_decay == "none") {
    a.hp.lr_decay = LrDecay::kNone;
  } else if (a.lr_decay != "linear") {
    throw std::invalid_argument("--lr-decay must be linear or none");
  }
  auto docs = ReadTokensFile(a.tokens);
  Vocabulary vocab = Vocabulary::ReadTsvFile(a.vocab, CountTokens(docs));
  TrainingReport report;
  EmbeddingTable table = TrainEmbeddings(IndexCorpus(docs, vocab), vocab, a.hp, &report);
  if (a.binary) {
    std::ofstream out(a.out, std::ios::binary);
    table.WriteBinary(out);
  } else {
    table.WriteTextFile(a.out);
  }
  for (std::size_t i = 0; i < report.epoch_mean_loss.size(); ++i) {
    spdlog::info("epoch {} loss {:.5f}", i + 1, report.epoch_mean_loss[i]);
  }
  std::printf("%zu words x %d dims, %lld updates\n", table.size(), table.dim(),
              static_cast<long long>(report.updates));
  return kExitOk;
}

struct NeighborsArgs {
  std::string emb, word, concepts, concept_name;
  int k = 10;
};

// Plain neighbours of a word, or its expansion along one concept.
int Neighbors(const NeighborsArgs &a) {
  RequireFile(a.emb, "embedding file");
  EmbeddingTable table = EmbeddingTable::ReadFile(a.emb);
  std::string word = VocabularyKey(a.word);
  std::vector<Neighbor> result;
  if (!a.concept_name.empty()) {
    RequireFile(a.concepts, "concept pairs");
    std::optional<ConceptVector> relation;
    for (const auto &spec : ReadConceptPairsFile(a.concepts)) {
      if (spec.name == a.concept_name) relation = BuildConceptVector(spec, table);
    }
    if (!relation) throw InputError("concept not found: " + a.concept_name);
    result = ExpandEntity(word, *relation, table, a.k);
  } else {
    auto query = table.Find(word);
    if (!query) throw InputError("word has no embedding: " + word);
    result = NearestNeighbors(table, *query, a.k, {word});
  }
  for (const auto &n : result) std::printf("%s\t%.6f\n", n.word.c_str(), n.similarity);
  return kExitOk;
}

struct GraphArgs {
  std::string emb, seeds, concepts, out = "graph";
  GraphOptions options;
};

int Graph(const GraphArgs &a) {
  RequireFile(a.emb, "embedding file");
  RequireFile(a.seeds, "seeds");
  RequireFile(a.concepts, "concept pairs");
  EmbeddingTable table = EmbeddingTable::ReadFile(a.emb);
  SeedEntitySet seeds = SeedEntitySet::ReadTsvFile(a.seeds);
  std::vector<ConceptVector> concepts;
  for (const auto &spec : ReadConceptPairsFile(a.concepts)) {
    concepts.push_back(BuildConceptVector(spec, table));
  }
  SemanticGraph graph = BuildSemanticGraph(seeds, concepts, table, a.options);
  WriteGraphDir(graph, a.out);
  std::printf("%zu nodes, %zu edges, %zu seeds skipped\n%s", graph.nodes.size(),
              graph.edges.size(), graph.skipped_seeds.size(),
              FormatEntityCountTable(EntityCounts(graph, seeds)).c_str());
  return kExitOk;
}

struct CurriculumArgs {
  std::string graph, out = "plan", strategy = "node-degree", warmup_mode = "random";
  std::string seeds, vocab;
  PlanOptions options;
};

int Curriculum(CurriculumArgs a) {
  RequireFile(a.graph, "graph directory");
  a.options.strategy = ParseStrategy(a.strategy);
  if (a.warmup_mode == "g1") {
    a.options.warmup_mode = WarmupMode::kFirstStage;
  } else if (a.warmup_mode != "random") {
    throw std::invalid_argument("--warmup-mode must be random or g1");
  }
  SemanticGraph graph = ReadGraphDir(a.graph);
  std::optional<SeedEntitySet> seeds;
  std::optional<Vocabulary> vocab;
  if (a.options.strategy == CurriculumStrategy::kFrequency ||
      a.options.strategy == CurriculumStrategy::kConcept) {
    if (a.seeds.empty() || a.vocab.empty()) {
      throw InputError("frequency-based strategies need --seeds and --vocab");
    }
    RequireFile(a.seeds, "seeds");
    RequireFile(a.vocab, "vocabulary");
    seeds = SeedEntitySet::ReadTsvFile(a.seeds);
    vocab = Vocabulary::ReadTsvFile(a.vocab);
  }
  StrategyInputs inputs =
      CurriculumInputs(graph, seeds ? &*seeds : nullptr, vocab ? &*vocab : nullptr);
  CurriculumPlan plan = BuildPlan(inputs, a.options);
  plan.Write(a.out);
  auto cumulative = plan.Cumulative();
  for (std::size_t i = 0; i < plan.strata.size(); ++i) {
    std::printf("stage %zu: |N|=%zu |G|=%zu\n", i + 1, plan.strata[i].size(),
                cumulative[i].size());
  }
  return kExitOk;
}

struct EmitArgs {
  std::string tokens, plan, out = "data", strategy = "melt", seeds, generic;
  EmitOptions options;
  bool no_fallback = false;
};

int Emit(EmitArgs a) {
  RequireFile(a.tokens, "tokens");
  a.options.strategy = ParseEmitStrategy(a.strategy);
  a.options.masking.fallback_random_fill = !a.no_fallback;
  EmitInputs inputs;
  switch (a.options.strategy) {
    case EmitStrategy::kMelt:
      if (a.plan.empty()) throw InputError("melt strategy needs --plan");
      RequireFile(a.plan, "plan directory");
      inputs.plan = CurriculumPlan::Read(a.plan);
      a.options.total_steps = inputs.plan->total_steps;
      break;
    case EmitStrategy::kEntityOnly:
      if (a.seeds.empty()) throw InputError("entity-only strategy needs --seeds");
      RequireFile(a.seeds, "seeds");
      inputs.seeds = SeedEntitySet::ReadTsvFile(a.seeds);
      break;
    case EmitStrategy::kDiffMasking:
      if (a.generic.empty()) throw InputError("diff-masking needs --generic");
      RequireFile(a.generic, "generic frequency table");
      inputs.generic_counts = ReadFrequencyTable(a.generic);
      break;
    case EmitStrategy::kRandom:
      break;
  }
  EmittedDataset dataset = GenerateDataset(ReadTokensFile(a.tokens), inputs, a.options);
  WriteDataset(dataset, a.options, a.out);
  for (const auto &stage : dataset.stages) {
    const StageReport &r = stage.report;
    std::printf("stage %d: p_m %.4f, masked %.2f%% (target %.2f%%), %zu examples\n",
                r.stage, r.p_m, 100 * r.RealizedRatio(), 100 * r.target_ratio,
                r.examples);
  }
  return kExitOk;
}

struct OverlapArgs {
  std::string data, tagged;
  int stage = -1;
};

int AnalyzeOverlap(const OverlapArgs &a) {
  RequireFile(a.data, "dataset directory");
  RequireFile(a.tagged, "tagged file");
  auto tagged = ReadConllFile(a.tagged);
  std::map<int, std::vector<MaskedExample>> by_stage;
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(a.data)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto &f : files) {
    for (auto &ex : ReadExamples(f)) {
      if (a.stage < 0 || ex.stage == a.stage) by_stage[ex.stage].push_back(std::move(ex));
    }
  }
  if (by_stage.empty()) throw InputError("no masked examples in " + a.data);
  OverlapStats total;
  for (const auto &[stage, examples] : by_stage) {
    OverlapStats s = OverlapRatio(examples, tagged);
    total.masked += s.masked;
    total.on_entity += s.on_entity;
    std::printf("stage %d\t%.4f\t(%lld of %lld masked tokens tagged B-/I-)\n", stage,
                s.Ratio(), static_cast<long long>(s.on_entity),
                static_cast<long long>(s.masked));
  }
  std::printf("all\t%.4f\n", total.Ratio());
  return kExitOk;
}

struct RunArgs {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> workers, topk, k, epochs, dim;
  std::optional<double> min_sim, ratio;
  std::optional<std::string> output, strategy, mask_strategy, warmup_mode;
};

int Run(const RunArgs &a) {
  PipelineConfig config = PipelineConfig::LoadFile(a.config);
  if (a.seed) config.seed = *a.seed;
  if (a.workers) config.workers = *a.workers;
  if (a.topk) config.graph.topk = *a.topk;
  if (a.min_sim) config.graph.min_similarity = *a.min_sim;
  if (a.k) config.curriculum.K = *a.k;
  if (a.epochs) config.embedding.epochs = *a.epochs;
  if (a.dim) config.embedding.dim = *a.dim;
  if (a.ratio) config.masking.target_token_ratio = *a.ratio;
  if (a.output) config.output = *a.output;
  if (a.strategy) config.curriculum.strategy = ParseStrategy(*a.strategy);
  if (a.mask_strategy) config.emit_strategy = ParseEmitStrategy(*a.mask_strategy);
  if (a.warmup_mode) {
    config.curriculum.warmup_mode =
        *a.warmup_mode == "g1" ? WarmupMode::kFirstStage : WarmupMode::kRandom;
  }
  config.Propagate();
  RunLog log;
  RunManifest manifest = RunPipeline(config, &log);
  for (const auto &stage : manifest.stages) {
    std::printf("%-10s %s %7.2fs\n", stage.name.c_str(),
                log.cache_hit[stage.name] ? "cached " : "ran    ",
                log.seconds[stage.name]);
  }
  std::printf("%s", Report(config.output).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("melt"));
  CLI::App app{"melt: entity-aware masking data pipeline"};
  app.set_version_flag("--version", MELT_VERSION);
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str();

  std::function<int()> action;

  IngestArgs ingest;
  auto *cmd = app.add_subcommand("ingest", "normalize, tokenize and build the vocabulary");
  cmd->add_option("--input", ingest.input, "directory of .txt files or a JSONL corpus");
  cmd->add_option("--conll", ingest.conll, "pre-tokenized CoNLL file instead of --input");
  cmd->add_option("--min-count", ingest.min_count)->capture_default_str();
  cmd->add_option("--out", ingest.vocab_out)->capture_default_str();
  cmd->add_option("--tokens", ingest.tokens_out)->capture_default_str();
  cmd->add_option("--workers", ingest.workers)->capture_default_str();
  cmd->callback([&] { action = [&] { return Ingest(ingest); }; });

  ExtractArgs extract;
  cmd = app.add_subcommand("extract", "tag formulas and dictionary terms");
  cmd->add_option("--tokens", extract.tokens)->required();
  cmd->add_option("--dict", extract.dict)->required();
  cmd->add_option("--out", extract.out)->capture_default_str();
  cmd->add_option("--workers", extract.workers)->capture_default_str();
  cmd->callback([&] { action = [&] { return Extract(extract); }; });

  EmbedArgs embed;
  cmd = app.add_subcommand("embed", "train skip-gram embeddings");
  cmd->add_option("--tokens", embed.tokens)->required();
  cmd->add_option("--vocab", embed.vocab)->required();
  cmd->add_option("--out", embed.out)->capture_default_str();
  cmd->add_option("--workers", embed.hp.workers)->capture_default_str();
  cmd->add_option("--seed", embed.hp.seed)->capture_default_str();
  cmd->add_option("--dim", embed.hp.dim)->capture_default_str();
  cmd->add_option("--epochs", embed.hp.epochs)->capture_default_str();
  cmd->add_option("--lr", embed.hp.learning_rate)->capture_default_str();
  cmd->add_option("--lr-decay", embed.lr_decay, "linear|none")->capture_default_str();
  cmd->add_option("--window", embed.hp.window)->capture_default_str();
  cmd->add_option("--negatives", embed.hp.negatives)->capture_default_str();
  cmd->add_option("--subsample", embed.hp.subsample_threshold)->capture_default_str();
  cmd->add_flag("--binary", embed.binary, "write the binary table format");
  cmd->callback([&] { action = [&] { return Embed(embed); }; });

  NeighborsArgs neighbors;
  cmd = app.add_subcommand("neighbors", "nearest words, optionally along a concept");
  cmd->add_option("--emb", neighbors.emb)->required();
  cmd->add_option("--word", neighbors.word)->required();
  cmd->add_option("--k", neighbors.k)->capture_default_str();
  cmd->add_option("--concepts", neighbors.concepts);
  cmd->add_option("--concept", neighbors.concept_name);
  cmd->callback([&] { action = [&] { return Neighbors(neighbors); }; });

  GraphArgs graph;
  cmd = app.add_subcommand("graph", "expand seeds along concepts");
  cmd->add_option("--emb", graph.emb)->required();
  cmd->add_option("--seeds", graph.seeds)->required();
  cmd->add_option("--concepts", graph.concepts)->required();
  cmd->add_option("--topk", graph.options.topk)->capture_default_str();
  cmd->add_option("--min-sim", graph.options.min_similarity, "-1 disables the floor")
      ->capture_default_str();
  cmd->add_option("--workers", graph.options.workers)->capture_default_str();
  cmd->add_option("--out", graph.out)->capture_default_str();
  cmd->callback([&] { action = [&] { return Graph(graph); }; });

  CurriculumArgs curriculum;
  cmd = app.add_subcommand("curriculum", "stratify the graph and lay out the schedule");
  cmd->add_option("--graph", curriculum.graph)->required();
  cmd->add_option("--strategy", curriculum.strategy,
                  "node-degree|frequency|concept|masking-ratio|reverse|none")
      ->capture_default_str();
  cmd->add_option("--k", curriculum.options.K)->capture_default_str();
  cmd->add_option("--warmup", curriculum.options.warmup_steps)->capture_default_str();
  cmd->add_option("--stage", curriculum.options.stage_steps)->capture_default_str();
  cmd->add_option("--total", curriculum.options.total_steps)->capture_default_str();
  cmd->add_option("--warmup-mode", curriculum.warmup_mode, "random|g1")->capture_default_str();
  cmd->add_option("--seeds", curriculum.seeds, "seed entities (frequency, concept)");
  cmd->add_option("--vocab", curriculum.vocab, "vocabulary (frequency, concept)");
  cmd->add_option("--out", curriculum.out)->capture_default_str();
  cmd->callback([&] { action = [&] { return Curriculum(curriculum); }; });

  EmitArgs emit;
  cmd = app.add_subcommand("emit", "write masked training examples");
  cmd->add_option("--tokens", emit.tokens)->required();
  cmd->add_option("--plan", emit.plan);
  cmd->add_option("--out", emit.out)->capture_default_str();
  cmd->add_option("--ratio", emit.options.masking.target_token_ratio)->capture_default_str();
  cmd->add_option("--seqlen", emit.options.masking.sequence_length)->capture_default_str();
  cmd->add_option("--seed", emit.options.masking.seed)->capture_default_str();
  cmd->add_option("--strategy", emit.strategy, "melt|random|entity-only|diff-masking")
      ->capture_default_str();
  cmd->add_option("--seeds", emit.seeds, "seed entities (entity-only)");
  cmd->add_option("--generic", emit.generic, "generic frequency table (diff-masking)");
  cmd->add_option("--shard-size", emit.options.shard_size)->capture_default_str();
  cmd->add_option("--workers", emit.options.workers)->capture_default_str();
  cmd->add_option("--total", emit.options.total_steps, "steps for baseline manifests")
      ->capture_default_str();
  cmd->add_flag("--bert-corruption", emit.options.masking.bert_corruption,
                "80/10/10 replacement instead of the sentinel only");
  cmd->add_flag("--no-fallback", emit.no_fallback, "disable random fill");
  cmd->callback([&] { action = [&] { return Emit(emit); }; });

  OverlapArgs overlap;
  auto *analyze = app.add_subcommand("analyze", "dataset statistics");
  analyze->require_subcommand(1);
  cmd = analyze->add_subcommand("overlap", "share of masked tokens with B-/I- gold tags");
  cmd->add_option("--data", overlap.data)->required();
  cmd->add_option("--tagged", overlap.tagged)->required();
  cmd->add_option("--stage", overlap.stage, "only this stage");
  cmd->callback([&] { action = [&] { return AnalyzeOverlap(overlap); }; });

  RunArgs run;
  cmd = app.add_subcommand("run", "run every stage from a config file");
  cmd->add_option("--config", run.config)->required();
  cmd->add_option("--seed", run.seed);
  cmd->add_option("--workers", run.workers);
  cmd->add_option("--topk", run.topk);
  cmd->add_option("--min-sim", run.min_sim);
  cmd->add_option("--k", run.k);
  cmd->add_option("--epochs", run.epochs);
  cmd->add_option("--dim", run.dim);
  cmd->add_option("--ratio", run.ratio);
  cmd->add_option("--output", run.output);
  cmd->add_option("--strategy", run.strategy, "curriculum strategy");
  cmd->add_option("--mask-strategy", run.mask_strategy, "emit strategy");
  cmd->add_option("--warmup-mode", run.warmup_mode);
  cmd->callback([&] { action = [&] { return Run(run); }; });

  std::string report_dir;
  cmd = app.add_subcommand("report", "summarize a run directory");
  cmd->add_option("--run", report_dir)->required();
  cmd->callback([&] {
    action = [&] {
      std::printf("%s", Report(report_dir).c_str());
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitInputError;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    return action();
  } catch (const InputError &e) {
    spdlog::error("{}", e.what());
    return kExitInputError;
  } catch (const ValidationError &e) {
    spdlog::error("{}", e.what());
    return kExitValidationFailure;
  } catch (const StageError &e) {
    spdlog::error("{}", e.what());
    return kExitStageFailure;
  } catch (const std::invalid_argument &e) {
    spdlog::error("{}", e.what());
    return kExitValidationFailure;
  } catch (const std::exception &e) {
    spdlog::error("{}", e.what());
    return kExitStageFailure;
  }
}
