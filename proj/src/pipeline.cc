#include "melt/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "melt/hashing.h"

namespace melt {
namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string ReadAll(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteAll(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string_view LrDecayName(LrDecay d) {
  return d == LrDecay::kLinear ? "linear" : "none";
}

LrDecay ParseLrDecay(const std::string &name) {
  if (name == "linear") return LrDecay::kLinear;
  if (name == "none") return LrDecay::kNone;
  throw ValidationError("unknown lr_decay '" + name + "'");
}

std::string_view WarmupModeName(WarmupMode m) {
  return m == WarmupMode::kRandom ? "random" : "g1";
}

WarmupMode ParseWarmupMode(const std::string &name) {
  if (name == "random") return WarmupMode::kRandom;
  if (name == "g1") return WarmupMode::kFirstStage;
  throw ValidationError("unknown warmup_mode '" + name + "'");
}

ordered_json EmbeddingJson(const EmbeddingHyperparams &hp) {
  ordered_json j;
  j["dim"] = hp.dim;
  j["epochs"] = hp.epochs;
  j["learning_rate"] = hp.learning_rate;
  j["lr_decay"] = LrDecayName(hp.lr_decay);
  j["min_learning_rate"] = hp.min_learning_rate;
  j["window"] = hp.window;
  j["subsample"] = hp.subsample_threshold;
  j["negatives"] = hp.negatives;
  j["min_count"] = hp.min_count;
  return j;
}

ordered_json MaskingJson(const PipelineConfig &c) {
  ordered_json j;
  j["strategy"] = EmitStrategyName(c.emit_strategy);
  j["ratio"] = c.masking.target_token_ratio;
  j["sequence_length"] = c.masking.sequence_length;
  j["sentinel"] = c.masking.mask_sentinel;
  j["fallback_random_fill"] = c.masking.fallback_random_fill;
  j["bert_corruption"] = c.masking.bert_corruption;
  j["shard_size"] = c.shard_size;
  return j;
}

ordered_json CurriculumJson(const PlanOptions &p) {
  ordered_json j;
  j["strategy"] = StrategyName(p.strategy);
  j["k"] = p.K;
  j["warmup_steps"] = p.warmup_steps;
  j["stage_steps"] = p.stage_steps;
  j["total_steps"] = p.total_steps;
  j["warmup_mode"] = WarmupModeName(p.warmup_mode);
  return j;
}

ordered_json GraphJson(const GraphOptions &g) {
  ordered_json j;
  j["topk"] = g.topk;
  j["min_similarity"] = g.min_similarity;
  return j;
}

// Runs one stage with caching. Artifacts are every regular file under
// output/<name>/ except stage.json.
class StageRunner {
 public:
  StageRunner(fs::path output, RunManifest &manifest, RunLog &log)
      : output_(std::move(output)), manifest_(manifest), log_(log) {}

  const StageRecord &Run(const std::string &name, const ordered_json &settings,
                         std::map<std::string, std::string> inputs,
                         const std::function<void(const fs::path &)> &compute) {
    auto started = std::chrono::steady_clock::now();
    StageRecord record;
    record.name = name;
    record.inputs = std::move(inputs);
    ordered_json key_doc;
    key_doc["tool_version"] = MELT_VERSION;
    key_doc["stage"] = name;
    key_doc["settings"] = settings;
    key_doc["inputs"] = record.inputs;
    record.key = Sha256Hex(key_doc.dump());

    fs::path dir = output_ / name;
    bool hit = CacheHit(dir, record);
    if (hit) {
      spdlog::info("{}: cached", name);
    } else {
      spdlog::info("{}: running", name);
      fs::remove_all(dir);
      fs::create_directories(dir);
      try {
        compute(dir);
      } catch (const StageError &) {
        throw;
      } catch (const std::exception &e) {
        throw StageError(name, e.what());
      }
      record.artifacts = HashArtifacts(dir);
      ordered_json stage_doc;
      stage_doc["key"] = record.key;
      stage_doc["inputs"] = record.inputs;
      stage_doc["artifacts"] = record.artifacts;
      WriteAll(dir / "stage.json", stage_doc.dump(2) + "\n");
    }
    log_.cache_hit[name] = hit;
    log_.seconds[name] = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    manifest_.stages.push_back(std::move(record));
    return manifest_.stages.back();
  }

 private:
  std::map<std::string, std::string> HashArtifacts(const fs::path &dir) const {
    std::map<std::string, std::string> out;
    std::vector<fs::path> files;
    for (const auto &entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().filename() != "stage.json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
      out[fs::relative(f, output_).generic_string()] = Sha256File(f);
    }
    return out;
  }

  bool CacheHit(const fs::path &dir, StageRecord &record) const {
    fs::path stage_file = dir / "stage.json";
    if (!fs::exists(stage_file)) return false;
    try {
      json doc = json::parse(ReadAll(stage_file));
      if (doc.at("key").get<std::string>() != record.key) return false;
      auto recorded = doc.at("artifacts").get<std::map<std::string, std::string>>();
      if (recorded != HashArtifacts(dir)) return false;
      record.artifacts = std::move(recorded);
      return true;
    } catch (const std::exception &) {
      return false;
    }
  }

  fs::path output_;
  RunManifest &manifest_;
  RunLog &log_;
};

std::string ArtifactHash(const StageRecord &record, const std::string &path) {
  auto it = record.artifacts.find(path);
  if (it == record.artifacts.end()) {
    throw StageError(record.name, "missing artifact " + path);
  }
  return it->second;
}

}  // namespace

void PipelineConfig::Propagate() {
  embedding.seed = seed;
  embedding.workers = workers;
  graph.workers = workers;
  masking.seed = seed;
}

void PipelineConfig::Validate() const {
  auto need = [](const std::string &path, const char *what) {
    if (path.empty()) throw InputError(std::string("config: ") + what + " path is empty");
    if (!fs::exists(path)) {
      throw InputError(std::string("config: ") + what + " not found: " + path);
    }
  };
  need(corpus, "corpus");
  need(dictionary, "dictionary");
  need(concepts, "concepts");
  if (emit_strategy == EmitStrategy::kDiffMasking) {
    need(generic_frequencies, "generic frequency table");
  }
  if (output.empty()) throw InputError("config: output path is empty");

  try {
    embedding.Validate();
    masking.Validate();
  } catch (const std::invalid_argument &e) {
    throw ValidationError(e.what());
  }
  if (graph.topk < 1) throw ValidationError("graph.topk must be >= 1");
  if (graph.min_similarity < -1 || graph.min_similarity > 1) {
    throw ValidationError("graph.min_similarity must lie in [-1, 1]");
  }
  if (curriculum.K < 1) throw ValidationError("curriculum.k must be >= 1");
  if (curriculum.warmup_steps < 0 || curriculum.stage_steps < 1 ||
      curriculum.total_steps <= curriculum.warmup_steps) {
    throw ValidationError(
        "curriculum steps need warmup >= 0, stage >= 1 and total > warmup");
  }
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (shard_size < 1) throw ValidationError("masking.shard_size must be >= 1");
}

std::string PipelineConfig::ToJson() const {
  ordered_json j;
  j["seed"] = seed;
  j["workers"] = workers;
  j["paths"] = {{"corpus", corpus},
                {"dictionary", dictionary},
                {"concepts", concepts},
                {"generic_frequencies", generic_frequencies},
                {"output", output}};
  j["embedding"] = EmbeddingJson(embedding);
  j["graph"] = GraphJson(graph);
  j["curriculum"] = CurriculumJson(curriculum);
  j["masking"] = MaskingJson(*this);
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::FromJson(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("paths")) {
      const json &p = j["paths"];
      c.corpus = p.value("corpus", "");
      c.dictionary = p.value("dictionary", "");
      c.concepts = p.value("concepts", "");
      c.generic_frequencies = p.value("generic_frequencies", "");
      c.output = p.value("output", "");
    }
    if (j.contains("embedding")) {
      const json &e = j["embedding"];
      auto &hp = c.embedding;
      hp.dim = e.value("dim", hp.dim);
      hp.epochs = e.value("epochs", hp.epochs);
      hp.learning_rate = e.value("learning_rate", hp.learning_rate);
      hp.lr_decay = ParseLrDecay(e.value("lr_decay", std::string(LrDecayName(hp.lr_decay))));
      hp.min_learning_rate = e.value("min_learning_rate", hp.min_learning_rate);
      hp.window = e.value("window", hp.window);
      hp.subsample_threshold = e.value("subsample", hp.subsample_threshold);
      hp.negatives = e.value("negatives", hp.negatives);
      hp.min_count = e.value("min_count", hp.min_count);
    }
    if (j.contains("graph")) {
      c.graph.topk = j["graph"].value("topk", c.graph.topk);
      c.graph.min_similarity = j["graph"].value("min_similarity", c.graph.min_similarity);
    }
    if (j.contains("curriculum")) {
      const json &k = j["curriculum"];
      auto &p = c.curriculum;
      p.strategy = ParseStrategy(k.value("strategy", std::string(StrategyName(p.strategy))));
      p.K = k.value("k", p.K);
      p.warmup_steps = k.value("warmup_steps", p.warmup_steps);
      p.stage_steps = k.value("stage_steps", p.stage_steps);
      p.total_steps = k.value("total_steps", p.total_steps);
      p.warmup_mode = ParseWarmupMode(k.value("warmup_mode", std::string(WarmupModeName(p.warmup_mode))));
    }
    if (j.contains("masking")) {
      const json &m = j["masking"];
      c.emit_strategy = ParseEmitStrategy(
          m.value("strategy", std::string(EmitStrategyName(c.emit_strategy))));
      c.masking.target_token_ratio = m.value("ratio", c.masking.target_token_ratio);
      c.masking.sequence_length = m.value("sequence_length", c.masking.sequence_length);
      c.masking.mask_sentinel = m.value("sentinel", c.masking.mask_sentinel);
      c.masking.fallback_random_fill =
          m.value("fallback_random_fill", c.masking.fallback_random_fill);
      c.masking.bert_corruption = m.value("bert_corruption", c.masking.bert_corruption);
      c.shard_size = m.value("shard_size", c.shard_size);
    }
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.Propagate();
  return c;
}

PipelineConfig PipelineConfig::LoadFile(const fs::path &path) {
  if (!fs::exists(path)) throw InputError("config not found: " + path.string());
  PipelineConfig c = FromJson(ReadAll(path));
  fs::path base = path.parent_path();
  for (std::string *p : {&c.corpus, &c.dictionary, &c.concepts,
                         &c.generic_frequencies, &c.output}) {
    if (!p->empty() && fs::path(*p).is_relative()) {
      *p = (base / *p).lexically_normal().string();
    }
  }
  return c;
}

bool PipelineConfig::operator==(const PipelineConfig &other) const {
  return ToJson() == other.ToJson();
}

std::string RunManifest::ToJson() const {
  ordered_json j;
  j["tool_version"] = tool_version;
  j["config_hash"] = config_hash;
  ordered_json stages_json = ordered_json::array();
  for (const auto &s : stages) {
    ordered_json st;
    st["name"] = s.name;
    st["key"] = s.key;
    st["inputs"] = s.inputs;
    st["artifacts"] = s.artifacts;
    stages_json.push_back(std::move(st));
  }
  j["stages"] = std::move(stages_json);
  j["entity_counts"] = {{"seed_count", entity_counts.seed_count},
                        {"expanded_count", entity_counts.expanded_count},
                        {"total_unique", entity_counts.total_unique}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::FromJson(const std::string &text) {
  json j = json::parse(text);
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  for (const auto &st : j.at("stages")) {
    StageRecord s;
    s.name = st.at("name").get<std::string>();
    s.key = st.at("key").get<std::string>();
    s.inputs = st.at("inputs").get<std::map<std::string, std::string>>();
    s.artifacts = st.at("artifacts").get<std::map<std::string, std::string>>();
    m.stages.push_back(std::move(s));
  }
  const json &c = j.at("entity_counts");
  m.entity_counts.seed_count = c.at("seed_count").get<int64_t>();
  m.entity_counts.expanded_count = c.at("expanded_count").get<int64_t>();
  m.entity_counts.total_unique = c.at("total_unique").get<int64_t>();
  return m;
}

std::string HashPath(const fs::path &path) {
  if (!fs::is_directory(path)) return Sha256File(path);
  std::vector<fs::path> files;
  for (const auto &entry : fs::recursive_directory_iterator(path)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string joined;
  for (const auto &f : files) {
    joined += fs::relative(f, path).generic_string();
    joined += '\0';
    joined += Sha256File(f);
    joined += '\n';
  }
  return Sha256Hex(joined);
}

StrategyInputs CurriculumInputs(const SemanticGraph &graph,
                                const SeedEntitySet *seeds,
                                const Vocabulary *vocab) {
  StrategyInputs inputs;
  inputs.degrees = NodeDegrees(graph);
  for (const auto &skipped : graph.skipped_seeds) inputs.degrees.try_emplace(skipped, 0);
  if (seeds || vocab) {
    for (const auto &[entity, degree] : inputs.degrees) {
      int64_t f = 0;
      if (seeds && seeds->Contains(entity)) {
        f = seeds->at(entity).corpus_frequency;
      } else if (auto entry = vocab ? vocab->Find(entity) : std::nullopt) {
        f = entry->count;
      }
      inputs.frequencies[entity] = f;
    }
  }
  return inputs;
}

RunManifest RunPipeline(const PipelineConfig &input_config, RunLog *log) {
  PipelineConfig config = input_config;
  config.Propagate();
  config.Validate();

  const fs::path out = config.output;
  fs::create_directories(out);
  const std::string config_text = config.ToJson();
  WriteAll(out / "config.json", config_text);

  RunManifest manifest;
  manifest.config_hash = Sha256Hex(config_text);
  RunLog local_log;
  RunLog &run_log = log ? *log : local_log;
  manifest.stages.reserve(6);
  StageRunner runner(out, manifest, run_log);

  // Loaded lazily so cached stages skip the work.
  std::optional<std::vector<TokenizedDocument>> docs;
  auto tokens = [&]() -> const std::vector<TokenizedDocument> & {
    if (!docs) docs = ReadTokensFile(out / "ingest" / "tokens.jsonl");
    return *docs;
  };

  const StageRecord &ingest = runner.Run(
      "ingest", ordered_json{{"min_count", config.embedding.min_count}},
      {{"corpus", HashPath(config.corpus)}}, [&](const fs::path &dir) {
        CorpusReadStats stats;
        auto raw = ReadCorpus(config.corpus, &stats);
        docs = TokenizeCorpus(raw, config.workers, &stats);
        if (docs->empty()) throw std::invalid_argument("empty corpus");
        WriteTokensFile(*docs, dir / "tokens.jsonl");
        BuildVocabulary(*docs, config.embedding.min_count).WriteTsvFile(dir / "vocab.tsv");
        spdlog::info("ingest: {} documents, {} skipped (invalid UTF-8), {} empty",
                     docs->size(), stats.skipped_invalid_utf8, stats.skipped_empty);
      });
  const std::string tokens_hash = ArtifactHash(ingest, "ingest/tokens.jsonl");
  const std::string vocab_hash = ArtifactHash(ingest, "ingest/vocab.tsv");

  const StageRecord &extract = runner.Run(
      "extract", ordered_json::object(),
      {{"ingest/tokens.jsonl", tokens_hash},
       {"dictionary", HashPath(config.dictionary)}},
      [&](const fs::path &dir) {
        Dictionary dict = Dictionary::LoadFile(config.dictionary);
        ExtractCorpusEntities(tokens(), dict, config.workers)
            .WriteTsvFile(dir / "seeds.tsv");
      });
  const std::string seeds_hash = ArtifactHash(extract, "extract/seeds.tsv");

  ordered_json embed_settings = EmbeddingJson(config.embedding);
  embed_settings["seed"] = config.embedding.seed;
  embed_settings["workers"] = config.embedding.workers;
  const StageRecord &embed = runner.Run(
      "embed", embed_settings,
      {{"ingest/tokens.jsonl", tokens_hash}, {"ingest/vocab.tsv", vocab_hash}},
      [&](const fs::path &dir) {
        Vocabulary vocab = Vocabulary::ReadTsvFile(out / "ingest" / "vocab.tsv",
                                                   CountTokens(tokens()));
        TrainingReport report;
        EmbeddingTable table = TrainEmbeddings(IndexCorpus(tokens(), vocab), vocab,
                                               config.embedding, &report);
        if (!report.epoch_mean_loss.empty()) {
          spdlog::info("embed: final epoch loss {:.4f}", report.epoch_mean_loss.back());
        }
        table.WriteTextFile(dir / "emb.vec");
      });
  const std::string emb_hash = ArtifactHash(embed, "embed/emb.vec");

  const StageRecord &graph_stage = runner.Run(
      "graph", GraphJson(config.graph),
      {{"embed/emb.vec", emb_hash},
       {"extract/seeds.tsv", seeds_hash},
       {"concepts", HashPath(config.concepts)}},
      [&](const fs::path &dir) {
        EmbeddingTable table = EmbeddingTable::ReadFile(out / "embed" / "emb.vec");
        SeedEntitySet seeds = SeedEntitySet::ReadTsvFile(out / "extract" / "seeds.tsv");
        std::vector<ConceptVector> concepts;
        for (const auto &spec : ReadConceptPairsFile(config.concepts)) {
          concepts.push_back(BuildConceptVector(spec, table));
        }
        WriteGraphDir(BuildSemanticGraph(seeds, concepts, table, config.graph), dir);
      });
  const std::string edges_hash = ArtifactHash(graph_stage, "graph/edges.tsv");
  const std::string nodes_hash = ArtifactHash(graph_stage, "graph/nodes.tsv");
  const std::string skipped_hash = ArtifactHash(graph_stage, "graph/skipped.txt");

  SemanticGraph graph = ReadGraphDir(out / "graph");
  SeedEntitySet seeds = SeedEntitySet::ReadTsvFile(out / "extract" / "seeds.tsv");
  manifest.entity_counts = EntityCounts(graph, seeds);

  std::map<std::string, std::string> plan_inputs = {
      {"graph/edges.tsv", edges_hash},
      {"graph/nodes.tsv", nodes_hash},
      {"graph/skipped.txt", skipped_hash}};
  const bool needs_frequency =
      config.curriculum.strategy == CurriculumStrategy::kFrequency ||
      config.curriculum.strategy == CurriculumStrategy::kConcept;
  if (needs_frequency) {
    plan_inputs["extract/seeds.tsv"] = seeds_hash;
    plan_inputs["ingest/vocab.tsv"] = vocab_hash;
  }
  const StageRecord &curriculum = runner.Run(
      "curriculum", CurriculumJson(config.curriculum), plan_inputs,
      [&](const fs::path &dir) {
        std::optional<Vocabulary> vocab;
        if (needs_frequency) vocab = Vocabulary::ReadTsvFile(out / "ingest" / "vocab.tsv");
        StrategyInputs inputs =
            CurriculumInputs(graph, needs_frequency ? &seeds : nullptr,
                             vocab ? &*vocab : nullptr);
        BuildPlan(inputs, config.curriculum).Write(dir);
      });
  const std::string plan_hash = ArtifactHash(curriculum, "curriculum/plan.json");

  std::map<std::string, std::string> emit_inputs = {
      {"ingest/tokens.jsonl", tokens_hash}};
  switch (config.emit_strategy) {
    case EmitStrategy::kMelt:
      emit_inputs["curriculum/plan.json"] = plan_hash;
      break;
    case EmitStrategy::kEntityOnly:
      emit_inputs["extract/seeds.tsv"] = seeds_hash;
      break;
    case EmitStrategy::kDiffMasking:
      emit_inputs["generic_frequencies"] = HashPath(config.generic_frequencies);
      break;
    case EmitStrategy::kRandom:
      break;
  }
  ordered_json emit_settings = MaskingJson(config);
  emit_settings["seed"] = config.masking.seed;
  emit_settings["total_steps"] = config.curriculum.total_steps;
  runner.Run("emit", emit_settings, emit_inputs, [&](const fs::path &dir) {
    EmitInputs inputs;
    switch (config.emit_strategy) {
      case EmitStrategy::kMelt:
        inputs.plan = CurriculumPlan::Read(out / "curriculum");
        break;
      case EmitStrategy::kEntityOnly:
        inputs.seeds = seeds;
        break;
      case EmitStrategy::kDiffMasking:
        inputs.generic_counts = ReadFrequencyTable(config.generic_frequencies);
        break;
      case EmitStrategy::kRandom:
        break;
    }
    EmitOptions options;
    options.strategy = config.emit_strategy;
    options.masking = config.masking;
    options.shard_size = config.shard_size;
    options.workers = config.workers;
    options.total_steps = config.curriculum.total_steps;
    WriteDataset(GenerateDataset(tokens(), inputs, options), options, dir);
  });

  WriteAll(out / "run.json", manifest.ToJson());
  ordered_json log_doc;
  log_doc["seconds"] = run_log.seconds;
  log_doc["cache_hit"] = run_log.cache_hit;
  WriteAll(out / "run_log.json", log_doc.dump(2) + "\n");
  return manifest;
}

namespace {

std::string Format(const char *fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

}  // namespace

std::string Report(const fs::path &run_dir) {
  std::ostringstream out;
  std::vector<std::string> missing;
  out << "run: " << run_dir.string() << "\n";

  std::optional<RunManifest> manifest;
  if (fs::exists(run_dir / "run.json")) {
    manifest = RunManifest::FromJson(ReadAll(run_dir / "run.json"));
    out << "tool version " << manifest->tool_version << ", config sha256 "
        << manifest->config_hash.substr(0, 16) << "\n\n";
    out << "Unique entities\n" << FormatEntityCountTable(manifest->entity_counts) << "\n";
  } else {
    missing.push_back("run.json");
  }

  std::map<std::string, int> degrees;
  if (fs::exists(run_dir / "graph" / "nodes.tsv")) {
    degrees = NodeDegrees(ReadGraphDir(run_dir / "graph"));
  } else {
    missing.push_back("graph/");
  }

  if (fs::exists(run_dir / "curriculum" / "plan.json")) {
    CurriculumPlan plan = CurriculumPlan::Read(run_dir / "curriculum");
    out << "Curriculum: " << StrategyName(plan.strategy) << ", K=" << plan.K
        << ", warm-up " << plan.warmup_steps << " steps ("
        << WarmupModeName(plan.warmup_mode) << ")\n";
    out << Format("%-6s %8s %8s  %s\n", "stage", "|N_i|", "|G_i|", "degree range");
    auto cumulative = plan.Cumulative();
    for (std::size_t i = 0; i < plan.strata.size(); ++i) {
      std::string range = "-";
      if (!degrees.empty() && !plan.strata[i].empty()) {
        int lo = INT32_MAX, hi = 0;
        for (const auto &e : plan.strata[i]) {
          auto it = degrees.find(e);
          int d = it == degrees.end() ? 0 : it->second;
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
        range = std::to_string(lo) + ".." + std::to_string(hi);
      }
      out << Format("%-6zu %8zu %8zu  %s\n", i + 1, plan.strata[i].size(),
                    cumulative[i].size(), range.c_str());
    }
    out << "schedule:";
    for (const Phase &p : plan.MakeSchedule().Phases()) {
      out << ' ' << (p.kind == PhaseKind::kWarmup ? std::string("warmup")
                                                  : "s" + std::to_string(p.stage))
          << '[' << p.begin << ',' << p.end << ')';
    }
    out << "\n\n";
  } else {
    missing.push_back("curriculum/plan.json");
  }

  if (fs::exists(run_dir / "emit" / "manifest.json")) {
    json data = json::parse(ReadAll(run_dir / "emit" / "manifest.json"));
    out << "Masking (" << data["config"]["strategy"].get<std::string>() << "), "
        << data["sequences"].get<int64_t>() << " sequences\n";
    out << Format("%-6s %8s %8s %9s %9s\n", "stage", "p_m", "target", "realized",
                  "examples");
    for (const auto &st : data["stages"]) {
      out << Format("%-6d %8.4f %7.2f%% %8.2f%% %9lld\n", st["stage"].get<int>(),
                    st["p_m"].get<double>(), 100 * st["target_ratio"].get<double>(),
                    100 * st["realized_ratio"].get<double>(),
                    static_cast<long long>(st["examples"].get<int64_t>()));
    }
    out << "\n";
  } else {
    missing.push_back("emit/manifest.json");
  }

  if (fs::exists(run_dir / "config.json")) {
    PipelineConfig config = PipelineConfig::FromJson(ReadAll(run_dir / "config.json"));
    const auto &hp = config.embedding;
    out << "Word embedding hyper-parameters\n";
    if (fs::exists(run_dir / "ingest" / "vocab.tsv")) {
      out << Format("  %-28s %zu\n", "Vocabulary size",
                    Vocabulary::ReadTsvFile(run_dir / "ingest" / "vocab.tsv").size());
    }
    out << Format("  %-28s %d\n", "Epochs", hp.epochs);
    out << Format("  %-28s %d\n", "Embedding sizes", hp.dim);
    out << Format("  %-28s %g\n", "Learning rate", hp.learning_rate);
    out << Format("  %-28s %d\n", "Context Window", hp.window);
    out << Format("  %-28s %g\n", "Sub-sampling threshold", hp.subsample_threshold);
    out << Format("  %-28s %d\n", "Number of negative samples", hp.negatives);
    out << Format("  %-28s %s\n", "Learning-rate decay",
                  std::string(LrDecayName(hp.lr_decay)).c_str());
    out << Format("  %-28s %d\n", "Minimum count", hp.min_count);
  } else {
    missing.push_back("config.json");
  }

  if (!missing.empty()) {
    out << "\nmissing:";
    for (const auto &m : missing) out << ' ' << m;
    out << "\n";
  }
  return out.str();
}

}  // namespace melt
