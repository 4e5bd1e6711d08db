#include "melt/masking.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "melt/hashing.h"

namespace melt {
namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kMinWindowTokens = 8;

double Uniform01(MaskRng &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t UniformIndex(MaskRng &rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

// Moves `take` uniformly chosen elements of `items` to its front.
template <class T>
void PartialShuffle(std::vector<T> &items, std::size_t take, MaskRng &rng) {
  take = std::min(take, items.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + UniformIndex(rng, items.size() - i);
    std::swap(items[i], items[j]);
  }
}

bool IsSpecialToken(const std::string &token, const std::string &sentinel) {
  if (token == sentinel) return true;
  return token.size() > 2 && token.front() == '[' && token.back() == ']' &&
         std::all_of(token.begin() + 1, token.end() - 1,
                     [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
}

bool HasLetter(const std::string &word) {
  return std::any_of(word.begin(), word.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) ||
           static_cast<unsigned char>(c) >= 0x80;
  });
}

struct StageSpec {
  int label = 0;            // stage written into each example
  int eligible_stage = 0;   // 0 = uniform random masking
  double ratio = 0.15;
};

}  // namespace

EntityMatcher::EntityMatcher(const Strata &strata) {
  for (std::size_t i = 0; i < strata.size(); ++i) {
    for (const auto &entity : strata[i]) {
      stage_of_.try_emplace(entity, static_cast<int>(i) + 1);
      int tokens = 1 + static_cast<int>(std::count(entity.begin(), entity.end(), ' '));
      max_tokens_ = std::max(max_tokens_, tokens);
    }
  }
}

int EntityMatcher::StageOf(const std::string &entity) const {
  auto it = stage_of_.find(entity);
  return it == stage_of_.end() ? 0 : it->second;
}

EntityIndex EntityMatcher::Index(std::span<const std::string> tokens) const {
  EntityIndex index;
  const int n = static_cast<int>(tokens.size());
  std::vector<std::string> lowered(n);
  std::vector<bool> have_lowered(n, false);
  auto lower = [&](int i) -> const std::string & {
    if (!have_lowered[i]) {
      lowered[i] = ToLower(tokens[i]);
      have_lowered[i] = true;
    }
    return lowered[i];
  };

  int i = 0;
  while (i < n) {
    int matched = 0;
    int stage = 0;
    std::string entity;
    for (int len = std::min(max_tokens_, n - i); len >= 1 && !matched; --len) {
      std::string key;
      if (len == 1) {
        key = VocabularyKey(tokens[i]);
      } else {
        for (int j = i; j < i + len; ++j) {
          if (j > i) key += ' ';
          key += lower(j);
        }
      }
      auto it = stage_of_.find(key);
      if (it != stage_of_.end()) {
        matched = len;
        stage = it->second;
        entity = std::move(key);
      }
    }
    if (matched) {
      index.push_back({i, i + matched, std::move(entity), stage});
      i += matched;
    } else {
      ++i;
    }
  }
  return index;
}

EntityIndex IndexEntities(std::span<const std::string> tokens,
                          const Strata &strata) {
  return EntityMatcher(strata).Index(tokens);
}

MaskCalibration CalibrateMaskProbability(int64_t entity_tokens,
                                         int64_t total_tokens,
                                         double target_ratio) {
  if (total_tokens <= 0) throw std::invalid_argument("total_tokens must be > 0");
  MaskCalibration out;
  if (entity_tokens <= 0) {
    out.p_m = 0;
    out.shortfall = true;
    out.fallback_only = true;
    return out;
  }
  double p = target_ratio * static_cast<double>(total_tokens) /
             static_cast<double>(entity_tokens);
  out.p_m = std::min(1.0, p);
  out.shortfall = p > 1.0;
  return out;
}

void MaskingConfig::Validate() const {
  if (!(target_token_ratio > 0 && target_token_ratio < 1)) {
    throw std::invalid_argument("target_token_ratio must lie in (0, 1)");
  }
  if (sequence_length < kMinWindowTokens) {
    throw std::invalid_argument("sequence_length must be >= 8");
  }
  if (mask_sentinel.empty()) throw std::invalid_argument("empty mask sentinel");
}

std::vector<std::string> MaskedExample::Reconstruct() const {
  std::vector<std::string> out = tokens;
  for (std::size_t i = 0; i < masked_positions.size(); ++i) {
    out.at(masked_positions[i]) = original_targets.at(i);
  }
  return out;
}

std::optional<MaskedExample> MaskSequence(std::span<const std::string> tokens,
                                          const EntityIndex &index, int stage,
                                          double p_m, const MaskingConfig &cfg,
                                          MaskRng &rng,
                                          std::optional<double> ratio) {
  const std::size_t n = tokens.size();
  if (n < 2) return std::nullopt;

  const double target = ratio.value_or(cfg.target_token_ratio);
  const double exact = target * static_cast<double>(n);
  std::size_t budget = static_cast<std::size_t>(std::floor(exact));
  if (Uniform01(rng) < exact - std::floor(exact)) ++budget;

  std::vector<char> masked(n, 0);
  std::size_t count = 0;
  auto special = [&](std::size_t i) {
    return IsSpecialToken(tokens[i], cfg.mask_sentinel);
  };

  auto fill_from = [&](std::vector<std::size_t> candidates) {
    std::size_t need = budget > count ? budget - count : 0;
    PartialShuffle(candidates, need, rng);
    for (std::size_t i = 0; i < std::min(need, candidates.size()); ++i) {
      masked[candidates[i]] = 1;
      ++count;
    }
  };

  if (stage == 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (!special(i)) candidates.push_back(i);
    }
    fill_from(std::move(candidates));
  } else {
    std::vector<const IndexedSpan *> eligible;
    std::vector<char> in_entity(n, 0);
    for (const auto &span : index) {
      for (int p = span.token_start; p < span.token_end; ++p) in_entity[p] = 1;
      if (span.stage <= stage) eligible.push_back(&span);
    }
    PartialShuffle(eligible, eligible.size(), rng);
    for (const IndexedSpan *span : eligible) {
      if (!(Uniform01(rng) < p_m)) continue;
      std::size_t len = static_cast<std::size_t>(span->token_end - span->token_start);
      if (cfg.fallback_random_fill && count + len > budget) continue;
      for (int p = span->token_start; p < span->token_end; ++p) masked[p] = 1;
      count += len;
    }
    if (cfg.fallback_random_fill && count < budget) {
      std::vector<std::size_t> outside;
      for (std::size_t i = 0; i < n; ++i) {
        if (!masked[i] && !in_entity[i] && !special(i)) outside.push_back(i);
      }
      fill_from(std::move(outside));
    }
  }

  MaskedExample example;
  example.tokens.assign(tokens.begin(), tokens.end());
  example.stage = stage;
  for (std::size_t i = 0; i < n; ++i) {
    if (!masked[i]) continue;
    example.masked_positions.push_back(static_cast<int>(i));
    example.original_targets.push_back(tokens[i]);
    if (!cfg.bert_corruption) {
      example.tokens[i] = cfg.mask_sentinel;
      continue;
    }
    double r = Uniform01(rng);
    if (r < 0.8) {
      example.tokens[i] = cfg.mask_sentinel;
    } else if (r < 0.9) {
      example.tokens[i] = tokens[UniformIndex(rng, n)];
    }
  }
  return example;
}

std::vector<Sequence> PackSequences(const std::vector<TokenizedDocument> &docs,
                                    int length, std::size_t *dropped) {
  if (length < kMinWindowTokens) {
    throw std::invalid_argument("sequence length must be >= 8");
  }
  std::vector<Sequence> out;
  std::size_t dropped_windows = 0;
  for (const auto &doc : docs) {
    std::vector<std::string> flat;
    for (const auto &sentence : doc.sentences) {
      for (const auto &token : sentence) flat.push_back(token.surface);
    }
    std::size_t window = 0;
    for (std::size_t pos = 0; pos < flat.size(); pos += length, ++window) {
      std::size_t end = std::min(flat.size(), pos + static_cast<std::size_t>(length));
      if (end - pos < static_cast<std::size_t>(kMinWindowTokens)) {
        ++dropped_windows;
        continue;
      }
      Sequence seq;
      seq.doc_id = doc.doc_id;
      seq.id = doc.doc_id + "#" + std::to_string(window);
      seq.tokens.assign(flat.begin() + pos, flat.begin() + end);
      out.push_back(std::move(seq));
    }
  }
  if (dropped) *dropped = dropped_windows;
  return out;
}

std::string_view EmitStrategyName(EmitStrategy strategy) {
  switch (strategy) {
    case EmitStrategy::kMelt: return "melt";
    case EmitStrategy::kRandom: return "random";
    case EmitStrategy::kEntityOnly: return "entity-only";
    case EmitStrategy::kDiffMasking: return "diff-masking";
  }
  return "unknown";
}

EmitStrategy ParseEmitStrategy(std::string_view name) {
  for (auto s : {EmitStrategy::kMelt, EmitStrategy::kRandom,
                 EmitStrategy::kEntityOnly, EmitStrategy::kDiffMasking}) {
    if (EmitStrategyName(s) == name) return s;
  }
  throw std::invalid_argument("unknown masking strategy '" + std::string(name) +
                              "'");
}

std::vector<std::string> SelectAnchors(
    const std::map<std::string, int64_t> &target_counts,
    const std::map<std::string, int64_t> &generic_counts, int count) {
  if (generic_counts.empty()) {
    throw std::invalid_argument("diff-masking needs a generic frequency table");
  }
  std::vector<std::pair<std::string, double>> scored;
  for (const auto &[word, target] : target_counts) {
    if (target <= 0 || !HasLetter(word)) continue;
    auto it = generic_counts.find(word);
    double generic = it == generic_counts.end() ? 0.0 : static_cast<double>(it->second);
    scored.emplace_back(word, static_cast<double>(target) / (generic + 1.0));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  std::vector<std::string> anchors;
  for (std::size_t i = 0; i < scored.size() && anchors.size() < static_cast<std::size_t>(count); ++i) {
    anchors.push_back(scored[i].first);
  }
  return anchors;
}

std::map<std::string, int64_t> ReadFrequencyTable(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open frequency table " + path.string());
  std::map<std::string, int64_t> table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("malformed frequency line: " + line);
    }
    table[line.substr(0, tab)] += std::stoll(line.substr(tab + 1));
  }
  return table;
}

std::unordered_set<std::string> EligibleEntities(const CurriculumPlan &plan,
                                                 int stage) {
  int stratum = stage;
  if (stage == 0) {
    if (plan.warmup_mode == WarmupMode::kRandom) return {};
    stratum = 1;
  }
  stratum = plan.StratumForStage(stratum);
  std::unordered_set<std::string> out;
  for (int i = 0; i < stratum; ++i) {
    out.insert(plan.strata[i].begin(), plan.strata[i].end());
  }
  return out;
}

EmittedDataset GenerateDataset(const std::vector<TokenizedDocument> &docs,
                               const EmitInputs &inputs,
                               const EmitOptions &options) {
  const MaskingConfig &cfg = options.masking;
  cfg.Validate();
  if (options.shard_size == 0) throw std::invalid_argument("shard_size must be > 0");

  EmittedDataset dataset;
  dataset.strategy = options.strategy;
  std::vector<Sequence> sequences =
      PackSequences(docs, cfg.sequence_length, &dataset.dropped_windows);
  if (sequences.empty()) throw std::invalid_argument("empty corpus");
  dataset.sequences = sequences.size();

  EntityMatcher matcher;
  std::vector<StageSpec> specs;
  switch (options.strategy) {
    case EmitStrategy::kMelt: {
      if (!inputs.plan) throw std::invalid_argument("melt emission needs a plan");
      const CurriculumPlan &plan = *inputs.plan;
      plan.Validate();
      matcher = EntityMatcher(plan.strata);
      if (plan.warmup_steps > 0) {
        int eligible = plan.warmup_mode == WarmupMode::kRandom ? 0 : 1;
        specs.push_back({0, eligible, cfg.target_token_ratio});
      }
      for (int stage = 1; stage <= plan.K; ++stage) {
        specs.push_back({stage, plan.StratumForStage(stage),
                         plan.StageRatio(stage, cfg.target_token_ratio)});
      }
      dataset.phases = plan.MakeSchedule().Phases();
      break;
    }
    case EmitStrategy::kRandom:
      specs.push_back({1, 0, cfg.target_token_ratio});
      break;
    case EmitStrategy::kEntityOnly: {
      if (!inputs.seeds) throw std::invalid_argument("entity-only emission needs seeds");
      std::vector<std::string> all;
      for (const auto &[canonical, seed] : inputs.seeds->entities()) all.push_back(canonical);
      matcher = EntityMatcher(Strata{all});
      specs.push_back({1, 1, cfg.target_token_ratio});
      break;
    }
    case EmitStrategy::kDiffMasking: {
      if (!inputs.generic_counts) {
        throw std::invalid_argument("diff-masking needs a generic frequency table");
      }
      std::map<std::string, int64_t> target;
      for (const auto &seq : sequences) {
        for (const auto &t : seq.tokens) ++target[VocabularyKey(t)];
      }
      dataset.anchors = SelectAnchors(target, *inputs.generic_counts, options.anchor_count);
      matcher = EntityMatcher(Strata{dataset.anchors});
      specs.push_back({1, 1, options.diff_masking_ratio});
      break;
    }
  }
  if (dataset.phases.empty()) {
    dataset.phases.push_back({PhaseKind::kStage, 1, 1, 0, options.total_steps});
  }

  std::vector<EntityIndex> indices(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    indices[i] = matcher.Index(sequences[i].tokens);
  }

  const std::size_t shard_count =
      (sequences.size() + options.shard_size - 1) / options.shard_size;

  for (const StageSpec &spec : specs) {
    StageOutput output;
    StageReport &report = output.report;
    report.stage = spec.label;
    report.target_ratio = spec.ratio;
    if (spec.eligible_stage > 0) {
      std::unordered_set<std::string> eligible;
      for (std::size_t i = 0; i < sequences.size(); ++i) {
        for (const auto &span : indices[i]) {
          if (span.stage <= spec.eligible_stage) {
            report.entity_tokens += span.token_end - span.token_start;
            eligible.insert(span.entity);
          }
        }
      }
      report.eligible_entities = static_cast<int64_t>(eligible.size());
    }
    for (const auto &seq : sequences) {
      if (seq.tokens.size() >= 2) report.total_tokens += static_cast<int64_t>(seq.tokens.size());
    }
    if (spec.eligible_stage > 0) {
      MaskCalibration cal = CalibrateMaskProbability(report.entity_tokens,
                                                     report.total_tokens, spec.ratio);
      report.p_m = cal.p_m;
      report.shortfall = cal.shortfall;
      if (cal.shortfall && !cfg.fallback_random_fill) {
        spdlog::warn("stage {}: entity coverage below the {:.0f}% budget and random fill is off",
                     spec.label, spec.ratio * 100);
      }
    }

    output.shards.resize(shard_count);
    std::vector<int64_t> shard_masked(shard_count, 0);
    std::vector<std::size_t> shard_skipped(shard_count, 0);
    auto run_shard = [&](std::size_t shard) {
      MaskRng rng(DeriveSeed(cfg.seed, static_cast<uint64_t>(spec.label), shard));
      std::size_t begin = shard * options.shard_size;
      std::size_t end = std::min(sequences.size(), begin + options.shard_size);
      for (std::size_t i = begin; i < end; ++i) {
        auto example = MaskSequence(sequences[i].tokens, indices[i],
                                    spec.eligible_stage, report.p_m, cfg, rng,
                                    spec.ratio);
        if (!example) {
          ++shard_skipped[shard];
          continue;
        }
        example->sequence_id = sequences[i].id;
        example->stage = spec.label;
        example->strategy = std::string(EmitStrategyName(options.strategy));
        shard_masked[shard] += static_cast<int64_t>(example->masked_positions.size());
        output.shards[shard].push_back(std::move(*example));
      }
    };
    if (options.workers <= 1 || shard_count < 2) {
      for (std::size_t s = 0; s < shard_count; ++s) run_shard(s);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < options.workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t s = next++; s < shard_count; s = next++) run_shard(s);
        });
      }
      for (auto &t : pool) t.join();
    }
    for (std::size_t s = 0; s < shard_count; ++s) {
      report.masked_tokens += shard_masked[s];
      report.skipped += shard_skipped[s];
      report.examples += output.shards[s].size();
    }
    dataset.stages.push_back(std::move(output));
  }
  return dataset;
}

std::string ExampleToJson(const MaskedExample &example) {
  ordered_json record;
  record["id"] = example.sequence_id;
  record["tokens"] = example.tokens;
  record["masked_positions"] = example.masked_positions;
  record["targets"] = example.original_targets;
  record["stage"] = example.stage;
  record["strategy"] = example.strategy;
  return record.dump();
}

MaskedExample ExampleFromJson(const std::string &line) {
  json record = json::parse(line);
  MaskedExample example;
  example.sequence_id = record.at("id").get<std::string>();
  example.tokens = record.at("tokens").get<std::vector<std::string>>();
  example.masked_positions = record.at("masked_positions").get<std::vector<int>>();
  example.original_targets = record.at("targets").get<std::vector<std::string>>();
  example.stage = record.at("stage").get<int>();
  example.strategy = record.at("strategy").get<std::string>();
  return example;
}

std::vector<MaskedExample> ReadExamples(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<MaskedExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(ExampleFromJson(line));
  }
  return out;
}

std::string WriteDataset(const EmittedDataset &dataset,
                         const EmitOptions &options, const fs::path &dir) {
  fs::create_directories(dir);
  const MaskingConfig &cfg = options.masking;
  ordered_json config;
  config["strategy"] = EmitStrategyName(dataset.strategy);
  config["target_token_ratio"] = cfg.target_token_ratio;
  config["sequence_length"] = cfg.sequence_length;
  config["mask_sentinel"] = cfg.mask_sentinel;
  config["seed"] = cfg.seed;
  config["fallback_random_fill"] = cfg.fallback_random_fill;
  config["bert_corruption"] = cfg.bert_corruption;
  config["shard_size"] = options.shard_size;
  if (dataset.strategy == EmitStrategy::kDiffMasking) {
    config["diff_masking_ratio"] = options.diff_masking_ratio;
    config["anchor_count"] = options.anchor_count;
  }

  ordered_json stages = ordered_json::array();
  for (const StageOutput &stage : dataset.stages) {
    const StageReport &r = stage.report;
    ordered_json files = ordered_json::array();
    for (std::size_t s = 0; s < stage.shards.size(); ++s) {
      std::string name = "stage" + std::to_string(r.stage) + "_shard" +
                         std::to_string(s) + ".jsonl";
      {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        for (const auto &example : stage.shards[s]) out << ExampleToJson(example) << '\n';
      }
      files.push_back({{"file", name}, {"sha256", Sha256File(dir / name)}});
    }
    ordered_json entry;
    entry["stage"] = r.stage;
    entry["target_ratio"] = r.target_ratio;
    entry["p_m"] = r.p_m;
    entry["shortfall"] = r.shortfall;
    entry["eligible_entities"] = r.eligible_entities;
    entry["entity_tokens"] = r.entity_tokens;
    entry["total_tokens"] = r.total_tokens;
    entry["masked_tokens"] = r.masked_tokens;
    entry["realized_ratio"] = r.RealizedRatio();
    entry["examples"] = r.examples;
    entry["skipped"] = r.skipped;
    entry["files"] = std::move(files);
    stages.push_back(std::move(entry));
  }

  ordered_json phases = ordered_json::array();
  for (const Phase &p : dataset.phases) {
    phases.push_back({{"kind", p.kind == PhaseKind::kWarmup ? "warmup" : "stage"},
                      {"stage", p.stage},
                      {"cycle", p.cycle},
                      {"begin", p.begin},
                      {"end", p.end},
                      {"replay", "stage" + std::to_string(p.stage)}});
  }

  ordered_json manifest;
  manifest["tool_version"] = MELT_VERSION;
  manifest["config"] = config;
  manifest["config_hash"] = Sha256Hex(config.dump());
  manifest["sequences"] = dataset.sequences;
  manifest["dropped_windows"] = dataset.dropped_windows;
  if (!dataset.anchors.empty()) manifest["anchors"] = dataset.anchors;
  manifest["phases"] = std::move(phases);
  manifest["stages"] = std::move(stages);
  std::string text = manifest.dump(2) + "\n";
  std::ofstream(dir / "manifest.json", std::ios::binary) << text;
  return text;
}

}  // namespace melt
