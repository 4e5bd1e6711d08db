#ifndef MELT_MASKING_H_
#define MELT_MASKING_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "melt/corpus.h"
#include "melt/curriculum.h"
#include "melt/entities.h"

namespace melt {

struct IndexedSpan {
  int token_start = 0;
  int token_end = 0;  // exclusive
  std::string entity;
  // Smallest i with entity in G_i.
  int stage = 1;

  bool operator==(const IndexedSpan &other) const = default;
};

using EntityIndex = std::vector<IndexedSpan>;

// Matches token sequences against the entity universe. Single tokens match
// under VocabularyKey; multi-token entities match the lowercased,
// space-joined surfaces.
class EntityMatcher {
 public:
  EntityMatcher() = default;
  // Stratum i (0-based) assigns stage i + 1.
  explicit EntityMatcher(const Strata &strata);

  // Greedy leftmost, longest-match scan; spans never overlap.
  EntityIndex Index(std::span<const std::string> tokens) const;

  std::size_t size() const { return stage_of_.size(); }
  int StageOf(const std::string &entity) const;

 private:
  std::unordered_map<std::string, int> stage_of_;
  int max_tokens_ = 0;
};

EntityIndex IndexEntities(std::span<const std::string> tokens,
                          const Strata &strata);

struct MaskCalibration {
  double p_m = 0;
  // Entity tokens alone cannot reach the target; random fill closes the gap.
  bool shortfall = false;
  // No entity tokens at all: only random fill applies.
  bool fallback_only = false;
};

// p_m = min(1, target_ratio * total_tokens / entity_tokens).
MaskCalibration CalibrateMaskProbability(int64_t entity_tokens,
                                         int64_t total_tokens,
                                         double target_ratio);

struct MaskingConfig {
  double target_token_ratio = 0.15;
  int sequence_length = 128;
  std::string mask_sentinel = "[MASK]";
  uint64_t seed = 1;
  bool fallback_random_fill = true;
  // Off: every masked token becomes the sentinel. On: 80% sentinel, 10% a
  // random token from the same sequence, 10% unchanged.
  bool bert_corruption = false;

  void Validate() const;
};

struct MaskedExample {
  std::string sequence_id;
  std::vector<std::string> tokens;
  std::vector<int> masked_positions;
  std::vector<std::string> original_targets;
  int stage = 0;
  std::string strategy;

  // Substitutes the targets back in.
  std::vector<std::string> Reconstruct() const;
  bool operator==(const MaskedExample &other) const = default;
};

using MaskRng = std::mt19937_64;

// Masks one sequence.
//
// stage == 0 (warm-up): target_token_ratio of the tokens, chosen uniformly.
// stage >= 1: every indexed span with span.stage <= stage is masked whole
// with probability p_m. With fallback_random_fill the entity masks stop at
// the sequence budget and random non-entity tokens fill any remainder, so
// the masked count never exceeds the budget. The budget is
// target_token_ratio * n, stochastically rounded.
//
// Returns nullopt for sequences shorter than two tokens.
std::optional<MaskedExample> MaskSequence(std::span<const std::string> tokens,
                                          const EntityIndex &index, int stage,
                                          double p_m, const MaskingConfig &cfg,
                                          MaskRng &rng,
                                          std::optional<double> ratio = {});

struct Sequence {
  std::string id;  // "<doc_id>#<window>"
  std::string doc_id;
  std::vector<std::string> tokens;
};

// Concatenates each document's tokens and cuts windows of `length`. Windows
// never cross documents; windows shorter than 8 tokens are dropped.
std::vector<Sequence> PackSequences(const std::vector<TokenizedDocument> &docs,
                                    int length, std::size_t *dropped = nullptr);

enum class EmitStrategy { kMelt, kRandom, kEntityOnly, kDiffMasking };
std::string_view EmitStrategyName(EmitStrategy strategy);
EmitStrategy ParseEmitStrategy(std::string_view name);

// Words over-represented in the target corpus: ranked by
// target_count / (generic_count + 1), ties by word. Punctuation and pure
// numbers are never anchors. Throws if the generic table is empty.
std::vector<std::string> SelectAnchors(
    const std::map<std::string, int64_t> &target_counts,
    const std::map<std::string, int64_t> &generic_counts, int count = 20);

// TSV word<TAB>count.
std::map<std::string, int64_t> ReadFrequencyTable(
    const std::filesystem::path &path);

struct EmitInputs {
  // kMelt.
  std::optional<CurriculumPlan> plan;
  // kEntityOnly.
  std::optional<SeedEntitySet> seeds;
  // kDiffMasking.
  std::optional<std::map<std::string, int64_t>> generic_counts;
};

struct EmitOptions {
  EmitStrategy strategy = EmitStrategy::kMelt;
  MaskingConfig masking;
  double diff_masking_ratio = 0.25;
  int anchor_count = 20;
  std::size_t shard_size = 10000;
  int workers = 1;
  int64_t total_steps = 100000;
};

struct StageReport {
  int stage = 0;
  double target_ratio = 0;
  double p_m = 0;
  bool shortfall = false;
  int64_t eligible_entities = 0;
  int64_t entity_tokens = 0;
  int64_t total_tokens = 0;
  int64_t masked_tokens = 0;
  std::size_t examples = 0;
  std::size_t skipped = 0;

  double RealizedRatio() const {
    return total_tokens ? static_cast<double>(masked_tokens) / total_tokens : 0;
  }
};

struct StageOutput {
  StageReport report;
  // Examples grouped by shard.
  std::vector<std::vector<MaskedExample>> shards;
};

struct EmittedDataset {
  EmitStrategy strategy = EmitStrategy::kMelt;
  std::vector<StageOutput> stages;
  std::vector<Phase> phases;
  std::vector<std::string> anchors;
  std::size_t sequences = 0;
  std::size_t dropped_windows = 0;
};

// Entities eligible for masking at `stage` under `plan` (G_i; empty for the
// random warm-up).
std::unordered_set<std::string> EligibleEntities(const CurriculumPlan &plan,
                                                 int stage);

// Builds every stage of the dataset in memory. Deterministic for a fixed
// seed and independent of `workers`. Throws on an empty corpus or missing
// strategy inputs.
EmittedDataset GenerateDataset(const std::vector<TokenizedDocument> &docs,
                               const EmitInputs &inputs,
                               const EmitOptions &options);

// Writes stage{i}_shard{j}.jsonl files and manifest.json under `dir`.
// Returns the manifest as written.
std::string WriteDataset(const EmittedDataset &dataset,
                         const EmitOptions &options,
                         const std::filesystem::path &dir);

// JSONL record {"id","tokens","masked_positions","targets","stage","strategy"}.
std::string ExampleToJson(const MaskedExample &example);
MaskedExample ExampleFromJson(const std::string &line);
std::vector<MaskedExample> ReadExamples(const std::filesystem::path &path);

}  // namespace melt

#endif  // MELT_MASKING_H_
