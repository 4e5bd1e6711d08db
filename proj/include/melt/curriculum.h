#ifndef MELT_CURRICULUM_H_
#define MELT_CURRICULUM_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace melt {

enum class CurriculumStrategy {
  kNodeDegree,
  kFrequency,
  kConcept,
  kMaskingRatio,
  kReverse,
  kNone,
};

// "node-degree", "frequency", "concept", "masking-ratio", "reverse", "none".
std::string_view StrategyName(CurriculumStrategy strategy);
CurriculumStrategy ParseStrategy(std::string_view name);

// Strata N_1..N_K; each stratum lists its entities in rank order.
using Strata = std::vector<std::vector<std::string>>;

// Sorts by score descending (ties: entity ascending) and cuts the ranking
// into K contiguous groups. Group sizes differ by at most one and the larger
// groups come first, so K = 2 over n entities yields ceil(n/2), floor(n/2).
// Throws "more stages than entities" when K exceeds the entity count.
Strata StratifyByScore(const std::map<std::string, double> &scores, int K);

// Highest degree first: N_1 is the easiest stratum.
Strata StratifyByDegree(const std::map<std::string, int> &degrees, int K);

// G_1 = N_1, G_i = G_{i-1} + N_i.
std::vector<std::vector<std::string>> CumulativeSets(const Strata &strata);

struct StrategyInputs {
  std::map<std::string, int> degrees;
  // Corpus frequency per entity; entities missing here count as 0.
  std::map<std::string, int64_t> frequencies;
};

// Frequency: corpus frequency descending. Concept: ascending sum of the
// frequency rank and the degree rank. Reverse: node-degree strata reversed.
// MaskingRatio and None: one stratum with every entity.
Strata AlternativeStrata(CurriculumStrategy strategy,
                         const StrategyInputs &inputs, int K);

enum class PhaseKind { kWarmup, kStage };

struct Phase {
  PhaseKind kind = PhaseKind::kWarmup;
  int stage = 0;  // 0 for warm-up, otherwise 1..K
  int cycle = 0;  // 1-based pass over the stages, 0 for warm-up
  int64_t begin = 0;
  int64_t end = 0;  // exclusive

  bool operator==(const Phase &other) const = default;
};

class Schedule {
 public:
  // Steps [0, warmup) are warm-up; then stage i runs for stage_steps steps
  // and, when `cycle` is set, the stage sequence repeats until total_steps.
  // Without cycling every stage window is stretched to split the post-warmup
  // range evenly.
  Schedule(int K, int64_t warmup_steps, int64_t stage_steps,
           int64_t total_steps, bool cycle = true);

  int K() const { return K_; }
  int64_t warmup_steps() const { return warmup_steps_; }
  int64_t stage_steps() const { return stage_steps_; }
  int64_t total_steps() const { return total_steps_; }
  bool cycles() const { return cycle_; }

  // Throws std::out_of_range for steps outside [0, total_steps).
  Phase PhaseAt(int64_t step) const;
  std::vector<Phase> Phases() const;

 private:
  int K_;
  int64_t warmup_steps_;
  int64_t stage_steps_;
  int64_t total_steps_;
  bool cycle_;
};

Schedule BuildSchedule(int K, int64_t warmup_steps, int64_t stage_steps,
                       int64_t total_steps);

// Linear masking-ratio ramp over [0, total_steps].
struct RatioRamp {
  double start = 0.10;
  double end = 0.20;
  int64_t total_steps = 100000;

  double At(int64_t step) const;
};

enum class WarmupMode { kRandom, kFirstStage };

struct CurriculumPlan {
  CurriculumStrategy strategy = CurriculumStrategy::kNodeDegree;
  // Number of schedule stages. For MaskingRatio and None the strata list has
  // a single entry that every stage draws from.
  int K = 3;
  Strata strata;
  int64_t warmup_steps = 10000;
  int64_t stage_steps = 10000;
  int64_t total_steps = 100000;
  WarmupMode warmup_mode = WarmupMode::kRandom;
  std::optional<RatioRamp> ratio_ramp;
  std::vector<std::string> notes;

  std::vector<std::vector<std::string>> Cumulative() const {
    return CumulativeSets(strata);
  }
  // Strata index (1-based) whose cumulative set stage `stage` masks.
  int StratumForStage(int stage) const;
  Schedule MakeSchedule() const;
  // Token budget for a stage: the ramp value at the middle of the stage's
  // first window when a ramp is set, `base_ratio` otherwise.
  double StageRatio(int stage, double base_ratio) const;

  // Checks the partition and nesting invariants; throws std::logic_error.
  void Validate() const;

  // plan.json under `dir`.
  void Write(const std::filesystem::path &dir) const;
  static CurriculumPlan Read(const std::filesystem::path &dir);
};

struct PlanOptions {
  CurriculumStrategy strategy = CurriculumStrategy::kNodeDegree;
  int K = 3;
  int64_t warmup_steps = 10000;
  int64_t stage_steps = 10000;
  int64_t total_steps = 100000;
  WarmupMode warmup_mode = WarmupMode::kRandom;
};

CurriculumPlan BuildPlan(const StrategyInputs &inputs,
                         const PlanOptions &options);

}  // namespace melt

#endif  // MELT_CURRICULUM_H_
