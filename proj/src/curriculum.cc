#include "melt/curriculum.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace melt {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct NamedStrategy {
  CurriculumStrategy strategy;
  std::string_view name;
};

constexpr NamedStrategy kStrategies[] = {
    {CurriculumStrategy::kNodeDegree, "node-degree"},
    {CurriculumStrategy::kFrequency, "frequency"},
    {CurriculumStrategy::kConcept, "concept"},
    {CurriculumStrategy::kMaskingRatio, "masking-ratio"},
    {CurriculumStrategy::kReverse, "reverse"},
    {CurriculumStrategy::kNone, "none"},
};

// Entities in descending score order, ties broken by entity ascending.
std::vector<std::string> RankDescending(
    const std::map<std::string, double> &scores) {
  std::vector<std::pair<std::string, double>> items(scores.begin(),
                                                    scores.end());
  // `items` is already entity-ascending, so a stable sort keeps the tie rule.
  std::stable_sort(items.begin(), items.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto &item : items) out.push_back(std::move(item.first));
  return out;
}

std::map<std::string, int> OrdinalRanks(
    const std::map<std::string, double> &scores) {
  std::map<std::string, int> ranks;
  int rank = 1;
  for (const auto &entity : RankDescending(scores)) ranks[entity] = rank++;
  return ranks;
}

Strata SplitBalanced(const std::vector<std::string> &ranked, int K) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (static_cast<std::size_t>(K) > ranked.size()) {
    throw std::invalid_argument("more stages than entities");
  }
  Strata strata(K);
  const std::size_t n = ranked.size();
  const std::size_t base = n / K;
  const std::size_t extra = n % K;
  std::size_t pos = 0;
  for (int i = 0; i < K; ++i) {
    std::size_t size = base + (static_cast<std::size_t>(i) < extra ? 1 : 0);
    strata[i].assign(ranked.begin() + pos, ranked.begin() + pos + size);
    pos += size;
  }
  return strata;
}

json PhaseToJson(const Phase &p) {
  return {{"kind", p.kind == PhaseKind::kWarmup ? "warmup" : "stage"},
          {"stage", p.stage},
          {"cycle", p.cycle},
          {"begin", p.begin},
          {"end", p.end}};
}

}  // namespace

std::string_view StrategyName(CurriculumStrategy strategy) {
  for (const auto &s : kStrategies) {
    if (s.strategy == strategy) return s.name;
  }
  return "unknown";
}

CurriculumStrategy ParseStrategy(std::string_view name) {
  for (const auto &s : kStrategies) {
    if (s.name == name) return s.strategy;
  }
  throw std::invalid_argument("unknown curriculum strategy '" +
                              std::string(name) + "'");
}

Strata StratifyByScore(const std::map<std::string, double> &scores, int K) {
  return SplitBalanced(RankDescending(scores), K);
}

Strata StratifyByDegree(const std::map<std::string, int> &degrees, int K) {
  std::map<std::string, double> scores;
  for (const auto &[entity, degree] : degrees) scores[entity] = degree;
  return StratifyByScore(scores, K);
}

std::vector<std::vector<std::string>> CumulativeSets(const Strata &strata) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> running;
  for (const auto &stratum : strata) {
    running.insert(running.end(), stratum.begin(), stratum.end());
    out.push_back(running);
  }
  return out;
}

Strata AlternativeStrata(CurriculumStrategy strategy,
                         const StrategyInputs &inputs, int K) {
  auto frequency_of = [&](const std::string &entity) -> double {
    auto it = inputs.frequencies.find(entity);
    return it == inputs.frequencies.end() ? 0.0
                                          : static_cast<double>(it->second);
  };
  switch (strategy) {
    case CurriculumStrategy::kNodeDegree:
      return StratifyByDegree(inputs.degrees, K);
    case CurriculumStrategy::kReverse: {
      Strata strata = StratifyByDegree(inputs.degrees, K);
      std::reverse(strata.begin(), strata.end());
      return strata;
    }
    case CurriculumStrategy::kFrequency: {
      std::map<std::string, double> scores;
      for (const auto &[entity, degree] : inputs.degrees)
        scores[entity] = frequency_of(entity);
      return StratifyByScore(scores, K);
    }
    case CurriculumStrategy::kConcept: {
      std::map<std::string, double> by_frequency, by_degree;
      for (const auto &[entity, degree] : inputs.degrees) {
        by_frequency[entity] = frequency_of(entity);
        by_degree[entity] = degree;
      }
      auto frequency_rank = OrdinalRanks(by_frequency);
      auto degree_rank = OrdinalRanks(by_degree);
      // Smaller rank sum is easier; negate so the descending split applies.
      std::map<std::string, double> scores;
      for (const auto &[entity, degree] : inputs.degrees) {
        scores[entity] = -(frequency_rank[entity] + degree_rank[entity]);
      }
      return StratifyByScore(scores, K);
    }
    case CurriculumStrategy::kMaskingRatio:
    case CurriculumStrategy::kNone:
      return StratifyByDegree(inputs.degrees, 1);
  }
  throw std::invalid_argument("unknown curriculum strategy");
}

Schedule::Schedule(int K, int64_t warmup_steps, int64_t stage_steps,
                   int64_t total_steps, bool cycle)
    : K_(K),
      warmup_steps_(warmup_steps),
      stage_steps_(stage_steps),
      total_steps_(total_steps),
      cycle_(cycle) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
  if (total_steps < warmup_steps) {
    throw std::invalid_argument("total_steps must be >= warmup_steps");
  }
  if (!cycle_) {
    int64_t remaining = total_steps - warmup_steps;
    stage_steps_ = std::max<int64_t>(1, (remaining + K - 1) / K);
  }
  if (stage_steps_ < 1) throw std::invalid_argument("stage_steps must be >= 1");
}

Phase Schedule::PhaseAt(int64_t step) const {
  if (step < 0 || step >= total_steps_) {
    throw std::out_of_range("step outside the schedule");
  }
  if (step < warmup_steps_) {
    return {PhaseKind::kWarmup, 0, 0, 0, warmup_steps_};
  }
  int64_t window = (step - warmup_steps_) / stage_steps_;
  int64_t begin = warmup_steps_ + window * stage_steps_;
  int64_t end = std::min(begin + stage_steps_, total_steps_);
  int stage = static_cast<int>(cycle_ ? window % K_ : std::min<int64_t>(window, K_ - 1)) + 1;
  int cycle = static_cast<int>(cycle_ ? window / K_ : 0) + 1;
  return {PhaseKind::kStage, stage, cycle, begin, end};
}

std::vector<Phase> Schedule::Phases() const {
  std::vector<Phase> out;
  for (int64_t step = 0; step < total_steps_;) {
    Phase p = PhaseAt(step);
    out.push_back(p);
    step = p.end;
  }
  return out;
}

Schedule BuildSchedule(int K, int64_t warmup_steps, int64_t stage_steps,
                       int64_t total_steps) {
  return Schedule(K, warmup_steps, stage_steps, total_steps, true);
}

double RatioRamp::At(int64_t step) const {
  if (total_steps <= 0) return end;
  double t = std::clamp(static_cast<double>(step) / total_steps, 0.0, 1.0);
  return start + (end - start) * t;
}

int CurriculumPlan::StratumForStage(int stage) const {
  if (stage < 1) return 0;
  return std::min(stage, static_cast<int>(strata.size()));
}

Schedule CurriculumPlan::MakeSchedule() const {
  return Schedule(K, warmup_steps, stage_steps, total_steps,
                  !ratio_ramp.has_value());
}

double CurriculumPlan::StageRatio(int stage, double base_ratio) const {
  if (!ratio_ramp || stage < 1) return base_ratio;
  Schedule schedule = MakeSchedule();
  int64_t begin = warmup_steps + (stage - 1) * schedule.stage_steps();
  int64_t end = std::min(begin + schedule.stage_steps(), total_steps);
  return ratio_ramp->At((begin + end) / 2);
}

void CurriculumPlan::Validate() const {
  if (K < 1) throw std::logic_error("plan K must be >= 1");
  if (strata.empty()) throw std::logic_error("plan has no strata");
  std::set<std::string> seen;
  for (const auto &stratum : strata) {
    for (const auto &entity : stratum) {
      if (!seen.insert(entity).second) {
        throw std::logic_error("entity '" + entity + "' in two strata");
      }
    }
  }
  auto cumulative = Cumulative();
  for (std::size_t i = 1; i < cumulative.size(); ++i) {
    if (cumulative[i].size() < cumulative[i - 1].size()) {
      throw std::logic_error("cumulative sets are not nested");
    }
  }
  if (warmup_steps < 0 || stage_steps < 1 || total_steps < warmup_steps) {
    throw std::logic_error("invalid plan step counts");
  }
}

void CurriculumPlan::Write(const fs::path &dir) const {
  fs::create_directories(dir);
  json phases = json::array();
  for (const Phase &p : MakeSchedule().Phases()) phases.push_back(PhaseToJson(p));
  json sizes = json::array();
  for (const auto &g : Cumulative()) sizes.push_back(g.size());
  json doc = {{"strategy", StrategyName(strategy)},
              {"k", K},
              {"warmup_steps", warmup_steps},
              {"stage_steps", stage_steps},
              {"total_steps", total_steps},
              {"warmup_mode", warmup_mode == WarmupMode::kRandom ? "random" : "g1"},
              {"strata", strata},
              {"cumulative_sizes", sizes},
              {"phases", phases},
              {"notes", notes}};
  if (ratio_ramp) {
    doc["ratio_ramp"] = {{"start", ratio_ramp->start},
                         {"end", ratio_ramp->end},
                         {"total_steps", ratio_ramp->total_steps}};
  }
  std::ofstream(dir / "plan.json", std::ios::binary) << doc.dump(2) << '\n';
}

CurriculumPlan CurriculumPlan::Read(const fs::path &dir) {
  std::ifstream in(dir / "plan.json");
  if (!in) throw std::runtime_error("missing " + (dir / "plan.json").string());
  json doc = json::parse(in);
  CurriculumPlan plan;
  plan.strategy = ParseStrategy(doc.at("strategy").get<std::string>());
  plan.K = doc.at("k").get<int>();
  plan.strata = doc.at("strata").get<Strata>();
  plan.warmup_steps = doc.at("warmup_steps").get<int64_t>();
  plan.stage_steps = doc.at("stage_steps").get<int64_t>();
  plan.total_steps = doc.at("total_steps").get<int64_t>();
  plan.warmup_mode = doc.value("warmup_mode", std::string("random")) == "g1"
                         ? WarmupMode::kFirstStage
                         : WarmupMode::kRandom;
  plan.notes = doc.value("notes", std::vector<std::string>{});
  if (doc.contains("ratio_ramp")) {
    const auto &r = doc["ratio_ramp"];
    plan.ratio_ramp = RatioRamp{r.at("start").get<double>(),
                                r.at("end").get<double>(),
                                r.at("total_steps").get<int64_t>()};
  }
  plan.Validate();
  return plan;
}

CurriculumPlan BuildPlan(const StrategyInputs &inputs,
                         const PlanOptions &options) {
  CurriculumPlan plan;
  plan.strategy = options.strategy;
  plan.warmup_steps = options.warmup_steps;
  plan.stage_steps = options.stage_steps;
  plan.total_steps = options.total_steps;
  plan.warmup_mode = options.warmup_mode;
  plan.K = options.strategy == CurriculumStrategy::kNone ? 1 : options.K;
  plan.strata = AlternativeStrata(options.strategy, inputs, options.K);
  switch (options.strategy) {
    case CurriculumStrategy::kMaskingRatio:
      plan.ratio_ramp = RatioRamp{0.10, 0.20, options.total_steps};
      plan.notes.push_back(
          "masking-ratio: one stratum; stages split the post-warmup steps "
          "evenly and use the ramp value at each window midpoint");
      break;
    case CurriculumStrategy::kConcept:
      plan.notes.push_back(
          "concept: strata ordered by the sum of frequency rank and degree "
          "rank (interpretation)");
      break;
    default:
      break;
  }
  plan.Validate();
  return plan;
}

}  // namespace melt
