#ifndef MELT_PIPELINE_H_
#define MELT_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "melt/corpus.h"
#include "melt/curriculum.h"
#include "melt/embedding.h"
#include "melt/entities.h"
#include "melt/graph.h"
#include "melt/masking.h"

namespace melt {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitStageFailure = 2;
inline constexpr int kExitValidationFailure = 3;

// A referenced input is missing or unreadable.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A config value violates a module precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string &what)
      : std::runtime_error("stage '" + stage + "' failed: " + what),
        stage_(std::move(stage)) {}
  const std::string &stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  // Input paths; relative paths are resolved against the config file's
  // directory when loaded from a file.
  std::string corpus;
  std::string dictionary;
  std::string concepts;
  // Only needed for the diff-masking strategy.
  std::string generic_frequencies;
  std::string output;

  uint64_t seed = 1;
  int workers = 1;

  EmbeddingHyperparams embedding;
  GraphOptions graph;
  PlanOptions curriculum;
  EmitStrategy emit_strategy = EmitStrategy::kMelt;
  MaskingConfig masking;
  std::size_t shard_size = 10000;

  // Copies seed and workers into the per-module settings.
  void Propagate();
  // Throws InputError for missing inputs and ValidationError for values a
  // module would reject.
  void Validate() const;

  std::string ToJson() const;
  static PipelineConfig FromJson(const std::string &text);
  static PipelineConfig LoadFile(const std::filesystem::path &path);
  bool operator==(const PipelineConfig &other) const;
};

struct StageRecord {
  std::string name;
  // Hash over the stage's settings and the hashes of everything it consumed.
  std::string key;
  std::map<std::string, std::string> inputs;     // upstream artifact -> sha256
  std::map<std::string, std::string> artifacts;  // path under output -> sha256
};

struct RunManifest {
  std::string tool_version = MELT_VERSION;
  std::string config_hash;
  std::vector<StageRecord> stages;
  EntityCountsReport entity_counts;

  std::string ToJson() const;
  static RunManifest FromJson(const std::string &text);
};

// Per-run log kept apart from the manifest so that reruns produce identical
// manifests.
struct RunLog {
  std::map<std::string, double> seconds;
  std::map<std::string, bool> cache_hit;
};

// ingest -> extract -> embed -> graph -> curriculum -> emit under
// config.output. A stage is skipped when its recorded key matches and its
// artifacts still hash to the recorded values. Writes run.json (manifest) and
// run_log.json. Throws StageError naming the failing stage; artifacts written
// before the failure stay on disk.
RunManifest RunPipeline(const PipelineConfig &config, RunLog *log = nullptr);

// Human-readable summary of a run directory. Missing artifacts are listed
// instead of failing.
std::string Report(const std::filesystem::path &run_dir);

// Curriculum inputs over the masking universe: graph nodes plus seeds that
// were skipped for lacking an embedding (degree 0). Frequencies are filled
// when `seeds` or `vocab` is given: the seed frequency for seeds, the
// vocabulary count for other words, 0 otherwise.
StrategyInputs CurriculumInputs(const SemanticGraph &graph,
                                const SeedEntitySet *seeds = nullptr,
                                const Vocabulary *vocab = nullptr);

// Hash of a file, or of every regular file under a directory (relative path
// and content, in path order).
std::string HashPath(const std::filesystem::path &path);

}  // namespace melt

#endif  // MELT_PIPELINE_H_
