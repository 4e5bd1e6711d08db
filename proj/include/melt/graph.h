#ifndef MELT_GRAPH_H_
#define MELT_GRAPH_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "melt/embedding.h"
#include "melt/entities.h"

namespace melt {

// Concept names shipped with the bundled pair files. Any name found in a
// pairs file is accepted.
inline constexpr const char *kSixConcepts[] = {
    "Material",         "Property",   "Application",
    "Characterization", "Descriptor", "SymmetryPhase"};
inline constexpr const char *kSynthesisMethodConcept = "SynthesisMethod";

struct ConceptSpec {
  std::string name;
  // (subject w_a, object w_b); the concept vector is the mean of
  // e(w_a) - e(w_b).
  std::vector<std::pair<std::string, std::string>> pairs;
};

// TSV concept<TAB>subject<TAB>object, '#' comments. Concepts keep the order
// of their first appearance. Words are mapped through VocabularyKey.
std::vector<ConceptSpec> ReadConceptPairs(std::istream &in);
std::vector<ConceptSpec> ReadConceptPairsFile(const std::filesystem::path &path);

struct ConceptVector {
  std::string name;
  std::vector<float> vector;
  int used_pairs = 0;
  int dropped_pairs = 0;
};

// e(R) = (1/|S_R|) sum over usable pairs of (e(w_a) - e(w_b)). Pairs with a
// word outside the table are dropped and counted. Throws
// std::invalid_argument("concept has no embeddable pairs") if none remain.
ConceptVector BuildConceptVector(const ConceptSpec &spec,
                                 const EmbeddingTable &table);

// Top-k words by cos(e(entity) + e(R), e(v)) over the whole vocabulary,
// excluding the entity itself. A zero-norm query logs a warning and yields
// an empty list. Throws if the entity has no embedding or k < 1.
std::vector<Neighbor> ExpandEntity(const std::string &entity,
                                   const ConceptVector &relation,
                                   const EmbeddingTable &table, int k);

struct GraphEdge {
  std::string from;
  std::string to;
  std::string concept_name;
  double similarity = 0;

  bool operator==(const GraphEdge &other) const = default;
};

struct SemanticGraph {
  // node -> is_seed, ordered by entity string.
  std::map<std::string, bool> nodes;
  std::vector<GraphEdge> edges;
  // Seeds without an embedding, in seed order.
  std::vector<std::string> skipped_seeds;
  int topk = 0;
  double min_similarity = 0;
  std::vector<ConceptVector> concepts;
};

struct GraphOptions {
  int topk = 5;
  // Expansion words below this similarity are dropped even inside the top-k.
  // -1 disables the floor.
  double min_similarity = 0.3;
  int workers = 1;
};

// One-hop expansion: each embedded seed gets an edge to each of its top-k
// neighbours along every relation. Throws if no seed has an embedding.
SemanticGraph BuildSemanticGraph(const SeedEntitySet &seeds,
                                 const std::vector<ConceptVector> &concepts,
                                 const EmbeddingTable &table,
                                 const GraphOptions &options);

// Undirected degree: each edge counts once for both endpoints.
std::map<std::string, int> NodeDegrees(const SemanticGraph &graph);

struct EntityCountsReport {
  int64_t seed_count = 0;
  int64_t expanded_count = 0;
  int64_t total_unique = 0;
};

EntityCountsReport EntityCounts(const SemanticGraph &graph,
                                const SeedEntitySet &seeds);

// Two-row table: "MELT" (after expansion) and "MELT w/o expansion".
std::string FormatEntityCountTable(const EntityCountsReport &report);

// Graph directory layout:
//   edges.tsv    from<TAB>to<TAB>concept<TAB>similarity (6 significant digits)
//   nodes.tsv    entity<TAB>degree<TAB>is_seed
//   skipped.txt  one seed per line
//   meta.json    topk, min_similarity, per-concept pair usage
void WriteGraphDir(const SemanticGraph &graph,
                   const std::filesystem::path &dir);
SemanticGraph ReadGraphDir(const std::filesystem::path &dir);

}  // namespace melt

#endif  // MELT_GRAPH_H_
