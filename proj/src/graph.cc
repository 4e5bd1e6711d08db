#include "melt/graph.h"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "json.hpp"

namespace melt {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string FormatSimilarity(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

std::vector<ConceptSpec> ReadConceptPairs(std::istream &in) {
  std::vector<ConceptSpec> specs;
  std::map<std::string, std::size_t> position;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = SplitTabs(line);
    if (fields.size() != 3) {
      throw std::runtime_error("concept pairs line " + std::to_string(line_no) +
                               ": expected concept<TAB>subject<TAB>object");
    }
    auto [it, inserted] = position.try_emplace(fields[0], specs.size());
    if (inserted) specs.push_back({fields[0], {}});
    specs[it->second].pairs.emplace_back(VocabularyKey(fields[1]),
                                         VocabularyKey(fields[2]));
  }
  return specs;
}

std::vector<ConceptSpec> ReadConceptPairsFile(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open concept pairs " + path.string());
  return ReadConceptPairs(in);
}

ConceptVector BuildConceptVector(const ConceptSpec &spec,
                                 const EmbeddingTable &table) {
  ConceptVector out;
  out.name = spec.name;
  std::vector<double> sum(table.dim(), 0.0);
  for (const auto &[subject, object] : spec.pairs) {
    auto a = table.Find(subject);
    auto b = table.Find(object);
    if (!a || !b) {
      ++out.dropped_pairs;
      continue;
    }
    for (int d = 0; d < table.dim(); ++d) {
      sum[d] += static_cast<double>((*a)[d]) - static_cast<double>((*b)[d]);
    }
    ++out.used_pairs;
  }
  if (out.used_pairs == 0) {
    throw std::invalid_argument("concept has no embeddable pairs: " + spec.name);
  }
  out.vector.resize(table.dim());
  for (int d = 0; d < table.dim(); ++d) {
    out.vector[d] = static_cast<float>(sum[d] / out.used_pairs);
  }
  return out;
}

std::vector<Neighbor> ExpandEntity(const std::string &entity,
                                   const ConceptVector &relation,
                                   const EmbeddingTable &table, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  auto base = table.Find(entity);
  if (!base) throw std::invalid_argument("entity has no embedding: " + entity);
  if (relation.vector.size() != base->size()) {
    throw std::invalid_argument("concept vector dimension mismatch");
  }
  std::vector<float> query(base->size());
  bool zero = true;
  for (std::size_t d = 0; d < query.size(); ++d) {
    query[d] = (*base)[d] + relation.vector[d];
    zero = zero && query[d] == 0.0f;
  }
  if (zero) {
    spdlog::warn("degenerate expansion query for '{}' along {}", entity,
                 relation.name);
    return {};
  }
  return NearestNeighbors(table, query, k, {entity});
}

SemanticGraph BuildSemanticGraph(const SeedEntitySet &seeds,
                                 const std::vector<ConceptVector> &concepts,
                                 const EmbeddingTable &table,
                                 const GraphOptions &options) {
  if (options.topk < 1) throw std::invalid_argument("topk must be >= 1");
  SemanticGraph graph;
  graph.topk = options.topk;
  graph.min_similarity = options.min_similarity;
  graph.concepts = concepts;

  std::vector<std::string> embedded;
  for (const auto &[canonical, seed] : seeds.Sorted()) {
    if (table.Find(canonical)) {
      embedded.push_back(canonical);
      graph.nodes[canonical] = true;
    } else {
      graph.skipped_seeds.push_back(canonical);
    }
  }
  if (embedded.empty()) {
    throw std::invalid_argument("no seed entity has an embedding");
  }

  const std::size_t tasks = embedded.size() * concepts.size();
  std::vector<std::vector<Neighbor>> results(tasks);
  auto expand = [&](std::size_t t) {
    const auto &seed = embedded[t / concepts.size()];
    const auto &relation = concepts[t % concepts.size()];
    results[t] = ExpandEntity(seed, relation, table, options.topk);
  };
  if (options.workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) expand(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < options.workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) expand(t);
      });
    }
    for (auto &th : pool) th.join();
  }

  for (std::size_t t = 0; t < tasks; ++t) {
    const auto &seed = embedded[t / concepts.size()];
    const auto &relation = concepts[t % concepts.size()];
    for (const Neighbor &n : results[t]) {
      if (n.similarity < options.min_similarity) continue;
      graph.nodes.try_emplace(n.word, seeds.Contains(n.word));
      graph.edges.push_back({seed, n.word, relation.name, n.similarity});
    }
  }
  return graph;
}

std::map<std::string, int> NodeDegrees(const SemanticGraph &graph) {
  std::map<std::string, int> degrees;
  for (const auto &[node, is_seed] : graph.nodes) degrees[node] = 0;
  for (const auto &edge : graph.edges) {
    ++degrees[edge.from];
    ++degrees[edge.to];
  }
  return degrees;
}

EntityCountsReport EntityCounts(const SemanticGraph &graph,
                                const SeedEntitySet &seeds) {
  EntityCountsReport report;
  report.seed_count = static_cast<int64_t>(seeds.size());
  for (const auto &[node, is_seed] : graph.nodes) {
    if (!seeds.Contains(node)) ++report.expanded_count;
  }
  report.total_unique = report.seed_count + report.expanded_count;
  return report;
}

std::string FormatEntityCountTable(const EntityCountsReport &report) {
  std::ostringstream out;
  out << "method\t#unique_entities\n"
      << "MELT\t" << report.total_unique << '\n'
      << "MELT w/o expansion\t" << report.seed_count << '\n';
  return out.str();
}

void WriteGraphDir(const SemanticGraph &graph, const fs::path &dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "edges.tsv", std::ios::binary);
    for (const auto &e : graph.edges) {
      out << e.from << '\t' << e.to << '\t' << e.concept_name << '\t'
          << FormatSimilarity(e.similarity) << '\n';
    }
  }
  {
    auto degrees = NodeDegrees(graph);
    std::ofstream out(dir / "nodes.tsv", std::ios::binary);
    for (const auto &[node, is_seed] : graph.nodes) {
      out << node << '\t' << degrees[node] << '\t' << (is_seed ? 1 : 0) << '\n';
    }
  }
  {
    std::ofstream out(dir / "skipped.txt", std::ios::binary);
    for (const auto &s : graph.skipped_seeds) out << s << '\n';
  }
  json meta = {{"topk", graph.topk},
               {"min_similarity", graph.min_similarity},
               {"edges", graph.edges.size()},
               {"nodes", graph.nodes.size()}};
  json concepts = json::array();
  for (const auto &c : graph.concepts) {
    concepts.push_back({{"name", c.name},
                        {"used_pairs", c.used_pairs},
                        {"dropped_pairs", c.dropped_pairs}});
  }
  meta["concepts"] = std::move(concepts);
  std::ofstream(dir / "meta.json", std::ios::binary) << meta.dump(2) << '\n';
}

SemanticGraph ReadGraphDir(const fs::path &dir) {
  SemanticGraph graph;
  std::ifstream nodes(dir / "nodes.tsv");
  if (!nodes) throw std::runtime_error("missing " + (dir / "nodes.tsv").string());
  std::string line;
  while (std::getline(nodes, line)) {
    if (line.empty()) continue;
    auto f = SplitTabs(line);
    if (f.size() != 3) throw std::runtime_error("malformed node line: " + line);
    graph.nodes[f[0]] = f[2] == "1";
  }
  std::ifstream edges(dir / "edges.tsv");
  if (!edges) throw std::runtime_error("missing " + (dir / "edges.tsv").string());
  while (std::getline(edges, line)) {
    if (line.empty()) continue;
    auto f = SplitTabs(line);
    if (f.size() != 4) throw std::runtime_error("malformed edge line: " + line);
    graph.edges.push_back({f[0], f[1], f[2], std::stod(f[3])});
  }
  std::ifstream skipped(dir / "skipped.txt");
  while (std::getline(skipped, line)) {
    if (!line.empty()) graph.skipped_seeds.push_back(line);
  }
  std::ifstream meta_in(dir / "meta.json");
  if (meta_in) {
    json meta = json::parse(meta_in);
    graph.topk = meta.value("topk", 0);
    graph.min_similarity = meta.value("min_similarity", 0.0);
  }
  return graph;
}

}  // namespace melt
