#ifndef MELT_TESTS_SYNTHETIC_H_
#define MELT_TESTS_SYNTHETIC_H_

// Seeded generator for tagged corpora with a controlled entity density.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "melt/conll.h"
#include "melt/corpus.h"
#include "melt/curriculum.h"

namespace melt::testing {

struct SyntheticCorpus {
  std::vector<TaggedDocument> tagged;
  std::vector<TokenizedDocument> docs;
  // Entity surfaces as the matcher keys them; every third is two tokens.
  std::vector<std::string> entities;
  std::map<std::string, int> degrees;
  std::map<std::string, int64_t> entity_tokens;
  int64_t total_tokens = 0;
  int64_t tagged_tokens = 0;
};

struct SyntheticOptions {
  int docs = 100;
  int tokens_per_doc = 1280;
  int sentence_length = 16;
  // Expected fraction of tokens inside entity spans.
  double entity_density = 0.10;
  int entity_types = 60;
  int filler_types = 400;
  uint64_t seed = 1;
};

inline SyntheticCorpus MakeTaggedCorpus(const SyntheticOptions &opt) {
  SyntheticCorpus out;
  std::mt19937_64 rng(opt.seed);
  for (int e = 0; e < opt.entity_types; ++e) {
    std::string name = "ent" + std::to_string(e);
    if (e % 3 == 2) name += " phase";
    out.entities.push_back(name);
    out.degrees[name] = static_cast<int>(rng() % 50);
  }
  // Skewed entity choice so strata differ in how often they occur.
  std::vector<double> weights;
  for (int e = 0; e < opt.entity_types; ++e) weights.push_back(1.0 / (1 + e % 17));
  std::discrete_distribution<int> pick_entity(weights.begin(), weights.end());
  std::uniform_int_distribution<int> pick_filler(0, opt.filler_types - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Spans average 4/3 tokens, so start one with density / (4/3).
  const double start_p = opt.entity_density * 0.75;

  for (int d = 0; d < opt.docs; ++d) {
    TaggedDocument doc;
    doc.doc_id = "conll-" + std::to_string(d);
    int written = 0;
    while (written < opt.tokens_per_doc) {
      TaggedSentence s;
      int len = std::min(opt.sentence_length, opt.tokens_per_doc - written);
      while (static_cast<int>(s.tokens.size()) < len) {
        int room = len - static_cast<int>(s.tokens.size());
        if (unit(rng) < start_p) {
          const std::string &name = out.entities[pick_entity(rng)];
          auto space = name.find(' ');
          if (space == std::string::npos) {
            s.tokens.push_back(name);
            s.tags.push_back("B-MAT");
            out.entity_tokens[name] += 1;
            continue;
          }
          if (room >= 2) {
            s.tokens.push_back(name.substr(0, space));
            s.tags.push_back("B-MAT");
            s.tokens.push_back(name.substr(space + 1));
            s.tags.push_back("I-MAT");
            out.entity_tokens[name] += 2;
            continue;
          }
        }
        s.tokens.push_back("w" + std::to_string(pick_filler(rng)));
        s.tags.push_back("O");
      }
      for (const auto &tag : s.tags) out.tagged_tokens += tag != "O";
      written += len;
      doc.sentences.push_back(std::move(s));
    }
    out.total_tokens += written;
    out.tagged.push_back(std::move(doc));
  }
  out.docs = TokensFromConll(out.tagged);
  return out;
}

inline CurriculumPlan PlanFor(const SyntheticCorpus &corpus, int K = 3) {
  StrategyInputs in;
  in.degrees = corpus.degrees;
  PlanOptions opt;
  opt.K = K;
  return BuildPlan(in, opt);
}

}  // namespace melt::testing

#endif  // MELT_TESTS_SYNTHETIC_H_
