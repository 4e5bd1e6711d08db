#ifndef MELT_ENTITIES_H_
#define MELT_ENTITIES_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "melt/corpus.h"

namespace melt {

enum class EntityKind { kFormula, kDictionaryTerm };

std::string_view EntityKindName(EntityKind kind);
EntityKind ParseEntityKind(std::string_view name);

struct EntitySpan {
  std::string doc_id;
  int sentence_idx = 0;
  int token_start = 0;
  int token_end = 0;
  EntityKind entity_kind = EntityKind::kFormula;
  std::string canonical;

  bool operator==(const EntitySpan &other) const = default;
};

// Multi-word term dictionary matched case-insensitively on token sequences.
class Dictionary {
 public:
  Dictionary() = default;

  // Each term is normalized and run through the corpus tokenizer.
  void Add(std::string_view term);
  bool Contains(std::string_view canonical) const {
    return terms_.count(std::string(canonical)) > 0;
  }
  std::size_t size() const { return terms_.size(); }
  int max_tokens() const { return max_tokens_; }

  // One term per line, '#' starts a comment, blank lines ignored.
  static Dictionary Load(std::istream &in);
  static Dictionary LoadFile(const std::filesystem::path &path);

 private:
  std::unordered_set<std::string> terms_;
  int max_tokens_ = 0;
};

// Canonical form of a dictionary term spanning `tokens`: lowercased surfaces
// joined by single spaces.
std::string JoinLowercase(const std::vector<std::string_view> &tokens);

// Greedy longest-match-first, left-to-right dictionary matching per sentence;
// remaining single tokens that parse as formulas become Formula spans.
// Spans never overlap.
std::vector<EntitySpan> TagEntities(const TokenizedDocument &doc,
                                    const Dictionary &dictionary);

struct SeedEntity {
  EntityKind kind = EntityKind::kFormula;
  int64_t corpus_frequency = 0;
};

class SeedEntitySet {
 public:
  void Add(const std::string &canonical, EntityKind kind, int64_t count = 1);
  void Merge(const SeedEntitySet &other);

  std::size_t size() const { return entities_.size(); }
  bool empty() const { return entities_.empty(); }
  bool Contains(const std::string &canonical) const {
    return entities_.count(canonical) > 0;
  }
  const SeedEntity &at(const std::string &canonical) const {
    return entities_.at(canonical);
  }
  const std::map<std::string, SeedEntity> &entities() const {
    return entities_;
  }

  // Frequency descending, canonical ascending.
  std::vector<std::pair<std::string, SeedEntity>> Sorted() const;

  // TSV: canonical<TAB>kind<TAB>frequency, in Sorted() order.
  void WriteTsv(std::ostream &out) const;
  void WriteTsvFile(const std::filesystem::path &path) const;
  static SeedEntitySet ReadTsv(std::istream &in);
  static SeedEntitySet ReadTsvFile(const std::filesystem::path &path);

 private:
  std::map<std::string, SeedEntity> entities_;
};

// Aggregates TagEntities over the corpus. `workers` > 1 tags documents in
// parallel and reduces in document order. Throws on an empty corpus.
SeedEntitySet ExtractCorpusEntities(const std::vector<TokenizedDocument> &docs,
                                    const Dictionary &dictionary,
                                    int workers = 1);

}  // namespace melt

#endif  // MELT_ENTITIES_H_
