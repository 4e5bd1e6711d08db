#include "melt/entities.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "melt/formula.h"
#include "melt/text.h"

namespace melt {
namespace fs = std::filesystem;

std::string_view EntityKindName(EntityKind kind) {
  return kind == EntityKind::kFormula ? "formula" : "term";
}

EntityKind ParseEntityKind(std::string_view name) {
  if (name == "formula") return EntityKind::kFormula;
  if (name == "term") return EntityKind::kDictionaryTerm;
  throw std::invalid_argument("unknown entity kind '" + std::string(name) +
                              "'");
}

std::string JoinLowercase(const std::vector<std::string_view> &tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += ToLower(tokens[i]);
  }
  return out;
}

void Dictionary::Add(std::string_view term) {
  std::vector<Token> tokens = Tokenize(NormalizeText(term));
  if (tokens.empty()) return;
  std::vector<std::string_view> surfaces;
  for (const auto &t : tokens) surfaces.push_back(t.surface);
  terms_.insert(JoinLowercase(surfaces));
  max_tokens_ = std::max(max_tokens_, static_cast<int>(tokens.size()));
}

Dictionary Dictionary::Load(std::istream &in) {
  Dictionary dict;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    dict.Add(std::string_view(line).substr(first, last - first + 1));
  }
  return dict;
}

Dictionary Dictionary::LoadFile(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dictionary " + path.string());
  return Load(in);
}

std::vector<EntitySpan> TagEntities(const TokenizedDocument &doc,
                                    const Dictionary &dictionary) {
  std::vector<EntitySpan> spans;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const Sentence &sentence = doc.sentences[s];
    const int n = static_cast<int>(sentence.size());
    int i = 0;
    while (i < n) {
      int matched = 0;
      std::string canonical;
      for (int len = std::min(dictionary.max_tokens(), n - i); len >= 1;
           --len) {
        std::vector<std::string_view> window;
        for (int j = i; j < i + len; ++j) window.push_back(sentence[j].surface);
        std::string key = JoinLowercase(window);
        if (dictionary.Contains(key)) {
          matched = len;
          canonical = std::move(key);
          break;
        }
      }

      const std::string &surface = sentence[i].surface;
      if (matched == 1 && IsFormula(surface)) {
        spans.push_back({doc.doc_id, static_cast<int>(s), i, i + 1,
                         EntityKind::kFormula, surface});
      } else if (matched > 0) {
        spans.push_back({doc.doc_id, static_cast<int>(s), i, i + matched,
                         EntityKind::kDictionaryTerm, std::move(canonical)});
      } else if (IsFormula(surface)) {
        matched = 1;
        spans.push_back({doc.doc_id, static_cast<int>(s), i, i + 1,
                         EntityKind::kFormula, surface});
      }
      i += std::max(matched, 1);
    }
  }
  return spans;
}

void SeedEntitySet::Add(const std::string &canonical, EntityKind kind,
                        int64_t count) {
  auto [it, inserted] = entities_.try_emplace(canonical, SeedEntity{kind, 0});
  it->second.corpus_frequency += count;
}

void SeedEntitySet::Merge(const SeedEntitySet &other) {
  for (const auto &[canonical, entity] : other.entities_) {
    Add(canonical, entity.kind, entity.corpus_frequency);
  }
}

std::vector<std::pair<std::string, SeedEntity>> SeedEntitySet::Sorted() const {
  std::vector<std::pair<std::string, SeedEntity>> out(entities_.begin(),
                                                      entities_.end());
  std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return a.second.corpus_frequency > b.second.corpus_frequency;
  });
  return out;
}

void SeedEntitySet::WriteTsv(std::ostream &out) const {
  for (const auto &[canonical, entity] : Sorted()) {
    out << canonical << '\t' << EntityKindName(entity.kind) << '\t'
        << entity.corpus_frequency << '\n';
  }
}

void SeedEntitySet::WriteTsvFile(const fs::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteTsv(out);
}

SeedEntitySet SeedEntitySet::ReadTsv(std::istream &in) {
  SeedEntitySet set;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error("malformed seed line: " + line);
    }
    set.Add(line.substr(0, t1),
            ParseEntityKind(std::string_view(line).substr(t1 + 1, t2 - t1 - 1)),
            std::stoll(line.substr(t2 + 1)));
  }
  return set;
}

SeedEntitySet SeedEntitySet::ReadTsvFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open seeds " + path.string());
  return ReadTsv(in);
}

SeedEntitySet ExtractCorpusEntities(const std::vector<TokenizedDocument> &docs,
                                    const Dictionary &dictionary,
                                    int workers) {
  if (CountTokens(docs) == 0) throw std::invalid_argument("empty corpus");

  std::vector<SeedEntitySet> partial(docs.size());
  auto tag = [&](std::size_t i) {
    for (const EntitySpan &span : TagEntities(docs[i], dictionary)) {
      partial[i].Add(span.canonical, span.entity_kind);
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < docs.size(); ++i) tag(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < docs.size(); i = next++) tag(i);
      });
    }
    for (auto &t : pool) t.join();
  }

  SeedEntitySet out;
  for (const auto &p : partial) out.Merge(p);
  return out;
}

}  // namespace melt
