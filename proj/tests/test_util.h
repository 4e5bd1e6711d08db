#ifndef MELT_TESTS_TEST_UTIL_H_
#define MELT_TESTS_TEST_UTIL_H_

// Shared fixtures and brute-force oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "melt/corpus.h"
#include "melt/embedding.h"

namespace melt::testing {

inline TokenizedDocument DocFromSentences(
    const std::string &id, const std::vector<std::vector<std::string>> &sentences) {
  TokenizedDocument doc;
  doc.doc_id = id;
  for (const auto &words : sentences) {
    Sentence s;
    for (const auto &w : words) {
      if (!doc.text.empty()) doc.text += ' ';
      std::size_t start = doc.text.size();
      doc.text += w;
      s.push_back({w, start, doc.text.size()});
    }
    doc.sentences.push_back(std::move(s));
  }
  return doc;
}

// Vocabulary of the given words, all with count `count`.
inline Vocabulary UniformVocab(const std::vector<std::string> &words,
                               int64_t count = 10) {
  std::vector<Vocabulary::Row> rows;
  for (const auto &w : words) rows.push_back({w, count, false});
  return Vocabulary(rows, count * static_cast<int64_t>(words.size()));
}

inline std::vector<std::string> NumberedWords(std::size_t n,
                                              const std::string &prefix = "w") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Gaussian rows; `zero_every` > 0 zeroes every n-th row.
inline EmbeddingTable RandomTable(std::size_t vocab_size, int dim, uint64_t seed,
                                  std::size_t zero_every = 0) {
  EmbeddingTable table(UniformVocab(NumberedWords(vocab_size)), dim, false);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (auto &x : table.input_matrix()) x = normal(rng);
  if (zero_every) {
    for (std::size_t r = 0; r < vocab_size; r += zero_every) {
      auto row = table.input(static_cast<int32_t>(r));
      std::fill(row.begin(), row.end(), 0.0f);
    }
  }
  return table;
}

// Exhaustive scan: cosine in double over every row, full sort.
inline std::vector<Neighbor> BruteForceNeighbors(
    const EmbeddingTable &table, const std::vector<double> &query, int k,
    const std::unordered_set<std::string> &exclude) {
  double qn = 0;
  for (double q : query) qn += q * q;
  qn = std::sqrt(qn);
  std::vector<Neighbor> all;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string &word = table.vocab().word(static_cast<int32_t>(r));
    if (exclude.count(word)) continue;
    auto row = table.input(static_cast<int32_t>(r));
    double dot = 0, rn = 0;
    for (std::size_t d = 0; d < row.size(); ++d) {
      dot += query[d] * row[d];
      rn += double(row[d]) * row[d];
    }
    if (rn == 0) continue;
    all.push_back({word, dot / (qn * std::sqrt(rn))});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor &a, const Neighbor &b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.word < b.word;
  });
  if (all.size() > static_cast<std::size_t>(k)) all.resize(k);
  return all;
}

inline std::vector<double> ToDouble(std::span<const float> v) {
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace melt::testing

#endif  // MELT_TESTS_TEST_UTIL_H_
