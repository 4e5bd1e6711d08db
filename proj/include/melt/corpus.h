#ifndef MELT_CORPUS_H_
#define MELT_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "melt/text.h"

namespace melt {

struct RawDocument {
  std::string doc_id;
  std::string text;
  std::string source_path;
};

struct TokenizedDocument {
  std::string doc_id;
  // Normalized text; token offsets index into it.
  std::string text;
  std::vector<Sentence> sentences;

  std::size_t TokenCount() const;
};

struct CorpusReadStats {
  std::size_t documents_read = 0;
  std::size_t skipped_invalid_utf8 = 0;
  std::size_t skipped_empty = 0;
};

// Reads either a directory of .txt files (doc_id = file stem, sorted by path)
// or a JSONL file with {"doc_id", "text"} per line. Documents that are not
// valid UTF-8 are skipped with a warning. Duplicate doc ids throw.
std::vector<RawDocument> ReadCorpus(const std::filesystem::path &input,
                                    CorpusReadStats *stats = nullptr);

// Normalizes, segments and tokenizes. Returns nullopt (and logs) when the
// text is empty after normalization.
std::optional<TokenizedDocument> TokenizeDocument(const RawDocument &doc);

// Ingests a whole corpus, preserving input order. `workers` > 1 tokenizes
// documents on that many threads; the result is identical either way.
std::vector<TokenizedDocument> TokenizeCorpus(
    const std::vector<RawDocument> &docs, int workers = 1,
    CorpusReadStats *stats = nullptr);

// tokens.jsonl: one document per line,
//   {"doc_id": ..., "text": ..., "sentences": [[[surface, start, end], ...]]}
void WriteTokens(const std::vector<TokenizedDocument> &docs, std::ostream &out);
void WriteTokensFile(const std::vector<TokenizedDocument> &docs,
                     const std::filesystem::path &path);
std::vector<TokenizedDocument> ReadTokens(std::istream &in);
std::vector<TokenizedDocument> ReadTokensFile(const std::filesystem::path &path);

using FormulaPredicate = std::function<bool(std::string_view)>;

// The form a token is counted and looked up under: formulas keep their case,
// every other token is lowercased.
std::string VocabularyKey(std::string_view surface,
                          const FormulaPredicate &is_formula);
std::string VocabularyKey(std::string_view surface);

struct VocabEntry {
  int32_t index = 0;
  int64_t count = 0;
  bool is_formula = false;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  // Rows must already be in index order.
  struct Row {
    std::string word;
    int64_t count = 0;
    bool is_formula = false;
  };
  Vocabulary(std::vector<Row> rows, int64_t total_tokens);

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  int64_t total_tokens() const { return total_tokens_; }

  const Row &row(int32_t index) const { return rows_.at(index); }
  const std::string &word(int32_t index) const { return rows_.at(index).word; }
  const std::vector<Row> &rows() const { return rows_; }

  std::optional<VocabEntry> Find(std::string_view word) const;
  // -1 when absent.
  int32_t IndexOf(std::string_view word) const;
  bool Contains(std::string_view word) const { return IndexOf(word) >= 0; }

  // TSV: word<TAB>count<TAB>is_formula, in index order.
  void WriteTsv(std::ostream &out) const;
  void WriteTsvFile(const std::filesystem::path &path) const;
  static Vocabulary ReadTsv(std::istream &in, int64_t total_tokens = 0);
  static Vocabulary ReadTsvFile(const std::filesystem::path &path,
                                int64_t total_tokens = 0);

 private:
  std::vector<Row> rows_;
  std::unordered_map<std::string, int32_t> index_;
  int64_t total_tokens_ = 0;
};

// Counts keys across the corpus and keeps words with count > min_count plus
// every formula regardless of count. Rows are ordered by count descending,
// then word ascending. Throws std::invalid_argument on an empty corpus or
// min_count < 1.
Vocabulary BuildVocabulary(const std::vector<TokenizedDocument> &docs,
                           int min_count, const FormulaPredicate &is_formula);
Vocabulary BuildVocabulary(const std::vector<TokenizedDocument> &docs,
                           int min_count = 5);

// Total token occurrences across the corpus, in or out of vocabulary.
int64_t CountTokens(const std::vector<TokenizedDocument> &docs);

}  // namespace melt

#endif  // MELT_CORPUS_H_
