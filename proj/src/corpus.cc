#include "melt/corpus.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "melt/formula.h"

namespace melt {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string ReadWholeFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void AddDocument(std::vector<RawDocument> &docs,
                 std::unordered_set<std::string> &seen, RawDocument doc,
                 CorpusReadStats &stats) {
  if (!IsValidUtf8(doc.text)) {
    spdlog::warn("skipping document '{}' ({}): invalid UTF-8", doc.doc_id,
                 doc.source_path);
    ++stats.skipped_invalid_utf8;
    return;
  }
  if (!seen.insert(doc.doc_id).second) {
    throw std::runtime_error("duplicate doc_id '" + doc.doc_id + "'");
  }
  ++stats.documents_read;
  docs.push_back(std::move(doc));
}

}  // namespace

std::size_t TokenizedDocument::TokenCount() const {
  std::size_t n = 0;
  for (const auto &sentence : sentences) n += sentence.size();
  return n;
}

std::vector<RawDocument> ReadCorpus(const fs::path &input,
                                    CorpusReadStats *stats) {
  CorpusReadStats local;
  CorpusReadStats &st = stats ? *stats : local;
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;

  if (fs::is_directory(input)) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::recursive_directory_iterator(input)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto &file : files) {
      RawDocument doc;
      doc.doc_id = fs::relative(file, input).replace_extension().string();
      doc.text = ReadWholeFile(file);
      doc.source_path = file.string();
      AddDocument(docs, seen, std::move(doc), st);
    }
    return docs;
  }

  std::ifstream in(input, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus " + input.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!IsValidUtf8(line)) {
      spdlog::warn("skipping {}:{}: invalid UTF-8", input.string(), line_no);
      ++st.skipped_invalid_utf8;
      continue;
    }
    json record = json::parse(line);
    RawDocument doc;
    doc.doc_id = record.at("doc_id").get<std::string>();
    doc.text = record.at("text").get<std::string>();
    doc.source_path = input.string() + ":" + std::to_string(line_no);
    AddDocument(docs, seen, std::move(doc), st);
  }
  return docs;
}

std::optional<TokenizedDocument> TokenizeDocument(const RawDocument &doc) {
  TokenizedDocument out;
  out.doc_id = doc.doc_id;
  out.text = NormalizeText(doc.text);
  if (out.text.empty()) {
    spdlog::warn("skipping document '{}': empty after normalization",
                 doc.doc_id);
    return std::nullopt;
  }
  for (const TextSpan &span : SentenceSpans(out.text)) {
    std::string_view sentence =
        std::string_view(out.text).substr(span.begin, span.end - span.begin);
    Sentence tokens = Tokenize(sentence);
    if (tokens.empty()) continue;
    for (Token &token : tokens) {
      token.char_start += span.begin;
      token.char_end += span.begin;
    }
    out.sentences.push_back(std::move(tokens));
  }
  return out;
}

std::vector<TokenizedDocument> TokenizeCorpus(
    const std::vector<RawDocument> &docs, int workers,
    CorpusReadStats *stats) {
  std::vector<std::optional<TokenizedDocument>> slots(docs.size());
  if (workers <= 1 || docs.size() < 2) {
    for (std::size_t i = 0; i < docs.size(); ++i)
      slots[i] = TokenizeDocument(docs[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < docs.size(); i = next++)
          slots[i] = TokenizeDocument(docs[i]);
      });
    }
    for (auto &t : pool) t.join();
  }
  std::vector<TokenizedDocument> out;
  out.reserve(docs.size());
  for (auto &slot : slots) {
    if (slot) {
      out.push_back(std::move(*slot));
    } else if (stats) {
      ++stats->skipped_empty;
    }
  }
  return out;
}

void WriteTokens(const std::vector<TokenizedDocument> &docs,
                 std::ostream &out) {
  for (const auto &doc : docs) {
    json sentences = json::array();
    for (const auto &sentence : doc.sentences) {
      json tokens = json::array();
      for (const auto &token : sentence) {
        tokens.push_back({token.surface, token.char_start, token.char_end});
      }
      sentences.push_back(std::move(tokens));
    }
    json record = {{"doc_id", doc.doc_id},
                   {"text", doc.text},
                   {"sentences", std::move(sentences)}};
    out << record.dump() << '\n';
  }
}

void WriteTokensFile(const std::vector<TokenizedDocument> &docs,
                     const fs::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteTokens(docs, out);
}

std::vector<TokenizedDocument> ReadTokens(std::istream &in) {
  std::vector<TokenizedDocument> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = json::parse(line);
    TokenizedDocument doc;
    doc.doc_id = record.at("doc_id").get<std::string>();
    doc.text = record.value("text", std::string());
    for (const auto &sentence : record.at("sentences")) {
      Sentence tokens;
      for (const auto &token : sentence) {
        if (token.is_string()) {
          tokens.push_back({token.get<std::string>(), 0, 0});
        } else {
          tokens.push_back({token.at(0).get<std::string>(),
                            token.at(1).get<std::size_t>(),
                            token.at(2).get<std::size_t>()});
        }
      }
      doc.sentences.push_back(std::move(tokens));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<TokenizedDocument> ReadTokensFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tokens file " + path.string());
  return ReadTokens(in);
}

std::string VocabularyKey(std::string_view surface,
                          const FormulaPredicate &is_formula) {
  if (is_formula(surface)) return std::string(surface);
  return ToLower(surface);
}

std::string VocabularyKey(std::string_view surface) {
  return VocabularyKey(surface, IsFormula);
}

Vocabulary::Vocabulary(std::vector<Row> rows, int64_t total_tokens)
    : rows_(std::move(rows)), total_tokens_(total_tokens) {
  index_.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!index_.emplace(rows_[i].word, static_cast<int32_t>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary word '" +
                                  rows_[i].word + "'");
    }
  }
}

std::optional<VocabEntry> Vocabulary::Find(std::string_view word) const {
  int32_t index = IndexOf(word);
  if (index < 0) return std::nullopt;
  const Row &r = rows_[index];
  return VocabEntry{index, r.count, r.is_formula};
}

int32_t Vocabulary::IndexOf(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

void Vocabulary::WriteTsv(std::ostream &out) const {
  for (const Row &r : rows_) {
    out << r.word << '\t' << r.count << '\t' << (r.is_formula ? 1 : 0) << '\n';
  }
}

void Vocabulary::WriteTsvFile(const fs::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteTsv(out);
}

Vocabulary Vocabulary::ReadTsv(std::istream &in, int64_t total_tokens) {
  std::vector<Row> rows;
  std::string line;
  int64_t sum = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw std::runtime_error("malformed vocabulary line: " + line);
    }
    Row r;
    r.word = line.substr(0, t1);
    r.count = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
    r.is_formula = line.substr(t2 + 1) == "1";
    sum += r.count;
    rows.push_back(std::move(r));
  }
  return Vocabulary(std::move(rows), total_tokens > 0 ? total_tokens : sum);
}

Vocabulary Vocabulary::ReadTsvFile(const fs::path &path, int64_t total_tokens) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  return ReadTsv(in, total_tokens);
}

Vocabulary BuildVocabulary(const std::vector<TokenizedDocument> &docs,
                           int min_count, const FormulaPredicate &is_formula) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  struct Tally {
    int64_t count = 0;
    bool formula = false;
  };
  std::unordered_map<std::string, Tally> tallies;
  int64_t total = 0;
  for (const auto &doc : docs) {
    for (const auto &sentence : doc.sentences) {
      for (const auto &token : sentence) {
        bool formula = is_formula(token.surface);
        std::string key = formula ? token.surface : ToLower(token.surface);
        Tally &t = tallies[key];
        ++t.count;
        t.formula = t.formula || formula;
        ++total;
      }
    }
  }
  if (total == 0) throw std::invalid_argument("empty corpus");

  std::vector<Vocabulary::Row> rows;
  for (auto &[word, tally] : tallies) {
    if (tally.count > min_count || tally.formula) {
      rows.push_back({word, tally.count, tally.formula});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto &a, const auto &b) {
    if (a.count != b.count) return a.count > b.count;
    return a.word < b.word;
  });
  return Vocabulary(std::move(rows), total);
}

Vocabulary BuildVocabulary(const std::vector<TokenizedDocument> &docs,
                           int min_count) {
  return BuildVocabulary(docs, min_count, IsFormula);
}

int64_t CountTokens(const std::vector<TokenizedDocument> &docs) {
  int64_t n = 0;
  for (const auto &doc : docs) n += static_cast<int64_t>(doc.TokenCount());
  return n;
}

}  // namespace melt
