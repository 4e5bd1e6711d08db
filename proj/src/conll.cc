#include "melt/conll.h"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace melt {

std::size_t TaggedDocument::TokenCount() const {
  std::size_t n = 0;
  for (const auto &s : sentences) n += s.tokens.size();
  return n;
}

std::vector<TaggedDocument> ReadConll(std::istream &in) {
  std::vector<TaggedDocument> docs;
  TaggedSentence sentence;
  auto flush_sentence = [&] {
    if (sentence.tokens.empty()) return;
    if (docs.empty()) docs.push_back({"conll-0", {}});
    docs.back().sentences.push_back(std::move(sentence));
    sentence = {};
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token, tag;
    if (!(fields >> token)) {
      flush_sentence();
      continue;
    }
    if (token == "-DOCSTART-") {
      flush_sentence();
      // An empty leading document would otherwise shift every id.
      if (docs.empty() || !docs.back().sentences.empty()) {
        docs.push_back({"conll-" + std::to_string(docs.size()), {}});
      }
      continue;
    }
    if (!(fields >> tag)) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected token and tag");
    }
    std::string rest;
    while (fields >> rest) tag = rest;  // multi-column files: last column is the tag
    sentence.tokens.push_back(std::move(token));
    sentence.tags.push_back(std::move(tag));
  }
  flush_sentence();
  if (!docs.empty() && docs.back().sentences.empty()) docs.pop_back();
  return docs;
}

std::vector<TaggedDocument> ReadConllFile(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ReadConll(in);
}

std::vector<TokenizedDocument> TokensFromConll(
    const std::vector<TaggedDocument> &docs) {
  std::vector<TokenizedDocument> out;
  out.reserve(docs.size());
  for (const auto &doc : docs) {
    TokenizedDocument td;
    td.doc_id = doc.doc_id;
    for (const auto &s : doc.sentences) {
      Sentence sentence;
      for (const auto &token : s.tokens) {
        if (!td.text.empty()) td.text += ' ';
        std::size_t start = td.text.size();
        td.text += token;
        sentence.push_back({token, start, td.text.size()});
      }
      td.sentences.push_back(std::move(sentence));
    }
    out.push_back(std::move(td));
  }
  return out;
}

bool IsEntityTag(const std::string &tag) {
  return tag.rfind("B-", 0) == 0 || tag.rfind("I-", 0) == 0;
}

OverlapStats OverlapRatio(const std::vector<MaskedExample> &examples,
                          const std::vector<TaggedDocument> &tagged) {
  struct Flat {
    std::vector<const std::string *> tokens;
    std::vector<const std::string *> tags;
  };
  std::map<std::string, Flat> flat;
  for (const auto &doc : tagged) {
    Flat &f = flat[doc.doc_id];
    for (const auto &s : doc.sentences) {
      for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        f.tokens.push_back(&s.tokens[i]);
        f.tags.push_back(&s.tags[i]);
      }
    }
  }

  // Full windows all have the length of window 0, so window w starts at
  // w * len(window 0).
  std::map<std::string, std::size_t> window_length;
  auto split_id = [](const std::string &id) {
    auto hash = id.rfind('#');
    if (hash == std::string::npos) {
      throw std::runtime_error("sequence id without window suffix: " + id);
    }
    return std::make_pair(id.substr(0, hash), std::stoul(id.substr(hash + 1)));
  };
  for (const auto &ex : examples) {
    auto [doc, window] = split_id(ex.sequence_id);
    if (window == 0) window_length[doc] = ex.tokens.size();
  }

  OverlapStats stats;
  for (const auto &ex : examples) {
    auto [doc, window] = split_id(ex.sequence_id);
    auto it = flat.find(doc);
    if (it == flat.end()) {
      throw std::runtime_error("tokenization mismatch: document " + doc +
                               " is not in the tagged data");
    }
    std::size_t start = 0;
    if (window > 0) {
      auto len = window_length.find(doc);
      if (len == window_length.end()) {
        throw std::runtime_error("cannot place " + ex.sequence_id +
                                 ": window 0 missing");
      }
      start = window * len->second;
    }
    std::vector<std::string> original = ex.Reconstruct();
    const Flat &f = it->second;
    for (std::size_t i = 0; i < original.size(); ++i) {
      std::size_t pos = start + i;
      if (pos >= f.tokens.size() || *f.tokens[pos] != original[i]) {
        throw std::runtime_error(
            "tokenization mismatch in " + ex.sequence_id + " at token " +
            std::to_string(i) + " (document position " + std::to_string(pos) +
            "): '" + original[i] + "' vs '" +
            (pos < f.tokens.size() ? *f.tokens[pos] : std::string("<end>")) + "'");
      }
    }
    for (int p : ex.masked_positions) {
      ++stats.masked;
      if (IsEntityTag(*f.tags[start + p])) ++stats.on_entity;
    }
  }
  return stats;
}

}  // namespace melt
