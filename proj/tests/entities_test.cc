#include <random>
#include <sstream>

#include "doctest.h"
#include "melt/entities.h"

using namespace melt;

namespace {

TokenizedDocument Doc(const std::vector<std::vector<std::string>> &sentences,
                      const std::string &id = "d") {
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
    doc.sentences.push_back(s);
  }
  return doc;
}

Dictionary Dict(std::initializer_list<const char *> terms) {
  Dictionary d;
  for (const char *t : terms) d.Add(t);
  return d;
}

}  // namespace

TEST_CASE("greedy longest match plus formulas") {
  auto spans = TagEntities(Doc({{"the", "melting", "point", "of", "LiCoO2"}}),
                           Dict({"melting point"}));
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].token_start == 1);
  CHECK(spans[0].token_end == 3);
  CHECK(spans[0].entity_kind == EntityKind::kDictionaryTerm);
  CHECK(spans[0].canonical == "melting point");
  CHECK(spans[1].token_start == 4);
  CHECK(spans[1].token_end == 5);
  CHECK(spans[1].entity_kind == EntityKind::kFormula);
  CHECK(spans[1].canonical == "LiCoO2");
}

TEST_CASE("no matches and plain formulas") {
  CHECK(TagEntities(Doc({{"water"}}), Dictionary()).empty());
  auto spans = TagEntities(Doc({{"H2O", "and", "D2O"}}), Dictionary());
  // D is not an element symbol (deuterium is written as H).
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].canonical == "H2O");
  spans = TagEntities(Doc({{"H2O", "and", "N2O"}}), Dictionary());
  CHECK(spans.size() == 2);
}

TEST_CASE("longer dictionary term wins and matching ignores case") {
  auto spans = TagEntities(Doc({{"The", "Melting", "Point", "rises"}}),
                           Dict({"melting", "melting point"}));
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].canonical == "melting point");
  CHECK(spans[0].token_end - spans[0].token_start == 2);
}

TEST_CASE("spans are disjoint on random documents") {
  std::mt19937 rng(9);
  const std::vector<std::string> pool = {"band", "gap", "of", "TiO2", "thin", "film",
                                         "band", "H2O", "In", "No", "solar", "cell"};
  Dictionary dict = Dict({"band gap", "thin film", "gap", "solar cell", "film"});
  for (int round = 0; round < 300; ++round) {
    std::vector<std::string> words;
    int n = 1 + static_cast<int>(rng() % 25);
    for (int i = 0; i < n; ++i) words.push_back(pool[rng() % pool.size()]);
    auto spans = TagEntities(Doc({words}), dict);
    int last_end = 0;
    for (const auto &s : spans) {
      CHECK(s.token_start < s.token_end);
      CHECK(s.token_start >= last_end);
      CHECK(s.token_end <= n);
      last_end = s.token_end;
    }
  }
}

TEST_CASE("corpus aggregation") {
  auto doc = Doc({{"H2O", "boils"}, {"H2O", "and", "melting", "point"}});
  SeedEntitySet seeds = ExtractCorpusEntities({doc}, Dict({"melting point"}));
  REQUIRE(seeds.size() == 2);
  CHECK(seeds.at("H2O").corpus_frequency == 2);
  CHECK(seeds.at("H2O").kind == EntityKind::kFormula);
  CHECK(seeds.at("melting point").corpus_frequency == 1);
  CHECK(seeds.at("melting point").kind == EntityKind::kDictionaryTerm);
  auto sorted = seeds.Sorted();
  CHECK(sorted[0].first == "H2O");

  std::ostringstream out;
  seeds.WriteTsv(out);
  CHECK(out.str() == "H2O\tformula\t2\nmelting point\tterm\t1\n");
  std::istringstream in(out.str());
  auto back = SeedEntitySet::ReadTsv(in);
  CHECK(back.size() == 2);
  CHECK(back.at("melting point").corpus_frequency == 1);

  CHECK_THROWS_WITH(ExtractCorpusEntities({}, Dictionary()), "empty corpus");
}

TEST_CASE("parallel extraction matches serial") {
  std::vector<TokenizedDocument> docs;
  for (int i = 0; i < 30; ++i) {
    docs.push_back(Doc({{"LiCoO2", "thin", "film"}, {"TiO2", "and", "ZnO"}},
                       "d" + std::to_string(i)));
  }
  Dictionary dict = Dict({"thin film"});
  std::ostringstream a, b;
  ExtractCorpusEntities(docs, dict, 1).WriteTsv(a);
  ExtractCorpusEntities(docs, dict, 4).WriteTsv(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("dictionary file") {
  std::istringstream in("# comment\nBand Gap\n\n  solar cell  # trailing\n");
  Dictionary dict = Dictionary::Load(in);
  CHECK(dict.size() == 2);
  CHECK(dict.Contains("band gap"));
  CHECK(dict.Contains("solar cell"));
  CHECK(dict.max_tokens() == 2);
}
