#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "melt/conll.h"
#include "melt/masking.h"
#include "synthetic.h"
#include "test_util.h"

using namespace melt;
using namespace melt::testing;
namespace fs = std::filesystem;

namespace {

using Tokens = std::vector<std::string>;

// Independent longest-match scan: at each position try every entity.
EntityIndex BruteForceIndex(const Tokens &tokens, const Strata &strata) {
  std::vector<std::pair<Tokens, std::pair<std::string, int>>> entries;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    for (const auto &e : strata[i]) {
      Tokens parts;
      std::istringstream words(e);
      for (std::string w; words >> w;) parts.push_back(w);
      entries.push_back({parts, {e, static_cast<int>(i) + 1}});
    }
  }
  EntityIndex out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t best = 0;
    IndexedSpan span;
    for (const auto &[parts, info] : entries) {
      if (parts.size() <= best || i + parts.size() > tokens.size()) continue;
      if (std::equal(parts.begin(), parts.end(), tokens.begin() + i)) {
        best = parts.size();
        span = {static_cast<int>(i), static_cast<int>(i + best), info.first, info.second};
      }
    }
    if (best) {
      out.push_back(span);
      i += best;
    } else {
      ++i;
    }
  }
  return out;
}

void CheckExampleInvariants(const MaskedExample &ex, const Tokens &original,
                            const std::string &sentinel) {
  REQUIRE(ex.masked_positions.size() == ex.original_targets.size());
  for (std::size_t i = 0; i < ex.masked_positions.size(); ++i) {
    int p = ex.masked_positions[i];
    REQUIRE(p >= 0);
    REQUIRE(p < static_cast<int>(ex.tokens.size()));
    if (i) REQUIRE(p > ex.masked_positions[i - 1]);
  }
  std::set<int> masked(ex.masked_positions.begin(), ex.masked_positions.end());
  for (std::size_t p = 0; p < ex.tokens.size(); ++p) {
    CHECK((ex.tokens[p] == sentinel) == (masked.count(static_cast<int>(p)) > 0));
  }
  CHECK(ex.Reconstruct() == original);
}

SyntheticCorpus &SharedCorpus() {
  static SyntheticCorpus corpus = [] {
    SyntheticOptions opt;
    opt.docs = 200;  // 2,000 sequences
    opt.seed = 11;
    return MakeTaggedCorpus(opt);
  }();
  return corpus;
}

std::string ReadAll(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("entity index") {
  Strata strata = {{"LiCoO2"}, {"cathode"}};
  EntityIndex index = IndexEntities(Tokens{"LiCoO2", "cathode"}, strata);
  CHECK(index == EntityIndex{{0, 1, "LiCoO2", 1}, {1, 2, "cathode", 2}});
  CHECK(IndexEntities(Tokens{"a", "b", "c"}, strata).empty());

  Strata overlap = {{"melting point", "point"}};
  index = IndexEntities(Tokens{"the", "melting", "point", "of", "point"}, overlap);
  CHECK(index == EntityIndex{{1, 3, "melting point", 1}, {4, 5, "point", 1}});

  // Case folds for words, not formulas.
  index = IndexEntities(Tokens{"Cathode", "licoo2"}, strata);
  CHECK(index == EntityIndex{{0, 1, "cathode", 2}});
}

TEST_CASE("entity index agrees with brute force") {
  std::mt19937 rng(3);
  const Tokens alphabet = {"a", "b", "c", "d"};
  for (int round = 0; round < 500; ++round) {
    std::set<std::string> pool;
    int count = 1 + static_cast<int>(rng() % 6);
    while (static_cast<int>(pool.size()) < count) {
      std::string e = alphabet[rng() % 4];
      int extra = static_cast<int>(rng() % 3);
      for (int i = 0; i < extra; ++i) e += " " + alphabet[rng() % 4];
      pool.insert(e);
    }
    Strata strata(1 + rng() % 3);
    for (const auto &e : pool) strata[rng() % strata.size()].push_back(e);
    Tokens tokens;
    int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) tokens.push_back(alphabet[rng() % 4]);
    CHECK(IndexEntities(tokens, strata) == BruteForceIndex(tokens, strata));
  }
}

TEST_CASE("mask probability calibration") {
  MaskCalibration c = CalibrateMaskProbability(30, 100, 0.15);
  CHECK(c.p_m == doctest::Approx(0.5));
  CHECK_FALSE(c.shortfall);
  c = CalibrateMaskProbability(15, 100, 0.15);
  CHECK(c.p_m == doctest::Approx(1.0));
  CHECK_FALSE(c.shortfall);
  c = CalibrateMaskProbability(5, 100, 0.15);
  CHECK(c.p_m == 1.0);
  CHECK(c.shortfall);
  // Random fill has to supply 15% - 5% of the tokens.
  CHECK(0.15 * 100 - 5 * c.p_m == doctest::Approx(10));
  c = CalibrateMaskProbability(0, 100, 0.15);
  CHECK(c.p_m == 0);
  CHECK(c.fallback_only);
  CHECK_THROWS(CalibrateMaskProbability(1, 0, 0.15));
}

TEST_CASE("config validation") {
  MaskingConfig cfg;
  CHECK_NOTHROW(cfg.Validate());
  cfg.target_token_ratio = 1.0;
  CHECK_THROWS(cfg.Validate());
  cfg.target_token_ratio = 0.15;
  cfg.sequence_length = 7;
  CHECK_THROWS(cfg.Validate());
}

TEST_CASE("full-probability masking covers exactly the entities") {
  Tokens tokens = NumberedWords(20);
  tokens[3] = "melting";
  tokens[4] = "point";
  tokens[10] = "LiCoO2";
  Strata strata = {{"melting point", "LiCoO2"}};
  EntityIndex index = IndexEntities(tokens, strata);
  MaskingConfig cfg;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    MaskRng rng(seed);
    auto ex = MaskSequence(tokens, index, 1, 1.0, cfg, rng);
    REQUIRE(ex);
    CHECK(ex->masked_positions == std::vector<int>{3, 4, 10});
    CheckExampleInvariants(*ex, tokens, cfg.mask_sentinel);
  }
}

TEST_CASE("zero probability falls back to random masking") {
  Tokens tokens = NumberedWords(20);
  tokens[10] = "LiCoO2";
  EntityIndex index = IndexEntities(tokens, Strata{{"LiCoO2"}});
  MaskingConfig cfg;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    MaskRng rng(seed);
    auto ex = MaskSequence(tokens, index, 1, 0.0, cfg, rng);
    REQUIRE(ex);
    CHECK(ex->masked_positions.size() == 3);
    CHECK(std::count(ex->masked_positions.begin(), ex->masked_positions.end(), 10) == 0);
  }
  cfg.fallback_random_fill = false;
  MaskRng rng(1);
  auto ex = MaskSequence(tokens, index, 1, 0.0, cfg, rng);
  CHECK(ex->masked_positions.empty());
}

TEST_CASE("short sequences are skipped") {
  MaskingConfig cfg;
  MaskRng rng(1);
  CHECK_FALSE(MaskSequence(Tokens{"x"}, {}, 0, 0, cfg, rng));
  CHECK_FALSE(MaskSequence(Tokens{}, {}, 1, 0, cfg, rng));
}

TEST_CASE("warm-up masking is uniform over positions") {
  const int n = 40, trials = 20000;
  Tokens tokens = NumberedWords(n);
  tokens[7] = "[CLS]";
  MaskingConfig cfg;
  MaskRng rng(9);
  std::vector<int> hits(n, 0);
  for (int t = 0; t < trials; ++t) {
    auto ex = MaskSequence(tokens, {}, 0, 0, cfg, rng);
    CHECK(ex->masked_positions.size() == 6);
    for (int p : ex->masked_positions) ++hits[p];
  }
  CHECK(hits[7] == 0);
  // 6 of 39 eligible positions per trial.
  double expected = trials * 6.0 / 39.0;
  double sd = std::sqrt(expected * (1 - 6.0 / 39.0));
  for (int p = 0; p < n; ++p) {
    if (p != 7) CHECK(std::abs(hits[p] - expected) < 5 * sd);
  }
}

TEST_CASE("masking laws on random sequences") {
  std::mt19937 gen(4);
  const Tokens alphabet = {"a", "b", "c", "d", "e", "f"};
  Strata strata = {{"a", "b c"}, {"d"}, {"e f", "f"}};
  MaskingConfig cfg;
  for (int round = 0; round < 2000; ++round) {
    Tokens tokens;
    int n = 2 + static_cast<int>(gen() % 60);
    for (int i = 0; i < n; ++i) tokens.push_back(alphabet[gen() % 6]);
    EntityIndex index = IndexEntities(tokens, strata);
    int stage = static_cast<int>(gen() % 4);
    double p_m = (gen() % 11) / 10.0;
    MaskRng rng(gen());
    auto ex = MaskSequence(tokens, index, stage, p_m, cfg, rng);
    REQUIRE(ex);
    CheckExampleInvariants(*ex, tokens, cfg.mask_sentinel);
    CHECK(ex->masked_positions.size() <=
          static_cast<std::size_t>(std::ceil(cfg.target_token_ratio * n)));
    std::set<int> masked(ex->masked_positions.begin(), ex->masked_positions.end());
    if (stage == 0) continue;
    for (const auto &span : index) {
      int covered = 0;
      for (int p = span.token_start; p < span.token_end; ++p) covered += masked.count(p);
      bool whole = covered == 0 || covered == span.token_end - span.token_start;
      CHECK(whole);
      if (span.stage > stage) CHECK(covered == 0);
    }
  }
}

TEST_CASE("bert corruption keeps reconstruction") {
  Tokens tokens = NumberedWords(100);
  MaskingConfig cfg;
  cfg.bert_corruption = true;
  MaskRng rng(2);
  int sentinel = 0, total = 0;
  for (int t = 0; t < 2000; ++t) {
    auto ex = MaskSequence(tokens, {}, 0, 0, cfg, rng);
    CHECK(ex->Reconstruct() == tokens);
    for (int p : ex->masked_positions) {
      ++total;
      sentinel += ex->tokens[p] == cfg.mask_sentinel;
    }
  }
  CHECK(static_cast<double>(sentinel) / total == doctest::Approx(0.8).epsilon(0.03));
}

TEST_CASE("sequence packing") {
  std::vector<TokenizedDocument> docs = {
      DocFromSentences("a", {NumberedWords(10), NumberedWords(10)}),
      DocFromSentences("b", {NumberedWords(5)}),
      DocFromSentences("c", {NumberedWords(16), NumberedWords(3)})};
  std::size_t dropped = 0;
  auto seqs = PackSequences(docs, 8, &dropped);
  std::vector<std::string> ids;
  for (const auto &s : seqs) ids.push_back(s.id);
  CHECK(ids == std::vector<std::string>{"a#0", "a#1", "c#0", "c#1"});
  // a#2 holds 4 tokens, b#0 holds 5, c#2 holds 3.
  CHECK(dropped == 3);
  for (const auto &s : seqs) CHECK(s.tokens.size() == 8);
  CHECK(seqs[1].tokens.front() == "w8");
  CHECK_THROWS(PackSequences(docs, 4));
}

TEST_CASE("anchor selection") {
  std::map<std::string, int64_t> target = {{"zeolite", 10}, {"the", 10}, {",", 500}, {"2024", 300}};
  std::map<std::string, int64_t> generic = {{"the", 1000}};
  auto anchors = SelectAnchors(target, generic, 20);
  CHECK(anchors == std::vector<std::string>{"zeolite", "the"});
  CHECK_THROWS(SelectAnchors(target, {}, 20));

  std::map<std::string, int64_t> many;
  for (int i = 0; i < 50; ++i) many["word" + std::to_string(i)] = 100 - i;
  anchors = SelectAnchors(many, generic, 20);
  CHECK(anchors.size() == 20);
  CHECK(anchors.front() == "word0");
  CHECK(anchors.back() == "word19");
}

TEST_CASE("stage eligibility is nested") {
  std::mt19937 rng(8);
  for (int round = 0; round < 100; ++round) {
    StrategyInputs in;
    int n = 3 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) in.degrees["e" + std::to_string(i)] = rng() % 10;
    PlanOptions opt;
    opt.K = 1 + static_cast<int>(rng() % 3);
    CurriculumPlan plan = BuildPlan(in, opt);
    CHECK(EligibleEntities(plan, 0).empty());
    for (int s = 1; s < plan.K; ++s) {
      auto a = EligibleEntities(plan, s);
      auto b = EligibleEntities(plan, s + 1);
      for (const auto &e : a) CHECK(b.count(e));
      CHECK(b.size() > a.size());
    }
    CHECK(EligibleEntities(plan, plan.K).size() == static_cast<std::size_t>(n));
  }
}

TEST_CASE("emitted ratios stay on budget") {
  const SyntheticCorpus &corpus = SharedCorpus();
  EmitInputs inputs;
  inputs.plan = PlanFor(corpus);
  inputs.seeds = SeedEntitySet();
  for (const auto &e : corpus.entities) inputs.seeds->Add(e, EntityKind::kDictionaryTerm);
  std::map<std::string, int64_t> generic;
  for (int i = 0; i < 400; ++i) generic["w" + std::to_string(i)] = 1000;
  inputs.generic_counts = generic;

  for (auto strategy : {EmitStrategy::kMelt, EmitStrategy::kRandom,
                        EmitStrategy::kEntityOnly, EmitStrategy::kDiffMasking}) {
    CAPTURE(EmitStrategyName(strategy));
    EmitOptions opt;
    opt.strategy = strategy;
    opt.shard_size = 500;
    EmittedDataset data = GenerateDataset(corpus.docs, inputs, opt);
    CHECK(data.sequences == 2000);
    for (const auto &stage : data.stages) {
      CAPTURE(stage.report.stage);
      double want = strategy == EmitStrategy::kDiffMasking ? 0.25 : 0.15;
      CHECK(stage.report.RealizedRatio() == doctest::Approx(want).epsilon(0.01 / want));
      int64_t masked = 0;
      for (const auto &shard : stage.shards) {
        for (const auto &ex : shard) masked += static_cast<int64_t>(ex.masked_positions.size());
      }
      CHECK(masked == stage.report.masked_tokens);
    }
    if (strategy == EmitStrategy::kDiffMasking) CHECK(data.anchors.size() == 20);
    if (strategy == EmitStrategy::kMelt) {
      REQUIRE(data.stages.size() == 4);
      // Entity coverage grows with the stage, so p_m falls.
      for (int s = 2; s <= 3; ++s) {
        CHECK(data.stages[s].report.entity_tokens > data.stages[s - 1].report.entity_tokens);
        CHECK(data.stages[s].report.p_m <= data.stages[s - 1].report.p_m);
      }
      // Every entity token of the corpus is indexed by the last stage.
      int64_t expected = 0;
      for (const auto &[e, n] : corpus.entity_tokens) expected += n;
      CHECK(data.stages[3].report.entity_tokens == expected);
    }
  }
}

TEST_CASE("emission is independent of worker count") {
  SyntheticOptions so;
  so.docs = 30;
  so.seed = 5;
  SyntheticCorpus corpus = MakeTaggedCorpus(so);
  EmitInputs inputs;
  inputs.plan = PlanFor(corpus);
  EmitOptions opt;
  opt.shard_size = 17;
  opt.workers = 1;
  EmittedDataset one = GenerateDataset(corpus.docs, inputs, opt);
  opt.workers = 4;
  EmittedDataset four = GenerateDataset(corpus.docs, inputs, opt);
  REQUIRE(one.stages.size() == four.stages.size());
  for (std::size_t s = 0; s < one.stages.size(); ++s) {
    CHECK(one.stages[s].shards == four.stages[s].shards);
  }
  opt.masking.seed = 2;
  EmittedDataset other = GenerateDataset(corpus.docs, inputs, opt);
  CHECK(other.stages[1].shards != one.stages[1].shards);
}

TEST_CASE("dataset files") {
  SyntheticOptions so;
  so.docs = 20;
  SyntheticCorpus corpus = MakeTaggedCorpus(so);
  EmitInputs inputs;
  inputs.plan = PlanFor(corpus);
  EmitOptions opt;
  opt.shard_size = 64;
  EmittedDataset data = GenerateDataset(corpus.docs, inputs, opt);

  fs::path a = fs::temp_directory_path() / "melt_emit_a";
  fs::path b = fs::temp_directory_path() / "melt_emit_b";
  fs::remove_all(a);
  fs::remove_all(b);
  WriteDataset(data, opt, a);
  WriteDataset(GenerateDataset(corpus.docs, inputs, opt), opt, b);

  std::vector<std::string> names;
  for (const auto &entry : fs::directory_iterator(a)) names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"manifest.json", "stage0_shard0.jsonl",
                                          "stage0_shard1.jsonl", "stage0_shard2.jsonl",
                                          "stage0_shard3.jsonl", "stage1_shard0.jsonl",
                                          "stage1_shard1.jsonl", "stage1_shard2.jsonl",
                                          "stage1_shard3.jsonl", "stage2_shard0.jsonl",
                                          "stage2_shard1.jsonl", "stage2_shard2.jsonl",
                                          "stage2_shard3.jsonl", "stage3_shard0.jsonl",
                                          "stage3_shard1.jsonl", "stage3_shard2.jsonl",
                                          "stage3_shard3.jsonl"});
  for (const auto &name : names) CHECK(ReadAll(a / name) == ReadAll(b / name));

  auto manifest = nlohmann::json::parse(ReadAll(a / "manifest.json"));
  std::vector<std::string> phases;
  for (const auto &p : manifest["phases"]) {
    phases.push_back(p["kind"] == "warmup" ? "warmup" : "s" + std::to_string(p["stage"].get<int>()));
  }
  CHECK(phases == std::vector<std::string>{"warmup", "s1", "s2", "s3", "s1", "s2",
                                           "s3", "s1", "s2", "s3"});
  CHECK(manifest["phases"].back()["end"] == 100000);
  CHECK(manifest["config"]["seed"] == 1);
  CHECK(manifest["config_hash"].get<std::string>().size() == 64);
  for (const auto &stage : manifest["stages"]) {
    CHECK(stage["realized_ratio"].get<double>() == doctest::Approx(0.15).epsilon(0.07));
  }

  auto examples = ReadExamples(a / "stage2_shard1.jsonl");
  CHECK(examples == data.stages[2].shards[1]);
  for (const auto &ex : examples) {
    CHECK(ex.stage == 2);
    CHECK(ex.strategy == "melt");
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("generation errors") {
  EmitOptions opt;
  EmitInputs none;
  CHECK_THROWS(GenerateDataset({}, none, opt));
  std::vector<TokenizedDocument> docs = {DocFromSentences("d", {NumberedWords(20)})};
  CHECK_THROWS(GenerateDataset(docs, none, opt));
  opt.strategy = EmitStrategy::kDiffMasking;
  CHECK_THROWS_WITH(GenerateDataset(docs, none, opt),
                    "diff-masking needs a generic frequency table");
  opt.strategy = EmitStrategy::kRandom;
  CHECK_NOTHROW(GenerateDataset(docs, none, opt));
  CHECK(ParseEmitStrategy("entity-only") == EmitStrategy::kEntityOnly);
  CHECK_THROWS(ParseEmitStrategy("dsp"));
}

TEST_CASE("conll reading") {
  std::istringstream in(
      "-DOCSTART- O\n\nLiCoO2\tB-MAT\ncathode\tO\n\nthe O\n-DOCSTART- O\n"
      "x POS B-X\n");
  auto docs = ReadConll(in);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].doc_id == "conll-0");
  CHECK(docs[0].sentences.size() == 2);
  CHECK(docs[0].sentences[0].tags == std::vector<std::string>{"B-MAT", "O"});
  CHECK(docs[1].doc_id == "conll-1");
  CHECK(docs[1].sentences[0].tags == std::vector<std::string>{"B-X"});
  std::istringstream bad("token_without_tag\n");
  CHECK_THROWS(ReadConll(bad));

  auto gold = ReadConllFile(fs::path(MELT_DATA_DIR) / "gold_sample.conll");
  CHECK(gold.size() == 2);
}

TEST_CASE("overlap ratio") {
  std::istringstream in(
      "a O\nb B-MAT\nc I-MAT\nd O\ne O\nf O\ng B-MAT\nh O\n"
      "i O\nj O\nk B-MAT\nl O\nm O\nn O\no O\np O\n");
  auto tagged = ReadConll(in);
  auto docs = TokensFromConll(tagged);
  auto seqs = PackSequences(docs, 8);
  REQUIRE(seqs.size() == 2);

  auto masked = [&](int window, std::vector<int> positions) {
    MaskedExample ex;
    ex.sequence_id = seqs[window].id;
    ex.tokens = seqs[window].tokens;
    ex.masked_positions = positions;
    for (int p : positions) {
      ex.original_targets.push_back(ex.tokens[p]);
      ex.tokens[p] = "[MASK]";
    }
    return ex;
  };
  CHECK(OverlapRatio({masked(0, {0, 3}), masked(1, {0, 1})}, tagged).Ratio() == 0.0);
  CHECK(OverlapRatio({masked(0, {1, 2, 6}), masked(1, {2})}, tagged).Ratio() == 1.0);
  OverlapStats mixed = OverlapRatio({masked(0, {0, 1}), masked(1, {2, 3})}, tagged);
  CHECK(mixed.masked == 4);
  CHECK(mixed.on_entity == 2);

  MaskedExample wrong = masked(1, {0});
  wrong.tokens[3] = "zzz";
  CHECK_THROWS_WITH(OverlapRatio({masked(0, {0}), wrong}, tagged),
                    doctest::Contains("at token 3"));
}

TEST_CASE("entity masking beats random masking on tagged tokens") {
  const SyntheticCorpus &corpus = SharedCorpus();
  EmitInputs inputs;
  inputs.plan = PlanFor(corpus);
  EmitOptions opt;
  std::vector<MaskedExample> melt_examples, random_examples;
  EmittedDataset melt_data = GenerateDataset(corpus.docs, inputs, opt);
  for (const auto &stage : melt_data.stages) {
    if (stage.report.stage == 0) continue;
    for (const auto &shard : stage.shards) {
      melt_examples.insert(melt_examples.end(), shard.begin(), shard.end());
    }
  }
  opt.strategy = EmitStrategy::kRandom;
  EmittedDataset random_data = GenerateDataset(corpus.docs, inputs, opt);
  for (const auto &shard : random_data.stages[0].shards) {
    random_examples.insert(random_examples.end(), shard.begin(), shard.end());
  }
  double melt = OverlapRatio(melt_examples, corpus.tagged).Ratio();
  double random = OverlapRatio(random_examples, corpus.tagged).Ratio();
  double density = static_cast<double>(corpus.tagged_tokens) / corpus.total_tokens;
  CHECK(random == doctest::Approx(density).epsilon(0.1));
  CHECK(melt >= 1.5 * random);
}
