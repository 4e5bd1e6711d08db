#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "melt/embedding.h"
#include "test_util.h"

using namespace melt;
using namespace melt::testing;

namespace {

// Independent loss: -log s(u0.v) - sum_j log s(-uj.v), written from the
// definition with 1 / (1 + exp(-x)).
double OracleLoss(const std::vector<double> &v,
                  const std::vector<std::vector<double>> &u) {
  double loss = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    double dot = 0;
    for (std::size_t d = 0; d < v.size(); ++d) dot += u[j][d] * v[d];
    double s = 1.0 / (1.0 + std::exp(j == 0 ? -dot : dot));
    loss -= std::log(s);
  }
  return loss;
}

double RelativeError(const std::vector<double> &a, const std::vector<double> &b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

std::vector<TokenizedDocument> CooccurrenceCorpus(uint64_t seed) {
  // A and B always share a sentence; Z only appears with its own filler.
  std::mt19937_64 rng(seed);
  std::vector<std::string> fill_ab = {"p", "q", "r", "s"};
  std::vector<std::string> fill_z = {"x", "y", "t", "u"};
  std::vector<std::vector<std::string>> sentences;
  for (int i = 0; i < 400; ++i) {
    std::vector<std::string> s;
    for (int j = 0; j < 3; ++j) s.push_back(fill_ab[rng() % 4]);
    s.push_back("A");
    s.push_back(fill_ab[rng() % 4]);
    s.push_back("B");
    sentences.push_back(s);
    std::vector<std::string> z;
    for (int j = 0; j < 4; ++j) z.push_back(fill_z[rng() % 4]);
    z.insert(z.begin() + 2, "Z");
    sentences.push_back(z);
  }
  return {DocFromSentences("syn", sentences)};
}

EmbeddingHyperparams SmallHp(uint64_t seed) {
  EmbeddingHyperparams hp;
  hp.dim = 20;
  hp.epochs = 5;
  hp.learning_rate = 0.025;
  hp.window = 3;
  hp.negatives = 5;
  hp.subsample_threshold = 1.0;
  hp.min_count = 1;
  hp.seed = seed;
  return hp;
}

}  // namespace

TEST_CASE("defaults follow the reference hyper-parameter table") {
  EmbeddingHyperparams hp;
  CHECK(hp.dim == 200);
  CHECK(hp.epochs == 30);
  CHECK(hp.learning_rate == doctest::Approx(0.01));
  CHECK(hp.window == 8);
  CHECK(hp.subsample_threshold == doctest::Approx(1e-4));
  CHECK(hp.negatives == 15);
  CHECK(hp.min_count == 5);
  CHECK_NOTHROW(hp.Validate());
  hp.subsample_threshold = 0;
  CHECK_THROWS(hp.Validate());
}

TEST_CASE("subsampling keep probability") {
  CHECK(SubsampleKeepProbability(1, 10000, 1e-4) == doctest::Approx(1.0));
  CHECK(SubsampleKeepProbability(100, 10000, 1e-4) == doctest::Approx(0.11));
  CHECK(SubsampleKeepProbability(10000, 10000, 1e-4) == doctest::Approx(0.0101));
}

TEST_CASE("sgns loss values") {
  SgnsKernel<double> kernel;
  std::vector<double> v(4, 0.0), u0(4, 0.0), u1(4, 0.0), u2(4, 0.0);
  std::vector<double *> rows = {u0.data(), u1.data(), u2.data()};
  double loss = kernel.Step(std::span<double>(v), std::span<double *const>(rows), 0.1);
  CHECK(loss == doctest::Approx(std::log(2.0) * 3));

  // u_ctx.v = +10 and u_neg.v = -10.
  std::vector<double> c = {1, 0}, ctx = {10, 0}, neg = {-10, 0};
  std::vector<double *> two = {ctx.data(), neg.data()};
  loss = kernel.Step(std::span<double>(c), std::span<double *const>(two), 0.0);
  CHECK(loss == doctest::Approx(2 * std::log1p(std::exp(-10.0))).epsilon(1e-9));
  CHECK(loss == doctest::Approx(9.08e-5).epsilon(1e-3));
}

TEST_CASE("sgns gradients match central differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0, 0.5);
  SgnsKernel<double> kernel;
  const int dim = 5;
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    int rows = 2 + static_cast<int>(rng() % 5);
    std::vector<double> v(dim);
    std::vector<std::vector<double>> u(rows, std::vector<double>(dim));
    for (auto &x : v) x = normal(rng);
    for (auto &r : u) for (auto &x : r) x = normal(rng);

    // Analytic: one step with lr = 1 moves each vector by minus its gradient.
    std::vector<double> v2 = v;
    auto u2 = u;
    std::vector<double *> ptrs;
    for (auto &r : u2) ptrs.push_back(r.data());
    kernel.Step(std::span<double>(v2), std::span<double *const>(ptrs), 1.0);

    std::vector<double> analytic, numeric;
    for (int d = 0; d < dim; ++d) {
      analytic.push_back(v[d] - v2[d]);
      auto plus = v, minus = v;
      plus[d] += h;
      minus[d] -= h;
      numeric.push_back((OracleLoss(plus, u) - OracleLoss(minus, u)) / (2 * h));
    }
    for (int j = 0; j < rows; ++j) {
      for (int d = 0; d < dim; ++d) {
        analytic.push_back(u[j][d] - u2[j][d]);
        auto plus = u, minus = u;
        plus[j][d] += h;
        minus[j][d] -= h;
        numeric.push_back((OracleLoss(v, plus) - OracleLoss(v, minus)) / (2 * h));
      }
    }
    CHECK(RelativeError(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("table-level step updates only the touched rows") {
  EmbeddingTable table(UniformVocab({"a", "b", "c", "d"}), 3);
  std::mt19937_64 rng(2);
  for (auto &x : table.input_matrix()) x = static_cast<float>(rng() % 100) / 100.0f;
  for (auto &x : table.output_matrix()) x = static_cast<float>(rng() % 100) / 100.0f;
  auto before_in = table.input_matrix();
  auto before_out = table.output_matrix();
  std::vector<int32_t> negatives = {2};
  SgnsStep(table, 0, 1, negatives, 0.1f);
  for (int d = 0; d < 3; ++d) {
    CHECK(table.input(1)[d] == before_in[3 + d]);
    CHECK(table.output(3)[d] == before_out[9 + d]);
  }
  CHECK(table.input(0)[0] != before_in[0]);
}

TEST_CASE("negative sampler follows unigram^0.75") {
  std::vector<Vocabulary::Row> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({"w" + std::to_string(i), (i + 1) * 37, false});
  Vocabulary vocab(rows, 0);
  NegativeSampler sampler(vocab);
  std::vector<double> expected(10);
  double z = 0;
  for (int i = 0; i < 10; ++i) z += std::pow((i + 1) * 37.0, 0.75);
  for (int i = 0; i < 10; ++i) expected[i] = std::pow((i + 1) * 37.0, 0.75) / z;
  std::mt19937_64 rng(99);
  std::vector<int> hits(10, 0);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) ++hits[sampler(rng)];
  for (int i = 0; i < 10; ++i) {
    CAPTURE(i);
    CHECK(sampler.probabilities()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    double observed = static_cast<double>(hits[i]) / draws;
    CHECK(std::abs(observed - expected[i]) / expected[i] < 0.02);
  }
}

TEST_CASE("training: loss falls, output deterministic, related words closer") {
  auto docs = CooccurrenceCorpus(1);
  Vocabulary vocab = BuildVocabulary(docs, 1);
  IndexedCorpus corpus = IndexCorpus(docs, vocab);

  TrainingReport report;
  EmbeddingTable a = TrainEmbeddings(corpus, vocab, SmallHp(1), &report);
  REQUIRE(report.epoch_mean_loss.size() == 5);
  int upticks = 0;
  for (std::size_t i = 1; i < report.epoch_mean_loss.size(); ++i) {
    if (report.epoch_mean_loss[i] > report.epoch_mean_loss[i - 1]) {
      ++upticks;
      CHECK(report.epoch_mean_loss[i] <= report.epoch_mean_loss[i - 1] * 1.01);
    }
  }
  CHECK(upticks <= 1);
  CHECK(a.AllFinite());

  EmbeddingTable b = TrainEmbeddings(corpus, vocab, SmallHp(1));
  std::ostringstream sa, sb;
  a.WriteText(sa);
  b.WriteText(sb);
  CHECK(sa.str() == sb.str());
  CHECK(a.input_matrix() == b.input_matrix());

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    auto d = CooccurrenceCorpus(seed);
    Vocabulary v = BuildVocabulary(d, 1);
    EmbeddingTable t = TrainEmbeddings(IndexCorpus(d, v), v, SmallHp(seed));
    // Tokens "A", "B", "Z" are single capitals, so their keys are lowercase.
    double ab = CosineSimilarity(*t.Find("a"), *t.Find("b"));
    double az = CosineSimilarity(*t.Find("a"), *t.Find("z"));
    CHECK(ab > az);
  }
}

TEST_CASE("multi-worker training stays finite") {
  auto docs = CooccurrenceCorpus(3);
  Vocabulary vocab = BuildVocabulary(docs, 1);
  EmbeddingHyperparams hp = SmallHp(3);
  hp.workers = 3;
  EmbeddingTable t = TrainEmbeddings(IndexCorpus(docs, vocab), vocab, hp);
  CHECK(t.AllFinite());
  CHECK(t.size() == vocab.size());
}

TEST_CASE("training errors") {
  Vocabulary vocab = UniformVocab({"a", "b"});
  CHECK_THROWS_WITH(TrainEmbeddings({}, vocab, SmallHp(1)), "empty corpus");
  IndexedCorpus bad = {{0, 1, 7}};
  CHECK_THROWS_AS(TrainEmbeddings(bad, vocab, SmallHp(1)), std::out_of_range);
}

TEST_CASE("cosine similarity") {
  std::vector<float> v = {0.3f, -2.0f, 5.0f};
  CHECK(CosineSimilarity(v, v) == doctest::Approx(1.0));
  std::vector<float> x = {1, 0}, y = {0, 1}, xy = {1, 1}, zero = {0, 0};
  CHECK(CosineSimilarity(x, y) == doctest::Approx(0.0));
  CHECK(CosineSimilarity(xy, x) == doctest::Approx(0.70710678));
  CHECK_THROWS_WITH(CosineSimilarity(zero, x), "degenerate vector");
}

TEST_CASE("nearest neighbors") {
  EmbeddingTable table(UniformVocab({"A", "B", "C"}), 2, false);
  auto &m = table.input_matrix();
  m = {1, 0, 0.9f, 0.1f, -1, 0.2f};
  auto res = NearestNeighbors(table, *table.Find("A"), 5, {"A"});
  REQUIRE(res.size() == 2);
  CHECK(res[0].word == "B");
  CHECK(res[1].word == "C");
  auto all = NearestNeighbors(table, *table.Find("A"), 3);
  REQUIRE(all.size() == 3);
  CHECK(all[0].word == "A");
  CHECK(all[0].similarity == doctest::Approx(1.0));
  CHECK_THROWS(NearestNeighbors(table, *table.Find("A"), 0));

  for (uint64_t seed = 0; seed < 20; ++seed) {
    EmbeddingTable t = RandomTable(300, 8, seed, 37);
    std::vector<float> q(8);
    std::mt19937_64 rng(seed);
    for (auto &x : q) x = static_cast<float>(static_cast<int>(rng() % 200) - 100);
    std::unordered_set<std::string> exclude = {"w1", "w5"};
    int k = 1 + static_cast<int>(seed % 12);
    auto got = NearestNeighbors(t, q, k, exclude);
    auto want = BruteForceNeighbors(t, ToDouble(q), k, exclude);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].word == want[i].word);
      CHECK(std::abs(got[i].similarity - want[i].similarity) < 1e-9);
    }
  }
}

TEST_CASE("ties break by word") {
  EmbeddingTable table(UniformVocab({"q", "b", "a", "c"}), 2, false);
  table.input_matrix() = {1, 0, 2, 0, 3, 0, 0, 1};
  auto res = NearestNeighbors(table, *table.Find("q"), 2, {"q"});
  REQUIRE(res.size() == 2);
  CHECK(res[0].word == "a");
  CHECK(res[1].word == "b");
}

TEST_CASE("text and binary formats") {
  EmbeddingTable t = RandomTable(50, 7, 4, 10);
  std::stringstream text;
  t.WriteText(text);
  EmbeddingTable back = EmbeddingTable::ReadText(text);
  REQUIRE(back.size() == 50);
  for (std::size_t i = 0; i < t.input_matrix().size(); ++i) {
    CHECK(back.input_matrix()[i] == doctest::Approx(t.input_matrix()[i]).epsilon(1e-5));
  }
  std::stringstream bin;
  t.WriteBinary(bin);
  EmbeddingTable exact = EmbeddingTable::ReadBinary(bin);
  CHECK(exact.input_matrix() == t.input_matrix());
  CHECK(exact.vocab().word(3) == "w3");
}
