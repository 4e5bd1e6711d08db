#include "melt/embedding.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

namespace melt {
namespace fs = std::filesystem;

namespace {

constexpr char kBinaryMagic[8] = {'M', 'E', 'L', 'T', 'E', 'M', 'B', '1'};
constexpr int kNegativeRedraws = 16;

double Uniform01(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [lo, hi].
int UniformInt(std::mt19937_64 &rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

template <class T>
void WriteLe(std::ostream &out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "binary embedding I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <class T>
T ReadLe(std::istream &in) {
  T value{};
  in.read(reinterpret_cast<char *>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated binary embedding file");
  return value;
}

struct WorkerResult {
  std::vector<double> loss_sum;
  std::vector<int64_t> loss_count;
};

// Shared state for one training run.
struct TrainContext {
  const EmbeddingHyperparams &hp;
  EmbeddingTable &table;
  std::vector<double> keep;
  NegativeSampler sampler;
  int64_t total_work = 0;
  std::atomic<int64_t> processed{0};
};

float CurrentLr(const TrainContext &ctx, int64_t processed) {
  if (ctx.hp.lr_decay == LrDecay::kNone) return ctx.hp.learning_rate;
  double progress =
      static_cast<double>(processed) / static_cast<double>(ctx.total_work + 1);
  double lr = ctx.hp.learning_rate -
              (ctx.hp.learning_rate - ctx.hp.min_learning_rate) * progress;
  return static_cast<float>(std::max(lr, ctx.hp.min_learning_rate));
}

// Per-thread scratch for the hogwild path: rows are loaded with relaxed
// atomic reads, updated locally and stored back with relaxed atomic writes.
class SharedRows {
 public:
  explicit SharedRows(int dim) : dim_(dim) {}

  void Load(EmbeddingTable &table, int32_t center,
            std::span<const int32_t> targets) {
    center_index_ = center;
    center_.resize(dim_);
    LoadRow(table.input(center), center_);
    unique_.clear();
    pointers_.clear();
    buffers_.resize(targets.size() * dim_);
    for (int32_t id : targets) {
      std::size_t slot = 0;
      while (slot < unique_.size() && unique_[slot] != id) ++slot;
      if (slot == unique_.size()) {
        unique_.push_back(id);
        LoadRow(table.output(id),
                std::span<float>(buffers_.data() + slot * dim_, dim_));
      }
      pointers_.push_back(buffers_.data() + slot * dim_);
    }
  }

  void Store(EmbeddingTable &table) {
    StoreRow(center_, table.input(center_index_));
    for (std::size_t slot = 0; slot < unique_.size(); ++slot) {
      StoreRow(std::span<const float>(buffers_.data() + slot * dim_, dim_),
               table.output(unique_[slot]));
    }
  }

  std::span<float> center() { return center_; }
  std::span<float *const> outputs() { return pointers_; }

 private:
  static void LoadRow(std::span<float> src, std::span<float> dst) {
    for (std::size_t d = 0; d < src.size(); ++d)
      dst[d] = std::atomic_ref<float>(src[d]).load(std::memory_order_relaxed);
  }
  static void StoreRow(std::span<const float> src, std::span<float> dst) {
    for (std::size_t d = 0; d < src.size(); ++d)
      std::atomic_ref<float>(dst[d]).store(src[d], std::memory_order_relaxed);
  }

  int dim_;
  int32_t center_index_ = 0;
  std::vector<float> center_;
  std::vector<int32_t> unique_;
  std::vector<float> buffers_;
  std::vector<float *> pointers_;
};

template <bool kShared>
WorkerResult RunWorker(TrainContext &ctx, const IndexedCorpus &corpus,
                       std::size_t begin, std::size_t end, uint64_t seed) {
  const EmbeddingHyperparams &hp = ctx.hp;
  EmbeddingTable &table = ctx.table;
  std::mt19937_64 rng(seed);
  SgnsKernel<float> kernel;
  SharedRows shared(hp.dim);
  NegativeSampler sampler = ctx.sampler;
  const int32_t vocab_size = static_cast<int32_t>(table.size());

  WorkerResult result;
  result.loss_sum.assign(hp.epochs, 0.0);
  result.loss_count.assign(hp.epochs, 0);

  std::vector<int32_t> kept;
  std::vector<int32_t> targets;
  std::vector<float *> rows;
  int64_t local_processed = 0;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto &sentence = corpus[s];
      kept.clear();
      for (int32_t id : sentence) {
        if (ctx.keep[id] >= 1.0 || Uniform01(rng) < ctx.keep[id]) {
          kept.push_back(id);
        }
      }
      const auto words = static_cast<int64_t>(sentence.size());
      int64_t processed =
          kShared ? ctx.processed.fetch_add(words, std::memory_order_relaxed)
                  : local_processed;
      local_processed += words;
      const float lr = CurrentLr(ctx, processed);

      const int n = static_cast<int>(kept.size());
      for (int pos = 0; pos < n; ++pos) {
        const int radius = UniformInt(rng, 1, hp.window);
        const int32_t center = kept[pos];
        for (int c = std::max(0, pos - radius);
             c <= std::min(n - 1, pos + radius); ++c) {
          if (c == pos) continue;
          const int32_t context = kept[c];
          targets.clear();
          targets.push_back(context);
          if (vocab_size > 1) {
            for (int k = 0; k < hp.negatives; ++k) {
              int32_t neg = sampler(rng);
              for (int r = 0; r < kNegativeRedraws && neg == context; ++r)
                neg = sampler(rng);
              if (neg != context) targets.push_back(neg);
            }
          }
          float loss;
          if constexpr (kShared) {
            shared.Load(table, center, targets);
            loss = kernel.Step(shared.center(), shared.outputs(), lr);
            shared.Store(table);
          } else {
            rows.clear();
            for (int32_t id : targets) rows.push_back(table.output(id).data());
            loss = kernel.Step(table.input(center), rows, lr);
          }
          result.loss_sum[epoch] += loss;
          ++result.loss_count[epoch];
        }
      }
    }
  }
  return result;
}

}  // namespace

void EmbeddingHyperparams::Validate() const {
  auto fail = [](const std::string &what) {
    throw std::invalid_argument("invalid embedding hyperparameter: " + what);
  };
  if (dim <= 0) fail("dim must be > 0");
  if (epochs <= 0) fail("epochs must be > 0");
  if (window < 1) fail("window must be >= 1");
  if (negatives < 1) fail("negatives must be >= 1");
  if (!(subsample_threshold > 0 && subsample_threshold <= 1))
    fail("subsample threshold must lie in (0, 1]");
  if (!(learning_rate > 0)) fail("learning rate must be > 0");
  if (min_count < 1) fail("min_count must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
}

EmbeddingTable::EmbeddingTable(Vocabulary vocab, int dim, bool with_output)
    : vocab_(std::move(vocab)), dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("embedding dim must be > 0");
  input_.assign(vocab_.size() * static_cast<std::size_t>(dim), 0.0f);
  if (with_output) output_.assign(input_.size(), 0.0f);
}

std::optional<std::span<const float>> EmbeddingTable::Find(
    std::string_view word) const {
  int32_t index = vocab_.IndexOf(word);
  if (index < 0) return std::nullopt;
  return input(index);
}

bool EmbeddingTable::AllFinite() const {
  auto finite = [](float x) { return std::isfinite(x); };
  return std::all_of(input_.begin(), input_.end(), finite) &&
         std::all_of(output_.begin(), output_.end(), finite);
}

void EmbeddingTable::WriteText(std::ostream &out) const {
  out << size() << ' ' << dim_ << '\n';
  char buf[32];
  for (std::size_t i = 0; i < size(); ++i) {
    out << vocab_.word(static_cast<int32_t>(i));
    for (float x : input(static_cast<int32_t>(i))) {
      std::snprintf(buf, sizeof(buf), " %.6g", static_cast<double>(x));
      out << buf;
    }
    out << '\n';
  }
}

void EmbeddingTable::WriteTextFile(const fs::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteText(out);
}

EmbeddingTable EmbeddingTable::ReadText(std::istream &in) {
  std::size_t rows = 0;
  int dim = 0;
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty embedding file");
  std::istringstream hs(header);
  if (!(hs >> rows >> dim) || dim <= 0) {
    throw std::runtime_error("malformed embedding header: " + header);
  }
  std::vector<Vocabulary::Row> words;
  std::vector<float> values;
  values.reserve(rows * dim);
  std::string line;
  while (words.size() < rows && std::getline(in, line)) {
    std::istringstream ls(line);
    Vocabulary::Row row;
    ls >> row.word;
    for (int d = 0; d < dim; ++d) {
      float x;
      if (!(ls >> x)) {
        throw std::runtime_error("short embedding row for '" + row.word + "'");
      }
      values.push_back(x);
    }
    words.push_back(std::move(row));
  }
  if (words.size() != rows) throw std::runtime_error("truncated embedding file");
  EmbeddingTable table(Vocabulary(std::move(words), 0), dim, false);
  table.input_ = std::move(values);
  return table;
}

void EmbeddingTable::WriteBinary(std::ostream &out) const {
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  WriteLe<uint64_t>(out, size());
  WriteLe<uint64_t>(out, static_cast<uint64_t>(dim_));
  for (std::size_t i = 0; i < size(); ++i) {
    const std::string &w = vocab_.word(static_cast<int32_t>(i));
    WriteLe<uint32_t>(out, static_cast<uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
    for (float x : input(static_cast<int32_t>(i))) WriteLe<float>(out, x);
  }
}

EmbeddingTable EmbeddingTable::ReadBinary(std::istream &in) {
  char magic[sizeof(kBinaryMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a binary embedding file");
  }
  auto rows = ReadLe<uint64_t>(in);
  auto dim = static_cast<int>(ReadLe<uint64_t>(in));
  std::vector<Vocabulary::Row> words;
  std::vector<float> values;
  for (uint64_t i = 0; i < rows; ++i) {
    auto len = ReadLe<uint32_t>(in);
    Vocabulary::Row row;
    row.word.resize(len);
    in.read(row.word.data(), len);
    for (int d = 0; d < dim; ++d) values.push_back(ReadLe<float>(in));
    words.push_back(std::move(row));
  }
  EmbeddingTable table(Vocabulary(std::move(words), 0), dim, false);
  table.input_ = std::move(values);
  return table;
}

EmbeddingTable EmbeddingTable::ReadFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  char magic[sizeof(kBinaryMagic)] = {};
  in.read(magic, sizeof(magic));
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, kBinaryMagic, sizeof(magic)) == 0) {
    return ReadBinary(in);
  }
  return ReadText(in);
}

double SubsampleKeepProbability(int64_t word_freq, int64_t total_tokens,
                                double threshold) {
  double f = static_cast<double>(word_freq) / static_cast<double>(total_tokens);
  double ratio = threshold / f;
  return std::min(1.0, std::sqrt(ratio) + ratio);
}

float SgnsStep(EmbeddingTable &table, int32_t center, int32_t context,
               std::span<const int32_t> negatives, float lr) {
  thread_local SgnsKernel<float> kernel;
  std::vector<float *> rows;
  rows.reserve(negatives.size() + 1);
  rows.push_back(table.output(context).data());
  for (int32_t neg : negatives) rows.push_back(table.output(neg).data());
  return kernel.Step(table.input(center), rows, lr);
}

IndexedCorpus IndexCorpus(const std::vector<TokenizedDocument> &docs,
                          const Vocabulary &vocab) {
  IndexedCorpus corpus;
  for (const auto &doc : docs) {
    for (const auto &sentence : doc.sentences) {
      std::vector<int32_t> ids;
      ids.reserve(sentence.size());
      for (const auto &token : sentence) {
        int32_t id = vocab.IndexOf(VocabularyKey(token.surface));
        if (id >= 0) ids.push_back(id);
      }
      if (!ids.empty()) corpus.push_back(std::move(ids));
    }
  }
  return corpus;
}

NegativeSampler::NegativeSampler(const Vocabulary &vocab, double power) {
  std::vector<double> weights;
  weights.reserve(vocab.size());
  double total = 0;
  for (const auto &row : vocab.rows()) {
    double w = std::pow(static_cast<double>(std::max<int64_t>(row.count, 1)),
                        power);
    weights.push_back(w);
    total += w;
  }
  probabilities_.reserve(weights.size());
  for (double w : weights) probabilities_.push_back(w / total);
  dist_ = std::discrete_distribution<int32_t>(weights.begin(), weights.end());
}

EmbeddingTable TrainEmbeddings(const IndexedCorpus &corpus,
                               const Vocabulary &vocab,
                               const EmbeddingHyperparams &hp,
                               TrainingReport *report) {
  hp.Validate();
  if (vocab.empty()) throw std::invalid_argument("empty vocabulary");
  int64_t train_words = 0;
  const auto vocab_size = static_cast<int32_t>(vocab.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (std::size_t t = 0; t < corpus[s].size(); ++t) {
      int32_t id = corpus[s][t];
      if (id < 0 || id >= vocab_size) {
        throw std::out_of_range("token index " + std::to_string(id) +
                                " at sentence " + std::to_string(s) +
                                ", position " + std::to_string(t) +
                                " is outside the vocabulary of size " +
                                std::to_string(vocab_size));
      }
    }
    train_words += static_cast<int64_t>(corpus[s].size());
  }
  if (train_words == 0) throw std::invalid_argument("empty corpus");

  EmbeddingTable table(vocab, hp.dim);
  std::mt19937_64 init_rng(hp.seed);
  for (float &x : table.input_matrix()) {
    x = static_cast<float>((Uniform01(init_rng) - 0.5) / hp.dim);
  }

  TrainContext ctx{hp, table, {}, NegativeSampler(vocab), 0, {}};
  int64_t total_tokens = vocab.total_tokens() > 0 ? vocab.total_tokens() : train_words;
  ctx.keep.reserve(vocab.size());
  for (const auto &row : vocab.rows()) {
    ctx.keep.push_back(row.count > 0 ? SubsampleKeepProbability(
                                           std::min(row.count, total_tokens),
                                           total_tokens, hp.subsample_threshold)
                                     : 1.0);
  }
  ctx.total_work = train_words * hp.epochs;

  std::vector<WorkerResult> results;
  if (hp.workers == 1) {
    results.push_back(
        RunWorker<false>(ctx, corpus, 0, corpus.size(), hp.seed ^ 0x5eed));
  } else {
    results.resize(hp.workers);
    std::vector<std::thread> pool;
    const std::size_t n = corpus.size();
    for (int w = 0; w < hp.workers; ++w) {
      std::size_t begin = n * w / hp.workers;
      std::size_t end = n * (w + 1) / hp.workers;
      pool.emplace_back([&, w, begin, end] {
        results[w] = RunWorker<true>(ctx, corpus, begin, end,
                                     hp.seed ^ (0x5eed + 0x9e3779b9ULL * (w + 1)));
      });
    }
    for (auto &t : pool) t.join();
  }

  if (report) {
    report->epoch_mean_loss.assign(hp.epochs, 0.0);
    report->updates = 0;
    for (int e = 0; e < hp.epochs; ++e) {
      double sum = 0;
      int64_t count = 0;
      for (const auto &r : results) {
        sum += r.loss_sum[e];
        count += r.loss_count[e];
      }
      report->epoch_mean_loss[e] = count ? sum / count : 0.0;
      report->updates += count;
    }
  }
  if (!table.AllFinite()) {
    spdlog::error("embedding training produced non-finite values");
    throw std::runtime_error("embedding training diverged");
  }
  return table;
}

double CosineSimilarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("vectors differ in dimension");
  }
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += double(u[i]) * v[i];
    nu += double(u[i]) * u[i];
    nv += double(v[i]) * v[i];
  }
  if (nu == 0 || nv == 0) throw std::invalid_argument("degenerate vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::vector<Neighbor> NearestNeighbors(
    const EmbeddingTable &table, std::span<const float> query, int k,
    const std::unordered_set<std::string> &exclude) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (static_cast<int>(query.size()) != table.dim()) {
    throw std::invalid_argument("query dimension does not match the table");
  }
  double query_norm = 0;
  for (float x : query) query_norm += double(x) * x;
  if (query_norm == 0) throw std::invalid_argument("degenerate vector");
  query_norm = std::sqrt(query_norm);

  struct Candidate {
    double similarity;
    int32_t row;
  };
  const Vocabulary &vocab = table.vocab();
  // With `better` as the ordering, the heap top is the worst kept candidate.
  auto better = [&](const Candidate &a, const Candidate &b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return vocab.word(a.row) < vocab.word(b.row);
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(better)> heap(
      better);

  for (int32_t row = 0; row < static_cast<int32_t>(table.size()); ++row) {
    if (!exclude.empty() && exclude.count(vocab.word(row))) continue;
    auto v = table.input(row);
    double dot = 0, norm = 0;
    for (std::size_t d = 0; d < v.size(); ++d) {
      dot += double(query[d]) * v[d];
      norm += double(v[d]) * v[d];
    }
    if (norm == 0) continue;
    double sim = std::clamp(dot / (query_norm * std::sqrt(norm)), -1.0, 1.0);
    Candidate c{sim, row};
    if (static_cast<int>(heap.size()) < k) {
      heap.push(c);
    } else if (better(c, heap.top())) {
      heap.pop();
      heap.push(c);
    }
  }

  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    out[i] = {vocab.word(heap.top().row), heap.top().similarity};
    heap.pop();
  }
  return out;
}

}  // namespace melt
