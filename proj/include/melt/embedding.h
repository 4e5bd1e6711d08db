#ifndef MELT_EMBEDDING_H_
#define MELT_EMBEDDING_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "melt/corpus.h"

namespace melt {

enum class LrDecay { kLinear, kNone };

struct EmbeddingHyperparams {
  int dim = 200;
  int epochs = 30;
  double learning_rate = 0.01;
  int window = 8;
  double subsample_threshold = 1e-4;
  int negatives = 15;
  int min_count = 5;
  uint64_t seed = 1;
  LrDecay lr_decay = LrDecay::kLinear;
  double min_learning_rate = 1e-4;
  // 1 selects the bit-deterministic single-worker trainer.
  int workers = 1;

  // Throws std::invalid_argument when a field is out of range.
  void Validate() const;
};

// Word vectors (input) plus the training-side context vectors (output).
// Tables loaded from disk carry input vectors only.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Vocabulary vocab, int dim, bool with_output = true);

  const Vocabulary &vocab() const { return vocab_; }
  int dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }
  bool has_output() const { return !output_.empty(); }

  std::span<float> input(int32_t row) {
    return {input_.data() + static_cast<std::size_t>(row) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  std::span<const float> input(int32_t row) const {
    return {input_.data() + static_cast<std::size_t>(row) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  std::span<float> output(int32_t row) {
    return {output_.data() + static_cast<std::size_t>(row) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  std::span<const float> output(int32_t row) const {
    return {output_.data() + static_cast<std::size_t>(row) * dim_,
            static_cast<std::size_t>(dim_)};
  }

  // Input vector e(w) of `word`, if it is in the vocabulary.
  std::optional<std::span<const float>> Find(std::string_view word) const;

  std::vector<float> &input_matrix() { return input_; }
  const std::vector<float> &input_matrix() const { return input_; }
  std::vector<float> &output_matrix() { return output_; }

  bool AllFinite() const;

  // Text word2vec format: "<vocab_size> <dim>" then "word v1 ... vdim" with
  // six significant digits.
  void WriteText(std::ostream &out) const;
  void WriteTextFile(const std::filesystem::path &path) const;
  static EmbeddingTable ReadText(std::istream &in);

  // Binary layout, all little-endian:
  //   "MELTEMB1" | u64 vocab_size | u64 dim |
  //   vocab_size x (u32 byte_len | word bytes | dim x f32)
  void WriteBinary(std::ostream &out) const;
  static EmbeddingTable ReadBinary(std::istream &in);

  // Dispatches on the magic bytes.
  static EmbeddingTable ReadFile(const std::filesystem::path &path);

 private:
  Vocabulary vocab_;
  int dim_ = 0;
  std::vector<float> input_;
  std::vector<float> output_;
};

// Keep probability for one occurrence of a word with relative frequency
// f = word_freq / total_tokens: min(1, sqrt(t / f) + t / f).
double SubsampleKeepProbability(int64_t word_freq, int64_t total_tokens,
                                double threshold);

inline double LogSigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// One skip-gram negative-sampling update. outputs[0] is the context row
// (label 1); the remaining rows are negatives (label 0). All gradients are
// formed from the pre-update values, then applied with step `lr`:
//
//   loss = -log s(u_ctx . v) - sum_neg log s(-u_neg . v)
//
// Returns the pre-update loss. Rows that alias each other receive the sum
// of their gradients.
template <class Real>
class SgnsKernel {
 public:
  Real Step(std::span<Real> center, std::span<Real *const> outputs, Real lr) {
    const std::size_t dim = center.size();
    grads_.assign(outputs.size(), Real(0));
    center_grad_.assign(dim, Real(0));
    double loss = 0;
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      double dot = 0;
      for (std::size_t d = 0; d < dim; ++d)
        dot += double(outputs[j][d]) * center[d];
      const double label = j == 0 ? 1.0 : 0.0;
      loss -= j == 0 ? LogSigmoid(dot) : LogSigmoid(-dot);
      grads_[j] = static_cast<Real>(label - Sigmoid(dot));
    }
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      for (std::size_t d = 0; d < dim; ++d)
        center_grad_[d] += grads_[j] * outputs[j][d];
    }
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      const Real g = lr * grads_[j];
      for (std::size_t d = 0; d < dim; ++d) outputs[j][d] += g * center[d];
    }
    for (std::size_t d = 0; d < dim; ++d) center[d] += lr * center_grad_[d];
    return static_cast<Real>(loss);
  }

 private:
  std::vector<Real> grads_;
  std::vector<Real> center_grad_;
};

// Table-level update: v = input(center), u = output(context / negatives).
// Negatives must not contain `context`.
float SgnsStep(EmbeddingTable &table, int32_t center, int32_t context,
               std::span<const int32_t> negatives, float lr);

// Sentences as vocabulary indices.
using IndexedCorpus = std::vector<std::vector<int32_t>>;

// Maps tokens through VocabularyKey; out-of-vocabulary tokens are dropped.
IndexedCorpus IndexCorpus(const std::vector<TokenizedDocument> &docs,
                          const Vocabulary &vocab);

struct TrainingReport {
  std::vector<double> epoch_mean_loss;
  int64_t updates = 0;
};

// Skip-gram with negative sampling. Per center token the window radius is
// drawn uniformly from [1, window]; negatives come from the unigram^(3/4)
// distribution; each occurrence is kept with SubsampleKeepProbability.
// workers == 1 is bit-deterministic for a fixed seed. Throws on an empty
// corpus or an index outside the vocabulary.
EmbeddingTable TrainEmbeddings(const IndexedCorpus &corpus,
                               const Vocabulary &vocab,
                               const EmbeddingHyperparams &hp,
                               TrainingReport *report = nullptr);

// Unigram^(3/4) sampler over vocabulary counts.
class NegativeSampler {
 public:
  explicit NegativeSampler(const Vocabulary &vocab, double power = 0.75);
  template <class Rng>
  int32_t operator()(Rng &rng) {
    return static_cast<int32_t>(dist_(rng));
  }
  const std::vector<double> &probabilities() const { return probabilities_; }

 private:
  std::discrete_distribution<int32_t> dist_;
  std::vector<double> probabilities_;
};

// u.v / (|u| |v|). Throws std::invalid_argument on a zero-norm input
// ("degenerate vector") or mismatched dimensions.
double CosineSimilarity(std::span<const float> u, std::span<const float> v);

struct Neighbor {
  std::string word;
  double similarity = 0;

  bool operator==(const Neighbor &other) const = default;
};

// The k vocabulary words most cosine-similar to `query`, skipping words in
// `exclude` and zero-norm rows. Sorted by similarity descending, then word
// ascending. Fewer than k results when the eligible vocabulary is smaller.
std::vector<Neighbor> NearestNeighbors(
    const EmbeddingTable &table, std::span<const float> query, int k,
    const std::unordered_set<std::string> &exclude = {});

}  // namespace melt

#endif  // MELT_EMBEDDING_H_
