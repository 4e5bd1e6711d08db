#ifndef MELT_CONLL_H_
#define MELT_CONLL_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "melt/corpus.h"
#include "melt/masking.h"

namespace melt {

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

struct TaggedDocument {
  std::string doc_id;
  std::vector<TaggedSentence> sentences;

  std::size_t TokenCount() const;
};

// Two-column CoNLL: token<TAB>tag (whitespace also accepted). Blank lines end
// sentences and "-DOCSTART-" lines start a new document. Documents are named
// conll-0, conll-1, ... in file order.
std::vector<TaggedDocument> ReadConll(std::istream &in);
std::vector<TaggedDocument> ReadConllFile(const std::filesystem::path &path);

// Token documents with the CoNLL tokens as surfaces. Offsets point into a
// text made by joining tokens with single spaces.
std::vector<TokenizedDocument> TokensFromConll(
    const std::vector<TaggedDocument> &docs);

bool IsEntityTag(const std::string &tag);

struct OverlapStats {
  int64_t masked = 0;
  int64_t on_entity = 0;
  double Ratio() const {
    return masked ? static_cast<double>(on_entity) / masked : 0.0;
  }
};

// Fraction of masked positions whose gold tag starts with B- or I-.
// Examples are aligned to documents by the doc id in their sequence id and
// walk each document's tokens in order. Throws std::runtime_error naming the
// first position where the example tokens and the tagged tokens disagree.
OverlapStats OverlapRatio(const std::vector<MaskedExample> &examples,
                          const std::vector<TaggedDocument> &tagged);

}  // namespace melt

#endif  // MELT_CONLL_H_
