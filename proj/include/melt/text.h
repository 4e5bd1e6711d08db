#ifndef MELT_TEXT_H_
#define MELT_TEXT_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace melt {

// A token with byte offsets into the text it was cut from. Offsets are
// half-open: text.substr(char_start, char_end - char_start) == surface.
struct Token {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool operator==(const Token &other) const = default;
};

using Sentence = std::vector<Token>;

// Byte range of a sentence within its normalized document text.
struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Returns true if `bytes` is well-formed UTF-8.
bool IsValidUtf8(std::string_view bytes);

// NFKC normalization plus the corpus cleanup rules: sub/superscript digits
// become ASCII digits, control characters are removed and every whitespace
// run collapses to a single space. Leading/trailing whitespace is trimmed.
std::string NormalizeText(std::string_view raw);

// Sentence boundaries over normalized text. A boundary follows '.', '!' or
// '?' when the next non-space character is an uppercase letter or a digit,
// unless the terminator closes a known abbreviation.
std::vector<TextSpan> SentenceSpans(std::string_view text);
std::vector<std::string> SplitSentences(std::string_view text);

// Rule-based tokenizer. Splits on spaces, then detaches leading and trailing
// punctuation. Chunks that parse as chemical formulas keep their internal
// parentheses; hyphenated names and decimal numbers stay whole.
std::vector<Token> Tokenize(std::string_view sentence);

// Lowercases a UTF-8 string (full Unicode case mapping).
std::string ToLower(std::string_view s);

// True when every byte is ASCII punctuation.
bool IsPunctuation(std::string_view s);

}  // namespace melt

#endif  // MELT_TEXT_H_
