#include "melt/text.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "melt/formula.h"

namespace melt {
namespace {

// Compared lowercased against the word that carries the terminator.
constexpr std::array<std::string_view, 22> kAbbreviations = {
    "al.",  "fig.",  "figs.",   "e.g.", "i.e.", "vs.",  "eq.",  "eqs.",
    "ref.", "refs.", "cf.",     "ca.",  "no.",  "nos.", "tab.", "approx.",
    "dr.",  "prof.", "resp.",   "et.",  "vol.", "sec."};

constexpr std::string_view kLeadingPunct = "([{\"'";
constexpr std::string_view kTrailingPunct = ".,;:!?)]}\"'";
constexpr std::string_view kClosers = ")]}\"'";

bool IsAbbreviation(std::string_view word) {
  std::string lower = ToLower(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) !=
         kAbbreviations.end();
}

bool IsAsciiSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Decodes the code point at `pos`; returns U_SENTINEL (<0) on bad input.
UChar32 CodePointAt(std::string_view text, std::size_t pos) {
  if (pos >= text.size()) return U_SENTINEL;
  int32_t i = static_cast<int32_t>(pos);
  UChar32 c;
  U8_NEXT(reinterpret_cast<const uint8_t *>(text.data()), i,
          static_cast<int32_t>(text.size()), c);
  return c;
}

}  // namespace

bool IsValidUtf8(std::string_view bytes) {
  const auto *data = reinterpret_cast<const uint8_t *>(bytes.data());
  int32_t length = static_cast<int32_t>(bytes.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(data, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

std::string NormalizeText(std::string_view raw) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2 *nfkc = icu::Normalizer2::getNFKCInstance(status);
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  icu::UnicodeString normalized = nfkc->normalize(source, status);
  if (U_FAILURE(status)) normalized = source;

  icu::UnicodeString cleaned;
  bool pending_space = false;
  for (int32_t i = 0; i < normalized.length();) {
    UChar32 c = normalized.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = true;
      continue;
    }
    int8_t type = u_charType(c);
    if (type == U_CONTROL_CHAR || type == U_FORMAT_CHAR) continue;
    // NFKC already folds the common sub/superscript digits; this catches
    // the ones without a compatibility decomposition.
    if (u_charType(c) == U_OTHER_NUMBER) {
      int32_t digit = u_charDigitValue(c);
      if (digit >= 0 && digit <= 9) c = U'0' + digit;
    }
    if (pending_space && !cleaned.isEmpty()) cleaned.append(UChar32(' '));
    pending_space = false;
    cleaned.append(c);
  }
  std::string out;
  cleaned.toUTF8String(out);
  return out;
}

std::vector<TextSpan> SentenceSpans(std::string_view text) {
  std::vector<TextSpan> spans;
  std::size_t start = 0;
  while (start < text.size() && IsAsciiSpace(text[start])) ++start;

  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;

    std::size_t end = i + 1;
    while (end < text.size() && kClosers.find(text[end]) != std::string::npos)
      ++end;
    if (end >= text.size() || !IsAsciiSpace(text[end])) continue;
    std::size_t next = end;
    while (next < text.size() && IsAsciiSpace(text[next])) ++next;
    UChar32 following = CodePointAt(text, next);
    if (following < 0 || !(u_isupper(following) || u_isdigit(following)))
      continue;

    if (c == '.') {
      std::size_t word_begin = i;
      while (word_begin > start && !IsAsciiSpace(text[word_begin - 1]))
        --word_begin;
      std::string_view word = text.substr(word_begin, i + 1 - word_begin);
      while (!word.empty() &&
             kLeadingPunct.find(word.front()) != std::string::npos)
        word.remove_prefix(1);
      if (IsAbbreviation(word)) continue;
    }

    spans.push_back({start, end});
    start = next;
    i = next - 1;
  }

  std::size_t stop = text.size();
  while (stop > start && IsAsciiSpace(text[stop - 1])) --stop;
  if (stop > start) spans.push_back({start, stop});
  return spans;
}

std::vector<std::string> SplitSentences(std::string_view text) {
  std::vector<std::string> out;
  for (const TextSpan &span : SentenceSpans(text)) {
    out.emplace_back(text.substr(span.begin, span.end - span.begin));
  }
  return out;
}

std::vector<Token> Tokenize(std::string_view sentence) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < sentence.size()) {
    while (pos < sentence.size() && IsAsciiSpace(sentence[pos])) ++pos;
    if (pos >= sentence.size()) break;
    std::size_t chunk_end = pos;
    while (chunk_end < sentence.size() && !IsAsciiSpace(sentence[chunk_end]))
      ++chunk_end;

    std::size_t begin = pos;
    std::size_t end = chunk_end;
    std::vector<Token> trailing;
    while (end - begin > 1) {
      std::string_view core = sentence.substr(begin, end - begin);
      if (IsFormula(core) || IsAbbreviation(core)) break;
      if (kLeadingPunct.find(core.front()) != std::string::npos) {
        tokens.push_back({std::string(1, core.front()), begin, begin + 1});
        ++begin;
      } else if (kTrailingPunct.find(core.back()) != std::string::npos) {
        trailing.push_back({std::string(1, core.back()), end - 1, end});
        --end;
      } else {
        break;
      }
    }
    tokens.push_back(
        {std::string(sentence.substr(begin, end - begin)), begin, end});
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
    pos = chunk_end;
  }
  return tokens;
}

std::string ToLower(std::string_view s) {
  bool ascii = std::all_of(s.begin(), s.end(), [](char c) {
    return static_cast<unsigned char>(c) < 0x80;
  });
  if (ascii) {
    std::string out(s);
    for (char &c : out) c = static_cast<char>(std::tolower(c));
    return out;
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

bool IsPunctuation(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c));
  });
}

}  // namespace melt
