#include "melt/formula.h"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace melt {
namespace {

constexpr std::array<std::string_view, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

constexpr std::array<std::string_view, 6> kWordCollisions = {
    "In", "As", "At", "I", "No", "He"};

constexpr std::array<std::string_view, 3> kHydrateDots = {
    "\xC2\xB7", "\xE2\x8B\x85", "\xE2\x80\xA2"};

// Counts are capped so rational arithmetic stays far from int64 overflow.
constexpr int kMaxIntegerDigits = 6;
constexpr int kMaxFractionDigits = 4;
constexpr int kMaxDepth = 8;

int64_t Gcd(int64_t a, int64_t b) { return std::gcd(a, b); }

using Composition = std::map<std::string, Rational>;

void Accumulate(Composition &into, const Composition &from,
                const Rational &factor) {
  for (const auto &[symbol, count] : from) {
    auto it = into.find(symbol);
    Rational scaled = count * factor;
    if (it == into.end()) {
      into.emplace(symbol, scaled);
    } else {
      it->second = it->second + scaled;
    }
  }
}

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) {}

  std::optional<Composition> Parse() {
    Composition total;
    bool first = true;
    while (true) {
      Rational coefficient(1);
      if (!first && IsDigit(Peek())) {
        auto count = ParseCount();
        if (!count) return std::nullopt;
        coefficient = *count;
      }
      auto part = ParseUnits(0);
      if (!part || part->empty()) return std::nullopt;
      Accumulate(total, *part, coefficient);
      first = false;
      if (AtEnd()) break;
      if (!ConsumeHydrateDot()) return std::nullopt;
      if (AtEnd()) return std::nullopt;
    }
    return total;
  }

  int units_seen() const { return units_seen_; }

 private:
  static bool IsDigit(char c) { return c >= '0' && c <= '9'; }
  static bool IsUpper(char c) { return c >= 'A' && c <= 'Z'; }
  static bool IsLower(char c) { return c >= 'a' && c <= 'z'; }

  bool AtEnd() const { return pos_ >= text_.size(); }
  char Peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  bool ConsumeHydrateDot() {
    for (std::string_view dot : kHydrateDots) {
      if (text_.substr(pos_, dot.size()) == dot) {
        pos_ += dot.size();
        return true;
      }
    }
    return false;
  }

  // Parses one or more units until ')' , a hydrate dot or the end.
  std::optional<Composition> ParseUnits(int depth) {
    if (depth > kMaxDepth) return std::nullopt;
    Composition out;
    bool any = false;
    while (!AtEnd()) {
      char c = Peek();
      if (c == ')') break;
      if (c == '(') {
        ++pos_;
        auto inner = ParseUnits(depth + 1);
        if (!inner || inner->empty() || Peek() != ')') return std::nullopt;
        ++pos_;
        Rational multiplier(1);
        if (IsDigit(Peek())) {
          auto count = ParseCount();
          if (!count) return std::nullopt;
          multiplier = *count;
        }
        Accumulate(out, *inner, multiplier);
        any = true;
        continue;
      }
      if (IsUpper(c)) {
        std::string symbol;
        if (IsLower(Peek(1)) && IsElementSymbol(text_.substr(pos_, 2))) {
          symbol = std::string(text_.substr(pos_, 2));
        } else if (IsElementSymbol(text_.substr(pos_, 1))) {
          symbol = std::string(text_.substr(pos_, 1));
        } else {
          return std::nullopt;
        }
        pos_ += symbol.size();
        Rational count(1);
        if (IsDigit(Peek())) {
          auto parsed = ParseCount();
          if (!parsed) return std::nullopt;
          count = *parsed;
        }
        Accumulate(out, Composition{{symbol, Rational(1)}}, count);
        ++units_seen_;
        any = true;
        continue;
      }
      // Hydrate dot ends the part; anything else is outside the grammar.
      if (depth == 0 && IsHydrateDotAhead()) break;
      return std::nullopt;
    }
    if (!any) return std::nullopt;
    return out;
  }

  bool IsHydrateDotAhead() const {
    for (std::string_view dot : kHydrateDots) {
      if (text_.substr(pos_, dot.size()) == dot) return true;
    }
    return false;
  }

  std::optional<Rational> ParseCount() {
    int64_t integer = 0;
    int digits = 0;
    while (IsDigit(Peek())) {
      if (++digits > kMaxIntegerDigits) return std::nullopt;
      integer = integer * 10 + (Peek() - '0');
      ++pos_;
    }
    if (digits == 0) return std::nullopt;
    int64_t fraction = 0;
    int64_t scale = 1;
    if (Peek() == '.' && IsDigit(Peek(1))) {
      ++pos_;
      int fraction_digits = 0;
      while (IsDigit(Peek())) {
        if (++fraction_digits > kMaxFractionDigits) return std::nullopt;
        fraction = fraction * 10 + (Peek() - '0');
        scale *= 10;
        ++pos_;
      }
    }
    Rational value(integer * scale + fraction, scale);
    if (value.num() <= 0) return std::nullopt;
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int units_seen_ = 0;
};

bool HasDigit(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

Rational::Rational(int64_t num, int64_t den) : num_(num), den_(den) {
  if (den_ == 0) throw std::domain_error("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  int64_t g = Gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

Rational Rational::operator+(const Rational &other) const {
  int64_t g = Gcd(den_, other.den_);
  int64_t lcm = den_ / g * other.den_;
  return Rational(num_ * (lcm / den_) + other.num_ * (lcm / other.den_), lcm);
}

Rational Rational::operator*(const Rational &other) const {
  int64_t g1 = Gcd(num_ < 0 ? -num_ : num_, other.den_);
  int64_t g2 = Gcd(other.num_ < 0 ? -other.num_ : other.num_, den_);
  return Rational((num_ / g1) * (other.num_ / g2),
                  (den_ / g2) * (other.den_ / g1));
}

std::strong_ordering Rational::operator<=>(const Rational &other) const {
  __int128 lhs = static_cast<__int128>(num_) * other.den_;
  __int128 rhs = static_cast<__int128>(other.num_) * den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string Rational::ToDecimal() const {
  int64_t den = den_;
  int twos = 0, fives = 0;
  while (den % 2 == 0) { den /= 2; ++twos; }
  while (den % 5 == 0) { den /= 5; ++fives; }
  if (den != 1) throw std::domain_error("count has no finite decimal form");
  int places = std::max(twos, fives);
  int64_t scale = 1;
  for (int i = 0; i < places; ++i) scale *= 10;
  int64_t scaled = num_ * (scale / den_);
  std::string out = std::to_string(scaled / scale);
  if (places > 0) {
    std::string frac = std::to_string(scaled % scale);
    frac.insert(0, places - frac.size(), '0');
    out += "." + frac;
  }
  return out;
}

std::string FormulaComposition::Canonical() const {
  std::vector<std::string> order;
  bool has_carbon = elements.count("C") > 0;
  if (has_carbon) {
    order.push_back("C");
    if (elements.count("H")) order.push_back("H");
  }
  for (const auto &[symbol, count] : elements) {
    if (has_carbon && (symbol == "C" || symbol == "H")) continue;
    order.push_back(symbol);
  }
  std::string out;
  for (const auto &symbol : order) {
    out += symbol;
    const Rational &count = elements.at(symbol);
    if (!(count == Rational(1))) out += count.ToDecimal();
  }
  return out;
}

bool IsElementSymbol(std::string_view symbol) {
  static const std::unordered_set<std::string_view> symbols(kElements.begin(),
                                                            kElements.end());
  return symbols.count(symbol) > 0;
}

int ElementCount() { return static_cast<int>(kElements.size()); }

std::optional<FormulaComposition> ParseFormula(std::string_view token) {
  if (token.empty()) return std::nullopt;
  FormulaParser parser(token);
  auto composition = parser.Parse();
  if (!composition) return std::nullopt;

  bool digit = HasDigit(token);
  if (!digit && parser.units_seen() < 2) {
    if (token.size() == 1) return std::nullopt;
    if (std::find(kWordCollisions.begin(), kWordCollisions.end(), token) !=
        kWordCollisions.end()) {
      return std::nullopt;
    }
  }

  FormulaComposition out;
  out.elements = std::move(*composition);
  out.surface = std::string(token);
  return out;
}

}  // namespace melt
