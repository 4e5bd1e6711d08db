#ifndef MELT_FORMULA_H_
#define MELT_FORMULA_H_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace melt {

// Exact positive rational used for stoichiometric counts. Decimal counts such
// as the 0.5 in "CuSO4·0.5H2O" are held exactly.
class Rational {
 public:
  Rational() = default;
  Rational(int64_t num, int64_t den = 1);

  int64_t num() const { return num_; }
  int64_t den() const { return den_; }
  double ToDouble() const { return static_cast<double>(num_) / den_; }

  // Exact decimal form ("2", "0.5", "1.25"). Throws std::domain_error if the
  // denominator has prime factors other than 2 and 5.
  std::string ToDecimal() const;

  Rational operator+(const Rational &other) const;
  Rational operator*(const Rational &other) const;
  bool operator==(const Rational &other) const = default;
  std::strong_ordering operator<=>(const Rational &other) const;

 private:
  int64_t num_ = 0;
  int64_t den_ = 1;
};

struct FormulaComposition {
  // Element symbol -> total count over the whole formula (hydrate parts
  // included).
  std::map<std::string, Rational> elements;
  std::string surface;

  // Hill-order serialization: C then H first when carbon is present, the
  // rest alphabetical. Counts of 1 are omitted.
  std::string Canonical() const;
};

bool IsElementSymbol(std::string_view symbol);
int ElementCount();

// Parses a stoichiometric formula:
//
//   Formula := Part (HydrateDot Part)*
//   Part    := Count? Unit+          (leading Count only after a dot)
//   Unit    := Element Count? | "(" Unit+ ")" Count?
//   Element := [A-Z][a-z]?           (must be a real element symbol)
//   Count   := [0-9]+ ("." [0-9]+)?  (must be > 0)
//
// HydrateDot is U+00B7, U+22C5 or U+2022. Bare single letters and the short
// English-word collisions ("In", "As", "At", "I", "No", "He") are rejected
// unless they carry a digit or a second element.
std::optional<FormulaComposition> ParseFormula(std::string_view token);

inline bool IsFormula(std::string_view token) {
  return ParseFormula(token).has_value();
}

}  // namespace melt

#endif  // MELT_FORMULA_H_
