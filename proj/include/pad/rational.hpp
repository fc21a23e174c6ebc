#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pad {

// Exact rational, kept in lowest terms with positive denominator. Grid points
// like 1/8 stay exact and filenames derived from them stay stable.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1);

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool operator<(const Rational& o) const;

  Rational operator-(const Rational& o) const;

  // "0", "1", "5/8", ...
  std::string to_string() const;

  // Table-style rendering over eighths: 5/8 -> "5/8", 1/2 -> "4/8",
  // 0 -> "0/8", 1 -> "8/8". Falls back to to_string() off the grid.
  std::string to_eighths() const;

  // Filename-safe form "num_den", e.g. "5_8", "0_1".
  std::string file_tag() const;

  // Accepts "a/b", integers, and plain decimals ("0.625"). Throws
  // ValidationError on anything else.
  static Rational parse(const std::string& text);
};

// The paper's strength grid: 0, 1/8, ..., 7/8, 1.
std::vector<Rational> lambda_grid();

}  // namespace pad
