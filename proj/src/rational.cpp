#include "pad/rational.hpp"

#include <cstdlib>
#include <numeric>

#include "pad/error.hpp"

namespace pad {

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (den == 0) throw ValidationError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

bool Rational::operator<(const Rational& o) const {
  return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
}

Rational Rational::operator-(const Rational& o) const {
  return Rational(num * o.den - o.num * den, den * o.den);
}

std::string Rational::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

std::string Rational::to_eighths() const {
  if (den != 0 && 8 % den == 0) {
    return std::to_string(num * (8 / den)) + "/8";
  }
  return to_string();
}

std::string Rational::file_tag() const {
  return std::to_string(num) + "_" + std::to_string(den);
}

Rational Rational::parse(const std::string& text) {
  if (text.empty()) throw ValidationError("empty rational");
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      const std::string a = text.substr(0, slash);
      const std::string b = text.substr(slash + 1);
      std::size_t pa = 0, pb = 0;
      const std::int64_t n = std::stoll(a, &pa);
      const std::int64_t d = std::stoll(b, &pb);
      if (pa != a.size() || pb != b.size()) throw ValidationError("");
      return Rational(n, d);
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) {
      std::size_t p = 0;
      const std::int64_t n = std::stoll(text, &p);
      if (p != text.size()) throw ValidationError("");
      return Rational(n, 1);
    }
    // decimal: digits after the dot give a power-of-ten denominator
    const std::string frac = text.substr(dot + 1);
    const std::string whole = text.substr(0, dot);
    if (frac.empty() || frac.size() > 15) throw ValidationError("");
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    std::size_t pw = 0, pf = 0;
    bool neg = !whole.empty() && whole[0] == '-';
    const std::string wnum = (whole.empty() || whole == "-") ? "0" : whole;
    std::int64_t w = std::stoll(wnum, &pw);
    const std::int64_t f = std::stoll(frac, &pf);
    if (pw != wnum.size() || pf != frac.size() || f < 0) throw ValidationError("");
    if (w < 0) w = -w;
    std::int64_t n = w * den + f;
    if (neg) n = -n;
    return Rational(n, den);
  } catch (const std::exception&) {
    throw ValidationError("cannot parse rational \"" + text + "\"");
  }
}

std::vector<Rational> lambda_grid() {
  std::vector<Rational> grid;
  grid.reserve(9);
  for (int k = 0; k <= 8; ++k) grid.emplace_back(k, 8);
  return grid;
}

}  // namespace pad
