#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pad/error.hpp"
#include "pad/rational.hpp"

using namespace pad;

TEST_CASE("rationals reduce to lowest terms with positive denominator") {
  CHECK(Rational(2, 8) == Rational(1, 4));
  CHECK(Rational(4, 8) == Rational(1, 2));
  CHECK(Rational(0, 5) == Rational(0, 1));
  CHECK(Rational(-2, -8) == Rational(1, 4));
  CHECK(Rational(2, -8).num == -1);
  CHECK(Rational(2, -8).den == 4);
  CHECK_THROWS_AS(Rational(1, 0), ValidationError);
}

TEST_CASE("rational ordering and subtraction") {
  CHECK(Rational(1, 8) < Rational(1, 4));
  CHECK_FALSE(Rational(1, 2) < Rational(1, 2));
  CHECK(Rational(5, 8) - Rational(1, 2) == Rational(1, 8));
  CHECK(Rational(1, 1) - Rational(1, 1) == Rational(0, 1));
  CHECK(Rational(3, 8).value() == 0.375);
}

TEST_CASE("grid enumerates the nine eighth steps") {
  const auto grid = lambda_grid();
  REQUIRE(grid.size() == 9);
  CHECK(grid.front() == Rational(0, 1));
  CHECK(grid.back() == Rational(1, 1));
  CHECK(grid[5] == Rational(5, 8));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] - grid[i - 1] == Rational(1, 8));
  }
}

TEST_CASE("string renderings") {
  CHECK(Rational(0, 1).to_string() == "0");
  CHECK(Rational(1, 1).to_string() == "1");
  CHECK(Rational(5, 8).to_string() == "5/8");
  CHECK(Rational(4, 8).to_string() == "1/2");

  CHECK(Rational(0, 1).to_eighths() == "0/8");
  CHECK(Rational(1, 1).to_eighths() == "8/8");
  CHECK(Rational(5, 8).to_eighths() == "5/8");
  CHECK(Rational(1, 2).to_eighths() == "4/8");
  CHECK(Rational(3, 4).to_eighths() == "6/8");

  CHECK(Rational(0, 1).file_tag() == "0_1");
  CHECK(Rational(5, 8).file_tag() == "5_8");
  CHECK(Rational(2, 8).file_tag() == "1_4");
}

TEST_CASE("parsing accepts fractions, integers and decimals") {
  CHECK(Rational::parse("5/8") == Rational(5, 8));
  CHECK(Rational::parse("2/8") == Rational(1, 4));
  CHECK(Rational::parse("1") == Rational(1, 1));
  CHECK(Rational::parse("0") == Rational(0, 1));
  CHECK(Rational::parse("0.625") == Rational(5, 8));
  CHECK(Rational::parse("0.5") == Rational(1, 2));
  CHECK(Rational::parse("1.0") == Rational(1, 1));

  CHECK_THROWS_AS(Rational::parse(""), ValidationError);
  CHECK_THROWS_AS(Rational::parse("abc"), ValidationError);
  CHECK_THROWS_AS(Rational::parse("1/"), ValidationError);
  CHECK_THROWS_AS(Rational::parse("/8"), ValidationError);
  CHECK_THROWS_AS(Rational::parse("1/0"), ValidationError);
  CHECK_THROWS_AS(Rational::parse("0.5x"), ValidationError);
}
