#include <catch2/catch_amalgamated.hpp>

#include "qwalk/bigrat.hpp"
#include "qwalk/errors.hpp"

using namespace qwalk;

TEST_CASE("make_point validates and stores exact coordinates", "[bigrat]") {
    const ExactPoint p = make_point(Int(3), Int(8));
    REQUIRE(p.dim() == 1);
    REQUIRE(p.coordinate(0) == Rational(3, 8));

    REQUIRE_THROWS_AS(make_point(Int(9), Int(8)), InvalidInput);   // out of [0, den)
    REQUIRE_THROWS_AS(make_point(Int(8), Int(8)), InvalidInput);   // right endpoint excluded
    REQUIRE_THROWS_AS(make_point(Int(-1), Int(8)), InvalidInput);  // negative numerator
    REQUIRE_THROWS_AS(make_point(Int(0), Int(1)), InvalidInput);   // denominator must be >= 2

    const ExactPoint q = make_point(std::vector<Int>{Int(1), Int(5)}, Int(12));
    REQUIRE(q.dim() == 2);
    REQUIRE(q.coordinate(0) == Rational(1, 12));
    REQUIRE(q.coordinate(1) == Rational(5, 12));
}

TEST_CASE("1d affine step splits integer and fractional parts exactly", "[bigrat]") {
    // A = 2, x = 5/8: 2x = 10/8 = 1 + 2/8.
    const ExactPoint x = make_point(Int(5), Int(8));
    const auto [jump, frac] = affine_step(std::int64_t{2}, x);
    REQUIRE(jump == 1);
    REQUIRE(frac.num[0] == 2);  // denominator preserved, not reduced
    REQUIRE(frac.den == 8);
    REQUIRE(frac.coordinate(0) == Rational(1, 4));
}

TEST_CASE("1d affine step landing exactly on an integer", "[bigrat]") {
    // A = 3, x = 1/3: 3x = 1, fractional part 0.
    const ExactPoint x = make_point(Int(1), Int(3));
    const auto [jump, frac] = affine_step(std::int64_t{3}, x);
    REQUIRE(jump == 1);
    REQUIRE(frac.num[0] == 0);
}

TEST_CASE("2d affine step with the label-0 matrix", "[bigrat]") {
    // M = [[2,1],[1,1]], x = (1/2,1/2): Mx = (3/2, 1) -> jump (1,1), frac (1/2, 0).
    const Matrix2 M{2, 1, 1, 1};
    const ExactPoint x = make_point(std::vector<Int>{Int(1), Int(1)}, Int(2));
    const auto [jump, frac] = affine_step(M, x);
    REQUIRE(jump[0] == 1);
    REQUIRE(jump[1] == 1);
    REQUIRE(frac.coordinate(0) == Rational(1, 2));
    REQUIRE(frac.coordinate(1) == 0);
    REQUIRE(frac.den == 2);
}

TEST_CASE("2d affine step preserves the fixed denominator", "[bigrat]") {
    const Matrix2 M{2, 1, 1, 1};
    const ExactPoint x = make_point(std::vector<Int>{Int(4), Int(3)}, Int(12));  // (1/3, 1/4)
    const auto [jump, frac] = affine_step(M, x);
    REQUIRE(jump[0] == 0);
    REQUIRE(jump[1] == 0);
    REQUIRE(frac.den == 12);
    REQUIRE(frac.coordinate(0) == Rational(11, 12));
    REQUIRE(frac.coordinate(1) == Rational(7, 12));
}

TEST_CASE("to_decimal renders fixed-point digits with round-half-even", "[bigrat]") {
    REQUIRE(to_decimal(Rational(3, 8), 3) == "0.375");
    REQUIRE(to_decimal(Rational(1, 3), 4) == "0.3333");
    REQUIRE(to_decimal(Rational(0), 2) == "0.00");
    REQUIRE(to_decimal(Rational(-3, 8), 3) == "-0.375");
    REQUIRE(to_decimal(Rational(5, 7), 6) == "0.714286");
    // Ties go to the even digit.
    REQUIRE(to_decimal(Rational(1, 20), 1) == "0.0");   // 0.05 -> 0.0
    REQUIRE(to_decimal(Rational(3, 20), 1) == "0.2");   // 0.15 -> 0.2
    REQUIRE(to_decimal(Rational(2), 2) == "2.00");
    REQUIRE_THROWS_AS(to_decimal(Rational(1, 3), -1), InvalidInput);
}

TEST_CASE("to_fraction emits lowest terms", "[bigrat]") {
    REQUIRE(to_fraction(Rational(4, 8)) == "1/2");
    REQUIRE(to_fraction(Rational(4, 2)) == "2");
    REQUIRE(to_fraction(Rational(0)) == "0");
    REQUIRE(to_fraction(Rational(-6, 4)) == "-3/2");
}

TEST_CASE("default denominator is 2^128", "[bigrat]") {
    REQUIRE(default_denominator() == Int(1) << 128);
}

TEST_CASE("Matrix2 basics", "[bigrat]") {
    const Matrix2 A0{2, 1, 1, 1};
    const Matrix2 A1{3, 1, 2, 1};
    REQUIRE(A0.det() == 1);
    REQUIRE(A1.det() == 1);
    REQUIRE(A0.positive_entries());
    REQUIRE(A0.max_row_sum() == 3);
    REQUIRE(A1.max_row_sum() == 4);
    REQUIRE_FALSE(Matrix2{1, 0, 0, 1}.positive_entries());
}
