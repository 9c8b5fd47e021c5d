#pragma once

// Exact fixed-denominator arithmetic for positions on the circle / torus.
//
// The maps evolved here are x -> Mx mod 1 with an integer matrix M, so a
// point num/den stays on the lattice (1/den)Z^d forever: one step costs a
// handful of big-integer multiplies and the representation never grows with
// trajectory length.  All statistics are derived from these exact states;
// floating point only ever appears downstream, at reporting time.

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "qwalk/errors.hpp"

namespace qwalk {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
// High-precision float used by the optional non-exact distribution mode.
using Float50 = boost::multiprecision::cpp_bin_float_50;

// A point of [0,1)^d as d numerators over one shared positive denominator.
struct ExactPoint {
    std::vector<Int> num;
    Int den;

    std::size_t dim() const { return num.size(); }

    Rational coordinate(std::size_t i) const {
        if (i >= num.size()) throw InvalidInput("ExactPoint: coordinate index out of range");
        return Rational(num[i], den);
    }

    bool operator==(const ExactPoint& other) const = default;
};

// 2x2 integer matrix, row-major: [[a, b], [c, d]].
struct Matrix2 {
    std::int64_t a = 0, b = 0, c = 0, d = 0;

    std::int64_t det() const { return a * d - b * c; }
    bool positive_entries() const { return a > 0 && b > 0 && c > 0 && d > 0; }
    std::int64_t max_row_sum() const { return std::max(a + b, c + d); }
    bool operator==(const Matrix2& other) const = default;
};

// Validating constructor for ExactPoint: den >= 2 and 0 <= num[i] < den.
inline ExactPoint make_point(std::vector<Int> numerators, Int denominator) {
    if (denominator < 2) throw InvalidInput("make_point: denominator must be >= 2");
    if (numerators.empty()) throw InvalidInput("make_point: need at least one coordinate");
    for (const Int& n : numerators) {
        if (n < 0 || n >= denominator)
            throw InvalidInput("make_point: numerator out of [0, denominator)");
    }
    return ExactPoint{std::move(numerators), std::move(denominator)};
}

inline ExactPoint make_point(Int numerator, Int denominator) {
    std::vector<Int> v;
    v.push_back(std::move(numerator));
    return make_point(std::move(v), std::move(denominator));
}

// One affine step y = A*x on the circle, split as y = jump + frac with
// jump = floor(y) and frac in [0,1).  The denominator is preserved exactly:
// jump*den + frac_num == A*num as big integers.
inline std::pair<std::int64_t, ExactPoint> affine_step(std::int64_t A, const ExactPoint& x) {
    if (x.dim() != 1) throw InvalidInput("affine_step: 1D multiplier applied to non-1D point");
    if (A < 1) throw InvalidInput("affine_step: multiplier must be positive");
    Int y = x.num[0] * A;
    Int jump = y / x.den;
    ExactPoint frac{{y - jump * x.den}, x.den};
    return {static_cast<std::int64_t>(jump), std::move(frac)};
}

// Torus version: y = M*x componentwise over the shared denominator.
inline std::pair<std::array<std::int64_t, 2>, ExactPoint> affine_step(const Matrix2& M,
                                                                      const ExactPoint& x) {
    if (x.dim() != 2) throw InvalidInput("affine_step: 2x2 matrix applied to non-2D point");
    if (M.a < 0 || M.b < 0 || M.c < 0 || M.d < 0)
        throw InvalidInput("affine_step: matrix entries must be nonnegative");
    Int y0 = x.num[0] * M.a + x.num[1] * M.b;
    Int y1 = x.num[0] * M.c + x.num[1] * M.d;
    Int j0 = y0 / x.den;
    Int j1 = y1 / x.den;
    ExactPoint frac{{y0 - j0 * x.den, y1 - j1 * x.den}, x.den};
    return {{static_cast<std::int64_t>(j0), static_cast<std::int64_t>(j1)}, std::move(frac)};
}

namespace detail {

inline Int pow10(int digits) {
    Int r = 1;
    for (int i = 0; i < digits; ++i) r *= 10;
    return r;
}

}  // namespace detail

// Correctly rounded (round-half-even) decimal rendering of a rational with
// `digits` places after the point.  Reporting only; never fed back into the
// dynamics.
inline std::string to_decimal(const Rational& r, int digits) {
    if (digits < 1) throw InvalidInput("to_decimal: digits must be >= 1");
    Int num = boost::multiprecision::numerator(r);
    Int den = boost::multiprecision::denominator(r);
    bool negative = num < 0;
    if (negative) num = -num;

    Int scale = detail::pow10(digits);
    Int scaled = num * scale;
    Int q = scaled / den;
    Int rem = scaled - q * den;
    Int twice = rem * 2;
    if (twice > den || (twice == den && (q & 1) != 0)) ++q;

    Int int_part = q / scale;
    Int frac_part = q - int_part * scale;
    std::string frac = frac_part.str();
    frac.insert(frac.begin(), digits - static_cast<int>(frac.size()), '0');

    std::string out;
    if (negative && q != 0) out += '-';
    out += int_part.str();
    out += '.';
    out += frac;
    return out;
}

inline std::string to_decimal(const ExactPoint& x, int digits) {
    if (x.dim() != 1)
        throw InvalidInput("to_decimal: point rendering is per-coordinate; use coordinate(i)");
    return to_decimal(Rational(x.num[0], x.den), digits);
}

// Render a rational in lowest terms as "p/q" (or "p" when q == 1).
inline std::string to_fraction(const Rational& r) {
    Int num = boost::multiprecision::numerator(r);
    Int den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

// The default denominator for sampled initial conditions: 2^128 is far
// beyond any ensemble size, so sampled points behave like Lebesgue-typical
// ones while staying exactly representable.
inline Int default_denominator() { return Int(1) << 128; }

}  // namespace qwalk
