#pragma once

// Exact rational convex-polygon clipping.
//
// The image of the unit square under a positive unimodular matrix is a
// parallelogram of area one; its overlap area with each integer tile is the
// probability of the corresponding tile jump.  Everything here is computed
// in exact rational arithmetic, so the per-matrix jump table sums to 1 with
// no tolerance.

#include <cstdint>
#include <utility>
#include <vector>

#include "qwalk/bigrat.hpp"
#include "qwalk/errors.hpp"

namespace qwalk {

struct Vec2Q {
    Rational x;
    Rational y;
    bool operator==(const Vec2Q&) const = default;
};

// Convex polygon, vertices in counter-clockwise order, no duplicate
// consecutive vertices.  Fewer than 3 vertices means empty/degenerate.
struct RationalPolygon {
    std::vector<Vec2Q> vertices;

    bool empty() const { return vertices.size() < 3; }
};

// Shoelace area (nonnegative for CCW input; absolute value taken so that
// degenerate orderings still report a size).
inline Rational area(const RationalPolygon& poly) {
    if (poly.vertices.size() < 3) return Rational(0);
    Rational twice(0);
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2Q& p = v[i];
        const Vec2Q& q = v[(i + 1) % v.size()];
        twice += p.x * q.y - q.x * p.y;
    }
    if (twice < 0) twice = -twice;
    return twice / 2;
}

// Image of the unit square under M: vertices M(0,0), M(1,0), M(1,1), M(0,1),
// counter-clockwise because det M = 1 > 0.
inline RationalPolygon image_parallelogram(const Matrix2& M) {
    if (M.det() != 1) throw InvalidInput("image_parallelogram: matrix must have determinant 1");
    if (!M.positive_entries())
        throw InvalidInput("image_parallelogram: matrix entries must be positive");
    RationalPolygon poly;
    poly.vertices = {
        {Rational(0), Rational(0)},
        {Rational(M.a), Rational(M.c)},
        {Rational(M.a + M.b), Rational(M.c + M.d)},
        {Rational(M.b), Rational(M.d)},
    };
    return poly;
}

namespace detail {

// Sutherland-Hodgman step: keep the part of `poly` with coord <= bound
// (side = +1) or coord >= bound (side = -1), along the given axis.
inline RationalPolygon clip_halfplane(const RationalPolygon& poly, int axis, const Rational& bound,
                                      int side) {
    const auto& v = poly.vertices;
    RationalPolygon out;
    if (v.empty()) return out;
    auto coord = [axis](const Vec2Q& p) -> const Rational& { return axis == 0 ? p.x : p.y; };
    auto inside = [&](const Vec2Q& p) {
        return side > 0 ? coord(p) <= bound : coord(p) >= bound;
    };
    auto emit = [&out](Vec2Q p) {
        if (out.vertices.empty() || !(out.vertices.back() == p)) out.vertices.push_back(std::move(p));
    };
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2Q& cur = v[i];
        const Vec2Q& nxt = v[(i + 1) % v.size()];
        const bool cur_in = inside(cur);
        const bool nxt_in = inside(nxt);
        if (cur_in) emit(cur);
        if (cur_in != nxt_in) {
            // Edge crosses the boundary; denominator is nonzero since the
            // two endpoints lie strictly on opposite sides or one on the line
            // (in which case the intersection equals that endpoint).
            Rational t = (bound - coord(cur)) / (coord(nxt) - coord(cur));
            emit({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
        }
    }
    if (!out.vertices.empty() && out.vertices.size() > 1 &&
        out.vertices.front() == out.vertices.back())
        out.vertices.pop_back();
    return out;
}

}  // namespace detail

// Intersection of a convex polygon with the closed tile
// [k1, k1+1] x [k2, k2+1].  Boundaries carry zero area, so the closed clip
// cannot double-count mass across adjacent tiles.
inline RationalPolygon clip_to_tile(const RationalPolygon& poly, std::int64_t k1,
                                    std::int64_t k2) {
    RationalPolygon r = detail::clip_halfplane(poly, 0, Rational(k1), -1);
    r = detail::clip_halfplane(r, 0, Rational(k1 + 1), +1);
    r = detail::clip_halfplane(r, 1, Rational(k2), -1);
    r = detail::clip_halfplane(r, 1, Rational(k2 + 1), +1);
    return r;
}

// Tile-jump probability table for one matrix: clip the image parallelogram
// against every tile in its bounding box, drop zero-area pieces.  The
// resulting probabilities sum to exactly 1 (the parallelogram has area 1).
inline std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, Rational>> jump_distribution(
    const Matrix2& M) {
    const RationalPolygon poly = image_parallelogram(M);
    std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, Rational>> table;
    Rational total(0);
    for (std::int64_t k1 = 0; k1 < M.a + M.b; ++k1) {
        for (std::int64_t k2 = 0; k2 < M.c + M.d; ++k2) {
            Rational piece = area(clip_to_tile(poly, k1, k2));
            if (piece > 0) {
                table.push_back({{k1, k2}, piece});
                total += piece;
            }
        }
    }
    if (total != 1)
        throw Error("jump_distribution: clipped areas do not partition the parallelogram");
    return table;
}

}  // namespace qwalk
