#pragma once

// The 2D hyperbolic-toral-automorphism walk.
//
// There is no Markov shortcut here (the unit-square tiling is not a Markov
// partition for these maps), so everything rests on exact deterministic
// stepping: v' = v + A_w([v]) x - x on the integer lattice of tiles, with
// x' = A x mod 1 kept as fixed-denominator big integers.  The analytic
// machinery mirrors the 1D closed forms with the tile self-overlap areas
// taking the place of 1/A.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qwalk/bigrat.hpp"
#include "qwalk/environment.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/geometry.hpp"
#include "qwalk/model1d.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/stats.hpp"

namespace qwalk {

struct Params2D {
    Matrix2 A0{2, 1, 1, 1};
    Matrix2 A1{3, 1, 2, 1};
    Rational p0 = Rational(1, 2);

    void validate() const {
        for (const Matrix2* m : {&A0, &A1}) {
            if (m->det() != 1) throw InvalidInput("Params2D: matrices must have determinant 1");
            if (!m->positive_entries())
                throw InvalidInput("Params2D: matrix entries must be positive");
        }
        if (p0 <= 0 || p0 >= 1) throw InvalidInput("Params2D: p0 must lie strictly in (0,1)");
    }

    const Matrix2& matrix(int label) const { return label == 0 ? A0 : A1; }
    std::int64_t max_row_sum() const { return std::max(A0.max_row_sum(), A1.max_row_sum()); }
};

struct WalkState2D {
    std::array<std::int64_t, 2> V{0, 0};
    ExactPoint x;
    std::uint64_t step_count = 0;
};

struct StepResult2D {
    WalkState2D state;
    bool boundary_hit = false;  // some coordinate of x' landed exactly on 0
};

// Per-axis extent that guarantees every n-step path fits: each step moves
// tile coordinate i by less than the max row sum of the matrices.
inline std::uint64_t required_extent_2d(const Params2D& params, std::uint64_t n) {
    return n * static_cast<std::uint64_t>(params.max_row_sum()) + 1;
}

inline StepResult2D step_deterministic_2d(const Environment& env, const Params2D& params,
                                          const WalkState2D& state) {
    if (state.x.dim() != 2) throw InvalidInput("step_deterministic_2d: state must be 2D");
    const int label = env.label_at(state.V[0], state.V[1]);
    auto [jump, frac] = affine_step(params.matrix(label), state.x);
    WalkState2D next;
    next.V = {state.V[0] + jump[0], state.V[1] + jump[1]};
    next.x = std::move(frac);
    next.step_count = state.step_count + 1;
    const bool boundary = next.x.num[0] == 0 || next.x.num[1] == 0;
    return {std::move(next), boundary};
}

// Closed-form quantities for the 2D walk.
struct Analytic2D {
    std::array<std::array<Rational, 2>, 2> alpha_star;
    std::array<Rational, 2> self_overlap;  // s_0, s_1
    Rational p;
    std::array<Rational, 2> D0;
    std::array<Rational, 2> D1;
    std::array<Rational, 2> D;
};

// alpha*_ij with the self-overlap s_i = jump_distribution(A_i) mass at
// offset (0,0) replacing the 1D stay probability 1/A_i.
inline std::pair<std::array<std::array<Rational, 2>, 2>, std::array<Rational, 2>>
analytic_alpha_star_2d(const Params2D& params) {
    params.validate();
    std::array<Rational, 2> s;
    for (int i = 0; i < 2; ++i) {
        const auto table = jump_distribution(params.matrix(i));
        s[i] = 0;
        for (const auto& [offset, prob] : table)
            if (offset.first == 0 && offset.second == 0) s[i] = prob;
    }
    const std::array<Rational, 2> pj{params.p0, Rational(1) - params.p0};
    std::array<std::array<Rational, 2>, 2> alpha;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            alpha[i][j] = (Rational(1) - s[i]) * pj[j];
            if (i == j) alpha[i][j] += s[i];
        }
    return {alpha, s};
}

// Left equilibrium component of a stochastic 2x2 matrix:
// p = a10 / (a01 + a10).
inline Rational equilibrium_p_2d(const std::array<std::array<Rational, 2>, 2>& alpha) {
    for (int i = 0; i < 2; ++i) {
        if (alpha[i][0] < 0 || alpha[i][1] < 0 || alpha[i][0] + alpha[i][1] != 1)
            throw InvalidInput("equilibrium_p_2d: matrix rows must be stochastic");
    }
    const Rational denom = alpha[0][1] + alpha[1][0];
    if (denom == 0) throw InvalidInput("equilibrium_p_2d: reducible matrix has no unique equilibrium");
    return alpha[1][0] / denom;
}

// Per-label one-step mean displacement D_i = (A_i - I)(1/2, 1/2)^T.
inline std::pair<std::array<Rational, 2>, std::array<Rational, 2>> drift_components_2d(
    const Params2D& params) {
    params.validate();
    auto one = [](const Matrix2& M) -> std::array<Rational, 2> {
        return {Rational(M.a - 1 + M.b, 2), Rational(M.c + M.d - 1, 2)};
    };
    return {one(params.A0), one(params.A1)};
}

// Conjectured drift D = p D0 + (1-p) D1.
inline std::array<Rational, 2> drift_2d(const Params2D& params) {
    const auto [alpha, s] = analytic_alpha_star_2d(params);
    const Rational p = equilibrium_p_2d(alpha);
    const auto [d0, d1] = drift_components_2d(params);
    return {p * d0[0] + (Rational(1) - p) * d1[0], p * d0[1] + (Rational(1) - p) * d1[1]};
}

inline Analytic2D analytic_2d(const Params2D& params) {
    Analytic2D out;
    auto [alpha, s] = analytic_alpha_star_2d(params);
    out.alpha_star = alpha;
    out.self_overlap = s;
    out.p = equilibrium_p_2d(alpha);
    auto [d0, d1] = drift_components_2d(params);
    out.D0 = d0;
    out.D1 = d1;
    for (int i = 0; i < 2; ++i) out.D[i] = out.p * d0[i] + (Rational(1) - out.p) * d1[i];
    return out;
}

namespace detail {

// a*x + b*y for u128 numerators over denominator 2^128, exact in 192 bits:
// returns the tile jump; the low 128 bits replace the numerator.
struct MulAdd192 {
    u128 lo;
    std::uint64_t hi;
};

inline MulAdd192 mul128x64(u128 v, std::uint64_t k) {
    const std::uint64_t v_lo = static_cast<std::uint64_t>(v);
    const std::uint64_t v_hi = static_cast<std::uint64_t>(v >> 64);
    const u128 t0 = static_cast<u128>(v_lo) * k;
    const u128 t1 = static_cast<u128>(v_hi) * k + (t0 >> 64);
    return {(t1 << 64) | static_cast<std::uint64_t>(t0),
            static_cast<std::uint64_t>(t1 >> 64)};
}

inline std::int64_t mul_add_step_u128(u128 x, std::uint64_t a, u128 y, std::uint64_t b,
                                      u128& frac_out) {
    const MulAdd192 p = mul128x64(x, a);
    const MulAdd192 q = mul128x64(y, b);
    const u128 lo = p.lo + q.lo;
    const std::uint64_t carry = lo < p.lo ? 1 : 0;
    frac_out = lo;
    return static_cast<std::int64_t>(p.hi + q.hi + carry);
}

}  // namespace detail

struct EnsembleOptions2D {
    unsigned threads = 1;
    std::uint64_t denominator_bits = 128;
    bool retain_samples = true;
};

// 2D ensemble runner; same reproducibility contract as run_ensemble_1d.
// Trajectories whose fractional part hits a tile boundary (measure zero for
// generic denominators) are flagged, counted as stopped, and excluded.
inline EnsembleSummary run_ensemble_2d(const Environment& env, const Params2D& params,
                                       std::uint64_t n, std::uint64_t count,
                                       std::uint64_t master_seed,
                                       const EnsembleOptions2D& opts = {}) {
    params.validate();
    if (env.dim() != 2) throw InvalidInput("run_ensemble_2d: 2D environment required");
    if (n < 1) throw InvalidInput("run_ensemble_2d: n must be >= 1");
    if (opts.denominator_bits < 2 || opts.denominator_bits > 1048576)
        throw InvalidInput("run_ensemble_2d: denominator_bits out of range [2, 1048576]");
    const std::uint64_t needed = required_extent_2d(params, n);
    if (env.extent()[0] < needed || env.extent()[1] < needed)
        throw EnvironmentExhausted("run_ensemble_2d: environment extent (" +
                                   std::to_string(env.extent()[0]) + "," +
                                   std::to_string(env.extent()[1]) + ") too small; need >= " +
                                   std::to_string(needed) + " per axis");

    EnsembleSummary summary;
    summary.model = "2d";
    summary.dim = 2;
    summary.n = n;
    summary.count = count;
    summary.master_seed = master_seed;
    summary.mode = "deterministic";
    summary.moments.dim = 2;
    summary.samples_retained = opts.retain_samples;
    const auto drift = drift_2d(params);
    summary.drift_ref = {static_cast<double>(drift[0]), static_cast<double>(drift[1])};
    if (count == 0) return summary;

    const bool fast_path = opts.denominator_bits == 128;

    auto run_one = [&](std::uint64_t t, EnsembleSummary& part) {
        rng::Stream stream(rng::substream_key(master_seed, t));
        std::array<std::int64_t, 2> V{0, 0};
        bool boundary = false;
        std::array<double, 2> frac{0.0, 0.0};

        if (fast_path) {
            detail::u128 x = detail::sample_unit_u128(stream);
            detail::u128 y = detail::sample_unit_u128(stream);
            for (std::uint64_t step = 0; step < n; ++step) {
                const int label = env.label_at(V[0], V[1]);
                const Matrix2& M = params.matrix(label);
                detail::u128 nx, ny;
                const std::int64_t j0 = detail::mul_add_step_u128(
                    x, static_cast<std::uint64_t>(M.a), y, static_cast<std::uint64_t>(M.b), nx);
                const std::int64_t j1 = detail::mul_add_step_u128(
                    x, static_cast<std::uint64_t>(M.c), y, static_cast<std::uint64_t>(M.d), ny);
                V[0] += j0;
                V[1] += j1;
                x = nx;
                y = ny;
                if (x == 0 || y == 0) {
                    boundary = true;
                    break;
                }
            }
            frac = {detail::u128_unit_to_double(x), detail::u128_unit_to_double(y)};
        } else {
            const Int den = Int(1) << static_cast<unsigned>(opts.denominator_bits);
            Int nx = detail::sample_unit_int(stream, opts.denominator_bits);
            Int ny = detail::sample_unit_int(stream, opts.denominator_bits);
            WalkState2D state;
            state.x = make_point(std::vector<Int>{std::move(nx), std::move(ny)}, den);
            for (std::uint64_t step = 0; step < n; ++step) {
                StepResult2D result = step_deterministic_2d(env, params, state);
                state = std::move(result.state);
                if (result.boundary_hit) {
                    boundary = true;
                    break;
                }
            }
            V = state.V;
            frac = {static_cast<double>(Rational(state.x.num[0], den)),
                    static_cast<double>(Rational(state.x.num[1], den))};
        }

        if (boundary) {
            ++part.stopped;
            return;
        }

        const std::array<double, 2> v_end{static_cast<double>(V[0]) + frac[0],
                                          static_cast<double>(V[1]) + frac[1]};
        const std::array<double, 2> z = scaled_fluctuation(v_end, n, summary.drift_ref);
        part.moments.add(z);
        ++part.hist2[{V[0], V[1]}];
        ++part.label_count[env.label_at(V[0], V[1])];
        if (opts.retain_samples) part.samples.push_back(z);
    };

    const std::uint64_t shards = (count + detail::kShardSize - 1) / detail::kShardSize;
    std::vector<EnsembleSummary> parts(shards);

    auto run_shard = [&](std::uint64_t s) {
        EnsembleSummary part;
        part.moments.dim = 2;
        const std::uint64_t lo = s * detail::kShardSize;
        const std::uint64_t hi = std::min(count, lo + detail::kShardSize);
        for (std::uint64_t t = lo; t < hi; ++t) run_one(t, part);
        parts[s] = std::move(part);
    };

    const unsigned workers =
        std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(shards)));
    if (workers == 1) {
        for (std::uint64_t s = 0; s < shards; ++s) run_shard(s);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::uint64_t s = next.fetch_add(1);
                    if (s >= shards) return;
                    try {
                        run_shard(s);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (auto& part : parts) summary.merge(std::move(part));
    return summary;
}

}  // namespace qwalk
