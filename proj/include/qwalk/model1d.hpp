#pragma once

// The 1D expanding-circle-map walk.
//
// Dynamics: v' = v + A_w([v]) x - x with x' = A_w([v]) x mod 1, i.e. the
// tile index V jumps by floor(A x) while the fractional part follows the
// expanding map.  Because x enters each tile uniformly, the tile process is
// a Markov chain with transition 1/A_w(k) onto k..k+A_w(k)-1; this module
// implements the deterministic dynamics, that chain, exact propagation of
// tile distributions, the closed-form constants (p, D, sigma^2, lambda,
// alpha*), and a schedule-independent parallel ensemble runner.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qwalk/bigrat.hpp"
#include "qwalk/environment.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/stats.hpp"

namespace qwalk {

struct Params1D {
    std::int64_t A0 = 2;
    std::int64_t A1 = 3;
    Rational p0 = Rational(1, 2);

    void validate() const {
        if (A0 < 2 || A1 < 2) throw InvalidInput("Params1D: multipliers must be >= 2");
        if (p0 <= 0 || p0 >= 1) throw InvalidInput("Params1D: p0 must lie strictly in (0,1)");
    }

    std::int64_t multiplier(int label) const { return label == 0 ? A0 : A1; }
    std::int64_t max_multiplier() const { return std::max(A0, A1); }
};

struct WalkState1D {
    std::int64_t V = 0;
    ExactPoint x;
    std::uint64_t step_count = 0;
    std::array<std::uint64_t, 2> applied{0, 0};  // # applications of map 0 / map 1
};

struct StepResult1D {
    WalkState1D state;
    bool stopped = false;  // fractional part hit 0: the walk is frozen
};

// Smallest extent that guarantees every n-step path (plus one extra step
// when the effective-transition estimate is recorded) stays inside the
// pre-allocated label field.
inline std::uint64_t required_extent_1d(const Params1D& params, std::uint64_t n,
                                        bool record_alpha = false) {
    return (n + (record_alpha ? 1 : 0)) *
               static_cast<std::uint64_t>(params.max_multiplier() - 1) +
           1;
}

// One deterministic step.  A state whose fractional part is already 0 is a
// fixed point and is returned unchanged (still flagged stopped).
inline StepResult1D step_deterministic(const Environment& env, const Params1D& params,
                                       const WalkState1D& state) {
    if (state.x.dim() != 1) throw InvalidInput("step_deterministic: state must be 1D");
    if (state.x.num[0] == 0) return {state, true};
    const int label = env.label_at(state.V);
    auto [jump, frac] = affine_step(params.multiplier(label), state.x);
    WalkState1D next;
    next.V = state.V + jump;
    next.x = std::move(frac);
    next.step_count = state.step_count + 1;
    next.applied = state.applied;
    ++next.applied[label];
    const bool stopped = next.x.num[0] == 0;
    return {std::move(next), stopped};
}

// One step of the equivalent tile chain: V -> V + U{0..A-1}.
inline std::int64_t step_markov(const Environment& env, const Params1D& params, std::int64_t V,
                                rng::Stream& stream) {
    const int label = env.label_at(V);
    return V + static_cast<std::int64_t>(
                   stream.bounded(static_cast<std::uint64_t>(params.multiplier(label))));
}

// Row k of the transition matrix: probability 1/A_w(k) on k..k+A_w(k)-1.
inline std::vector<std::pair<std::int64_t, Rational>> gamma_row(const Environment& env,
                                                                const Params1D& params,
                                                                std::int64_t k) {
    const int label = env.label_at(k);
    const std::int64_t A = params.multiplier(label);
    std::vector<std::pair<std::int64_t, Rational>> row;
    row.reserve(static_cast<std::size_t>(A));
    for (std::int64_t l = 0; l < A; ++l) row.emplace_back(k + l, Rational(1, A));
    return row;
}

// Tile distribution, either exact (integer numerators over one shared
// denominator; weights sum to exactly 1) or high-precision float (flagged).
struct DistributionVector {
    std::int64_t offset = 0;
    bool exact = true;
    std::vector<Int> num;        // exact mode
    Int den = 1;                 // exact mode
    std::vector<Float50> fw;     // float mode

    static DistributionVector delta(std::int64_t tile) {
        DistributionVector d;
        d.offset = tile;
        d.num = {Int(1)};
        d.den = 1;
        return d;
    }

    std::size_t size() const { return exact ? num.size() : fw.size(); }

    Rational weight(std::size_t i) const {
        if (!exact) throw InvalidInput("DistributionVector: exact weights requested in float mode");
        return Rational(num.at(i), den);
    }
};

enum class DistMode { exact, floating };

namespace detail {

template <typename WeightT, typename MultT>
void propagate_band(const Environment& env, const Params1D& params, std::int64_t offset,
                    std::vector<WeightT>& weights, std::uint64_t n, const MultT& mult0,
                    const MultT& mult1) {
    const std::int64_t growth = params.max_multiplier() - 1;
    for (std::uint64_t step = 0; step < n; ++step) {
        std::vector<WeightT> next(weights.size() + static_cast<std::size_t>(growth), WeightT(0));
        for (std::size_t j = 0; j < weights.size(); ++j) {
            if (weights[j] == 0) continue;
            const int label = env.label_at(offset + static_cast<std::int64_t>(j));
            const std::int64_t A = params.multiplier(label);
            const WeightT contribution = weights[j] * (label == 0 ? mult0 : mult1);
            for (std::int64_t l = 0; l < A; ++l) next[j + static_cast<std::size_t>(l)] += contribution;
        }
        weights = std::move(next);
    }
}

}  // namespace detail

// Exact (or flagged high-precision float) n-step propagation rho^(n) =
// rho^(0) Gamma^n.  The environment is checked to cover the final support
// before any work happens.
inline DistributionVector propagate_distribution(const Environment& env, const Params1D& params,
                                                 const DistributionVector& rho0, std::uint64_t n,
                                                 DistMode mode = DistMode::exact) {
    params.validate();
    if (env.dim() != 1) throw InvalidInput("propagate_distribution: 1D environment required");
    if (rho0.size() == 0) throw InvalidInput("propagate_distribution: empty initial distribution");
    const std::int64_t growth = params.max_multiplier() - 1;
    const std::uint64_t needed = static_cast<std::uint64_t>(rho0.offset) + rho0.size() +
                                 n * static_cast<std::uint64_t>(growth);
    if (rho0.offset < 0 || needed > env.extent()[0])
        throw EnvironmentExhausted("propagate_distribution: environment extent " +
                                   std::to_string(env.extent()[0]) + " too small; need >= " +
                                   std::to_string(needed));

    DistributionVector out;
    out.offset = rho0.offset;
    if (mode == DistMode::exact) {
        if (!rho0.exact)
            throw InvalidInput("propagate_distribution: exact mode needs an exact rho0");
        // Shared-denominator update: scaling every step by L = lcm(A0, A1)
        // keeps all weights integral, so a step is pure integer adds.
        const std::int64_t L = std::lcm(params.A0, params.A1);
        out.exact = true;
        out.num = rho0.num;
        out.den = rho0.den;
        detail::propagate_band(env, params, out.offset, out.num, n, Int(L / params.A0),
                               Int(L / params.A1));
        for (std::uint64_t step = 0; step < n; ++step) out.den *= L;
        Int total = std::accumulate(out.num.begin(), out.num.end(), Int(0));
        if (total != out.den)
            throw Error("propagate_distribution: mass not conserved (internal error)");
        while (!out.num.empty() && out.num.back() == 0) out.num.pop_back();
    } else {
        out.exact = false;
        if (rho0.exact) {
            out.fw.reserve(rho0.num.size());
            for (const Int& v : rho0.num)
                out.fw.push_back(Float50(v) / Float50(rho0.den));
        } else {
            out.fw = rho0.fw;
        }
        detail::propagate_band(env, params, out.offset, out.fw, n, Float50(1) / params.A0,
                               Float50(1) / params.A1);
        while (!out.fw.empty() && out.fw.back() == 0) out.fw.pop_back();
    }
    return out;
}

struct DistMomentsExact {
    Rational mean;
    Rational variance;
};

inline DistMomentsExact dist_moments_exact(const DistributionVector& dist) {
    if (!dist.exact) throw InvalidInput("dist_moments_exact: float-mode distribution");
    Rational mean(0), second(0);
    for (std::size_t i = 0; i < dist.num.size(); ++i) {
        if (dist.num[i] == 0) continue;
        const Int k(dist.offset + static_cast<std::int64_t>(i));
        const Rational w(dist.num[i], dist.den);
        mean += w * Rational(k);
        second += w * Rational(k * k);
    }
    return {mean, second - mean * mean};
}

inline std::pair<Float50, Float50> dist_moments_float(const DistributionVector& dist) {
    if (dist.exact) {
        auto m = dist_moments_exact(dist);
        return {Float50(m.mean), Float50(m.variance)};
    }
    Float50 mean(0), second(0);
    for (std::size_t i = 0; i < dist.fw.size(); ++i) {
        const Float50 k(dist.offset + static_cast<std::int64_t>(i));
        mean += dist.fw[i] * k;
        second += dist.fw[i] * k * k;
    }
    return {mean, second - mean * mean};
}

// --- closed forms -----------------------------------------------------------

// Effective label-to-label transition matrix:
// alpha*_ij = delta_ij (1/A_i + (1 - 1/A_i) p_i) + (1 - delta_ij)(1 - 1/A_i) p_j.
inline std::array<std::array<Rational, 2>, 2> analytic_alpha_star(const Params1D& params) {
    params.validate();
    const std::array<Rational, 2> stay{Rational(1, params.A0), Rational(1, params.A1)};
    const std::array<Rational, 2> pj{params.p0, Rational(1) - params.p0};
    std::array<std::array<Rational, 2>, 2> alpha;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            alpha[i][j] = (Rational(1) - stay[i]) * pj[j];
            if (i == j) alpha[i][j] += stay[i];
        }
    return alpha;
}

// Equilibrium occupation of label-0 tiles:
// p = p0 A0 (A1 - 1) / (A0 A1 - p1 A1 - p0 A0).
inline Rational analytic_p(const Params1D& params) {
    params.validate();
    const Rational p0 = params.p0;
    const Rational p1 = Rational(1) - p0;
    const Rational A0(params.A0), A1(params.A1);
    return p0 * A0 * (A1 - 1) / (A0 * A1 - p1 * A1 - p0 * A0);
}

// Drift D = (p A0 + (1-p) A1 - 1) / 2.
inline Rational analytic_drift(const Params1D& params) {
    const Rational p = analytic_p(params);
    return (p * params.A0 + (Rational(1) - p) * params.A1 - 1) / 2;
}

namespace detail {

// K(m) = sum_{k=0}^{m-1} k^2 = (m-1) m (2m-1) / 6.
inline Rational jump_second_moment_sum(std::int64_t m) {
    return Rational(Int(m - 1) * Int(m) * Int(2 * m - 1), 6);
}

}  // namespace detail

// Stationary jump variance sigma^2 = (p/A0) K(A0) + ((1-p)/A1) K(A1) - D^2.
// Inputs with A0 > A1 are normalized by swapping labels (and p0 <-> p1)
// first; the value is invariant under that relabeling.
inline Rational analytic_variance(const Params1D& params) {
    Params1D norm = params;
    if (norm.A0 > norm.A1) {
        std::swap(norm.A0, norm.A1);
        norm.p0 = Rational(1) - norm.p0;
    }
    const Rational p = analytic_p(norm);
    const Rational D = analytic_drift(norm);
    const Rational second = p / norm.A0 * detail::jump_second_moment_sum(norm.A0) +
                            (Rational(1) - p) / norm.A1 * detail::jump_second_moment_sum(norm.A1);
    return second - D * D;
}

// Lyapunov exponent lambda = p ln A0 + (1-p) ln A1.
inline double analytic_lyapunov(const Params1D& params) {
    const double p = static_cast<double>(analytic_p(params));
    return p * std::log(static_cast<double>(params.A0)) +
           (1.0 - p) * std::log(static_cast<double>(params.A1));
}

// --- ensemble runner ---------------------------------------------------------

enum class SimMode { deterministic, markov };

struct EnsembleOptions {
    unsigned threads = 1;
    std::uint64_t denominator_bits = 128;  // denominator 2^bits for sampled x0
    bool retain_samples = true;
    bool record_alpha = false;
    std::uint64_t trace_every = 0;  // emit (step, v/step) every k steps (count==1 only)
};

namespace detail {

inline constexpr std::uint64_t kShardSize = 1024;

using u128 = unsigned __int128;

inline double u128_unit_to_double(u128 v) {
    // v / 2^128 as a double; plenty of precision for statistics.
    return std::ldexp(static_cast<double>(static_cast<std::uint64_t>(v >> 64)), -64) +
           std::ldexp(static_cast<double>(static_cast<std::uint64_t>(v)), -128);
}

// Uniform draw from [1, 2^128 - 1]: two stream words, rejecting 0.
inline u128 sample_unit_u128(rng::Stream& stream) {
    for (;;) {
        const std::uint64_t hi = stream.next();
        const std::uint64_t lo = stream.next();
        const u128 v = (static_cast<u128>(hi) << 64) | lo;
        if (v != 0) return v;
    }
}

// A * num over denominator 2^128: returns the tile jump, replaces num with
// the new fractional numerator.  Exact 192-bit arithmetic on 64-bit limbs.
inline std::int64_t mul_step_u128(u128& num, std::uint64_t A) {
    const std::uint64_t lo = static_cast<std::uint64_t>(num);
    const std::uint64_t hi = static_cast<std::uint64_t>(num >> 64);
    const u128 p_lo = static_cast<u128>(lo) * A;
    const u128 p_hi = static_cast<u128>(hi) * A + (p_lo >> 64);
    num = (p_hi << 64) | static_cast<std::uint64_t>(p_lo);
    return static_cast<std::int64_t>(p_hi >> 64);
}

// Uniform numerator over [1, 2^bits - 1] for the generic-denominator path.
// Words are drawn most-significant first; for bits == 128 this consumes the
// same stream words as sample_unit_u128.
inline Int sample_unit_int(rng::Stream& stream, std::uint64_t bits) {
    const std::uint64_t words = (bits + 63) / 64;
    const std::uint64_t top_bits = bits - 64 * (words - 1);
    for (;;) {
        Int v = 0;
        for (std::uint64_t w = 0; w < words; ++w) {
            std::uint64_t word = stream.next();
            if (w == 0 && top_bits < 64) word >>= (64 - top_bits);
            v = (v << 64) | Int(word);
        }
        if (v != 0) return v;
    }
}

}  // namespace detail

// Run `count` independent trajectories of length n and accumulate the
// ensemble summary.  Deterministic mode samples x0 uniformly from
// {1, ..., q-1}/q with q = 2^denominator_bits; markov mode samples tile
// jumps directly.  Results are bit-identical for any thread count: each
// trajectory consumes its own substream keyed by its global index, and
// fixed-size shards are merged in index order.
inline EnsembleSummary run_ensemble_1d(const Environment& env, const Params1D& params,
                                       std::uint64_t n, std::uint64_t count, SimMode mode,
                                       std::uint64_t master_seed,
                                       const EnsembleOptions& opts = {}) {
    params.validate();
    if (env.dim() != 1) throw InvalidInput("run_ensemble_1d: 1D environment required");
    if (n < 1) throw InvalidInput("run_ensemble_1d: n must be >= 1");
    if (opts.denominator_bits < 2 || opts.denominator_bits > 1048576)
        throw InvalidInput("run_ensemble_1d: denominator_bits out of range [2, 1048576]");
    const std::uint64_t needed = required_extent_1d(params, n, opts.record_alpha);
    if (env.extent()[0] < needed)
        throw EnvironmentExhausted("run_ensemble_1d: environment extent " +
                                   std::to_string(env.extent()[0]) + " too small; need >= " +
                                   std::to_string(needed));

    EnsembleSummary summary;
    summary.model = "1d";
    summary.dim = 1;
    summary.n = n;
    summary.count = count;
    summary.master_seed = master_seed;
    summary.mode = mode == SimMode::deterministic ? "deterministic" : "markov";
    summary.moments.dim = 1;
    summary.samples_retained = opts.retain_samples;
    const double drift = static_cast<double>(analytic_drift(params));
    summary.drift_ref = {drift, 0.0};
    if (count == 0) return summary;

    const bool fast_path = opts.denominator_bits == 128;

    auto run_one = [&](std::uint64_t t, EnsembleSummary& part) {
        rng::Stream stream(rng::substream_key(master_seed, t));
        std::int64_t V = 0;
        std::array<std::uint64_t, 2> applied{0, 0};
        bool stopped = false;
        double frac_part = 0.0;

        // Exact fractional state, kept alive past the main loop so the
        // optional extra step for the alpha estimate stays exact.
        detail::u128 num = 0;
        WalkState1D state;

        const bool tracing = opts.trace_every > 0 && count == 1 && t == 0;
        // The value is passed as a callable so non-recorded steps never pay
        // for it: rendering the exact state as a double at large denominators
        // costs far more than the step itself.
        auto maybe_trace = [&](std::uint64_t step, auto&& value_fn) {
            if (tracing && (step % opts.trace_every == 0 || step == n))
                part.trace.emplace_back(step, value_fn() / static_cast<double>(step));
        };

        if (mode == SimMode::markov) {
            for (std::uint64_t step = 0; step < n; ++step) {
                const int label = env.label_at(V);
                ++applied[label];
                V += static_cast<std::int64_t>(
                    stream.bounded(static_cast<std::uint64_t>(params.multiplier(label))));
                maybe_trace(step + 1, [&] { return static_cast<double>(V); });
            }
        } else if (fast_path) {
            num = detail::sample_unit_u128(stream);
            for (std::uint64_t step = 0; step < n; ++step) {
                const int label = env.label_at(V);
                ++applied[label];
                V += detail::mul_step_u128(num,
                                           static_cast<std::uint64_t>(params.multiplier(label)));
                if (num == 0) {
                    stopped = true;
                    break;
                }
                maybe_trace(step + 1, [&] {
                    return static_cast<double>(V) + detail::u128_unit_to_double(num);
                });
            }
            frac_part = detail::u128_unit_to_double(num);
        } else {
            const Int den = Int(1) << static_cast<unsigned>(opts.denominator_bits);
            state.x = make_point(detail::sample_unit_int(stream, opts.denominator_bits), den);
            for (std::uint64_t step = 0; step < n; ++step) {
                StepResult1D result = step_deterministic(env, params, state);
                state = std::move(result.state);
                if (result.stopped) {
                    stopped = true;
                    break;
                }
                maybe_trace(step + 1, [&] {
                    return static_cast<double>(state.V) +
                           static_cast<double>(Rational(state.x.num[0], den));
                });
            }
            V = state.V;
            applied = state.applied;
            frac_part = static_cast<double>(Rational(state.x.num[0], den));
        }

        if (stopped) {
            // The walk is excluded from endpoint statistics, but the map
            // applications up to (and including) the boundary hit are real
            // orbit data, so they still feed the Lyapunov tally.
            ++part.stopped;
            part.lyap_count[0] += applied[0];
            part.lyap_count[1] += applied[1];
            return;
        }

        const double v_end =
            mode == SimMode::markov ? static_cast<double>(V) : static_cast<double>(V) + frac_part;
        const double z = scaled_fluctuation(v_end, n, drift);
        part.moments.add({z, 0.0});
        ++part.hist1[V];
        ++part.label_count[env.label_at(V)];
        part.lyap_count[0] += applied[0];
        part.lyap_count[1] += applied[1];
        if (opts.retain_samples) part.samples.push_back({z, 0.0});

        if (opts.record_alpha) {
            const int i = env.label_at(V);
            std::int64_t V2;
            if (mode == SimMode::markov) {
                V2 = step_markov(env, params, V, stream);
            } else if (fast_path) {
                V2 = V + detail::mul_step_u128(
                             num, static_cast<std::uint64_t>(params.multiplier(i)));
            } else {
                V2 = step_deterministic(env, params, state).state.V;
            }
            const int j = env.label_at(V2);
            ++part.alpha_count[i][j];
        }
    };

    const std::uint64_t shards = (count + detail::kShardSize - 1) / detail::kShardSize;
    std::vector<EnsembleSummary> parts(shards);
    for (auto& p : parts) p.moments.dim = 1;

    auto run_shard = [&](std::uint64_t s) {
        EnsembleSummary part;
        part.moments.dim = 1;
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
    summary.alpha_recorded = opts.record_alpha;
    return summary;
}

}  // namespace qwalk
