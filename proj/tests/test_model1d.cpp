#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <vector>

#include "qwalk/environment.hpp"
#include "qwalk/model1d.hpp"

using namespace qwalk;

namespace {

Environment alternating_env(std::uint64_t extent) {
    std::vector<std::uint8_t> labels(extent);
    for (std::uint64_t k = 0; k < extent; ++k) labels[k] = k % 2;
    return Environment::from_labels(1, {extent}, labels, Rational(1, 2));
}

Environment all_zero_env(std::uint64_t extent) {
    return Environment::from_labels(1, {extent}, std::vector<std::uint8_t>(extent, 0),
                                    Rational(1, 2));
}

}  // namespace

TEST_CASE("deterministic step matches the worked example", "[model1d]") {
    const auto env = alternating_env(8);  // label(0) = 0 -> A = 2
    const Params1D params;
    WalkState1D state;
    state.x = make_point(Int(5), Int(8));  // V = 0, x = 5/8

    const StepResult1D r = step_deterministic(env, params, state);
    REQUIRE_FALSE(r.stopped);
    REQUIRE(r.state.V == 1);
    REQUIRE(r.state.x.coordinate(0) == Rational(1, 4));
    REQUIRE(r.state.x.den == 8);  // fixed denominator preserved
    REQUIRE(r.state.applied[0] == 1);
    REQUIRE(r.state.applied[1] == 0);
    REQUIRE(r.state.step_count == 1);
}

TEST_CASE("hitting a tile boundary stops the walk", "[model1d]") {
    const auto env = all_zero_env(8);
    const Params1D params;
    WalkState1D state;
    state.x = make_point(Int(1), Int(2));  // x = 1/2, A = 2 -> lands exactly on 1

    const StepResult1D r = step_deterministic(env, params, state);
    REQUIRE(r.stopped);
    REQUIRE(r.state.V == 1);
    REQUIRE(r.state.x.num[0] == 0);

    // A stopped state no longer moves.
    const StepResult1D r2 = step_deterministic(env, params, r.state);
    REQUIRE(r2.stopped);
    REQUIRE(r2.state.V == 1);
    REQUIRE(r2.state.step_count == r.state.step_count);
}

TEST_CASE("all-doubling environment sums the binary digits of x", "[model1d]") {
    const auto env = all_zero_env(64);
    const Params1D params;
    WalkState1D state;
    state.x = make_point(Int(5), Int(8));  // x = 5/8 = 0.101 in binary

    // Each doubling step jumps by the next binary digit of x, so
    // V_n = b_1 + ... + b_n = 1, 1, 2; the third step consumes the last
    // digit and the fractional part hits 0.
    StepResult1D r = step_deterministic(env, params, state);
    REQUIRE(r.state.V == 1);
    REQUIRE_FALSE(r.stopped);
    r = step_deterministic(env, params, r.state);
    REQUIRE(r.state.V == 1);
    REQUIRE_FALSE(r.stopped);
    r = step_deterministic(env, params, r.state);
    REQUIRE(r.state.V == 2);
    REQUIRE(r.stopped);
}

TEST_CASE("gamma_row spreads mass uniformly over the jump range", "[model1d]") {
    const auto env = alternating_env(8);
    const Params1D params;

    const auto row0 = gamma_row(env, params, 0);  // label 0 -> A = 2
    REQUIRE(row0.size() == 2);
    REQUIRE(row0[0] == std::pair<std::int64_t, Rational>{0, Rational(1, 2)});
    REQUIRE(row0[1] == std::pair<std::int64_t, Rational>{1, Rational(1, 2)});

    const auto row1 = gamma_row(env, params, 1);  // label 1 -> A = 3
    REQUIRE(row1.size() == 3);
    REQUIRE(row1[0] == std::pair<std::int64_t, Rational>{1, Rational(1, 3)});
    REQUIRE(row1[1] == std::pair<std::int64_t, Rational>{2, Rational(1, 3)});
    REQUIRE(row1[2] == std::pair<std::int64_t, Rational>{3, Rational(1, 3)});

    REQUIRE_THROWS_AS(gamma_row(env, params, 8), EnvironmentExhausted);
}

TEST_CASE("two-step propagation reproduces the hand-computed distribution", "[model1d]") {
    // Alternating labels: rho^(2) = (1/4, 5/12, 1/6, 1/6) on tiles 0..3.
    const auto env = alternating_env(8);
    const Params1D params;
    const auto rho = propagate_distribution(env, params, DistributionVector::delta(0), 2);

    REQUIRE(rho.offset == 0);
    REQUIRE(rho.size() == 4);
    REQUIRE(rho.weight(0) == Rational(1, 4));
    REQUIRE(rho.weight(1) == Rational(5, 12));
    REQUIRE(rho.weight(2) == Rational(1, 6));
    REQUIRE(rho.weight(3) == Rational(1, 6));
}

TEST_CASE("exact propagation conserves mass and respects the support bound", "[model1d]") {
    const auto env = Environment::generate(4, Rational(1, 2), 1, {200});
    const Params1D params;
    const std::uint64_t n = 50;
    const auto rho = propagate_distribution(env, params, DistributionVector::delta(0), n);

    Rational total = 0;
    for (std::size_t i = 0; i < rho.size(); ++i) total += rho.weight(i);
    REQUIRE(total == 1);
    // Support within [0, n*(maxA-1)].
    REQUIRE(rho.offset >= 0);
    REQUIRE(rho.offset + static_cast<std::int64_t>(rho.size()) - 1 <=
            static_cast<std::int64_t>(n) * 2);
}

TEST_CASE("float propagation tracks the exact weights", "[model1d]") {
    const auto env = Environment::generate(4, Rational(1, 2), 1, {100});
    const Params1D params;
    const auto exact = propagate_distribution(env, params, DistributionVector::delta(0), 30);
    const auto fl =
        propagate_distribution(env, params, DistributionVector::delta(0), 30, DistMode::floating);
    REQUIRE(exact.size() == fl.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
        const Float50 diff = fl.fw[i] - static_cast<Float50>(exact.weight(i));
        REQUIRE(static_cast<double>(boost::multiprecision::abs(diff)) < 1e-30);
    }
    const auto [mean_f, var_f] = dist_moments_float(fl);
    const auto m = dist_moments_exact(exact);
    REQUIRE(std::abs(static_cast<double>(mean_f) - static_cast<double>(m.mean)) < 1e-12);
    REQUIRE(std::abs(static_cast<double>(var_f) - static_cast<double>(m.variance)) < 1e-12);
}

TEST_CASE("propagation refuses an environment that cannot hold the support", "[model1d]") {
    const auto env = Environment::generate(4, Rational(1, 2), 1, {20});
    const Params1D params;
    try {
        propagate_distribution(env, params, DistributionVector::delta(0), 50);
        FAIL("expected EnvironmentExhausted");
    } catch (const EnvironmentExhausted& e) {
        REQUIRE(std::string(e.what()).find("need >=") != std::string::npos);
    }
}

TEST_CASE("analytic closed forms for the reference parameters", "[model1d]") {
    const Params1D params;  // A = (2,3), p0 = 1/2
    REQUIRE(analytic_p(params) == Rational(4, 7));
    REQUIRE(analytic_drift(params) == Rational(5, 7));
    REQUIRE(analytic_variance(params) == Rational(24, 49));
    REQUIRE(analytic_lyapunov(params) ==
            Catch::Approx(4.0 / 7.0 * std::log(2.0) + 3.0 / 7.0 * std::log(3.0)).epsilon(1e-14));

    const auto alpha = analytic_alpha_star(params);
    REQUIRE(alpha[0][0] == Rational(3, 4));
    REQUIRE(alpha[0][1] == Rational(1, 4));
    REQUIRE(alpha[1][0] == Rational(1, 3));
    REQUIRE(alpha[1][1] == Rational(2, 3));
}

TEST_CASE("analytic values for equal multipliers and swapped labels", "[model1d]") {
    Params1D equal;
    equal.A0 = 2;
    equal.A1 = 2;
    REQUIRE(analytic_p(equal) == Rational(1, 2));  // = p0
    REQUIRE(analytic_drift(equal) == Rational(1, 2));
    REQUIRE(analytic_variance(equal) == Rational(1, 4));

    // Swapping the roles of the labels preserves drift and variance.
    Params1D swapped;
    swapped.A0 = 3;
    swapped.A1 = 2;
    REQUIRE(analytic_p(swapped) == Rational(3, 7));
    REQUIRE(analytic_drift(swapped) == Rational(5, 7));
    REQUIRE(analytic_variance(swapped) == Rational(24, 49));
}

TEST_CASE("alpha* matrix powers converge to the equilibrium rows", "[model1d]") {
    const auto alpha = analytic_alpha_star(Params1D{});
    std::array<std::array<Rational, 2>, 2> power = alpha;
    for (int squarings = 0; squarings < 6; ++squarings) {  // alpha^64
        std::array<std::array<Rational, 2>, 2> next{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                next[i][j] = power[i][0] * power[0][j] + power[i][1] * power[1][j];
        power = next;
    }
    const Rational p(4, 7);
    for (int i = 0; i < 2; ++i) {
        REQUIRE(std::abs(static_cast<double>(power[i][0] - p)) < 1e-6);
        REQUIRE(std::abs(static_cast<double>(power[i][1] - (Rational(1) - p))) < 1e-6);
    }
}

TEST_CASE("grid-sampled walks match the exact distribution", "[model1d]") {
    // All q = 2^16 grid points, stepped deterministically, against the
    // exactly propagated distribution.  Point-count rounding limits accuracy
    // to O(n * support / q), so the tight dyadic bound holds at n = 8 while
    // n = 12 needs the measured-looser one.
    const auto env = Environment::generate(0, Rational(1, 2), 1, {30});
    const Params1D params;
    const std::uint64_t q = 1 << 16;

    std::map<std::int64_t, std::uint64_t> hist8, hist12;
    for (std::uint64_t i = 1; i < q; ++i) {
        WalkState1D state;
        state.x = make_point(Int(i), Int(q));
        for (int step = 1; step <= 12; ++step) {
            state = step_deterministic(env, params, state).state;
            if (step == 8) ++hist8[state.V];
        }
        ++hist12[state.V];
    }

    auto tv_against = [&](const std::map<std::int64_t, std::uint64_t>& hist, std::uint64_t n) {
        const auto rho = propagate_distribution(env, params, DistributionVector::delta(0), n);
        std::map<std::int64_t, double> diff;
        for (const auto& [tile, c] : hist)
            diff[tile] += static_cast<double>(c) / static_cast<double>(q - 1);
        for (std::size_t i = 0; i < rho.size(); ++i)
            diff[rho.offset + static_cast<std::int64_t>(i)] -=
                static_cast<double>(rho.weight(i));
        double tv = 0.0;
        for (const auto& [tile, d] : diff) tv += std::abs(d);
        return 0.5 * tv;
    };

    REQUIRE(tv_against(hist8, 8) <= 1.0 / 1024.0);
    REQUIRE(tv_against(hist12, 12) <= 0.004);
}

TEST_CASE("ensemble fast path agrees exactly with step-by-step replay", "[model1d]") {
    const auto env = Environment::generate(9, Rational(1, 2), 1, {100});
    const Params1D params;
    const std::uint64_t n = 40, count = 16, seed = 77;
    const auto summary = run_ensemble_1d(env, params, n, count, SimMode::deterministic, seed);

    std::map<std::int64_t, std::uint64_t> replay;
    for (std::uint64_t t = 0; t < count; ++t) {
        rng::Stream stream(rng::substream_key(seed, t));
        WalkState1D state;
        state.x = make_point(detail::sample_unit_int(stream, 128), Int(1) << 128);
        for (std::uint64_t step = 0; step < n; ++step)
            state = step_deterministic(env, params, state).state;
        ++replay[state.V];
    }
    REQUIRE(summary.hist1 == replay);
    REQUIRE(summary.used() == count);
    REQUIRE(summary.stopped == 0);
}

TEST_CASE("ensembles are invariant under rerun and thread count", "[model1d]") {
    const auto env = Environment::generate(2, Rational(1, 2), 1, {200});
    const Params1D params;
    EnsembleOptions opts1;
    opts1.threads = 1;
    EnsembleOptions opts4;
    opts4.threads = 4;

    const auto a = run_ensemble_1d(env, params, 60, 4096, SimMode::deterministic, 5, opts1);
    const auto b = run_ensemble_1d(env, params, 60, 4096, SimMode::deterministic, 5, opts4);
    const auto c = run_ensemble_1d(env, params, 60, 4096, SimMode::deterministic, 5, opts1);

    REQUIRE(a.hist1 == b.hist1);
    REQUIRE(a.samples == b.samples);  // exact double equality, fixed merge order
    REQUIRE(a.moments.mean[0] == b.moments.mean[0]);
    REQUIRE(a.moments.m2[0][0] == b.moments.m2[0][0]);
    REQUIRE(a.samples == c.samples);
    REQUIRE(a.lyap_count == b.lyap_count);
}

TEST_CASE("markov ensemble reproduces the exact distribution", "[model1d]") {
    const auto env = Environment::generate(0, Rational(1, 2), 1, {100});
    const Params1D params;
    const std::uint64_t n = 30, count = 30000;
    const auto summary = run_ensemble_1d(env, params, n, count, SimMode::markov, 11);
    const auto rho = propagate_distribution(env, params, DistributionVector::delta(0), n);

    std::map<std::int64_t, double> diff;
    for (const auto& [tile, c] : summary.hist1)
        diff[tile] += static_cast<double>(c) / static_cast<double>(count);
    for (std::size_t i = 0; i < rho.size(); ++i)
        diff[rho.offset + static_cast<std::int64_t>(i)] -= static_cast<double>(rho.weight(i));
    double tv = 0.0;
    for (const auto& [tile, d] : diff) tv += std::abs(d);
    REQUIRE(0.5 * tv < 0.05);  // sampling noise only
}

TEST_CASE("single-walk label occupation approaches the equilibrium", "[model1d]") {
    const auto env = Environment::generate(2, Rational(1, 2), 1, {200001});
    const Params1D params;
    const std::uint64_t n = 100000;
    const auto summary = run_ensemble_1d(env, params, n, 1, SimMode::markov, 3);
    const double occupation =
        static_cast<double>(summary.lyap_count[0]) / static_cast<double>(n);
    REQUIRE(std::abs(occupation - 4.0 / 7.0) < 0.01);
}

TEST_CASE("drift trace follows v/step", "[model1d]") {
    // A walk consumes at most one bit of denominator per step, so 2048 bits
    // guarantee survival over 300 steps.
    const auto env = Environment::generate(2, Rational(1, 2), 1, {1000});
    const Params1D params;
    EnsembleOptions opts;
    opts.trace_every = 10;
    opts.denominator_bits = 2048;
    const auto summary =
        run_ensemble_1d(env, params, 300, 1, SimMode::deterministic, 8, opts);
    REQUIRE(summary.stopped == 0);
    REQUIRE(summary.trace.size() == 30);
    REQUIRE(summary.trace.front().first == 10);
    REQUIRE(summary.trace.back().first == 300);
    REQUIRE(std::abs(summary.trace.back().second - 5.0 / 7.0) < 0.2);
}

TEST_CASE("default precision sets a hard horizon on deterministic walks", "[model1d]") {
    // Doubling shifts the dyadic numerator left, so a 128-bit start is
    // exhausted after at most 128 label-0 applications; the walk then lands
    // exactly on a tile edge and freezes.  The realized applications still
    // count toward the Lyapunov tally even though the endpoint is excluded.
    const auto env = Environment::generate(2, Rational(1, 2), 1, {2000});
    const Params1D params;
    EnsembleOptions opts;
    opts.trace_every = 1;
    const auto summary =
        run_ensemble_1d(env, params, 600, 1, SimMode::deterministic, 8, opts);
    REQUIRE(summary.stopped == 1);
    REQUIRE(summary.used() == 0);
    REQUIRE_FALSE(summary.trace.empty());
    const auto last_step = summary.trace.back().first;
    REQUIRE(last_step >= 128);  // needs at least 128 doublings to die
    REQUIRE(last_step < 600);
    // Trace stops one application before the boundary hit.
    REQUIRE(summary.lyap_count[0] + summary.lyap_count[1] == last_step + 1);
    REQUIRE(summary.lyap_count[0] >= 64);
    REQUIRE(summary.lyap_count[1] >= 64);
}

TEST_CASE("ensemble precondition failures", "[model1d]") {
    const auto env = Environment::generate(1, Rational(1, 2), 1, {10});
    const Params1D params;
    try {
        run_ensemble_1d(env, params, 10, 5, SimMode::deterministic, 0);
        FAIL("expected EnvironmentExhausted");
    } catch (const EnvironmentExhausted& e) {
        REQUIRE(std::string(e.what()).find("need >= 21") != std::string::npos);
    }
    REQUIRE_THROWS_AS(run_ensemble_1d(env, params, 0, 5, SimMode::deterministic, 0),
                      InvalidInput);

    const auto empty = run_ensemble_1d(env, params, 4, 0, SimMode::deterministic, 0);
    REQUIRE(empty.used() == 0);
    REQUIRE(empty.samples.empty());
    REQUIRE(empty.hist1.empty());
}

TEST_CASE("coarse denominators stop quickly and are excluded", "[model1d]") {
    // With denominator 2^4 every sampled start is k/16, so every walk in an
    // all-doubling environment hits a boundary within 4 steps.
    const auto env = all_zero_env(64);
    Params1D params;
    params.A1 = 2;
    EnsembleOptions opts;
    opts.denominator_bits = 4;
    const auto summary =
        run_ensemble_1d(env, params, 10, 200, SimMode::deterministic, 13, opts);
    REQUIRE(summary.stopped == 200);
    REQUIRE(summary.used() == 0);
    REQUIRE(summary.moments.count == 0);
    // Every walk still applied the map 1..4 times before freezing.
    REQUIRE(summary.lyap_count[0] >= 200);
    REQUIRE(summary.lyap_count[0] <= 800);
    REQUIRE(summary.lyap_count[1] == 0);
}

TEST_CASE("required extent covers the worst-case jump total", "[model1d]") {
    const Params1D params;
    REQUIRE(required_extent_1d(params, 10) == 21);
    REQUIRE(required_extent_1d(params, 10, true) == 23);
    Params1D fast;
    fast.A0 = 5;
    fast.A1 = 2;
    REQUIRE(required_extent_1d(fast, 3) == 13);
}

TEST_CASE("alpha recording counts one extra exact step", "[model1d]") {
    // Alternating labels with A0 = A1 = 2: from any end tile the extra step
    // moves 0 or 1 tiles with equal probability, so each observed row is
    // close to (1/2, 1/2).
    const auto env = alternating_env(512);
    Params1D params;
    params.A1 = 2;
    EnsembleOptions opts;
    opts.record_alpha = true;
    const auto summary =
        run_ensemble_1d(env, params, 100, 20000, SimMode::markov, 21, opts);
    REQUIRE(summary.alpha_recorded);
    std::uint64_t total = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) total += summary.alpha_count[i][j];
    REQUIRE(total == 20000);
    for (int i = 0; i < 2; ++i) {
        const double row = static_cast<double>(summary.alpha_count[i][0] + summary.alpha_count[i][1]);
        REQUIRE(row > 0);
        const double frac = static_cast<double>(summary.alpha_count[i][0]) / row;
        REQUIRE(std::abs(frac - 0.5) < 0.05);
    }
}
