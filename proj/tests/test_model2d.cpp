#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <vector>

#include "qwalk/environment.hpp"
#include "qwalk/geometry.hpp"
#include "qwalk/model2d.hpp"

using namespace qwalk;

namespace {

Environment uniform_env_2d(std::uint64_t extent, std::uint8_t label) {
    return Environment::from_labels(
        2, {extent, extent}, std::vector<std::uint8_t>(extent * extent, label), Rational(1, 2));
}

}  // namespace

TEST_CASE("2d deterministic steps match the worked examples", "[model2d]") {
    const Params2D params;

    // Label 1 at the origin: A1 (1/2,1/2) -> jump (2,1), frac (0,1/2): boundary.
    {
        const auto env = uniform_env_2d(8, 1);
        WalkState2D state;
        state.x = make_point(std::vector<Int>{Int(1), Int(1)}, Int(2));
        const StepResult2D r = step_deterministic_2d(env, params, state);
        REQUIRE(r.state.V[0] == 2);
        REQUIRE(r.state.V[1] == 1);
        REQUIRE(r.state.x.coordinate(0) == 0);
        REQUIRE(r.state.x.coordinate(1) == Rational(1, 2));
        REQUIRE(r.boundary_hit);
    }

    // Label 0: A0 (1/3,1/3) -> jump (1,0), frac (0,2/3): boundary.
    {
        const auto env = uniform_env_2d(8, 0);
        WalkState2D state;
        state.x = make_point(std::vector<Int>{Int(1), Int(1)}, Int(3));
        const StepResult2D r = step_deterministic_2d(env, params, state);
        REQUIRE(r.state.V[0] == 1);
        REQUIRE(r.state.V[1] == 0);
        REQUIRE(r.state.x.coordinate(0) == 0);
        REQUIRE(r.state.x.coordinate(1) == Rational(2, 3));
        REQUIRE(r.boundary_hit);
    }

    // Label 0: A0 (1/3,1/4) -> jump (0,0), frac (11/12,7/12): interior.
    {
        const auto env = uniform_env_2d(8, 0);
        WalkState2D state;
        state.x = make_point(std::vector<Int>{Int(4), Int(3)}, Int(12));
        const StepResult2D r = step_deterministic_2d(env, params, state);
        REQUIRE(r.state.V[0] == 0);
        REQUIRE(r.state.V[1] == 0);
        REQUIRE(r.state.x.coordinate(0) == Rational(11, 12));
        REQUIRE(r.state.x.coordinate(1) == Rational(7, 12));
        REQUIRE(r.state.x.den == 12);  // denominator preserved
        REQUIRE_FALSE(r.boundary_hit);
    }
}

TEST_CASE("2d analytic closed forms for the reference parameters", "[model2d]") {
    const Analytic2D an = analytic_2d(Params2D{});

    REQUIRE(an.self_overlap[0] == Rational(1, 4));
    REQUIRE(an.self_overlap[1] == Rational(1, 6));
    REQUIRE(an.alpha_star[0][0] == Rational(5, 8));
    REQUIRE(an.alpha_star[0][1] == Rational(3, 8));
    REQUIRE(an.alpha_star[1][0] == Rational(5, 12));
    REQUIRE(an.alpha_star[1][1] == Rational(7, 12));
    REQUIRE(an.p == Rational(10, 19));
    REQUIRE(an.D0[0] == 1);
    REQUIRE(an.D0[1] == Rational(1, 2));
    REQUIRE(an.D1[0] == Rational(3, 2));
    REQUIRE(an.D1[1] == 1);
    REQUIRE(an.D[0] == Rational(47, 38));
    REQUIRE(an.D[1] == Rational(14, 19));
}

TEST_CASE("equilibrium of a stochastic 2x2 matrix", "[model2d]") {
    // Identical rows (q, 1-q): the equilibrium is q itself.
    const Rational q(2, 7);
    std::array<std::array<Rational, 2>, 2> alpha{{{q, Rational(1) - q}, {q, Rational(1) - q}}};
    REQUIRE(equilibrium_p_2d(alpha) == q);

    std::array<std::array<Rational, 2>, 2> bad{{{Rational(1, 2), Rational(1, 3)},
                                                {Rational(1, 2), Rational(1, 2)}}};
    REQUIRE_THROWS_AS(equilibrium_p_2d(bad), InvalidInput);

    std::array<std::array<Rational, 2>, 2> reducible{{{Rational(1), Rational(0)},
                                                      {Rational(0), Rational(1)}}};
    REQUIRE_THROWS_AS(equilibrium_p_2d(reducible), InvalidInput);
}

TEST_CASE("invalid 2d parameters are rejected", "[model2d]") {
    Params2D bad_det;
    bad_det.A0 = Matrix2{2, 1, 1, 2};  // det 3
    REQUIRE_THROWS_AS(bad_det.validate(), InvalidInput);

    Params2D zero_entry;
    zero_entry.A1 = Matrix2{1, 0, 0, 1};
    REQUIRE_THROWS_AS(zero_entry.validate(), InvalidInput);

    Params2D bad_p;
    bad_p.p0 = Rational(1);
    REQUIRE_THROWS_AS(bad_p.validate(), InvalidInput);
}

TEST_CASE("one-step tile offsets follow the clipped-area law", "[model2d]") {
    // In an all-0 environment the n = 1 offset distribution is exactly the
    // jump distribution of A0; compare empirical frequencies at 5 sigma.
    const auto env = uniform_env_2d(8, 0);
    const Params2D params;
    const std::uint64_t count = 40000;
    const auto summary = run_ensemble_2d(env, params, 1, count, 17);
    REQUIRE(summary.used() == count - summary.stopped);

    const auto table = jump_distribution(params.A0);
    double used = static_cast<double>(summary.used());
    for (const auto& [offset, prob] : table) {
        const auto it = summary.hist2.find({offset.first, offset.second});
        const double freq =
            it == summary.hist2.end() ? 0.0 : static_cast<double>(it->second) / used;
        const double p = static_cast<double>(prob);
        const double sigma = std::sqrt(p * (1.0 - p) / used);
        REQUIRE(std::abs(freq - p) <= 5.0 * sigma + 1e-9);
    }
    // No mass outside the support of the jump distribution.
    std::uint64_t inside = 0;
    for (const auto& [offset, prob] : table) {
        const auto it = summary.hist2.find({offset.first, offset.second});
        if (it != summary.hist2.end()) inside += it->second;
    }
    REQUIRE(inside == summary.used());
}

TEST_CASE("2d ensembles are reproducible and thread-invariant", "[model2d]") {
    const auto env = Environment::generate(6, Rational(1, 2), 2, {150, 150});
    const Params2D params;
    EnsembleOptions2D opts1;
    opts1.threads = 1;
    EnsembleOptions2D opts3;
    opts3.threads = 3;

    const auto a = run_ensemble_2d(env, params, 30, 4096, 9, opts1);
    const auto b = run_ensemble_2d(env, params, 30, 4096, 9, opts3);
    REQUIRE(a.hist2 == b.hist2);
    REQUIRE(a.samples == b.samples);
    REQUIRE(a.moments.mean == b.moments.mean);
    REQUIRE(a.moments.m2 == b.moments.m2);
    REQUIRE(a.label_count == b.label_count);
}

TEST_CASE("2d fast path agrees exactly with step-by-step replay", "[model2d]") {
    const auto env = Environment::generate(8, Rational(1, 2), 2, {200, 200});
    const Params2D params;
    const std::uint64_t n = 30, count = 16, seed = 31;
    const auto summary = run_ensemble_2d(env, params, n, count, seed);

    std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> replay;
    for (std::uint64_t t = 0; t < count; ++t) {
        rng::Stream stream(rng::substream_key(seed, t));
        Int nx = detail::sample_unit_int(stream, 128);
        Int ny = detail::sample_unit_int(stream, 128);
        WalkState2D state;
        state.x = make_point(std::vector<Int>{std::move(nx), std::move(ny)}, Int(1) << 128);
        bool boundary = false;
        for (std::uint64_t step = 0; step < n && !boundary; ++step) {
            auto r = step_deterministic_2d(env, params, state);
            state = std::move(r.state);
            boundary = r.boundary_hit;
        }
        if (!boundary) ++replay[{state.V[0], state.V[1]}];
    }
    REQUIRE(summary.hist2 == replay);
    REQUIRE(summary.stopped == 0);  // boundary hits have probability ~2^-127
}

TEST_CASE("coarse 2d denominators hit boundaries and are excluded", "[model2d]") {
    const auto env = uniform_env_2d(64, 0);
    const Params2D params;
    EnsembleOptions2D opts;
    opts.denominator_bits = 2;  // coordinates in {1/4, 1/2, 3/4}
    const auto summary = run_ensemble_2d(env, params, 6, 100, 23, opts);
    REQUIRE(summary.stopped > 0);
    REQUIRE(summary.used() == 100 - summary.stopped);
}

TEST_CASE("2d ensemble refuses a too-small environment", "[model2d]") {
    const auto env = Environment::generate(1, Rational(1, 2), 2, {20, 20});
    const Params2D params;
    REQUIRE(required_extent_2d(params, 10) == 41);
    try {
        run_ensemble_2d(env, params, 10, 5, 0);
        FAIL("expected EnvironmentExhausted");
    } catch (const EnvironmentExhausted& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("need >= 41 per axis") != std::string::npos);
    }
}

TEST_CASE("2d drift matches the conjectured closed form at modest scale", "[model2d]") {
    const auto env = Environment::generate(12, Rational(1, 2), 2, {500, 500});
    const Params2D params;
    const std::uint64_t n = 120;
    const auto summary = run_ensemble_2d(env, params, n, 20000, 4);
    const double d0 = summary.mean_raw(0) / static_cast<double>(n);
    const double d1 = summary.mean_raw(1) / static_cast<double>(n);
    REQUIRE(std::abs(d0 - 47.0 / 38.0) / (47.0 / 38.0) < 0.02);
    REQUIRE(std::abs(d1 - 14.0 / 19.0) / (14.0 / 19.0) < 0.02);
}
