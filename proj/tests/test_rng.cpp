#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <set>
#include <vector>

#include "qwalk/rng.hpp"

using namespace qwalk;

TEST_CASE("stream_at matches the splitmix64 reference sequence", "[rng]") {
    // With seed 0, outputs i = 0,1,2 are the canonical splitmix64 values.
    REQUIRE(rng::stream_at(0, 0) == 0xE220A8397B1DCDAFull);
    REQUIRE(rng::stream_at(0, 1) == 0x6E789E6AA1B965F4ull);
    REQUIRE(rng::stream_at(0, 2) == 0x06C45D188009454Full);
    REQUIRE(rng::stream_at(42, 0) == 0xBDD732262FEB6E95ull);
}

TEST_CASE("substream keys are a fixed function of master seed and index", "[rng]") {
    REQUIRE(rng::substream_key(7, 0) == 0xBA3CA2A68A57C9A4ull);
    REQUIRE(rng::substream_key(7, 0) != rng::substream_key(7, 1));
    REQUIRE(rng::substream_key(7, 0) != rng::substream_key(8, 0));
}

TEST_CASE("Stream is deterministic and counter-based", "[rng]") {
    rng::Stream a(123);
    rng::Stream b(123);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
    REQUIRE(a.counter() == 100);

    // Random access equals sequential access.
    rng::Stream c(123);
    std::vector<std::uint64_t> seq;
    for (int i = 0; i < 5; ++i) seq.push_back(c.next());
    for (int i = 0; i < 5; ++i) REQUIRE(seq[static_cast<std::size_t>(i)] == rng::stream_at(123, static_cast<std::uint64_t>(i)));
}

TEST_CASE("bounded draws are in range and near-uniform", "[rng]") {
    rng::Stream s(2024);
    std::array<std::uint64_t, 3> counts{0, 0, 0};
    const int draws = 30000;
    for (int i = 0; i < draws; ++i) {
        const std::uint64_t v = s.bounded(3);
        REQUIRE(v < 3);
        ++counts[v];
    }
    for (const auto c : counts) {
        // 5-sigma band around draws/3 (sigma ~ sqrt(draws*2/9) ~ 82).
        REQUIRE(static_cast<double>(c) > draws / 3.0 - 5 * 82.0);
        REQUIRE(static_cast<double>(c) < draws / 3.0 + 5 * 82.0);
    }
    REQUIRE_THROWS(s.bounded(0));
}

TEST_CASE("u01 lies in [0,1) with 53-bit resolution", "[rng]") {
    rng::Stream s(5);
    double mean = 0.0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const double u = s.u01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        mean += u;
    }
    mean /= draws;
    REQUIRE(std::abs(mean - 0.5) < 0.01);
}

TEST_CASE("distinct substreams do not collide on short prefixes", "[rng]") {
    std::set<std::uint64_t> firsts;
    for (std::uint64_t t = 0; t < 1000; ++t) {
        rng::Stream s(rng::substream_key(99, t));
        firsts.insert(s.next());
    }
    REQUIRE(firsts.size() == 1000);
}
