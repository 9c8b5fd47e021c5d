#pragma once

// Quenched Bernoulli label fields over N (1D) and N^2 (2D).
//
// An environment is drawn once from (seed, p0, extent) and then frozen; all
// later randomness lives in initial conditions.  Labels are bit-packed,
// generated by a counter-based stream (one hash per tile), and therefore
// bit-reproducible from the header alone.  2D storage is row-major with the
// first coordinate fastest: index = k2 * extent1 + k1.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qwalk/bigrat.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/rng.hpp"

namespace qwalk {

class Environment {
  public:
    // Draw i.i.d. labels: label 0 with probability p0, via a 64-bit
    // threshold test on the per-tile hash.
    static Environment generate(std::uint64_t seed, const Rational& p0, int dim,
                                std::vector<std::uint64_t> extent) {
        if (p0 <= 0 || p0 >= 1)
            throw InvalidInput("Environment::generate: p0 must lie strictly in (0,1)");
        Environment env(dim, std::move(extent), p0, seed, rng::kRngId);
        const std::uint64_t threshold = label_threshold(p0);
        const std::uint64_t total = env.total_tiles();
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            if (rng::stream_at(seed, idx) >= threshold)
                env.labels_[idx >> 3] |= static_cast<std::uint8_t>(1u << (idx & 7));
        }
        return env;
    }

    // Wrap an explicit label array (diagnostics and tests).  The labels are
    // stored as given; the header records rng_id "explicit", so the
    // regeneration invariant does not apply.
    static Environment from_labels(int dim, std::vector<std::uint64_t> extent,
                                   const std::vector<std::uint8_t>& labels, const Rational& p0,
                                   std::uint64_t seed = 0) {
        Environment env(dim, std::move(extent), p0, seed, "explicit");
        if (labels.size() != env.total_tiles())
            throw InvalidInput("Environment::from_labels: label count does not match extent");
        for (std::size_t idx = 0; idx < labels.size(); ++idx) {
            if (labels[idx] > 1) throw InvalidInput("Environment::from_labels: labels must be 0/1");
            if (labels[idx]) env.labels_[idx >> 3] |= static_cast<std::uint8_t>(1u << (idx & 7));
        }
        return env;
    }

    int dim() const { return dim_; }
    const std::vector<std::uint64_t>& extent() const { return extent_; }
    std::uint64_t seed() const { return seed_; }
    const Rational& p0() const { return p0_; }
    const std::string& rng_id() const { return rng_id_; }
    const std::vector<std::uint8_t>& payload() const { return labels_; }

    std::uint64_t total_tiles() const {
        return dim_ == 1 ? extent_[0] : extent_[0] * extent_[1];
    }

    // omega(k) for the 1D field; past-the-end access means the pre-allocated
    // tiling was too short and the caller must regenerate a larger one.
    int label_at(std::int64_t k) const {
        if (dim_ != 1) throw InvalidInput("label_at: 1D accessor on a 2D environment");
        if (k < 0 || static_cast<std::uint64_t>(k) >= extent_[0])
            throw EnvironmentExhausted("label_at: tile " + std::to_string(k) +
                                       " outside extent " + std::to_string(extent_[0]));
        return bit(static_cast<std::uint64_t>(k));
    }

    // omega(k1, k2) for the 2D field.
    int label_at(std::int64_t k1, std::int64_t k2) const {
        if (dim_ != 2) throw InvalidInput("label_at: 2D accessor on a 1D environment");
        if (k1 < 0 || static_cast<std::uint64_t>(k1) >= extent_[0] || k2 < 0 ||
            static_cast<std::uint64_t>(k2) >= extent_[1])
            throw EnvironmentExhausted("label_at: tile (" + std::to_string(k1) + "," +
                                       std::to_string(k2) + ") outside extent (" +
                                       std::to_string(extent_[0]) + "," +
                                       std::to_string(extent_[1]) + ")");
        return bit(static_cast<std::uint64_t>(k2) * extent_[0] + static_cast<std::uint64_t>(k1));
    }

    // Exact fraction of 0-labels (typicality diagnostic).
    Rational label_fraction() const {
        std::uint64_t ones = 0;
        for (std::uint8_t byte : labels_) ones += std::popcount(static_cast<unsigned>(byte));
        const std::uint64_t total = total_tiles();
        return Rational(Int(total - ones), Int(total));
    }

    // --- persistence: one JSON header line, then raw packed label bytes ---

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + path.string());
        out << header_json().dump() << '\n';
        out.write(reinterpret_cast<const char*>(labels_.data()),
                  static_cast<std::streamsize>(labels_.size()));
        if (!out) throw IoError("write failed: " + path.string());
    }

    static Environment load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open for reading: " + path.string());
        std::string header_line;
        if (!std::getline(in, header_line)) throw IoError("missing header line: " + path.string());

        nlohmann::json h;
        try {
            h = nlohmann::json::parse(header_line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad environment header in " + path.string() + ": " + e.what());
        }
        if (!h.contains("magic") || h["magic"] != "QWENV1")
            throw IoError("bad magic in " + path.string());

        const int dim = h.at("dim").get<int>();
        if (dim != 1 && dim != 2) throw IoError("unsupported dim in " + path.string());
        auto extent = h.at("extent").get<std::vector<std::uint64_t>>();
        if (extent.size() != static_cast<std::size_t>(dim))
            throw IoError("extent/dim mismatch in " + path.string());
        const Rational p0(Int(h.at("p0_num").get<std::uint64_t>()),
                          Int(h.at("p0_den").get<std::uint64_t>()));
        const auto seed = h.at("seed").get<std::uint64_t>();
        const auto rng_id = h.at("rng_id").get<std::string>();

        Environment env(dim, std::move(extent), p0, seed, rng_id);
        const std::size_t expected = env.labels_.size();
        in.read(reinterpret_cast<char*>(env.labels_.data()),
                static_cast<std::streamsize>(expected));
        if (static_cast<std::size_t>(in.gcount()) != expected)
            throw IoError("truncated label payload in " + path.string());
        if (in.peek() != std::ifstream::traits_type::eof())
            throw IoError("trailing bytes after label payload in " + path.string());
        return env;
    }

    // 64-bit threshold for "label == 0": floor(p0 * 2^64).
    static std::uint64_t label_threshold(const Rational& p0) {
        Int t = (boost::multiprecision::numerator(p0) << 64) / boost::multiprecision::denominator(p0);
        return t.convert_to<std::uint64_t>();
    }

  private:
    Environment(int dim, std::vector<std::uint64_t> extent, Rational p0, std::uint64_t seed,
                std::string rng_id)
        : dim_(dim), extent_(std::move(extent)), p0_(std::move(p0)), seed_(seed),
          rng_id_(std::move(rng_id)) {
        if (dim_ != 1 && dim_ != 2) throw InvalidInput("Environment: dim must be 1 or 2");
        if (extent_.size() != static_cast<std::size_t>(dim_))
            throw InvalidInput("Environment: extent entries must match dim");
        std::uint64_t total = 1;
        for (std::uint64_t e : extent_) {
            if (e == 0) throw InvalidInput("Environment: extent must be >= 1 per axis");
            if (e > (std::uint64_t{1} << 40) / total)
                throw InvalidInput("Environment: extent too large");
            total *= e;
        }
        if (p0_ < 0 || p0_ > 1) throw InvalidInput("Environment: p0 outside [0,1]");
        labels_.assign((total + 7) / 8, 0);
    }

    int bit(std::uint64_t idx) const { return (labels_[idx >> 3] >> (idx & 7)) & 1; }

    nlohmann::ordered_json header_json() const {
        nlohmann::ordered_json h;
        h["magic"] = "QWENV1";
        h["dim"] = dim_;
        h["extent"] = extent_;
        h["p0_num"] = boost::multiprecision::numerator(p0_).convert_to<std::uint64_t>();
        h["p0_den"] = boost::multiprecision::denominator(p0_).convert_to<std::uint64_t>();
        h["seed"] = seed_;
        h["rng_id"] = rng_id_;
        return h;
    }

    int dim_;
    std::vector<std::uint64_t> extent_;
    Rational p0_;
    std::uint64_t seed_;
    std::string rng_id_;
    std::vector<std::uint8_t> labels_;
};

}  // namespace qwalk
