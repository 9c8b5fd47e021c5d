#pragma once

// Serialization layer: run-summary JSON, plot-ready CSVs, flag parsing, and
// the FNV-1a file hash used by run manifests.  Everything emitted here is a
// pure function of the run inputs, so identical runs produce identical bytes
// (doubles are printed with %.17g round-trip precision).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qwalk/bigrat.hpp"
#include "qwalk/environment.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/model1d.hpp"
#include "qwalk/stats.hpp"

namespace qwalk::io {

// --- hashing -----------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x00000100000001B3ull;
    }
    return h;
}

inline std::uint64_t file_fnv1a64(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for hashing: " + path.string());
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const auto got = static_cast<std::size_t>(in.gcount());
        for (std::size_t i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x00000100000001B3ull;
        }
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// --- flag parsing ------------------------------------------------------------

// "a/b" or plain integer "a".
inline Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return Rational(Int(text));
        const Int num(text.substr(0, slash));
        const Int den(text.substr(slash + 1));
        if (den == 0) throw InvalidInput("parse_rational: zero denominator in '" + text + "'");
        return Rational(num, den);
    } catch (const std::exception&) {
        throw InvalidInput("parse_rational: cannot parse '" + text + "'");
    }
}

// "a,b;c,d" row-major.
inline Matrix2 parse_matrix2(const std::string& text) {
    const auto semi = text.find(';');
    if (semi == std::string::npos)
        throw InvalidInput("parse_matrix2: expected 'a,b;c,d', got '" + text + "'");
    auto parse_row = [&](const std::string& row) {
        const auto comma = row.find(',');
        if (comma == std::string::npos)
            throw InvalidInput("parse_matrix2: expected 'a,b;c,d', got '" + text + "'");
        try {
            return std::pair<std::int64_t, std::int64_t>{std::stoll(row.substr(0, comma)),
                                                         std::stoll(row.substr(comma + 1))};
        } catch (const std::exception&) {
            throw InvalidInput("parse_matrix2: cannot parse '" + text + "'");
        }
    };
    const auto [a, b] = parse_row(text.substr(0, semi));
    const auto [c, d] = parse_row(text.substr(semi + 1));
    return Matrix2{a, b, c, d};
}

inline std::string format_matrix2(const Matrix2& m) {
    return std::to_string(m.a) + "," + std::to_string(m.b) + ";" + std::to_string(m.c) + "," +
           std::to_string(m.d);
}

// --- low-level file helpers ----------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad JSON in " + path.string() + ": " + e.what());
    }
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- summary JSON --------------------------------------------------------------

inline nlohmann::ordered_json summary_to_json(const EnsembleSummary& s) {
    nlohmann::ordered_json j;
    j["model"] = s.model;
    j["n"] = s.n;
    j["count"] = s.count;
    nlohmann::ordered_json mean = nlohmann::ordered_json::array();
    for (int i = 0; i < s.dim; ++i) mean.push_back(s.mean_raw(i));
    j["mean"] = std::move(mean);
    nlohmann::ordered_json cov = nlohmann::ordered_json::array();
    for (int i = 0; i < s.dim; ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int k = 0; k < s.dim; ++k) row.push_back(s.moments.covariance(i, k));
        cov.push_back(std::move(row));
    }
    j["cov"] = std::move(cov);
    const auto mass = s.label_mass();
    j["label_mass"] = {mass[0], mass[1]};
    j["stopped"] = s.stopped;
    j["seed"] = s.master_seed;
    j["mode"] = s.mode;
    j["dim"] = s.dim;
    j["used"] = s.used();
    j["drift_ref"] = std::vector<double>(s.drift_ref.begin(), s.drift_ref.begin() + s.dim);
    j["scaled_mean"] = std::vector<double>(s.moments.mean.begin(), s.moments.mean.begin() + s.dim);
    j["lyap_count"] = {s.lyap_count[0], s.lyap_count[1]};
    if (s.alpha_recorded)
        j["alpha_counts"] = {{s.alpha_count[0][0], s.alpha_count[0][1]},
                             {s.alpha_count[1][0], s.alpha_count[1][1]}};
    return j;
}

struct SummaryFile {
    std::string model;
    std::string mode;
    int dim = 1;
    std::uint64_t n = 0;
    std::uint64_t count = 0;
    std::uint64_t stopped = 0;
    std::uint64_t used = 0;
    std::uint64_t seed = 0;
    std::vector<double> mean;
    std::vector<std::vector<double>> cov;
    std::array<double, 2> label_mass{0.0, 0.0};
    std::array<std::uint64_t, 2> lyap_count{0, 0};
    std::optional<double> lyapunov_empirical;
    std::optional<std::array<std::array<std::uint64_t, 2>, 2>> alpha_counts;
};

inline SummaryFile read_summary_json(const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    SummaryFile s;
    try {
        s.model = j.at("model").get<std::string>();
        s.mode = j.at("mode").get<std::string>();
        s.dim = j.at("dim").get<int>();
        s.n = j.at("n").get<std::uint64_t>();
        s.count = j.at("count").get<std::uint64_t>();
        s.stopped = j.at("stopped").get<std::uint64_t>();
        s.used = j.at("used").get<std::uint64_t>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.mean = j.at("mean").get<std::vector<double>>();
        s.cov = j.at("cov").get<std::vector<std::vector<double>>>();
        const auto mass = j.at("label_mass").get<std::vector<double>>();
        if (mass.size() == 2) s.label_mass = {mass[0], mass[1]};
        const auto lyap = j.at("lyap_count").get<std::vector<std::uint64_t>>();
        if (lyap.size() == 2) s.lyap_count = {lyap[0], lyap[1]};
        if (j.contains("lyapunov_empirical"))
            s.lyapunov_empirical = j.at("lyapunov_empirical").get<double>();
        if (j.contains("alpha_counts")) {
            const auto a = j.at("alpha_counts").get<std::vector<std::vector<std::uint64_t>>>();
            s.alpha_counts = {{{a.at(0).at(0), a.at(0).at(1)}, {a.at(1).at(0), a.at(1).at(1)}}};
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad summary JSON in " + path.string() + ": " + e.what());
    }
    return s;
}

// --- analytic JSON (report side) ---------------------------------------------------

// Numeric view of a cmd_analytic output file; fraction strings are parsed to
// doubles since the report only does tolerance checks.
struct AnalyticFile {
    std::string model;
    double p = 0.0;
    std::array<double, 2> D{0.0, 0.0};
    std::optional<double> sigma2;
    std::optional<double> lambda;
    std::optional<std::array<std::array<double, 2>, 2>> alpha_star;
};

inline AnalyticFile read_analytic_json(const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    auto frac = [](const nlohmann::json& v) {
        return static_cast<double>(parse_rational(v.get<std::string>()));
    };
    AnalyticFile a;
    try {
        a.model = j.at("model").get<std::string>();
        a.p = frac(j.at("p"));
        if (a.model == "1d") {
            a.D = {frac(j.at("D")), 0.0};
            a.sigma2 = frac(j.at("sigma2"));
            a.lambda = j.at("lambda").get<double>();
        } else {
            const auto& d = j.at("D");
            a.D = {frac(d.at(0)), frac(d.at(1))};
        }
        if (j.contains("alpha_star")) {
            const auto& m = j.at("alpha_star");
            a.alpha_star = {{{frac(m.at(0).at(0)), frac(m.at(0).at(1))},
                             {frac(m.at(1).at(0)), frac(m.at(1).at(1))}}};
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad analytic JSON in " + path.string() + ": " + e.what());
    }
    return a;
}

// --- CSV emitters ----------------------------------------------------------------

// 1D: tile,count,label ; 2D: tile1,tile2,count,label.
inline void write_hist_csv(const std::filesystem::path& path, const EnsembleSummary& s,
                           const Environment& env) {
    std::ostringstream out;
    if (s.dim == 1) {
        out << "tile,count,label\n";
        for (const auto& [tile, count] : s.hist1)
            out << tile << ',' << count << ',' << env.label_at(tile) << '\n';
    } else {
        out << "tile1,tile2,count,label\n";
        for (const auto& [tile, count] : s.hist2)
            out << tile.first << ',' << tile.second << ',' << count << ','
                << env.label_at(tile.first, tile.second) << '\n';
    }
    write_text_file(path, out.str());
}

// Scaled fluctuation samples, one trajectory per row.
inline void write_samples_csv(const std::filesystem::path& path, const EnsembleSummary& s) {
    std::ostringstream out;
    if (s.dim == 1) {
        out << "z\n";
        for (const auto& z : s.samples) out << format_double(z[0]) << '\n';
    } else {
        out << "z1,z2\n";
        for (const auto& z : s.samples)
            out << format_double(z[0]) << ',' << format_double(z[1]) << '\n';
    }
    write_text_file(path, out.str());
}

// Empirical CDF of the scaled samples (per axis in 2D).
inline void write_cdf_csv(const std::filesystem::path& path, const EnsembleSummary& s) {
    std::ostringstream out;
    out << "axis,value,cdf\n";
    for (int axis = 0; axis < s.dim; ++axis) {
        std::vector<double> vals;
        vals.reserve(s.samples.size());
        for (const auto& z : s.samples) vals.push_back(z[axis]);
        std::sort(vals.begin(), vals.end());
        const double inv = vals.empty() ? 0.0 : 1.0 / static_cast<double>(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            out << axis + 1 << ',' << format_double(vals[i]) << ','
                << format_double(static_cast<double>(i + 1) * inv) << '\n';
    }
    write_text_file(path, out.str());
}

inline void write_trace_csv(const std::filesystem::path& path, const EnsembleSummary& s) {
    std::ostringstream out;
    out << "step,v_over_step\n";
    for (const auto& [step, value] : s.trace)
        out << step << ',' << format_double(value) << '\n';
    write_text_file(path, out.str());
}

// tile,probability with exact fractions (exact mode) or decimals (float mode).
inline void write_dist_csv(const std::filesystem::path& path, const DistributionVector& dist) {
    std::ostringstream out;
    out << "tile,probability\n";
    if (dist.exact) {
        for (std::size_t i = 0; i < dist.num.size(); ++i) {
            if (dist.num[i] == 0) continue;
            out << dist.offset + static_cast<std::int64_t>(i) << ','
                << to_fraction(Rational(dist.num[i], dist.den)) << '\n';
        }
    } else {
        for (std::size_t i = 0; i < dist.fw.size(); ++i) {
            if (dist.fw[i] == 0) continue;
            out << dist.offset + static_cast<std::int64_t>(i) << ','
                << dist.fw[i].str(30) << '\n';
        }
    }
    write_text_file(path, out.str());
}

// --- CSV readers (report side) ---------------------------------------------------

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline double parse_probability(const std::string& text) {
    if (text.find('/') != std::string::npos)
        return static_cast<double>(parse_rational(text));
    return std::stod(text);
}

}  // namespace detail

// Returns tile -> count; 1D histograms only.
inline std::map<std::int64_t, std::uint64_t> read_hist_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("tile,", 0) != 0)
        throw IoError("bad histogram CSV header in " + path.string());
    std::map<std::int64_t, std::uint64_t> hist;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = detail::split(line, ',');
        if (parts.size() < 2) throw IoError("bad histogram CSV row in " + path.string());
        hist[std::stoll(parts[0])] += std::stoull(parts[1]);
    }
    return hist;
}

// Returns (tile, probability) rows.
inline std::vector<std::pair<std::int64_t, double>> read_dist_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "tile,probability")
        throw IoError("bad distribution CSV header in " + path.string());
    std::vector<std::pair<std::int64_t, double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = detail::split(line, ',');
        if (parts.size() != 2) throw IoError("bad distribution CSV row in " + path.string());
        rows.emplace_back(std::stoll(parts[0]), detail::parse_probability(parts[1]));
    }
    return rows;
}

// Scaled samples; returns rows padded to 2 columns (second 0 in 1D).
inline std::vector<std::array<double, 2>> read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line) || (line != "z" && line != "z1,z2"))
        throw IoError("bad samples CSV header in " + path.string());
    const bool two = line == "z1,z2";
    std::vector<std::array<double, 2>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto parts = detail::split(line, ',');
        if (parts.size() != (two ? 2u : 1u)) throw IoError("bad samples CSV row in " + path.string());
        rows.push_back({std::stod(parts[0]), two ? std::stod(parts[1]) : 0.0});
    }
    return rows;
}

}  // namespace qwalk::io
