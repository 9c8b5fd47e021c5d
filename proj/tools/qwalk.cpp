// qwalk: deterministic walks in quenched random environments of chaotic maps.
//
// Subcommands:
//   env       generate or inspect a QWENV1 environment file
//   analytic  closed-form drift / variance / Lyapunov / transition matrix
//   sim       Monte Carlo ensembles (1D deterministic or Markov-reduced, 2D deterministic)
//   dist      exact or floating push-forward of the 1D tile distribution
//   report    tolerance checks comparing run outputs against analytic values
//
// Exit codes: 0 success (report: all checks pass), 1 runtime refusal or
// failed report check, 2 usage error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qwalk/bigrat.hpp"
#include "qwalk/environment.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/geometry.hpp"
#include "qwalk/io.hpp"
#include "qwalk/model1d.hpp"
#include "qwalk/model2d.hpp"
#include "qwalk/stats.hpp"

namespace {

using namespace qwalk;
using nlohmann::ordered_json;

constexpr const char* kVersion = "qwalk 1.0.0";

// Usage errors exit with code 2; runtime refusals with 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string decimal12(const Rational& r) { return to_decimal(r, 12); }

// ---------------------------------------------------------------- env ------

struct EnvArgs {
    std::string out;
    std::string in;
    std::uint64_t seed = 0;
    std::string p0 = "1/2";
    int dim = 1;
    std::vector<std::uint64_t> extent;
};

int cmd_env(const EnvArgs& a) {
    if (a.out.empty() == a.in.empty())
        throw UsageError("env: pass exactly one of --out (generate) or --in (inspect)");
    Environment env = [&] {
        if (!a.in.empty()) return Environment::load(a.in);
        auto extent = a.extent;
        if (extent.empty()) throw UsageError("env: --extent is required with --out");
        if (a.dim == 2 && extent.size() == 1) extent.push_back(extent[0]);
        if (extent.size() != static_cast<std::size_t>(a.dim))
            throw UsageError("env: --extent needs one value per dimension");
        return Environment::generate(a.seed, io::parse_rational(a.p0), a.dim, extent);
    }();
    if (!a.out.empty()) env.save(a.out);

    const Rational fraction = env.label_fraction();
    ordered_json j;
    j["path"] = a.out.empty() ? a.in : a.out;
    j["dim"] = env.dim();
    j["extent"] = env.extent();
    j["p0"] = to_fraction(env.p0());
    j["seed"] = env.seed();
    j["rng_id"] = env.rng_id();
    j["label_fraction"] = to_fraction(fraction);
    j["label_fraction_decimal"] = to_decimal(fraction, 6);
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ----------------------------------------------------------- analytic ------

struct AnalyticArgs {
    std::string model = "1d";
    std::string a0;
    std::string a1;
    std::string p0 = "1/2";
    std::string out;
};

ordered_json analytic_json_1d(const Params1D& params) {
    const Rational p = analytic_p(params);
    const Rational d = analytic_drift(params);
    const Rational s2 = analytic_variance(params);
    const auto alpha = analytic_alpha_star(params);
    ordered_json j;
    j["model"] = "1d";
    j["A0"] = params.A0;
    j["A1"] = params.A1;
    j["p0"] = to_fraction(params.p0);
    j["p"] = to_fraction(p);
    j["D"] = to_fraction(d);
    j["sigma2"] = to_fraction(s2);
    j["lambda"] = analytic_lyapunov(params);
    j["alpha_star"] = ordered_json::array(
        {ordered_json::array({to_fraction(alpha[0][0]), to_fraction(alpha[0][1])}),
         ordered_json::array({to_fraction(alpha[1][0]), to_fraction(alpha[1][1])})});
    j["decimal"] = {{"p", decimal12(p)}, {"D", decimal12(d)}, {"sigma2", decimal12(s2)}};
    return j;
}

ordered_json analytic_json_2d(const Params2D& params) {
    const Analytic2D an = analytic_2d(params);
    auto vec = [](const std::array<Rational, 2>& v) {
        return ordered_json{to_fraction(v[0]), to_fraction(v[1])};
    };
    ordered_json j;
    j["model"] = "2d";
    j["A0"] = io::format_matrix2(params.A0);
    j["A1"] = io::format_matrix2(params.A1);
    j["p0"] = to_fraction(params.p0);
    j["self_overlap"] = vec(an.self_overlap);
    j["alpha_star"] = ordered_json::array(
        {ordered_json::array({to_fraction(an.alpha_star[0][0]), to_fraction(an.alpha_star[0][1])}),
         ordered_json::array({to_fraction(an.alpha_star[1][0]), to_fraction(an.alpha_star[1][1])})});
    j["p"] = to_fraction(an.p);
    j["D0"] = vec(an.D0);
    j["D1"] = vec(an.D1);
    j["D"] = vec(an.D);
    j["decimal"] = {{"p", decimal12(an.p)},
                    {"D", {decimal12(an.D[0]), decimal12(an.D[1])}}};
    return j;
}

Params1D params_1d(const std::string& a0, const std::string& a1, const std::string& p0) {
    Params1D p;
    try {
        if (!a0.empty()) p.A0 = std::stoll(a0);
        if (!a1.empty()) p.A1 = std::stoll(a1);
    } catch (const std::exception&) {
        throw UsageError("1d multipliers must be integers, got --A0 '" + a0 + "' --A1 '" + a1 +
                         "'");
    }
    p.p0 = io::parse_rational(p0);
    p.validate();
    return p;
}

Params2D params_2d(const std::string& a0, const std::string& a1, const std::string& p0) {
    Params2D p;
    if (!a0.empty()) p.A0 = io::parse_matrix2(a0);
    if (!a1.empty()) p.A1 = io::parse_matrix2(a1);
    p.p0 = io::parse_rational(p0);
    p.validate();
    return p;
}

int cmd_analytic(const AnalyticArgs& a) {
    ordered_json j;
    if (a.model == "1d")
        j = analytic_json_1d(params_1d(a.a0, a.a1, a.p0));
    else if (a.model == "2d")
        j = analytic_json_2d(params_2d(a.a0, a.a1, a.p0));
    else
        throw UsageError("analytic: --model must be 1d or 2d");
    std::cout << j.dump(2) << "\n";
    if (!a.out.empty()) io::write_json_file(a.out, j);
    return 0;
}

// ---------------------------------------------------------------- sim ------

struct SimArgs {
    std::string env_file;
    std::string model = "1d";
    std::string mode = "deterministic";
    std::uint64_t n = 0;
    std::uint64_t count = 0;
    std::uint64_t seed = 0;
    std::string out_prefix;
    std::string a0;
    std::string a1;
    unsigned threads = 1;
    std::uint64_t denominator_bits = 128;
    bool no_samples = false;
    bool record_alpha = false;
    std::int64_t trace_every = -1;  // -1: auto (n/1000 when count == 1)
};

int cmd_sim(const SimArgs& a) {
    if (a.model != "1d" && a.model != "2d") throw UsageError("sim: --model must be 1d or 2d");
    if (a.mode != "deterministic" && a.mode != "markov")
        throw UsageError("sim: --mode must be deterministic or markov");
    if (a.model == "2d" && a.mode == "markov")
        throw UsageError(
            "sim: markov mode is unavailable for the 2d model; the unit-square tiling is not "
            "a Markov partition for these maps, so no Markov reduction exists");
    if (a.out_prefix.empty()) throw UsageError("sim: --out prefix is required");

    const auto t0 = std::chrono::steady_clock::now();
    const Environment env = Environment::load(a.env_file);
    std::uint64_t trace_every = 0;
    if (a.count == 1) trace_every = a.trace_every >= 0 ? a.trace_every : std::max<std::uint64_t>(1, a.n / 1000);

    EnsembleSummary summary;
    ordered_json params_json;
    if (a.model == "1d") {
        const Params1D params = params_1d(a.a0, a.a1, to_fraction(env.p0()));
        EnsembleOptions opts;
        opts.threads = a.threads;
        opts.denominator_bits = a.denominator_bits;
        opts.retain_samples = !a.no_samples;
        opts.record_alpha = a.record_alpha;
        opts.trace_every = trace_every;
        const SimMode mode =
            a.mode == "markov" ? SimMode::markov : SimMode::deterministic;
        summary = run_ensemble_1d(env, params, a.n, a.count, mode, a.seed, opts);
        params_json = {{"A0", params.A0}, {"A1", params.A1}, {"p0", to_fraction(params.p0)}};
    } else {
        const Params2D params = params_2d(a.a0, a.a1, to_fraction(env.p0()));
        EnsembleOptions2D opts;
        opts.threads = a.threads;
        opts.denominator_bits = a.denominator_bits;
        opts.retain_samples = !a.no_samples;
        summary = run_ensemble_2d(env, params, a.n, a.count, a.seed, opts);
        params_json = {{"A0", io::format_matrix2(params.A0)},
                       {"A1", io::format_matrix2(params.A1)},
                       {"p0", to_fraction(params.p0)}};
    }

    ordered_json sj = io::summary_to_json(summary);
    if (a.model == "1d" && summary.lyap_count[0] + summary.lyap_count[1] > 0) {
        const Params1D params = params_1d(a.a0, a.a1, to_fraction(env.p0()));
        const double steps =
            static_cast<double>(summary.lyap_count[0] + summary.lyap_count[1]);
        sj["lyapunov_empirical"] =
            (static_cast<double>(summary.lyap_count[0]) *
                 std::log(static_cast<double>(params.A0)) +
             static_cast<double>(summary.lyap_count[1]) *
                 std::log(static_cast<double>(params.A1))) /
            steps;
    }

    const std::string prefix = a.out_prefix;
    io::write_json_file(prefix + ".summary.json", sj);
    io::write_hist_csv(prefix + ".hist.csv", summary, env);
    io::write_cdf_csv(prefix + ".cdf.csv", summary);
    if (summary.samples_retained) io::write_samples_csv(prefix + ".samples.csv", summary);
    if (!summary.trace.empty()) io::write_trace_csv(prefix + ".trace.csv", summary);

    // Manifest: equal manifests (minus wall_clock_seconds/workers) imply
    // byte-identical data outputs.
    ordered_json manifest;
    manifest["tool"] = "qwalk";
    manifest["version"] = kVersion;
    manifest["command"] = "sim";
    params_json["model"] = a.model;
    params_json["mode"] = a.mode;
    params_json["n"] = a.n;
    params_json["count"] = a.count;
    params_json["seed"] = a.seed;
    params_json["denominator_bits"] = a.denominator_bits;
    params_json["retain_samples"] = !a.no_samples;
    params_json["record_alpha"] = a.record_alpha;
    params_json["trace_every"] = trace_every;
    manifest["parameters"] = params_json;
    manifest["environment"] = {{"file", a.env_file},
                               {"fnv1a64", io::hex64(io::file_fnv1a64(a.env_file))}};
    manifest["rng"] = {{"rng_id", rng::kRngId}, {"shard_size", detail::kShardSize}};
    ordered_json outputs;
    for (const char* suffix : {".summary.json", ".hist.csv", ".cdf.csv", ".samples.csv", ".trace.csv"}) {
        const std::string file = prefix + suffix;
        if (std::filesystem::exists(file))
            outputs[suffix + 1] = {{"file", file}, {"fnv1a64", io::hex64(io::file_fnv1a64(file))}};
    }
    manifest["outputs"] = outputs;
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest["workers"] = a.threads;
    io::write_json_file(prefix + ".manifest.json", manifest);

    std::cout << sj.dump(2) << "\n";
    return 0;
}

// --------------------------------------------------------------- dist ------

struct DistArgs {
    std::string env_file;
    std::uint64_t n = 0;
    std::string out;
    std::string a0;
    std::string a1;
    std::int64_t start = 0;
    std::string mode = "exact";
    std::uint64_t exact_cap = 2000;
};

int cmd_dist(const DistArgs& a) {
    if (a.mode != "exact" && a.mode != "float")
        throw UsageError("dist: --mode must be exact or float");
    if (a.out.empty()) throw UsageError("dist: --out is required");
    if (a.mode == "exact" && a.n > a.exact_cap)
        throw UsageError("dist: exact mode is capped at n = " + std::to_string(a.exact_cap) +
                         " (got n = " + std::to_string(a.n) +
                         "); rerun with --mode float or raise --exact-cap");
    const Environment env = Environment::load(a.env_file);
    const Params1D params = params_1d(a.a0, a.a1, to_fraction(env.p0()));
    const DistMode mode = a.mode == "exact" ? DistMode::exact : DistMode::floating;
    const DistributionVector rho =
        propagate_distribution(env, params, DistributionVector::delta(a.start), a.n, mode);
    io::write_dist_csv(a.out, rho);

    ordered_json j;
    j["model"] = "1d";
    j["n"] = a.n;
    j["mode"] = a.mode;
    j["start"] = a.start;
    const Rational nn = a.n > 0 ? Rational(a.n) : Rational(1);  // n=0: report raw moments
    if (mode == DistMode::exact) {
        const DistMomentsExact m = dist_moments_exact(rho);
        Int total = 0;
        for (const auto& w : rho.num) total += w;
        j["mean"] = to_fraction(m.mean);
        j["variance"] = to_fraction(m.variance);
        j["mean_over_n"] = to_fraction(m.mean / nn);
        j["variance_over_n"] = to_fraction(m.variance / nn);
        j["mean_over_n_decimal"] = decimal12(m.mean / nn);
        j["variance_over_n_decimal"] = decimal12(m.variance / nn);
        j["sum"] = to_fraction(Rational(total, rho.den));
    } else {
        const auto [mean, var] = dist_moments_float(rho);
        Float50 total = 0;
        for (const auto& w : rho.fw) total += w;
        const Float50 nf = static_cast<double>(nn);
        j["mean"] = mean.str(25);
        j["variance"] = var.str(25);
        j["mean_over_n"] = (mean / nf).str(25);
        j["variance_over_n"] = (var / nf).str(25);
        j["sum"] = total.str(25);
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ------------------------------------------------------------- report ------

struct ReportArgs {
    std::string summary;
    std::string analytic;
    std::string samples;
    std::string hist;
    std::string dist;
    std::string env_file;
    std::string out;
    double tol_drift = -1.0;  // default depends on model: 0.01 (1d abs), 0.02 (2d rel)
    double tol_var = 0.05;
    double tol_lyap = 0.01;
    double tol_label = 0.01;
    double tol_alpha = 0.02;
    double tol_ks = 0.012;
    double tol_ks2 = 0.05;
    double tol_tv = 0.01;
    double tol_l1 = 0.05;
    double l1_bin = 0.25;
    int grid_n = 201;
    double span_sd = 4.0;
};

int cmd_report(const ReportArgs& a) {
    if (a.summary.empty() || a.analytic.empty())
        throw UsageError("report: --summary and --analytic are required");
    const io::SummaryFile s = io::read_summary_json(a.summary);
    const io::AnalyticFile an = io::read_analytic_json(a.analytic);
    if (s.model != an.model)
        throw UsageError("report: summary model '" + s.model + "' does not match analytic model '" +
                         an.model + "'");

    ordered_json checks = ordered_json::array();
    bool all_pass = true;
    auto add = [&](const std::string& name, double value, double tol) {
        const bool pass = std::isfinite(value) && value <= tol;
        checks.push_back({{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}});
        all_pass = all_pass && pass;
    };
    const double nd = static_cast<double>(s.n);

    if (s.model == "1d") {
        const double tol = a.tol_drift >= 0 ? a.tol_drift : 0.01;
        add("drift_abs", std::abs(s.mean.at(0) / nd - an.D[0]), tol);
        if (an.sigma2)
            // summary `cov` is the covariance of the scaled samples
            // (V - nD)/sqrt(n), i.e. already Var(V)/n.
            add("variance_rel", std::abs(s.cov.at(0).at(0) - *an.sigma2) / *an.sigma2, a.tol_var);
    } else {
        const double tol = a.tol_drift >= 0 ? a.tol_drift : 0.02;
        double worst = 0.0;
        for (int i = 0; i < 2; ++i)
            worst = std::max(worst, std::abs(s.mean.at(i) / nd - an.D[i]) / std::abs(an.D[i]));
        add("drift_rel_max", worst, tol);
    }

    add("label_mass_abs", std::abs(s.label_mass[0] - an.p), a.tol_label);

    if (s.lyapunov_empirical && an.lambda)
        add("lyapunov_rel", std::abs(*s.lyapunov_empirical - *an.lambda) / *an.lambda, a.tol_lyap);

    if (s.alpha_counts) {
        if (!an.alpha_star) throw UsageError("report: analytic file lacks alpha_star");
        const EmpiricalAlpha emp = empirical_alpha(*s.alpha_counts);
        double worst = 0.0;
        for (int i = 0; i < 2; ++i) {
            if (!emp.defined[i]) {
                worst = std::numeric_limits<double>::quiet_NaN();
                break;
            }
            for (int j = 0; j < 2; ++j)
                worst = std::max(worst, std::abs(emp.value[i][j] - (*an.alpha_star)[i][j]));
        }
        add("alpha_max_abs", worst, a.tol_alpha);
    }

    if (!a.samples.empty()) {
        const auto rows = io::read_samples_csv(a.samples);
        if (s.model == "1d") {
            std::vector<double> z;
            z.reserve(rows.size());
            for (const auto& r : rows) z.push_back(r[0]);
            const double sigma2 = an.sigma2 ? *an.sigma2 : 1.0;
            add("ks_gaussian",
                ks_distance(std::move(z), [&](double y) { return gaussian_cdf_1d(y, sigma2); }),
                a.tol_ks);
        } else {
            MomentAccumulator acc;
            acc.dim = 2;
            for (const auto& r : rows) acc.add(r);
            const std::array<double, 2> mean{acc.mean[0], acc.mean[1]};
            const std::array<std::array<double, 2>, 2> cov{
                {{acc.covariance(0, 0), acc.covariance(0, 1)},
                 {acc.covariance(1, 0), acc.covariance(1, 1)}}};
            add("ks_grid_gaussian", ks_grid_2d(rows, mean, cov, a.grid_n, a.span_sd), a.tol_ks2);
        }
    }

    if (!a.hist.empty() && !a.dist.empty()) {
        const auto hist = io::read_hist_csv(a.hist);
        const auto dist = io::read_dist_csv(a.dist);
        std::uint64_t used = 0;
        for (const auto& [tile, c] : hist) used += c;
        if (used == 0) throw UsageError("report: histogram is empty");
        std::map<std::int64_t, double> diff;
        for (const auto& [tile, c] : hist)
            diff[tile] += static_cast<double>(c) / static_cast<double>(used);
        for (const auto& [tile, prob] : dist) diff[tile] -= prob;
        double tv = 0.0;
        for (const auto& [tile, d] : diff) tv += std::abs(d);
        add("tv_hist_vs_dist", 0.5 * tv, a.tol_tv);
    }

    if (!a.hist.empty() && !a.env_file.empty() && s.model == "1d") {
        if (!an.sigma2) throw UsageError("report: analytic file lacks sigma2");
        const Environment env = Environment::load(a.env_file);
        const auto hist = io::read_hist_csv(a.hist);
        std::uint64_t used = 0;
        for (const auto& [tile, c] : hist) used += c;
        const ConditionalHistograms split = conditional_label_histograms(hist, env);
        add("stretched_l1",
            stretched_l1(split, used, s.n, an.D[0], *an.sigma2, an.p, a.l1_bin), a.tol_l1);
    }

    ordered_json j;
    j["model"] = s.model;
    j["checks"] = checks;
    j["all_pass"] = all_pass;
    std::cout << j.dump(2) << "\n";
    if (!a.out.empty()) io::write_json_file(a.out, j);
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic walks in quenched random environments of chaotic maps"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    EnvArgs ea;
    auto* env_cmd = app.add_subcommand("env", "generate or inspect a QWENV1 environment file");
    env_cmd->add_option("--out", ea.out, "output file (generate mode)");
    env_cmd->add_option("--in", ea.in, "existing file to inspect");
    env_cmd->add_option("--seed", ea.seed, "environment seed");
    env_cmd->add_option("--p0", ea.p0, "label-0 probability, fraction a/b")->capture_default_str();
    env_cmd->add_option("--dim", ea.dim, "dimension (1 or 2)")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    env_cmd->add_option("--extent", ea.extent,
                        "tiles per axis (one value, or two values for --dim 2)");

    AnalyticArgs aa;
    auto* an_cmd = app.add_subcommand("analytic", "closed-form drift/variance/Lyapunov/alpha*");
    an_cmd->add_option("--model", aa.model, "1d or 2d")->capture_default_str();
    an_cmd->add_option("--A0", aa.a0, "label-0 map: integer (1d) or matrix a,b;c,d (2d)");
    an_cmd->add_option("--A1", aa.a1, "label-1 map: integer (1d) or matrix a,b;c,d (2d)");
    an_cmd->add_option("--p0", aa.p0, "label-0 probability, fraction a/b")->capture_default_str();
    an_cmd->add_option("--out", aa.out, "also write the JSON report to this file");

    SimArgs sa;
    auto* sim_cmd = app.add_subcommand("sim", "Monte Carlo ensemble; writes summary/CSVs/manifest");
    sim_cmd->add_option("--env", sa.env_file, "QWENV1 environment file")->required();
    sim_cmd->add_option("--model", sa.model, "1d or 2d")->capture_default_str();
    sim_cmd->add_option("--mode", sa.mode, "deterministic or markov (1d only)")
        ->capture_default_str();
    sim_cmd->add_option("--n", sa.n, "steps per trajectory")->required();
    sim_cmd->add_option("--count", sa.count, "number of trajectories")->required();
    sim_cmd->add_option("--seed", sa.seed, "master seed for trajectory substreams");
    sim_cmd->add_option("--out", sa.out_prefix, "output path prefix")->required();
    sim_cmd->add_option("--A0", sa.a0, "label-0 map (default 2 / 2,1;1,1)");
    sim_cmd->add_option("--A1", sa.a1, "label-1 map (default 3 / 3,1;2,1)");
    sim_cmd->add_option("--threads", sa.threads, "worker threads (wall-clock only, never bytes)")
        ->capture_default_str();
    sim_cmd->add_option("--denominator-bits", sa.denominator_bits,
                        "fixed power-of-two denominator of the initial point")
        ->capture_default_str();
    sim_cmd->add_flag("--no-samples", sa.no_samples, "skip the scaled-sample CSV");
    sim_cmd->add_flag("--record-alpha", sa.record_alpha,
                      "record the end-of-run label transition (one extra step)");
    sim_cmd->add_option("--trace-every", sa.trace_every,
                        "v/step trace stride when --count 1 (default n/1000)");

    DistArgs da;
    auto* dist_cmd =
        app.add_subcommand("dist", "push the 1d tile distribution forward n steps");
    dist_cmd->add_option("--env", da.env_file, "QWENV1 environment file")->required();
    dist_cmd->add_option("--n", da.n, "number of steps")->required();
    dist_cmd->add_option("--out", da.out, "output CSV (tile,probability)")->required();
    dist_cmd->add_option("--A0", da.a0, "label-0 multiplier (default 2)");
    dist_cmd->add_option("--A1", da.a1, "label-1 multiplier (default 3)");
    dist_cmd->add_option("--start", da.start, "initial tile")->capture_default_str();
    dist_cmd->add_option("--mode", da.mode, "exact or float")->capture_default_str();
    dist_cmd->add_option("--exact-cap", da.exact_cap, "largest n allowed in exact mode")
        ->capture_default_str();

    ReportArgs ra;
    auto* rep_cmd = app.add_subcommand(
        "report", "tolerance checks against analytic values; exit 0 iff all pass");
    rep_cmd->add_option("--summary", ra.summary, "summary JSON from qwalk sim")->required();
    rep_cmd->add_option("--analytic", ra.analytic, "analytic JSON from qwalk analytic")
        ->required();
    rep_cmd->add_option("--samples", ra.samples, "scaled-sample CSV (enables KS checks)");
    rep_cmd->add_option("--hist", ra.hist, "tile histogram CSV");
    rep_cmd->add_option("--dist", ra.dist, "exact distribution CSV (with --hist: TV check)");
    rep_cmd->add_option("--env", ra.env_file,
                        "environment file (with --hist: stretched-L1 check)");
    rep_cmd->add_option("--out", ra.out, "also write the report JSON to this file");
    rep_cmd->add_option("--tol-drift", ra.tol_drift,
                        "drift tolerance (1d: absolute on mean/n, default 0.01; 2d: relative "
                        "per component, default 0.02)");
    rep_cmd->add_option("--tol-var", ra.tol_var, "relative variance tolerance (1d)")
        ->capture_default_str();
    rep_cmd->add_option("--tol-lyap", ra.tol_lyap, "relative Lyapunov tolerance")
        ->capture_default_str();
    rep_cmd->add_option("--tol-label", ra.tol_label, "absolute label-mass tolerance")
        ->capture_default_str();
    rep_cmd->add_option("--tol-alpha", ra.tol_alpha, "max-entry alpha tolerance")
        ->capture_default_str();
    rep_cmd->add_option("--tol-ks", ra.tol_ks, "1d KS tolerance vs N(0, sigma2)")
        ->capture_default_str();
    rep_cmd->add_option("--tol-ks2", ra.tol_ks2, "2d grid KS tolerance (empirical mean/cov)")
        ->capture_default_str();
    rep_cmd->add_option("--tol-tv", ra.tol_tv, "TV tolerance, histogram vs exact distribution")
        ->capture_default_str();
    rep_cmd->add_option("--tol-l1", ra.tol_l1, "stretched-L1 tolerance")->capture_default_str();
    rep_cmd->add_option("--l1-bin", ra.l1_bin, "stretched-L1 bin width in the CLT variable")
        ->capture_default_str();
    rep_cmd->add_option("--grid-n", ra.grid_n, "2d KS grid points per axis")
        ->capture_default_str();
    rep_cmd->add_option("--span-sd", ra.span_sd, "2d KS grid half-width in SDs")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (env_cmd->parsed()) return cmd_env(ea);
        if (an_cmd->parsed()) return cmd_analytic(aa);
        if (sim_cmd->parsed()) return cmd_sim(sa);
        if (dist_cmd->parsed()) return cmd_dist(da);
        if (rep_cmd->parsed()) return cmd_report(ra);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInput& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
