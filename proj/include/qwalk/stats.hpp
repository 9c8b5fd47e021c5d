#pragma once

// Ensemble statistics: mergeable moment accumulators, empirical CDFs,
// Gaussian reference CDFs, Kolmogorov-Smirnov distances, label-conditional
// histograms, and the empirical effective-transition estimate.
//
// The dynamics layer is exact; this layer is deliberately double precision
// (CLT-scale comparisons need ~1e-3 resolution, far above double rounding).
// Summaries merge associatively and are always combined in fixed shard-index
// order, which is what makes parallel ensemble runs bit-reproducible.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/errors.hpp"

namespace qwalk {

// Streaming mean / co-moment accumulator (Welford update, Chan merge).
struct MomentAccumulator {
    int dim = 1;
    std::uint64_t count = 0;
    std::array<double, 2> mean{0.0, 0.0};
    std::array<std::array<double, 2>, 2> m2{{{0.0, 0.0}, {0.0, 0.0}}};

    void add(const std::array<double, 2>& x) {
        ++count;
        const double inv = 1.0 / static_cast<double>(count);
        std::array<double, 2> delta{0.0, 0.0};
        for (int i = 0; i < dim; ++i) {
            delta[i] = x[i] - mean[i];
            mean[i] += delta[i] * inv;
        }
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m2[i][j] += delta[i] * (x[j] - mean[j]);
    }

    void merge(const MomentAccumulator& b) {
        if (b.count == 0) return;
        if (count == 0) {
            *this = b;
            return;
        }
        const double na = static_cast<double>(count);
        const double nb = static_cast<double>(b.count);
        const double nt = na + nb;
        std::array<double, 2> delta{0.0, 0.0};
        for (int i = 0; i < dim; ++i) delta[i] = b.mean[i] - mean[i];
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                m2[i][j] += b.m2[i][j] + delta[i] * delta[j] * na * nb / nt;
        for (int i = 0; i < dim; ++i) mean[i] += delta[i] * nb / nt;
        count += b.count;
    }

    // Sample covariance (unbiased); zero until two samples arrive.
    double covariance(int i, int j) const {
        return count < 2 ? 0.0 : m2[i][j] / static_cast<double>(count - 1);
    }
};

// Accumulated results of one ensemble run.  Moments and samples are stored
// in the scaled variable z = (v_n - n*D)/sqrt(n); raw means are recovered
// through drift_ref.  Stopped / boundary-hit trajectories are counted but
// excluded from every statistic.
struct EnsembleSummary {
    std::string model;  // "1d" or "2d"
    int dim = 1;
    std::uint64_t n = 0;
    std::uint64_t count = 0;
    std::uint64_t stopped = 0;
    std::uint64_t master_seed = 0;
    std::string mode;  // "deterministic" or "markov"
    std::array<double, 2> drift_ref{0.0, 0.0};

    MomentAccumulator moments;
    std::map<std::int64_t, std::uint64_t> hist1;
    std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> hist2;
    std::array<std::uint64_t, 2> label_count{0, 0};
    std::array<std::uint64_t, 2> lyap_count{0, 0};  // map-0 / map-1 applications
    bool alpha_recorded = false;
    std::array<std::array<std::uint64_t, 2>, 2> alpha_count{{{0, 0}, {0, 0}}};
    bool samples_retained = false;
    std::vector<std::array<double, 2>> samples;  // scaled; [0] only in 1D
    std::vector<std::pair<std::uint64_t, double>> trace;  // (step, v/step)

    std::uint64_t used() const { return count - stopped; }

    double mean_raw(int i) const {
        return static_cast<double>(n) * drift_ref[i] +
               std::sqrt(static_cast<double>(n)) * moments.mean[i];
    }

    std::array<double, 2> label_mass() const {
        const std::uint64_t total = label_count[0] + label_count[1];
        if (total == 0) return {0.0, 0.0};
        return {static_cast<double>(label_count[0]) / static_cast<double>(total),
                static_cast<double>(label_count[1]) / static_cast<double>(total)};
    }

    // Merge a later shard into this one.  Callers must merge shards in
    // increasing index order so that retained sample order (and therefore
    // every output byte) is schedule-independent.
    void merge(EnsembleSummary&& b) {
        count += b.count;
        stopped += b.stopped;
        moments.merge(b.moments);
        for (const auto& [k, c] : b.hist1) hist1[k] += c;
        for (const auto& [k, c] : b.hist2) hist2[k] += c;
        for (int i = 0; i < 2; ++i) label_count[i] += b.label_count[i];
        for (int i = 0; i < 2; ++i) lyap_count[i] += b.lyap_count[i];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) alpha_count[i][j] += b.alpha_count[i][j];
        samples.insert(samples.end(), b.samples.begin(), b.samples.end());
        trace.insert(trace.end(), b.trace.begin(), b.trace.end());
    }
};

// (v_n - n*D)/sqrt(n), the CLT variable.
inline double scaled_fluctuation(double v, std::uint64_t n, double D) {
    if (n < 1) throw InvalidInput("scaled_fluctuation: n must be >= 1");
    return (v - static_cast<double>(n) * D) / std::sqrt(static_cast<double>(n));
}

inline std::array<double, 2> scaled_fluctuation(const std::array<double, 2>& v, std::uint64_t n,
                                                const std::array<double, 2>& D) {
    return {scaled_fluctuation(v[0], n, D[0]), scaled_fluctuation(v[1], n, D[1])};
}

// CDF of N(0, sigma2) evaluated at y; absolute error well below 1e-12.
inline double gaussian_cdf_1d(double y, double sigma2) {
    if (!(sigma2 > 0)) throw InvalidInput("gaussian_cdf_1d: variance must be positive");
    return 0.5 * std::erfc(-y / std::sqrt(2.0 * sigma2));
}

namespace detail {

// 16-point Gauss-Legendre nodes/weights on [-1,1] (symmetric halves).
inline constexpr std::array<std::array<double, 2>, 8> kGl16 = {{
    {0.09501250983763744019, 0.18945061045506849629},
    {0.28160355077925891323, 0.18260341504492358887},
    {0.45801677765722738634, 0.16915651939500253819},
    {0.61787624440264374845, 0.14959598881657673208},
    {0.75540440835500303390, 0.12462897125553387205},
    {0.86563120238783174388, 0.09515851168249278481},
    {0.94457502307323257608, 0.06225352393864789286},
    {0.98940093499164993260, 0.02715245941175409485},
}};

inline double std_normal_pdf(double t) {
    return std::exp(-0.5 * t * t) * 0.3989422804014326779;
}

inline double std_normal_cdf(double t) { return 0.5 * std::erfc(-t * 0.70710678118654752440); }

}  // namespace detail

// CDF of the centered bivariate normal with covariance `cov`, evaluated at z:
// P(S1 <= z1, S2 <= z2).  Reduction to a 1D integral of the conditional
// normal CDF against the first marginal, integrated by composite 16-point
// Gauss-Legendre over [-10, z1/s1] standard deviations (truncation error
// ~1e-23); absolute error comfortably below 1e-6.
inline double gaussian_cdf_2d(const std::array<double, 2>& z,
                              const std::array<std::array<double, 2>, 2>& cov) {
    const double c00 = cov[0][0], c11 = cov[1][1];
    const double c01 = 0.5 * (cov[0][1] + cov[1][0]);
    if (std::abs(cov[0][1] - cov[1][0]) > 1e-9 * (std::abs(c01) + 1.0))
        throw InvalidInput("gaussian_cdf_2d: covariance must be symmetric");
    if (!(c00 > 0) || !(c11 > 0) || !(c00 * c11 - c01 * c01 > 0))
        throw InvalidInput("gaussian_cdf_2d: covariance must be positive definite");

    const double s0 = std::sqrt(c00);
    const double s1 = std::sqrt(c11);
    const double rho = c01 / (s0 * s1);
    const double a = z[0] / s0;
    const double b = z[1] / s1;

    constexpr double kTail = 10.0;
    if (a <= -kTail || b <= -kTail) return 0.0;
    const double upper = std::min(a, kTail);
    if (rho == 0.0) return detail::std_normal_cdf(upper) * detail::std_normal_cdf(b);

    const double denom = std::sqrt(1.0 - rho * rho);
    auto integrand = [&](double t) {
        return detail::std_normal_pdf(t) * detail::std_normal_cdf((b - rho * t) / denom);
    };

    const double lo = -kTail;
    const int segments = std::max(1, static_cast<int>(std::ceil((upper - lo) / 0.5)));
    const double h = (upper - lo) / segments;
    double total = 0.0;
    for (int s = 0; s < segments; ++s) {
        const double mid = lo + (s + 0.5) * h;
        const double half = 0.5 * h;
        double acc = 0.0;
        for (const auto& [node, weight] : detail::kGl16)
            acc += weight * (integrand(mid - half * node) + integrand(mid + half * node));
        total += acc * half;
    }
    return total;
}

// Exact sup-distance between the empirical CDF of `samples` and a model CDF,
// evaluated at the jump points (both one-sided gaps per sample).
inline double ks_distance(std::vector<double> samples,
                          const std::function<double(double)>& model_cdf) {
    if (samples.empty()) throw InvalidInput("ks_distance: empty sample set");
    std::sort(samples.begin(), samples.end());
    const double inv = 1.0 / static_cast<double>(samples.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = model_cdf(samples[i]);
        sup = std::max(sup, std::max(f - static_cast<double>(i) * inv,
                                     static_cast<double>(i + 1) * inv - f));
    }
    return sup;
}

// Max |empirical CDF - Gaussian CDF| over a regular grid spanning
// mean +- span_sd standard deviations per axis.  The Gaussian reference is
// centered at `mean` with covariance `cov` (both typically empirical).
inline double ks_grid_2d(const std::vector<std::array<double, 2>>& points,
                         const std::array<double, 2>& mean,
                         const std::array<std::array<double, 2>, 2>& cov, int grid_n = 201,
                         double span_sd = 4.0) {
    if (points.empty()) throw InvalidInput("ks_grid_2d: empty sample set");
    if (grid_n < 2) throw InvalidInput("ks_grid_2d: grid must have at least 2 points per axis");
    const double s0 = std::sqrt(cov[0][0]);
    const double s1 = std::sqrt(cov[1][1]);

    // Sorted copy by x for the sweep; sorted unique y values for rank queries.
    std::vector<std::array<double, 2>> pts = points;
    std::sort(pts.begin(), pts.end());
    std::vector<double> ys(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) ys[i] = points[i][1];
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    std::vector<std::uint32_t> fenwick(ys.size() + 1, 0);
    auto fenwick_add = [&](std::size_t rank) {
        for (std::size_t i = rank + 1; i < fenwick.size(); i += i & (~i + 1)) ++fenwick[i];
    };
    auto fenwick_count_le = [&](double y) {
        auto it = std::upper_bound(ys.begin(), ys.end(), y);
        std::size_t idx = static_cast<std::size_t>(it - ys.begin());
        std::uint64_t total = 0;
        for (std::size_t i = idx; i > 0; i -= i & (~i + 1)) total += fenwick[i];
        return total;
    };

    const double inv = 1.0 / static_cast<double>(points.size());
    double sup = 0.0;
    std::size_t next_point = 0;
    for (int gi = 0; gi < grid_n; ++gi) {
        const double frac = static_cast<double>(gi) / (grid_n - 1);
        const double gx = mean[0] + (-span_sd + 2.0 * span_sd * frac) * s0;
        while (next_point < pts.size() && pts[next_point][0] <= gx) {
            auto it = std::lower_bound(ys.begin(), ys.end(), pts[next_point][1]);
            fenwick_add(static_cast<std::size_t>(it - ys.begin()));
            ++next_point;
        }
        for (int gj = 0; gj < grid_n; ++gj) {
            const double fy = static_cast<double>(gj) / (grid_n - 1);
            const double gy = mean[1] + (-span_sd + 2.0 * span_sd * fy) * s1;
            const double ecdf = static_cast<double>(fenwick_count_le(gy)) * inv;
            const double gcdf = gaussian_cdf_2d({gx - mean[0], gy - mean[1]}, cov);
            sup = std::max(sup, std::abs(ecdf - gcdf));
        }
    }
    return sup;
}

// Split of the end-tile histogram by the label of the end tile.
struct ConditionalHistograms {
    std::map<std::int64_t, std::uint64_t> hist0;
    std::map<std::int64_t, std::uint64_t> hist1;
    double mass0 = 0.0;
    double mass1 = 0.0;
};

template <typename EnvT>
ConditionalHistograms conditional_label_histograms(
    const std::map<std::int64_t, std::uint64_t>& tile_histogram, const EnvT& env) {
    ConditionalHistograms out;
    std::uint64_t total = 0, c0 = 0;
    for (const auto& [tile, count] : tile_histogram) {
        total += count;
        if (env.label_at(tile) == 0) {
            out.hist0[tile] += count;
            c0 += count;
        } else {
            out.hist1[tile] += count;
        }
    }
    if (total > 0) {
        out.mass0 = static_cast<double>(c0) / static_cast<double>(total);
        out.mass1 = 1.0 - out.mass0;
    }
    return out;
}

// L1 distance between the label-0 tile-frequency curve and the label-1 curve
// stretched by p/(1-p).  The two histograms live on disjoint tile sets, so
// the comparison is made after binning both curves in the scaled variable
// y = (tile - n*D)/sqrt(n*sigma2) with the given bin width.
inline double stretched_l1(const ConditionalHistograms& split, std::uint64_t used_total,
                           std::uint64_t n, double D, double sigma2, double p,
                           double bin_width = 0.25) {
    if (used_total == 0) throw InvalidInput("stretched_l1: empty histograms");
    if (!(bin_width > 0)) throw InvalidInput("stretched_l1: bin width must be positive");
    const double scale = std::sqrt(static_cast<double>(n) * sigma2);
    const double inv = 1.0 / static_cast<double>(used_total);
    auto bin_of = [&](std::int64_t tile) {
        const double y = (static_cast<double>(tile) - static_cast<double>(n) * D) / scale;
        return static_cast<std::int64_t>(std::floor(y / bin_width));
    };
    std::map<std::int64_t, std::array<double, 2>> bins;
    for (const auto& [tile, count] : split.hist0) bins[bin_of(tile)][0] += count * inv;
    for (const auto& [tile, count] : split.hist1) bins[bin_of(tile)][1] += count * inv;
    const double stretch = p / (1.0 - p);
    double l1 = 0.0;
    for (const auto& [bin, masses] : bins) l1 += std::abs(masses[0] - stretch * masses[1]);
    return l1;
}

// Row-normalized label-to-label transition frequencies; a row with no
// observations is flagged undefined rather than treated as an error.
struct EmpiricalAlpha {
    std::array<std::array<double, 2>, 2> value{{{0.0, 0.0}, {0.0, 0.0}}};
    std::array<bool, 2> defined{false, false};
};

inline EmpiricalAlpha empirical_alpha(const std::array<std::array<std::uint64_t, 2>, 2>& counts) {
    EmpiricalAlpha out;
    for (int i = 0; i < 2; ++i) {
        const std::uint64_t row = counts[i][0] + counts[i][1];
        if (row == 0) {
            out.value[i] = {std::nan(""), std::nan("")};
            continue;
        }
        out.defined[i] = true;
        for (int j = 0; j < 2; ++j)
            out.value[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(row);
    }
    return out;
}

}  // namespace qwalk
