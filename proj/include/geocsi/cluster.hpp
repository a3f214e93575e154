#pragma once

// Fuzzy c-means over path parameter vectors with RSS-weighted centroids and a
// periodic distance on the four angle components, plus cluster validity
// indices and automatic selection of the cluster count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "geocsi/error.hpp"
#include "geocsi/geometry.hpp"
#include "geocsi/raytrace.hpp"
#include "geocsi/rng.hpp"

namespace geocsi {

/// sqrt(|dtau|^2 + sum over the four angles of (mod(|d| + pi, 2 pi) - pi)^2).
inline double angular_distance(const PathVector& x, const PathVector& v) {
    constexpr double pi = std::numbers::pi;
    const double dt = x[4] - v[4];
    double sum = dt * dt;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = std::fmod(std::abs(x[i] - v[i]) + pi, 2.0 * pi) - pi;
        sum += d * d;
    }
    return std::sqrt(sum);
}

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

struct FcmConfig {
    double fuzzifier = 2.0;  // m > 1
    double epsilon = 1e-6;   // stop when |J_n - J_{n-1}| < epsilon
    int max_iterations = 500;
    std::uint64_t seed = 0;
    int clusters = 2;

    void validate() const {
        if (!(fuzzifier > 1.0)) throw std::invalid_argument("FcmConfig: fuzzifier must exceed 1");
        if (!(epsilon > 0.0)) throw std::invalid_argument("FcmConfig: epsilon must be positive");
        if (max_iterations < 1) throw std::invalid_argument("FcmConfig: max_iterations must be >= 1");
        if (clusters < 2) throw std::invalid_argument("FcmConfig: at least 2 clusters required");
    }
};

/// Memberships u(j, l) of path l in cluster j; every column sums to one.
class MembershipMatrix {
public:
    MembershipMatrix() = default;
    MembershipMatrix(std::size_t clusters, std::size_t paths)
        : clusters_(clusters), paths_(paths), u_(clusters * paths, 0.0) {}

    std::size_t clusters() const { return clusters_; }
    std::size_t paths() const { return paths_; }

    double operator()(std::size_t j, std::size_t l) const { return u_[l * clusters_ + j]; }
    double& operator()(std::size_t j, std::size_t l) { return u_[l * clusters_ + j]; }

    std::span<const double> column(std::size_t l) const { return {u_.data() + l * clusters_, clusters_}; }
    std::span<double> column(std::size_t l) { return {u_.data() + l * clusters_, clusters_}; }

private:
    std::size_t clusters_ = 0;
    std::size_t paths_ = 0;
    std::vector<double> u_;
};

/// Path vectors with linear RSS weights normalized to mean one.
struct WeightedPaths {
    std::vector<PathVector> x;
    std::vector<double> weight;

    std::size_t size() const { return x.size(); }
};

inline WeightedPaths weighted_paths(std::span<const PathRecord> paths) {
    WeightedPaths out;
    out.x.reserve(paths.size());
    out.weight.reserve(paths.size());
    double max_dbm = kNegInf;
    for (const auto& p : paths) {
        if (!p.existent) throw std::invalid_argument("clustering accepts existent paths only");
        if (!std::isfinite(p.rss_dbm)) throw std::invalid_argument("clustering: non-finite RSS");
        max_dbm = std::max(max_dbm, p.rss_dbm);
    }
    double total = 0.0;
    for (const auto& p : paths) {
        out.x.push_back(p.vector());
        // Relative to the strongest path to stay clear of underflow; the
        // weights normalize out of every update.
        out.weight.push_back(dbm_to_mw(p.rss_dbm - max_dbm));
        total += out.weight.back();
    }
    const double mean = paths.empty() ? 1.0 : total / static_cast<double>(paths.size());
    for (auto& w : out.weight) w /= mean;
    return out;
}

/// Membership update for fixed centroids. A path at zero distance from one or
/// more centroids belongs entirely to the first of them.
inline void update_memberships(std::span<const PathVector> x, std::span<const PathVector> centroids,
                               double fuzzifier, MembershipMatrix& u) {
    const std::size_t c = centroids.size();
    const double p = 2.0 / (fuzzifier - 1.0);
    std::vector<double> e(c);
    for (std::size_t l = 0; l < x.size(); ++l) {
        double e_min = std::numeric_limits<double>::infinity();
        std::size_t zero_at = c;
        for (std::size_t j = 0; j < c; ++j) {
            e[j] = angular_distance(x[l], centroids[j]);
            if (e[j] == 0.0 && zero_at == c) zero_at = j;
            e_min = std::min(e_min, e[j]);
        }
        auto col = u.column(l);
        if (zero_at != c) {
            std::fill(col.begin(), col.end(), 0.0);
            col[zero_at] = 1.0;
            continue;
        }
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            col[j] = std::pow(e_min / e[j], p);
            total += col[j];
        }
        for (std::size_t j = 0; j < c; ++j) col[j] /= total;
    }
}

inline MembershipMatrix memberships(std::span<const PathVector> x, std::span<const PathVector> centroids,
                                    double fuzzifier) {
    MembershipMatrix u(centroids.size(), x.size());
    update_memberships(x, centroids, fuzzifier, u);
    return u;
}

/// RSS- and membership-weighted centroid update. Angle offsets are taken
/// relative to the current centroid (nearest periodic image), which equals the
/// plain weighted mean whenever a cluster spans less than pi; resulting angles
/// are wrapped into [-pi, pi). A cluster with zero total weight keeps its centroid.
inline void update_centroids(const WeightedPaths& data, const MembershipMatrix& u, double fuzzifier,
                             std::vector<PathVector>& centroids) {
    const std::size_t c = centroids.size();
    for (std::size_t j = 0; j < c; ++j) {
        PathVector acc{};
        double den = 0.0;
        const PathVector& v = centroids[j];
        for (std::size_t l = 0; l < data.size(); ++l) {
            const double w = data.weight[l] * std::pow(u(j, l), fuzzifier);
            if (w == 0.0) continue;
            for (std::size_t i = 0; i < 4; ++i) acc[i] += w * wrap_angle(data.x[l][i] - v[i]);
            acc[4] += w * (data.x[l][4] - v[4]);
            den += w;
        }
        if (!(den > 0.0)) continue;
        PathVector next;
        for (std::size_t i = 0; i < 4; ++i) next[i] = wrap_angle(v[i] + acc[i] / den);
        next[4] = v[4] + acc[4] / den;
        centroids[j] = next;
    }
}

/// sum_l w_l sum_j u_lj^m E_lj^2 with weights of mean one (all-equal RSS gives
/// the unweighted objective). Pass empty weights for the unweighted form.
inline double fcm_objective(std::span<const PathVector> x, std::span<const double> weight,
                            const MembershipMatrix& u, std::span<const PathVector> centroids,
                            double fuzzifier) {
    double total = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) {
        double row = 0.0;
        for (std::size_t j = 0; j < centroids.size(); ++j) {
            const double e = angular_distance(x[l], centroids[j]);
            row += std::pow(u(j, l), fuzzifier) * e * e;
        }
        total += weight.empty() ? row : weight[l] * row;
    }
    return total;
}

struct FcmResult {
    MembershipMatrix membership;
    std::vector<PathVector> centroids;
    std::vector<double> objective_history;             // RSS-weighted, non-increasing
    std::vector<double> unweighted_objective_history;  // plain sum of u^m E^2
    int iterations = 0;
    bool converged = false;
};

inline FcmResult fcm_fit(const WeightedPaths& data, const FcmConfig& cfg, std::vector<PathVector> initial) {
    cfg.validate();
    if (initial.size() != static_cast<std::size_t>(cfg.clusters))
        throw std::invalid_argument("fcm_fit: initial centroid count differs from cluster count");
    if (data.size() < initial.size()) throw std::invalid_argument("fcm_fit: fewer paths than clusters");
    FcmResult r;
    r.centroids = std::move(initial);
    for (auto& v : r.centroids)
        for (std::size_t i = 0; i < 4; ++i) v[i] = wrap_angle(v[i]);
    r.membership = MembershipMatrix(r.centroids.size(), data.size());
    double previous = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= cfg.max_iterations; ++n) {
        update_memberships(data.x, r.centroids, cfg.fuzzifier, r.membership);
        update_centroids(data, r.membership, cfg.fuzzifier, r.centroids);
        const double j = fcm_objective(data.x, data.weight, r.membership, r.centroids, cfg.fuzzifier);
        r.objective_history.push_back(j);
        r.unweighted_objective_history.push_back(
            fcm_objective(data.x, {}, r.membership, r.centroids, cfg.fuzzifier));
        r.iterations = n;
        if (std::abs(previous - j) < cfg.epsilon) {
            r.converged = true;
            break;
        }
        previous = j;
    }
    return r;
}

/// Fits with centroids seeded from `clusters` distinct paths drawn uniformly.
inline FcmResult fcm_fit(const WeightedPaths& data, const FcmConfig& cfg) {
    cfg.validate();
    const std::size_t c = static_cast<std::size_t>(cfg.clusters);
    if (data.size() < c) throw std::invalid_argument("fcm_fit: fewer paths than clusters");
    Rng rng(cfg.seed);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<PathVector> init;
    for (std::size_t k = 0; k < c; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
        std::swap(idx[k], idx[pick(rng)]);
        init.push_back(data.x[idx[k]]);
    }
    return fcm_fit(data, cfg, std::move(init));
}

inline FcmResult fcm_fit(std::span<const PathRecord> paths, const FcmConfig& cfg) {
    return fcm_fit(weighted_paths(paths), cfg);
}

/// Maximum-membership cluster of every path; ties go to the lowest index.
inline std::vector<int> hard_assign(const MembershipMatrix& u) {
    std::vector<int> out(u.paths());
    for (std::size_t l = 0; l < u.paths(); ++l) {
        const auto col = u.column(l);
        out[l] = static_cast<int>(std::max_element(col.begin(), col.end()) - col.begin());
    }
    return out;
}

struct ValidityRow {
    int c = 0;
    double pc = 0.0;  // partition coefficient, higher is better
    double pe = 0.0;  // partition entropy
    double sc = 0.0;  // partition index
    double s = 0.0;   // separation index
    double xb = 0.0;  // Xie-Beni index
    bool degenerate = false;  // coincident centroids or an empty hard cluster
};

/// The five validity indices, with angular_distance in place of the
/// Euclidean norm for path-centroid and centroid-centroid terms.
inline ValidityRow validity_indices(std::span<const PathVector> x, const MembershipMatrix& u,
                                    std::span<const PathVector> centroids, double fuzzifier) {
    const std::size_t n = x.size();
    const std::size_t c = centroids.size();
    if (u.paths() != n || u.clusters() != c) throw std::invalid_argument("validity_indices: shape mismatch");
    constexpr double inf = std::numeric_limits<double>::infinity();
    ValidityRow row;
    row.c = static_cast<int>(c);
    std::vector<double> compact(c, 0.0);
    double xb_num = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t j = 0; j < c; ++j) {
            const double ulj = u(j, l);
            row.pc += ulj * ulj;
            if (ulj > 0.0) row.pe -= ulj * std::log(ulj);
            const double e = angular_distance(x[l], centroids[j]);
            compact[j] += std::pow(ulj, fuzzifier) * e * e;
            xb_num += ulj * ulj * e * e;
        }
    }
    row.pc /= static_cast<double>(n);
    row.pe /= static_cast<double>(n);

    std::vector<int> hard_count(c, 0);
    for (int j : hard_assign(u)) ++hard_count[static_cast<std::size_t>(j)];

    double min_sep = inf;
    row.sc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        double sep = 0.0;
        for (std::size_t q = 0; q < c; ++q) {
            const double d = angular_distance(centroids[q], centroids[j]);
            sep += d * d;
            if (q != j) min_sep = std::min(min_sep, d * d);
        }
        const double den = hard_count[j] * sep;
        if (!(den > 0.0)) {
            row.degenerate = true;
            row.sc = inf;
        } else if (!row.degenerate) {
            row.sc += compact[j] / den;
        }
    }
    const double total_compact = std::accumulate(compact.begin(), compact.end(), 0.0);
    if (!(min_sep > 0.0)) {
        row.degenerate = true;
        row.s = row.xb = inf;
    } else {
        row.s = total_compact / (static_cast<double>(n) * min_sep);
        row.xb = xb_num / (static_cast<double>(n) * min_sep);
    }
    return row;
}

struct ClusterSelection {
    int best_c = 0;
    std::vector<ValidityRow> report;
    std::vector<double> scores;  // aligned with report; NaN for degenerate rows
    FcmResult best_fit;
};

/// Scores each non-degenerate row: every index is min-max normalized across
/// candidates, score = pc + (1-pe) + (1-sc) + (1-s) + (1-xb). Ties go to the
/// smaller c.
inline std::vector<double> score_validity(std::span<const ValidityRow> rows) {
    std::vector<double> scores(rows.size(), std::numeric_limits<double>::quiet_NaN());
    auto norm_of = [&](auto field) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& r : rows) {
            if (r.degenerate) continue;
            lo = std::min(lo, r.*field);
            hi = std::max(hi, r.*field);
        }
        return [=](const ValidityRow& r) { return hi > lo ? (r.*field - lo) / (hi - lo) : 0.0; };
    };
    const auto pc = norm_of(&ValidityRow::pc);
    const auto pe = norm_of(&ValidityRow::pe);
    const auto sc = norm_of(&ValidityRow::sc);
    const auto s = norm_of(&ValidityRow::s);
    const auto xb = norm_of(&ValidityRow::xb);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.degenerate) continue;
        scores[i] = pc(r) + (1.0 - pe(r)) + (1.0 - sc(r)) + (1.0 - s(r)) + (1.0 - xb(r));
    }
    return scores;
}

/// Fits c = 2..c_max (each with its own derived seed) and picks the best count.
/// Throws DegeneratePartition when several candidates exist and all are degenerate.
inline ClusterSelection select_cluster_count(const WeightedPaths& data, int c_max, const FcmConfig& cfg) {
    if (c_max < 2) throw std::invalid_argument("select_cluster_count: c_max must be >= 2");
    if (static_cast<std::size_t>(c_max) > data.size())
        throw std::invalid_argument("select_cluster_count: c_max exceeds the number of paths");
    ClusterSelection sel;
    std::vector<FcmResult> fits;
    for (int c = 2; c <= c_max; ++c) {
        FcmConfig cc = cfg;
        cc.clusters = c;
        cc.seed = derive_seed(cfg.seed, "fcm", static_cast<std::uint64_t>(c));
        fits.push_back(fcm_fit(data, cc));
        sel.report.push_back(
            validity_indices(data.x, fits.back().membership, fits.back().centroids, cfg.fuzzifier));
    }
    sel.scores = score_validity(sel.report);
    std::size_t best = sel.report.size();
    for (std::size_t i = 0; i < sel.report.size(); ++i) {
        if (std::isnan(sel.scores[i])) continue;
        if (best == sel.report.size() || sel.scores[i] > sel.scores[best]) best = i;
    }
    if (best == sel.report.size()) {
        // A lone candidate is returned as is; otherwise a fully degenerate sweep is an error.
        if (sel.report.size() != 1) throw DegeneratePartition("every candidate cluster count is degenerate");
        best = 0;
    }
    sel.best_c = sel.report[best].c;
    sel.best_fit = std::move(fits[best]);
    return sel;
}

inline ClusterSelection select_cluster_count(std::span<const PathRecord> paths, int c_max, const FcmConfig& cfg) {
    return select_cluster_count(weighted_paths(paths), c_max, cfg);
}

}  // namespace geocsi
