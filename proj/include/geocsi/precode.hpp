#pragma once

// Geometry-based channel synthesis from cluster AoD statistics, an angular RF
// beamformer, zero-forcing baseband precoding, and sum-rate evaluation of the
// hybrid scheme against fully digital zero-forcing.
//
// URA convention: the array lies in the horizontal plane; element (m, n) sits
// at (m d, n d) with d in wavelengths and index m * cols + n. Its phase for
// azimuth phi and elevation theta is 2 pi d (m cos(theta) cos(phi) +
// n cos(theta) sin(phi)), so boresight is theta = +-pi/2.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "geocsi/cluster.hpp"
#include "geocsi/error.hpp"
#include "geocsi/path_io.hpp"
#include "geocsi/rng.hpp"
#include "geocsi/zones.hpp"

namespace geocsi {

using cdouble = std::complex<double>;

struct ArraySpec {
    int rows = 16;
    int cols = 16;
    double element_spacing = 0.5;  // wavelengths

    int size() const { return rows * cols; }

    void validate() const {
        if (rows < 1 || cols < 1) throw std::invalid_argument("ArraySpec: rows and cols must be >= 1");
        if (!(element_spacing > 0.0)) throw std::invalid_argument("ArraySpec: spacing must be positive");
    }
};

/// Unit-modulus response; squared norm is M.
inline Eigen::VectorXcd steering_vector(double aaod, double eaod, const ArraySpec& array) {
    const double k = 2.0 * std::numbers::pi * array.element_spacing;
    const double u = std::cos(eaod) * std::cos(aaod);
    const double v = std::cos(eaod) * std::sin(aaod);
    Eigen::VectorXcd a(array.size());
    for (int m = 0; m < array.rows; ++m)
        for (int n = 0; n < array.cols; ++n) a(m * array.cols + n) = std::polar(1.0, k * (m * u + n * v));
    return a;
}

/// AoD statistics of one cluster as seen by one user.
struct ClusterSource {
    double mean_aaod = 0.0, spread_aaod = 0.0;
    double mean_eaod = 0.0, spread_eaod = 0.0;
    double power = 1.0;  // linear average power P_{k,j}
    int paths = 1;       // L_{j,k}
};

/// Sources for one zone: powers are linear(mean power) normalized to sum to 1.
inline std::vector<ClusterSource> sources_from_group(std::span<const ClusterParams> group_csi, int paths_per_cluster) {
    if (group_csi.empty()) throw std::invalid_argument("sources_from_group: empty group");
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& c : group_csi) top = std::max(top, c.mean_power);
    std::vector<ClusterSource> out;
    double total = 0.0;
    for (const auto& c : group_csi) {
        ClusterSource s{c.mean_aaod, c.spread_aaod, c.mean_eaod, c.spread_eaod, dbm_to_mw(c.mean_power - top),
                        paths_per_cluster};
        total += s.power;
        out.push_back(s);
    }
    for (auto& s : out) s.power /= total;
    return out;
}

/// Element gain Lambda(phi, theta); empty means isotropic (1).
using ElementPattern = std::function<double(double, double)>;

struct PathGain {
    double aaod = 0.0;
    double eaod = 0.0;
    cdouble gain{1.0, 0.0};
    double power = 1.0;  // P_{k,j} of the path's cluster
};

/// h = sum sqrt(P) g Lambda(phi, theta) a(phi, theta).
inline Eigen::VectorXcd channel_from_paths(std::span<const PathGain> paths, const ArraySpec& array,
                                           const ElementPattern& pattern = {}) {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(array.size());
    for (const auto& p : paths) {
        const double lambda = pattern ? pattern(p.aaod, p.eaod) : 1.0;
        h += (std::sqrt(p.power) * p.gain * lambda) * steering_vector(p.aaod, p.eaod, array);
    }
    return h;
}

/// Draws angles uniformly on mean +- spread and gains from CN(0, 1/N_L).
inline std::vector<PathGain> draw_paths(std::span<const ClusterSource> clusters, Rng& rng) {
    if (clusters.empty()) throw std::invalid_argument("synthesize_channel: no clusters");
    int total = 0;
    for (const auto& c : clusters) {
        if (c.paths < 1) throw std::invalid_argument("synthesize_channel: paths per cluster must be >= 1");
        if (!(c.power >= 0.0)) throw std::invalid_argument("synthesize_channel: negative cluster power");
        total += c.paths;
    }
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5 / total));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<PathGain> out;
    for (const auto& c : clusters)
        for (int l = 0; l < c.paths; ++l) {
            PathGain p;
            p.aaod = c.mean_aaod + c.spread_aaod * unit(rng);
            p.eaod = c.mean_eaod + c.spread_eaod * unit(rng);
            const double re = normal(rng);
            p.gain = cdouble(re, normal(rng));
            p.power = c.power;
            out.push_back(p);
        }
    return out;
}

inline Eigen::VectorXcd synthesize_channel(std::span<const ClusterSource> clusters, const ArraySpec& array, Rng& rng,
                                           const ElementPattern& pattern = {}) {
    const auto paths = draw_paths(clusters, rng);
    return channel_from_paths(paths, array, pattern);
}

struct HybridConfig {
    std::vector<int> chains_per_group;  // N_RF^(g)
    std::vector<int> users_per_group;   // K_g

    int rf_chains() const { return std::accumulate(chains_per_group.begin(), chains_per_group.end(), 0); }
    int users() const { return std::accumulate(users_per_group.begin(), users_per_group.end(), 0); }

    void validate(const ArraySpec& array) const {
        if (chains_per_group.empty() || chains_per_group.size() != users_per_group.size())
            throw std::invalid_argument("HybridConfig: one chain count and one user count per group");
        for (std::size_t g = 0; g < chains_per_group.size(); ++g)
            if (chains_per_group[g] < 1 || users_per_group[g] < 0)
                throw std::invalid_argument("HybridConfig: bad per-group counts");
        if (users() > rf_chains()) throw std::invalid_argument("HybridConfig: more users than RF chains");
        if (rf_chains() > array.size()) throw std::invalid_argument("HybridConfig: more RF chains than antennas");
    }
};

/// Beam directions of one group: cluster means first, then offsets of
/// +-spread, +-spread/2, +-spread/4, ... in azimuth and elevation, taken
/// round-robin over clusters. A direction equal to one already chosen is
/// nudged in azimuth by multiples of max(spread/10, 0.01).
inline std::vector<std::pair<double, double>> beam_directions(std::span<const ClusterSource> clusters, int count) {
    if (clusters.empty()) throw std::invalid_argument("rf_beamformer: group without clusters");
    std::vector<std::pair<double, double>> chosen;
    auto same = [](const std::pair<double, double>& a, const std::pair<double, double>& b) {
        return std::abs(a.first - b.first) < 1e-12 && std::abs(a.second - b.second) < 1e-12;
    };
    auto add = [&](std::pair<double, double> d, const ClusterSource& c) {
        const double step = std::max(c.spread_aaod / 10.0, 0.01);
        const std::pair<double, double> base = d;
        for (int k = 1; std::any_of(chosen.begin(), chosen.end(), [&](const auto& e) { return same(e, d); }); ++k)
            d.first = base.first + ((k % 2) ? 1.0 : -1.0) * ((k + 1) / 2) * step;
        chosen.push_back(d);
    };
    for (std::size_t i = 0; i < clusters.size() && static_cast<int>(chosen.size()) < count; ++i)
        add({clusters[i].mean_aaod, clusters[i].mean_eaod}, clusters[i]);
    for (double level = 1.0; static_cast<int>(chosen.size()) < count; level /= 2.0) {
        for (int side = 0; side < 4 && static_cast<int>(chosen.size()) < count; ++side)
            for (std::size_t i = 0; i < clusters.size() && static_cast<int>(chosen.size()) < count; ++i) {
                const auto& c = clusters[i];
                const double sign = side % 2 == 0 ? 1.0 : -1.0;
                if (side < 2) add({c.mean_aaod + sign * level * c.spread_aaod, c.mean_eaod}, c);
                else add({c.mean_aaod, c.mean_eaod + sign * level * c.spread_eaod}, c);
            }
    }
    return chosen;
}

/// F = [F_1, ..., F_G]; every entry has modulus 1/sqrt(M).
inline Eigen::MatrixXcd rf_beamformer(const std::vector<std::vector<ClusterSource>>& groups, const HybridConfig& hybrid,
                                      const ArraySpec& array) {
    array.validate();
    if (groups.size() != hybrid.chains_per_group.size())
        throw std::invalid_argument("rf_beamformer: group count differs from the hybrid configuration");
    Eigen::MatrixXcd f(array.size(), hybrid.rf_chains());
    const double norm = 1.0 / std::sqrt(static_cast<double>(array.size()));
    Eigen::Index col = 0;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& [az, el] : beam_directions(groups[g], hybrid.chains_per_group[g]))
            f.col(col++) = norm * steering_vector(az, el, array).conjugate();  // matched to h^T
    return f;
}

inline double condition_number(const Eigen::MatrixXcd& m) {
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return std::numeric_limits<double>::infinity();
    const double smin = s(s.size() - 1);
    return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

inline constexpr double kMaxConditionNumber = 1e8;

/// Zero-forcing B = Heff^H (Heff Heff^H)^-1 with columns scaled so that
/// ||F b_k||^2 = P_T / K for every user.
inline Eigen::MatrixXcd bb_precoder(const Eigen::MatrixXcd& effective, const Eigen::MatrixXcd& f, double total_power) {
    const Eigen::Index k = effective.rows();
    if (k == 0 || k > effective.cols()) throw IllConditioned(std::numeric_limits<double>::infinity());
    const double cond = condition_number(effective);
    if (!(cond <= kMaxConditionNumber)) throw IllConditioned(cond);
    const Eigen::MatrixXcd gram = effective * effective.adjoint();
    Eigen::MatrixXcd b = effective.adjoint() * gram.ldlt().solve(Eigen::MatrixXcd::Identity(k, k));
    const double per_user = total_power / static_cast<double>(k);
    for (Eigen::Index u = 0; u < k; ++u) b.col(u) *= std::sqrt(per_user) / (f * b.col(u)).norm();
    return b;
}

/// |h_k^T F b_k|^2 / (sum_{i != k} |h_k^T F b_i|^2 + noise); H rows are h_k^T.
inline std::vector<double> sinr(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& b,
                                double noise_power) {
    const Eigen::MatrixXcd g = h * f * b;
    std::vector<double> out(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index k = 0; k < g.rows(); ++k) {
        double interference = 0.0;
        for (Eigen::Index i = 0; i < g.cols(); ++i)
            if (i != k) interference += std::norm(g(k, i));
        out[static_cast<std::size_t>(k)] = std::norm(g(k, k)) / (interference + noise_power);
    }
    return out;
}

inline double rate_of(std::span<const double> sinrs) {
    double r = 0.0;
    for (double s : sinrs) r += std::log2(1.0 + s);
    return r;
}

/// Neumaier-compensated mean.
inline double compensated_mean(std::span<const double> v) {
    double sum = 0.0, c = 0.0;
    for (double x : v) {
        const double t = sum + x;
        c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return v.empty() ? 0.0 : (sum + c) / static_cast<double>(v.size());
}

/// Mean over realizations of sum_k log2(1 + SINR_k).
inline double sum_rate(const std::vector<std::vector<double>>& sinrs_per_realization) {
    if (sinrs_per_realization.empty()) throw std::invalid_argument("sum_rate: no realizations");
    std::vector<double> rates;
    for (const auto& s : sinrs_per_realization) rates.push_back(rate_of(s));
    return compensated_mean(rates);
}

inline double csi_overhead_reduction(int m, int n_rf) {
    if (n_rf > m || m < 1) throw std::invalid_argument("csi_overhead_reduction: need N_RF <= M");
    return 100.0 * (1.0 - static_cast<double>(n_rf) / static_cast<double>(m));
}

/// Sum-rate of zero-forcing on the full channel (F = I).
inline double fdp_rate(const Eigen::MatrixXcd& h, double total_power, double noise_power) {
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(h.cols(), h.cols());
    const Eigen::MatrixXcd b = bb_precoder(h, eye, total_power);
    return rate_of(sinr(h, eye, b, noise_power));
}

inline double abhp_rate(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& f, double total_power, double noise_power) {
    const Eigen::MatrixXcd b = bb_precoder(h * f, f, total_power);
    return rate_of(sinr(h, f, b, noise_power));
}

struct SweepConfig {
    std::vector<double> total_power_dbm = {40.0};
    int realizations = 2000;
    double noise_dbm = -134.0;           // -174 dBm/Hz over 10 kHz
    double large_scale_gain_db = 0.0;    // applied to every user's channel
    int paths_per_cluster = 5;
    std::uint64_t seed = 0;
};

struct SchemeRates {
    double total_power_dbm = 0.0;
    std::vector<double> abhp;  // per realization
    std::vector<double> fdp;
};

/// Users of group g draw channels from groups[g]; both schemes see the same
/// channel realizations.
inline std::vector<SchemeRates> simulate_sum_rate(const std::vector<std::vector<ClusterSource>>& groups,
                                                  const HybridConfig& hybrid, const ArraySpec& array,
                                                  const SweepConfig& sweep) {
    hybrid.validate(array);
    if (sweep.realizations < 1) throw std::invalid_argument("simulate_sum_rate: need at least one realization");
    const Eigen::MatrixXcd f = rf_beamformer(groups, hybrid, array);
    const double noise = dbm_to_mw(sweep.noise_dbm);
    const double amplitude = std::sqrt(std::pow(10.0, sweep.large_scale_gain_db / 10.0));
    std::vector<SchemeRates> out;
    for (double p : sweep.total_power_dbm) out.push_back({p, {}, {}});
    for (int r = 0; r < sweep.realizations; ++r) {
        Rng rng(derive_seed(sweep.seed, "realization", static_cast<std::uint64_t>(r)));
        Eigen::MatrixXcd h(hybrid.users(), array.size());
        Eigen::Index row = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::vector<ClusterSource> sources = groups[g];
            for (auto& s : sources) s.paths = sweep.paths_per_cluster;
            for (int u = 0; u < hybrid.users_per_group[g]; ++u)
                h.row(row++) = amplitude * synthesize_channel(sources, array, rng).transpose();
        }
        for (auto& s : out) {
            const double pt = dbm_to_mw(s.total_power_dbm);
            s.abhp.push_back(abhp_rate(h, f, pt, noise));
            s.fdp.push_back(fdp_rate(h, pt, noise));
        }
    }
    return out;
}

inline double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = compensated_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// P_T_dBm,K_a,scheme,mean_rate,std_rate,n_realizations
inline void write_sumrate_csv(std::ostream& out, std::span<const SchemeRates> rates, int users) {
    out << "P_T_dBm,K_a,scheme,mean_rate,std_rate,n_realizations\n";
    for (const auto& s : rates)
        for (const auto& [name, v] : {std::pair{"AB-HP", &s.abhp}, std::pair{"FDP", &s.fdp}})
            out << format_number(s.total_power_dbm) << ',' << users << ',' << name << ','
                << format_number(compensated_mean(*v)) << ',' << format_number(sample_std(*v)) << ',' << v->size()
                << "\n";
}

}  // namespace geocsi
