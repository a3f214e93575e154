#pragma once

// Hard clusters, per-cluster statistics, outlier pruning, cluster regions and
// UT zones built from the fuzzy partition of existent paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "geocsi/cluster.hpp"
#include "geocsi/path_io.hpp"

namespace geocsi {

struct ClusterParams {
    double mean_aaod = 0.0, mean_eaod = 0.0, mean_aaoa = 0.0, mean_eaoa = 0.0;
    double mean_delay = 0.0;  // s
    double mean_power = 0.0;  // dBm
    double spread_aaod = 0.0, spread_eaod = 0.0, spread_aaoa = 0.0, spread_eaoa = 0.0;
    double spread_delay = 0.0;
    double spread_power = 0.0;  // dB

    static constexpr std::size_t kCount = 12;

    std::array<double, kCount> values() const {
        return {mean_aaod,   mean_eaod,   mean_aaoa,   mean_eaoa,   mean_delay,   mean_power,
                spread_aaod, spread_eaod, spread_aaoa, spread_eaoa, spread_delay, spread_power};
    }

    PathVector mean_vector() const { return {mean_aaod, mean_eaod, mean_aaoa, mean_eaoa, mean_delay}; }
};

/// Power statistics are the plain mean and population deviation in dBm. Angle
/// and delay statistics use linear RSS weights; angles are unwrapped around the
/// strongest path so a cluster straddling +-pi averages correctly.
inline ClusterParams cluster_params(std::span<const PathRecord> paths) {
    if (paths.empty()) throw std::invalid_argument("cluster_params: empty cluster");
    const WeightedPaths data = weighted_paths(paths);
    const std::size_t n = paths.size();

    ClusterParams c;
    double mean_p = 0.0;
    for (const auto& p : paths) mean_p += p.rss_dbm;
    mean_p /= static_cast<double>(n);
    double var_p = 0.0;
    for (const auto& p : paths) var_p += (p.rss_dbm - mean_p) * (p.rss_dbm - mean_p);
    c.mean_power = mean_p;
    c.spread_power = std::sqrt(var_p / static_cast<double>(n));

    const std::size_t ref = static_cast<std::size_t>(
        std::max_element(paths.begin(), paths.end(),
                         [](const PathRecord& a, const PathRecord& b) { return a.rss_dbm < b.rss_dbm; }) -
        paths.begin());
    double total_w = 0.0;
    for (double w : data.weight) total_w += w;

    std::array<double, 5> mean{}, spread{};
    for (std::size_t i = 0; i < 5; ++i) {
        const double anchor = data.x[ref][i];
        auto offset = [&](std::size_t l) {
            const double d = data.x[l][i] - anchor;
            return i < 4 ? wrap_angle(d) : d;
        };
        double m = 0.0;
        for (std::size_t l = 0; l < n; ++l) m += data.weight[l] * offset(l);
        m /= total_w;
        double v = 0.0;
        for (std::size_t l = 0; l < n; ++l) v += data.weight[l] * (offset(l) - m) * (offset(l) - m);
        mean[i] = anchor + m;
        if (i < 4 && (mean[i] < -std::numbers::pi || mean[i] >= std::numbers::pi)) mean[i] = wrap_angle(mean[i]);
        spread[i] = std::sqrt(v / total_w);
    }
    c.mean_aaod = mean[0];
    c.mean_eaod = mean[1];
    c.mean_aaoa = mean[2];
    c.mean_eaoa = mean[3];
    c.mean_delay = mean[4];
    c.spread_aaod = spread[0];
    c.spread_eaod = spread[1];
    c.spread_aaoa = spread[2];
    c.spread_eaoa = spread[3];
    c.spread_delay = spread[4];
    return c;
}

/// Every parameter keeps more than `ratio` of the benchmark's magnitude; a
/// zero benchmark parameter always passes.
inline bool within_benchmark(const ClusterParams& candidate, const ClusterParams& benchmark, double ratio = 0.95) {
    const auto c = candidate.values();
    const auto b = benchmark.values();
    for (std::size_t i = 0; i < ClusterParams::kCount; ++i) {
        if (b[i] == 0.0) continue;
        if (!(std::abs(c[i]) > ratio * std::abs(b[i]))) return false;
    }
    return true;
}

struct PruneResult {
    std::vector<PathRecord> kept;
    std::vector<std::size_t> kept_indices;  // into the input span
    ClusterParams params;
    ClusterParams benchmark;
    int rounds = 0;  // accepted removals
};

/// Repeatedly drops the path farthest from the current means while the
/// parameters stay within 95% of the benchmark, never going below two paths.
inline PruneResult prune_cluster(std::span<const PathRecord> paths, const ClusterParams& benchmark,
                                 double ratio = 0.95) {
    if (paths.size() < 2) throw std::invalid_argument("prune_cluster: at least two paths required");
    PruneResult r;
    r.benchmark = benchmark;
    r.kept.assign(paths.begin(), paths.end());
    r.kept_indices.resize(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) r.kept_indices[i] = i;
    r.params = cluster_params(r.kept);

    while (r.kept.size() > 2) {
        const PathVector centre = r.params.mean_vector();
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t l = 0; l < r.kept.size(); ++l) {
            const double d = angular_distance(r.kept[l].vector(), centre);
            if (d > far_d) {
                far_d = d;
                far = l;
            }
        }
        std::vector<PathRecord> next = r.kept;
        next.erase(next.begin() + static_cast<std::ptrdiff_t>(far));
        const ClusterParams next_params = cluster_params(next);
        if (!within_benchmark(next_params, benchmark, ratio)) break;
        r.kept = std::move(next);
        r.kept_indices.erase(r.kept_indices.begin() + static_cast<std::ptrdiff_t>(far));
        r.params = next_params;
        ++r.rounds;
    }
    return r;
}

/// Hard clusters as lists of indices into the clustered path list.
inline std::vector<std::vector<std::size_t>> cluster_members(std::span<const int> assignment, int clusters) {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(clusters));
    for (std::size_t l = 0; l < assignment.size(); ++l) out.at(static_cast<std::size_t>(assignment[l])).push_back(l);
    return out;
}

/// Parameters of every hard cluster (nullopt for an empty one), pruned when
/// `prune` is set and the cluster has at least two paths.
inline std::vector<std::optional<ClusterParams>> all_cluster_params(std::span<const PathRecord> paths,
                                                                    std::span<const int> assignment, int clusters,
                                                                    bool prune, double ratio = 0.95) {
    std::vector<std::optional<ClusterParams>> out;
    for (const auto& members : cluster_members(assignment, clusters)) {
        if (members.empty()) {
            out.emplace_back();
            continue;
        }
        std::vector<PathRecord> sub;
        for (std::size_t l : members) sub.push_back(paths[l]);
        const ClusterParams base = cluster_params(sub);
        out.emplace_back(prune && sub.size() >= 2 ? prune_cluster(sub, base, ratio).params : base);
    }
    return out;
}

struct ClusterRegion {
    int cluster_id = 0;
    std::set<int> deterministic_locations;
    std::set<int> fuzzy_locations;

    std::set<int> support() const {
        std::set<int> s = deterministic_locations;
        s.insert(fuzzy_locations.begin(), fuzzy_locations.end());
        return s;
    }
};

/// A location belongs to region j when one of its paths is assigned to j; it
/// is deterministic if any such path has membership >= threshold.
inline std::vector<ClusterRegion> cluster_regions(std::span<const int> assignment, const MembershipMatrix& u,
                                                  std::span<const PathRecord> paths, double threshold = 0.6) {
    if (assignment.size() != paths.size() || u.paths() != paths.size())
        throw std::invalid_argument("cluster_regions: inconsistent inputs");
    std::vector<ClusterRegion> regions(u.clusters());
    for (std::size_t j = 0; j < regions.size(); ++j) regions[j].cluster_id = static_cast<int>(j);
    for (std::size_t l = 0; l < paths.size(); ++l) {
        const auto j = static_cast<std::size_t>(assignment[l]);
        if (u(j, l) >= threshold) regions[j].deterministic_locations.insert(paths[l].ut_index);
    }
    for (std::size_t l = 0; l < paths.size(); ++l) {
        auto& r = regions[static_cast<std::size_t>(assignment[l])];
        if (!r.deterministic_locations.contains(paths[l].ut_index)) r.fuzzy_locations.insert(paths[l].ut_index);
    }
    return regions;
}

inline constexpr int kBlockZoneId = 0;

struct UTZone {
    int zone_id = 0;
    std::vector<int> cluster_group;  // sorted cluster ids; empty for the block zone
    std::vector<int> locations;      // sorted ut indices
    std::vector<ClusterParams> group_csi;

    bool is_block() const { return cluster_group.empty(); }
};

struct ZoneMap {
    std::vector<UTZone> zones;  // zones[0] is the block zone
    std::vector<int> zone_of;   // per location
};

/// Groups locations by the exact set of clusters their existent paths fall in.
/// Zone 0 holds blocked locations; the others follow the lexicographic order of
/// their cluster groups.
inline ZoneMap form_zones(std::size_t location_count, std::span<const int> assignment,
                          std::span<const PathRecord> paths,
                          std::span<const std::optional<ClusterParams>> params) {
    if (assignment.size() != paths.size()) throw std::invalid_argument("form_zones: inconsistent inputs");
    std::vector<std::set<int>> groups(location_count);
    for (std::size_t l = 0; l < paths.size(); ++l) {
        if (!paths[l].existent) continue;
        groups.at(static_cast<std::size_t>(paths[l].ut_index)).insert(assignment[l]);
    }
    std::map<std::vector<int>, std::vector<int>> by_group;
    ZoneMap map;
    map.zones.push_back(UTZone{kBlockZoneId, {}, {}, {}});
    for (std::size_t k = 0; k < location_count; ++k) {
        if (groups[k].empty()) {
            map.zones[0].locations.push_back(static_cast<int>(k));
            continue;
        }
        by_group[std::vector<int>(groups[k].begin(), groups[k].end())].push_back(static_cast<int>(k));
    }
    map.zone_of.assign(location_count, kBlockZoneId);
    for (auto& [group, locations] : by_group) {
        UTZone z;
        z.zone_id = static_cast<int>(map.zones.size());
        z.cluster_group = group;
        z.locations = std::move(locations);
        for (int j : group) {
            const auto idx = static_cast<std::size_t>(j);
            if (idx >= params.size() || !params[idx]) throw std::invalid_argument("form_zones: missing parameters for an assigned cluster");
            z.group_csi.push_back(*params[idx]);
        }
        for (int k : z.locations) map.zone_of[static_cast<std::size_t>(k)] = z.zone_id;
        map.zones.push_back(std::move(z));
    }
    return map;
}

/// AoD, delay and power statistics; arrival angles are left out.
inline nlohmann::ordered_json group_csi_json(const ClusterParams& c) {
    nlohmann::ordered_json j;
    j["mean_aaod"] = c.mean_aaod;
    j["mean_eaod"] = c.mean_eaod;
    j["mean_delay"] = c.mean_delay;
    j["mean_power"] = c.mean_power;
    j["spread_aaod"] = c.spread_aaod;
    j["spread_eaod"] = c.spread_eaod;
    j["spread_delay"] = c.spread_delay;
    j["spread_power"] = c.spread_power;
    return j;
}

inline ClusterParams group_csi_from_json(const nlohmann::json& j) {
    ClusterParams c;
    c.mean_aaod = j.at("mean_aaod");
    c.mean_eaod = j.at("mean_eaod");
    c.mean_delay = j.at("mean_delay");
    c.mean_power = j.at("mean_power");
    c.spread_aaod = j.at("spread_aaod");
    c.spread_eaod = j.at("spread_eaod");
    c.spread_delay = j.at("spread_delay");
    c.spread_power = j.at("spread_power");
    return c;
}

inline nlohmann::ordered_json zones_json(const ZoneMap& map) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& z : map.zones) {
        nlohmann::ordered_json j;
        j["zone_id"] = z.zone_id;
        j["cluster_group"] = z.cluster_group;
        j["locations"] = z.locations;
        j["group_csi"] = nlohmann::ordered_json::array();
        for (const auto& c : z.group_csi) j["group_csi"].push_back(group_csi_json(c));
        out.push_back(std::move(j));
    }
    return out;
}

inline ZoneMap zones_from_json(const nlohmann::json& j, std::size_t location_count) {
    ZoneMap map;
    map.zone_of.assign(location_count, kBlockZoneId);
    for (const auto& zj : j) {
        UTZone z;
        z.zone_id = zj.at("zone_id");
        z.cluster_group = zj.at("cluster_group").get<std::vector<int>>();
        z.locations = zj.at("locations").get<std::vector<int>>();
        for (const auto& c : zj.at("group_csi")) z.group_csi.push_back(group_csi_from_json(c));
        for (int k : z.locations) map.zone_of.at(static_cast<std::size_t>(k)) = z.zone_id;
        map.zones.push_back(std::move(z));
    }
    return map;
}

/// x,y,z,zone_id per location.
inline void write_zone_csv(std::ostream& out, std::span<const Point3> locations, const ZoneMap& map) {
    out << "x,y,z,zone_id\n";
    for (std::size_t k = 0; k < locations.size(); ++k)
        out << format_number(locations[k].x) << ',' << format_number(locations[k].y) << ','
            << format_number(locations[k].z) << ',' << map.zone_of.at(k) << "\n";
}

}  // namespace geocsi
