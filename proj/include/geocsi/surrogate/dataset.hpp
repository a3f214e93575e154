#pragma once

// Learning samples: one row per candidate path slot of a traced location.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "geocsi/raytrace.hpp"
#include "geocsi/rng.hpp"
#include "geocsi/scene.hpp"

namespace geocsi {

inline constexpr std::size_t kFeatureCount = 15;
inline constexpr std::size_t kTargetCount = 6;

/// BS xyz, UT xyz, then the first three vertices of the plane.
using FeatureVector = std::array<double, kFeatureCount>;

/// aaod, eaod, aaoa, eaoa, rss (dBm), delay (s).
using TargetVector = std::array<double, kTargetCount>;

inline constexpr std::array<const char*, kTargetCount> kTargetNames = {"aaod", "eaod", "aaoa",
                                                                         "eaoa", "rss",  "delay"};

inline FeatureVector extract_features(const Point3& bs, const Point3& ut, std::span<const Point3> plane_vertices) {
    if (plane_vertices.size() < 3) throw std::invalid_argument("extract_features: plane needs three vertices");
    FeatureVector f{};
    const Point3 pts[5] = {bs, ut, plane_vertices[0], plane_vertices[1], plane_vertices[2]};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < 3; ++k) f[3 * i + k] = pts[i][k];
    return f;
}

/// LoS slot: the plane block repeats the BS coordinates.
inline FeatureVector extract_features(const Point3& bs, const Point3& ut) {
    const Point3 sentinel[3] = {bs, bs, bs};
    return extract_features(bs, ut, sentinel);
}

inline FeatureVector extract_features(const Point3& bs, const Point3& ut, const Plane* plane) {
    return plane ? extract_features(bs, ut, plane->vertices()) : extract_features(bs, ut);
}

struct LabeledPath {
    FeatureVector features{};
    int label = 0;         // 1 = existent
    TargetVector targets{};  // meaningful only when label == 1
    int ut_index = 0;
    PathKind kind = PathKind::LineOfSight;
    std::optional<int> plane_id;
};

inline TargetVector targets_of(const PathRecord& p) {
    return {p.aaod, p.eaod, p.aaoa, p.eaoa, p.rss_dbm, p.delay_s};
}

inline LabeledPath label_path(const Scene& scene, std::span<const Point3> locations, const PathRecord& p) {
    LabeledPath s;
    const Point3& ut = locations[static_cast<std::size_t>(p.ut_index)];
    s.features = p.plane_id ? extract_features(scene.bs_position, ut, scene.planes.at(static_cast<std::size_t>(*p.plane_id)).vertices())
                            : extract_features(scene.bs_position, ut);
    s.label = p.existent ? 1 : 0;
    s.targets = targets_of(p);
    s.ut_index = p.ut_index;
    s.kind = p.kind;
    s.plane_id = p.plane_id;
    return s;
}

inline std::vector<LabeledPath> build_dataset(const Scene& scene, std::span<const Point3> locations,
                                              std::span<const PathRecord> paths) {
    std::vector<LabeledPath> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(label_path(scene, locations, p));
    return out;
}

/// Every candidate slot of an unseen location (LoS then one per plane).
inline std::vector<LabeledPath> candidate_slots(const Scene& scene, const Point3& ut, int ut_index) {
    std::vector<LabeledPath> out;
    LabeledPath los;
    los.features = extract_features(scene.bs_position, ut);
    los.ut_index = ut_index;
    out.push_back(los);
    for (std::size_t i = 0; i < scene.planes.size(); ++i) {
        LabeledPath s;
        s.features = extract_features(scene.bs_position, ut, scene.planes[i].vertices());
        s.ut_index = ut_index;
        s.kind = PathKind::Reflection;
        s.plane_id = static_cast<int>(i);
        out.push_back(s);
    }
    return out;
}

struct LocationSplit {
    std::vector<int> train;  // sorted location indices
    std::vector<int> test;
};

/// Location-level split with round(ratio * K) training locations.
inline LocationSplit split_dataset(std::size_t location_count, double ratio_train, std::uint64_t seed) {
    if (!(ratio_train > 0.0 && ratio_train < 1.0)) throw std::invalid_argument("split_dataset: ratio must be in (0,1)");
    if (location_count < 2) throw std::invalid_argument("split_dataset: need at least two locations");
    const auto k = static_cast<long>(location_count);
    const long n_train = std::clamp(std::lround(ratio_train * static_cast<double>(k)), 1L, k - 1);
    std::vector<int> order(location_count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    LocationSplit s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.test.assign(order.begin() + n_train, order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline std::vector<LabeledPath> select_locations(std::span<const LabeledPath> data, std::span<const int> locations) {
    std::vector<char> keep;
    for (int k : locations) {
        if (static_cast<std::size_t>(k) >= keep.size()) keep.resize(static_cast<std::size_t>(k) + 1, 0);
        keep[static_cast<std::size_t>(k)] = 1;
    }
    std::vector<LabeledPath> out;
    for (const auto& s : data)
        if (static_cast<std::size_t>(s.ut_index) < keep.size() && keep[static_cast<std::size_t>(s.ut_index)])
            out.push_back(s);
    return out;
}

inline std::vector<LabeledPath> existent_only(std::span<const LabeledPath> data) {
    std::vector<LabeledPath> out;
    std::copy_if(data.begin(), data.end(), std::back_inserter(out), [](const LabeledPath& s) { return s.label == 1; });
    return out;
}

/// Per-column mean and deviation; a constant column gets deviation 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    template <class Rows>
    static Standardizer fit(const Rows& rows, std::size_t width) {
        Standardizer s;
        s.mean.assign(width, 0.0);
        s.scale.assign(width, 0.0);
        if (rows.empty()) {
            s.scale.assign(width, 1.0);
            return s;
        }
        const double n = static_cast<double>(rows.size());
        for (const auto& r : rows)
            for (std::size_t i = 0; i < width; ++i) s.mean[i] += r[i];
        for (auto& m : s.mean) m /= n;
        for (const auto& r : rows)
            for (std::size_t i = 0; i < width; ++i) s.scale[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
        for (auto& v : s.scale) {
            v = std::sqrt(v / n);
            if (!(v > 1e-12)) v = 1.0;
        }
        return s;
    }

    double forward(std::size_t i, double v) const { return (v - mean[i]) / scale[i]; }
    double inverse(std::size_t i, double v) const { return v * scale[i] + mean[i]; }
};

}  // namespace geocsi
