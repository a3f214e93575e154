#pragma once

// Deterministic line-of-sight and single-reflection tracing between the BS and
// receiver locations, with Friis-style path loss and material reflection loss.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "geocsi/geometry.hpp"
#include "geocsi/scene.hpp"

namespace geocsi {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct RadioConfig {
    double frequency_hz = 28e9;
    double path_loss_exponent = 2.1;
    double absorption_per_m = 0.0;  // molecular absorption coefficient k(f)
    double tx_power_dbm = 34.5;     // with tx_gain_dbi = 0 this is the EIRP
    double tx_gain_dbi = 0.0;
    double rx_gain_dbi = 2.5;
    double existence_margin_db = 25.0;

    double wavelength() const { return kSpeedOfLight / frequency_hz; }

    void validate() const {
        if (!(frequency_hz > 0.0)) throw std::invalid_argument("RadioConfig: frequency must be positive");
        if (!(path_loss_exponent > 0.0)) throw std::invalid_argument("RadioConfig: path loss exponent must be positive");
        if (!(absorption_per_m >= 0.0)) throw std::invalid_argument("RadioConfig: absorption must be non-negative");
        if (!(existence_margin_db > 0.0)) throw std::invalid_argument("RadioConfig: existence margin must be positive");
    }
};

enum class PathKind { LineOfSight, Reflection };

/// Why a candidate path is (or is not) present.
enum class PathStatus {
    Existent,
    Occluded,          // a segment crosses a plane
    OppositeSides,     // BS and UT not strictly on the same side of the reflector
    MissesPolygon,     // image-method reflection point outside the reflector
    ZeroReflectivity,  // R_c * R_s == 0
    BelowThreshold,    // weaker than the strongest path by more than the margin
};

/// Path parameter vector: AAoD, EAoD, AAoA, EAoA (rad), delay (s).
using PathVector = std::array<double, 5>;

struct PathRecord {
    int ut_index = 0;
    PathKind kind = PathKind::LineOfSight;
    std::optional<int> plane_id;
    double aaod = 0.0;
    double eaod = 0.0;
    double aaoa = 0.0;
    double eaoa = 0.0;
    double delay_s = 0.0;
    double rss_dbm = kNegInf;
    bool existent = false;
    PathStatus status = PathStatus::Occluded;

    PathVector vector() const { return {aaod, eaod, aaoa, eaoa, delay_s}; }

    /// Rewrites the record to the non-existent encoding (all-zero parameters, -inf RSS).
    void mark_non_existent(PathStatus why) {
        aaod = eaod = aaoa = eaoa = delay_s = 0.0;
        rss_dbm = kNegInf;
        existent = false;
        status = why;
    }

    static PathRecord non_existent(int ut_index, PathKind kind, std::optional<int> plane, PathStatus why) {
        PathRecord r;
        r.ut_index = ut_index;
        r.kind = kind;
        r.plane_id = plane;
        r.mark_non_existent(why);
        return r;
    }

    /// The existence encoding invariant: non-existent iff all-zero parameters and -inf RSS.
    bool encoding_consistent() const {
        const bool zero = aaod == 0.0 && eaod == 0.0 && aaoa == 0.0 && eaoa == 0.0 && delay_s == 0.0;
        if (!existent) return zero && rss_dbm == kNegInf;
        return std::isfinite(rss_dbm);
    }
};

/// Path loss in dB: -10 log10(lambda^2 / (A_m (4 pi)^2 d^eta)), A_m = exp(d k(f)).
inline double path_loss_fspl(double d, const RadioConfig& cfg) {
    if (!(d > 0.0)) throw std::invalid_argument("path_loss_fspl: distance must be positive");
    const double lambda = cfg.wavelength();
    const double am = std::exp(d * cfg.absorption_per_m);
    const double four_pi_sq = (4.0 * std::numbers::pi) * (4.0 * std::numbers::pi);
    return -10.0 * std::log10(lambda * lambda / (am * four_pi_sq * std::pow(d, cfg.path_loss_exponent)));
}

/// -20 log10(R_c R_s); +inf when the product is zero.
inline double reflection_loss(const Material& mat) {
    const double r = mat.reflection_coefficient * mat.roughness_factor;
    if (r < 0.0) throw std::invalid_argument("reflection_loss: negative coefficient product");
    if (r == 0.0) return std::numeric_limits<double>::infinity();
    return -20.0 * std::log10(r);
}

inline double received_power_dbm(double loss_db, const RadioConfig& cfg) {
    return cfg.tx_power_dbm + cfg.tx_gain_dbi + cfg.rx_gain_dbi - loss_db;
}

/// Intersection of the open segment with the plane's polygon (boundary included).
inline std::optional<Point3> segment_plane_intersect(const Segment& seg, const Plane& plane) {
    return plane.polygon.intersect(seg);
}

/// True when the segment crosses any plane other than `skip`.
inline bool segment_blocked(const Scene& scene, const Segment& seg, std::optional<std::size_t> skip = {}) {
    for (std::size_t i = 0; i < scene.planes.size(); ++i) {
        if (skip && *skip == i) continue;
        if (scene.planes[i].polygon.intersect(seg)) return true;
    }
    return false;
}

inline PathRecord trace_los(const Scene& scene, const Point3& ut, const RadioConfig& cfg, int ut_index = 0) {
    if (distance(ut, scene.bs_position) <= kGeometryTolerance)
        throw std::invalid_argument("trace_los: UT coincides with the BS");
    const Segment seg{scene.bs_position, ut};
    if (segment_blocked(scene, seg))
        return PathRecord::non_existent(ut_index, PathKind::LineOfSight, std::nullopt, PathStatus::Occluded);
    const Spherical s = to_spherical(seg);
    PathRecord r;
    r.ut_index = ut_index;
    r.kind = PathKind::LineOfSight;
    r.aaod = r.aaoa = s.azimuth;
    r.eaod = r.eaoa = s.elevation;
    r.delay_s = s.length / kSpeedOfLight;
    r.rss_dbm = received_power_dbm(path_loss_fspl(s.length, cfg), cfg);
    r.existent = true;
    r.status = PathStatus::Existent;
    return r;
}

/// Reflection geometry kept for inspection and testing.
struct ReflectionGeometry {
    Point3 image;             // BS mirrored across the reflector
    Point3 reflection_point;
};

/// Single-reflection path off `scene.planes[plane_index]` by the image method.
inline PathRecord trace_reflection(const Scene& scene, const Point3& ut, std::size_t plane_index,
                                   const RadioConfig& cfg, int ut_index = 0,
                                   ReflectionGeometry* geometry = nullptr) {
    const Plane& plane = scene.planes.at(plane_index);
    const PlanarPolygon& poly = plane.polygon;
    const int pid = static_cast<int>(plane_index);
    auto fail = [&](PathStatus why) {
        return PathRecord::non_existent(ut_index, PathKind::Reflection, pid, why);
    };
    const Point3& bs = scene.bs_position;
    const double d_bs = poly.signed_distance(bs);
    const double d_ut = poly.signed_distance(ut);
    if (std::abs(d_bs) <= kGeometryTolerance || std::abs(d_ut) <= kGeometryTolerance ||
        (d_bs > 0.0) != (d_ut > 0.0))
        return fail(PathStatus::OppositeSides);

    const Point3 image = poly.mirror(bs);
    // The image sits at -d_bs; the segment image->ut crosses the plane at t.
    const double t = d_bs / (d_bs + d_ut);
    const Point3 refl = image + t * (ut - image);
    if (geometry) *geometry = {image, refl};
    if (poly.classify(refl) == PolygonSide::Outside) return fail(PathStatus::MissesPolygon);

    const Segment first{bs, refl};
    const Segment second{refl, ut};
    if (segment_blocked(scene, first, plane_index) || segment_blocked(scene, second, plane_index))
        return fail(PathStatus::Occluded);

    const double lr = reflection_loss(scene.material_of(plane));
    if (!std::isfinite(lr)) return fail(PathStatus::ZeroReflectivity);

    const Spherical s1 = to_spherical(first);
    const Spherical s2 = to_spherical(second);
    PathRecord r;
    r.ut_index = ut_index;
    r.kind = PathKind::Reflection;
    r.plane_id = pid;
    r.aaod = s1.azimuth;
    r.eaod = s1.elevation;
    r.aaoa = s2.azimuth;
    r.eaoa = s2.elevation;
    const double total = s1.length + s2.length;
    r.delay_s = total / kSpeedOfLight;
    r.rss_dbm = received_power_dbm(path_loss_fspl(total, cfg) + lr, cfg);
    r.existent = true;
    r.status = PathStatus::Existent;
    return r;
}

/// Marks every existent record weaker than (strongest - margin) as non-existent.
/// The strongest is taken over geometrically existent records only; a record
/// exactly `margin` below the strongest is kept.
inline std::vector<PathRecord> apply_existence_threshold(std::vector<PathRecord> paths, double margin_db) {
    double strongest = kNegInf;
    for (const auto& p : paths)
        if (p.existent) strongest = std::max(strongest, p.rss_dbm);
    if (strongest == kNegInf) return paths;
    for (auto& p : paths)
        if (p.existent && p.rss_dbm < strongest - margin_db) p.mark_non_existent(PathStatus::BelowThreshold);
    return paths;
}

/// All 1 + |planes| candidate paths of one location, thresholded.
inline std::vector<PathRecord> trace_location(const Scene& scene, const Point3& ut, const RadioConfig& cfg,
                                              int ut_index) {
    std::vector<PathRecord> paths;
    paths.reserve(scene.planes.size() + 1);
    paths.push_back(trace_los(scene, ut, cfg, ut_index));
    for (std::size_t i = 0; i < scene.planes.size(); ++i)
        paths.push_back(trace_reflection(scene, ut, i, cfg, ut_index));
    return apply_existence_threshold(std::move(paths), cfg.existence_margin_db);
}

struct TraceSummary {
    std::size_t feasible = 0;
    std::size_t blocked = 0;  // locations without any existent path
    std::size_t linked = 0;
    std::size_t total_paths = 0;
    std::size_t existent = 0;
    std::size_t non_existent = 0;
    std::size_t max_paths_per_pair = 0;

    double coverage_ratio() const { return feasible ? static_cast<double>(linked) / feasible : 0.0; }
};

struct TraceResult {
    std::vector<Point3> locations;
    std::vector<PathRecord> paths;  // grouped by ut_index, LoS first then planes in order
    TraceSummary summary;
};

inline TraceSummary summarize(std::span<const PathRecord> paths, std::size_t location_count) {
    TraceSummary s;
    s.feasible = location_count;
    std::vector<std::size_t> per_location(location_count, 0);
    for (const auto& p : paths) {
        ++s.total_paths;
        if (p.existent) {
            ++s.existent;
            ++per_location.at(static_cast<std::size_t>(p.ut_index));
        } else {
            ++s.non_existent;
        }
    }
    for (std::size_t n : per_location) {
        if (n) ++s.linked;
        s.max_paths_per_pair = std::max(s.max_paths_per_pair, n);
    }
    s.blocked = s.feasible - s.linked;
    return s;
}

inline TraceResult trace_scene(const Scene& scene, std::vector<Point3> locations, const RadioConfig& cfg) {
    cfg.validate();
    TraceResult result;
    result.locations = std::move(locations);
    result.paths.reserve(result.locations.size() * (scene.planes.size() + 1));
    for (std::size_t k = 0; k < result.locations.size(); ++k) {
        auto paths = trace_location(scene, result.locations[k], cfg, static_cast<int>(k));
        result.paths.insert(result.paths.end(), paths.begin(), paths.end());
    }
    result.summary = summarize(result.paths, result.locations.size());
    return result;
}

}  // namespace geocsi
