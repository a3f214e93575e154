#pragma once

// Shared fixtures and independent oracles. The oracles deliberately avoid the
// library's geometry helpers: containment by solid-angle winding number,
// occlusion by dense sampling along the segment, polygon membership by
// angle summation.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geocsi/cluster.hpp"
#include "geocsi/raytrace.hpp"
#include "geocsi/scene.hpp"

namespace support {

using geocsi::Point3;

struct V {
    double x, y, z;
};
inline V v_of(const Point3& p) { return {p.x, p.y, p.z}; }
inline V sub(V a, V b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline V add(V a, V b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline V mul(V a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline double dotv(V a, V b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline V crossv(V a, V b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
inline double len(V a) { return std::sqrt(dotv(a, a)); }

// ---- scene construction -------------------------------------------------

inline geocsi::Plane make_plane(std::vector<Point3> v, std::string material = "m", std::string tag = "-") {
    return geocsi::Plane{geocsi::PlanarPolygon(std::move(v)), std::move(material), std::move(tag)};
}

inline geocsi::Scene base_scene(Point3 lo, Point3 hi, Point3 bs) {
    geocsi::Scene s;
    s.materials["m"] = {0.8, 0.9};
    s.bounds = {lo, hi};
    s.bs_position = bs;
    return s;
}

/// Six faces of an axis-aligned box, outward winding.
inline std::vector<geocsi::Plane> box_faces(Point3 a, Point3 b, const std::string& tag, const std::string& mat = "m") {
    const double x0 = a.x, y0 = a.y, z0 = a.z, x1 = b.x, y1 = b.y, z1 = b.z;
    return {
        make_plane({{x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0}}, mat, tag),
        make_plane({{x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1}}, mat, tag),
        make_plane({{x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1}}, mat, tag),
        make_plane({{x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1}, {x1, y1, z0}}, mat, tag),
        make_plane({{x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1}, {x0, y1, z0}}, mat, tag),
        make_plane({{x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1}}, mat, tag),
    };
}

/// 6 x 5 x 3 m room bounded by six open walls.
inline geocsi::Scene empty_box() {
    auto s = base_scene({0, 0, 0}, {6, 5, 3}, {0.3, 2.5, 2.7});
    s.planes = box_faces({0, 0, 0}, {6, 5, 3}, "-");
    return s;
}

/// The empty box plus one free-standing partition.
inline geocsi::Scene one_wall_room() {
    auto s = empty_box();
    s.planes.push_back(make_plane({{3.1, 0.0, 0.0}, {3.1, 3.2, 0.0}, {3.1, 3.2, 3.0}, {3.1, 0.0, 3.0}}));
    return s;
}

/// The one-wall room plus a closed cabinet and a tilted panel (14 planes).
inline geocsi::Scene closed_room() {
    auto s = one_wall_room();
    for (auto& p : box_faces({4.2, 3.3, 0.0}, {5.3, 4.4, 1.3}, "cabinet")) s.planes.push_back(std::move(p));
    s.planes.push_back(make_plane({{1.0, 0.6, 0.4}, {2.2, 0.6, 0.4}, {2.2, 1.4, 1.5}, {1.0, 1.4, 1.5}}));
    return s;
}

// ---- containment oracle -------------------------------------------------

/// Solid angle of triangle (a, b, c) seen from p (Van Oosterom-Strackee).
inline double solid_angle(V p, V a, V b, V c) {
    const V r1 = sub(a, p), r2 = sub(b, p), r3 = sub(c, p);
    const double l1 = len(r1), l2 = len(r2), l3 = len(r3);
    const double num = dotv(r1, crossv(r2, r3));
    const double den = l1 * l2 * l3 + dotv(r1, r2) * l3 + dotv(r1, r3) * l2 + dotv(r2, r3) * l1;
    return 2.0 * std::atan2(num, den);
}

/// True when p is strictly inside the closed object `tag` (|winding| ~ 1).
inline bool inside_object(const geocsi::Scene& s, const std::string& tag, const Point3& p) {
    double total = 0.0;
    for (const auto& plane : s.planes) {
        if (plane.object_tag != tag) continue;
        const auto& v = plane.vertices();
        for (std::size_t i = 1; i + 1 < v.size(); ++i)
            total += solid_angle(v_of(p), v_of(v[0]), v_of(v[i]), v_of(v[i + 1]));
    }
    return std::abs(total) > 2.0 * std::numbers::pi;
}

inline bool inside_any_object(const geocsi::Scene& s, const Point3& p) {
    for (const auto& plane : s.planes)
        if (plane.closed_object() && inside_object(s, plane.object_tag, p)) return true;
    return false;
}

// ---- occlusion oracle ---------------------------------------------------

inline V plane_normal(const geocsi::Plane& plane) {
    const auto& v = plane.vertices();
    V n = crossv(sub(v_of(v[1]), v_of(v[0])), sub(v_of(v[2]), v_of(v[0])));
    return mul(n, 1.0 / len(n));
}

/// Sum of signed angles subtended at q by the polygon edges; |sum| ~ 2 pi inside.
inline bool inside_polygon_angle_sum(const geocsi::Plane& plane, V q) {
    const auto& v = plane.vertices();
    const V n = plane_normal(plane);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const V a = sub(v_of(v[i]), q), b = sub(v_of(v[(i + 1) % v.size()]), q);
        sum += std::atan2(dotv(crossv(a, b), n), dotv(a, b));
    }
    return std::abs(sum) > std::numbers::pi;
}

/// Does the segment pass through the plane's polygon? Samples the signed
/// distance at `samples` points, bisects each sign change, then tests the
/// crossing point by angle summation.
inline bool sampled_crossing(const geocsi::Plane& plane, V a, V b, int samples = 1000) {
    const V n = plane_normal(plane);
    const V o = v_of(plane.vertices()[0]);
    auto sd = [&](double t) { return dotv(sub(add(a, mul(sub(b, a), t)), o), n); };
    double prev = sd(0.0);
    for (int i = 1; i < samples; ++i) {
        const double t = static_cast<double>(i) / (samples - 1);
        const double cur = sd(t);
        if ((prev < 0.0) != (cur < 0.0) && prev != 0.0 && cur != 0.0) {
            double lo = static_cast<double>(i - 1) / (samples - 1), hi = t;
            const bool lo_neg = prev < 0.0;
            for (int k = 0; k < 80; ++k) {
                const double mid = 0.5 * (lo + hi);
                if ((sd(mid) < 0.0) == lo_neg) lo = mid;
                else hi = mid;
            }
            const V q = add(a, mul(sub(b, a), 0.5 * (lo + hi)));
            if (inside_polygon_angle_sum(plane, q)) return true;
        }
        prev = cur;
    }
    return false;
}

inline bool oracle_blocked(const geocsi::Scene& s, const Point3& a, const Point3& b, int skip = -1,
                           int samples = 1000) {
    for (std::size_t i = 0; i < s.planes.size(); ++i) {
        if (static_cast<int>(i) == skip) continue;
        if (sampled_crossing(s.planes[i], v_of(a), v_of(b), samples)) return true;
    }
    return false;
}

/// Reflection point by similar triangles on the perpendicular projections.
inline std::optional<V> oracle_reflection_point(const geocsi::Plane& plane, V bs, V ut) {
    const V n = plane_normal(plane);
    const V o = v_of(plane.vertices()[0]);
    const double hb = dotv(sub(bs, o), n), hu = dotv(sub(ut, o), n);
    if (hb * hu <= 0.0) return std::nullopt;
    const V pb = sub(bs, mul(n, hb)), pu = sub(ut, mul(n, hu));
    return add(pb, mul(sub(pu, pb), std::abs(hb) / (std::abs(hb) + std::abs(hu))));
}

/// Geometric existence of the single reflection off plane `i`.
inline bool oracle_reflection_exists(const geocsi::Scene& s, std::size_t i, const Point3& ut, int samples = 1000) {
    const auto r = oracle_reflection_point(s.planes[i], v_of(s.bs_position), v_of(ut));
    if (!r || !inside_polygon_angle_sum(s.planes[i], *r)) return false;
    const Point3 rp{r->x, r->y, r->z};
    return !oracle_blocked(s, s.bs_position, rp, static_cast<int>(i), samples) &&
           !oracle_blocked(s, rp, ut, static_cast<int>(i), samples);
}

/// Uniform point in the scene bounds, at least `margin` from every plane's
/// supporting plane and outside closed objects.
inline Point3 random_free_point(const geocsi::Scene& s, std::mt19937_64& rng, double margin = 1e-3) {
    std::uniform_real_distribution<double> ux(s.bounds.min.x, s.bounds.max.x), uy(s.bounds.min.y, s.bounds.max.y),
        uz(s.bounds.min.z, s.bounds.max.z);
    for (;;) {
        const Point3 p{ux(rng), uy(rng), uz(rng)};
        bool ok = !inside_any_object(s, p);
        for (const auto& plane : s.planes) {
            const V n = plane_normal(plane);
            if (std::abs(dotv(sub(v_of(p), v_of(plane.vertices()[0])), n)) < margin) ok = false;
        }
        if (ok) return p;
    }
}

/// Angle between a direction and the plane normal, folded to [0, pi/2].
inline double angle_to_normal(V d, V n) { return std::atan2(len(crossv(d, n)), std::abs(dotv(d, n))); }

// ---- path fixtures ------------------------------------------------------

inline geocsi::PathRecord make_path(const geocsi::PathVector& v, double rss_dbm = -60.0, int ut = 0,
                                    std::optional<int> plane = std::nullopt) {
    geocsi::PathRecord r;
    r.ut_index = ut;
    r.kind = plane ? geocsi::PathKind::Reflection : geocsi::PathKind::LineOfSight;
    r.plane_id = plane;
    r.aaod = v[0];
    r.eaod = v[1];
    r.aaoa = v[2];
    r.eaoa = v[3];
    r.delay_s = v[4];
    r.rss_dbm = rss_dbm;
    r.existent = true;
    r.status = geocsi::PathStatus::Existent;
    return r;
}

/// `per` paths scattered uniformly within +-spread (angles) around each
/// centre, equal RSS, consecutive UT indices.
inline std::vector<geocsi::PathRecord> bundles(const std::vector<geocsi::PathVector>& centres, int per,
                                               double spread, std::mt19937_64& rng, double rss_dbm = -60.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    std::vector<geocsi::PathRecord> out;
    int ut = 0;
    for (const auto& c : centres)
        for (int k = 0; k < per; ++k) {
            geocsi::PathVector v = c;
            for (std::size_t i = 0; i < 4; ++i) v[i] += u(rng);
            v[4] *= 1.0 + 0.1 * u(rng);
            out.push_back(make_path(v, rss_dbm, ut++));
        }
    return out;
}

// ---- cluster oracles and fixtures ----------------------------------------

// std::remainder folds into [-pi, pi] independently of the library's fmod form.
inline double oracle_distance(const geocsi::PathVector& a, const geocsi::PathVector& b) {
    double s = (a[4] - b[4]) * (a[4] - b[4]);
    for (int i = 0; i < 4; ++i) {
        const double d = std::remainder(a[i] - b[i], 2.0 * std::numbers::pi);
        s += d * d;
    }
    return std::sqrt(s);
}

struct OracleIndices {
    double pc = 0, pe = 0, sc = 0, s = 0, xb = 0;
};

// Spreadsheet-style evaluation of the five indices, one term at a time.
inline OracleIndices oracle_validity(const std::vector<geocsi::PathVector>& x,
                                     const std::vector<std::vector<double>>& u,
                                     const std::vector<geocsi::PathVector>& v, double m) {
    const std::size_t n = x.size(), c = v.size();
    OracleIndices r;
    std::vector<int> count(c, 0);
    for (std::size_t l = 0; l < n; ++l) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (u[j][l] > u[best][l]) best = j;
        ++count[best];
    }
    double min_sep = 1e300;
    for (std::size_t j = 0; j < c; ++j)
        for (std::size_t q = 0; q < c; ++q)
            if (q != j) min_sep = std::min(min_sep, std::pow(oracle_distance(v[q], v[j]), 2));
    double s_num = 0, xb_num = 0;
    for (std::size_t j = 0; j < c; ++j) {
        double sep = 0;
        for (std::size_t q = 0; q < c; ++q) sep += std::pow(oracle_distance(v[q], v[j]), 2);
        double comp = 0;
        for (std::size_t l = 0; l < n; ++l) {
            const double e2 = std::pow(oracle_distance(x[l], v[j]), 2);
            r.pc += u[j][l] * u[j][l] / n;
            r.pe -= u[j][l] * std::log(u[j][l]) / n;
            comp += std::pow(u[j][l], m) * e2;
            xb_num += u[j][l] * u[j][l] * e2;
        }
        r.sc += comp / (count[j] * sep);
        s_num += comp;
    }
    r.s = s_num / (n * min_sep);
    r.xb = xb_num / (n * min_sep);
    return r;
}

// Nine paths on a 3x3 angle pattern with alternating strong/weak RSS, plus a
// weak path 0.5 rad off in every angle. Its weight is about 1% of the total,
// so dropping it moves no statistic by more than 5%, while dropping the next
// farthest path costs more than 5% of some spread.
inline std::vector<geocsi::PathRecord> nine_plus_outlier() {
    std::vector<geocsi::PathRecord> p;
    int k = 0;
    for (double da : {-0.3, 0.0, 0.3})
        for (double de : {-0.3, 0.0, 0.3}) {
            p.push_back(make_path({1.0 + da, 0.5 + de, -1.2 + de, 0.4 + da, (30 + k % 3) * 1e-9},
                                  k % 2 == 0 ? -50.0 : -70.0, k));
            ++k;
        }
    p.push_back(make_path({1.5, 1.0, -0.7, 0.9, 31e-9}, -62.0, 9));
    return p;
}

}  // namespace support
