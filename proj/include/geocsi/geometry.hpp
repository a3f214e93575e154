#pragma once

// Vector algebra and polygon primitives shared by the scene and the tracer.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "geocsi/error.hpp"

namespace geocsi {

/// Distance below which a point is treated as lying on a plane or an edge (meters).
inline constexpr double kGeometryTolerance = 1e-9;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

using Point3 = Vec3;

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }
inline bool is_finite(const Vec3& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    return r - std::numbers::pi;
}

struct Segment {
    Point3 start;
    Point3 end;

    Vec3 vector() const { return end - start; }
    double length() const { return norm(end - start); }
    Point3 at(double t) const { return start + t * (end - start); }
};

struct Spherical {
    double azimuth = 0.0;    // rad, atan2(y, x)
    double elevation = 0.0;  // rad, atan2(z, hypot(x, y))
    double length = 0.0;     // m
};

/// Spherical form of the segment vector end - start.
inline Spherical to_spherical(const Segment& seg) {
    const Vec3 v = seg.vector();
    const double len = norm(v);
    if (!(len > 0.0)) throw std::invalid_argument("to_spherical: zero-length segment");
    return {std::atan2(v.y, v.x), std::atan2(v.z, std::hypot(v.x, v.y)), len};
}

/// Unnormalized polygon normal by Newell's method; length is twice the area.
inline Vec3 newell_normal(std::span<const Point3> poly) {
    Vec3 n;
    const std::size_t count = poly.size();
    for (std::size_t i = 0; i < count; ++i) {
        const Point3& a = poly[i];
        const Point3& b = poly[(i + 1) % count];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    return n;
}

inline Point3 centroid(std::span<const Point3> poly) {
    Point3 c;
    for (const auto& p : poly) c += p;
    return c / static_cast<double>(poly.size());
}

/// Largest distance of any vertex from the best plane through the polygon.
/// Returns +inf for polygons with no area.
inline double max_plane_deviation(std::span<const Point3> poly) {
    const Vec3 n = newell_normal(poly);
    const double len = norm(n);
    if (!(len > 0.0)) return std::numeric_limits<double>::infinity();
    const Vec3 u = n / len;
    const Point3 c = centroid(poly);
    double worst = 0.0;
    for (const auto& p : poly) worst = std::max(worst, std::abs(dot(u, p - c)));
    return worst;
}

inline double point_segment_distance(const Point3& p, const Point3& a, const Point3& b) {
    const Vec3 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

enum class PolygonSide { Outside, Inside, Boundary };

/// A planar polygon with its supporting plane cached for repeated queries.
class PlanarPolygon {
public:
    PlanarPolygon() = default;

    explicit PlanarPolygon(std::vector<Point3> vertices) : vertices_(std::move(vertices)) {
        if (vertices_.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
        const Vec3 n = newell_normal(vertices_);
        const double len = norm(n);
        if (!(len > 0.0)) throw std::invalid_argument("polygon has zero area");
        normal_ = n / len;
        offset_ = dot(normal_, centroid(vertices_));
        const std::array<double, 3> mag{std::abs(normal_.x), std::abs(normal_.y), std::abs(normal_.z)};
        drop_axis_ = static_cast<int>(std::max_element(mag.begin(), mag.end()) - mag.begin());
    }

    const std::vector<Point3>& vertices() const { return vertices_; }
    const Vec3& normal() const { return normal_; }
    double offset() const { return offset_; }
    double area() const { return 0.5 * norm(newell_normal(vertices_)); }

    double signed_distance(const Point3& p) const { return dot(normal_, p) - offset_; }

    /// Classifies a point assumed to lie on the supporting plane.
    PolygonSide classify(const Point3& p, double tol = kGeometryTolerance) const {
        const std::size_t count = vertices_.size();
        for (std::size_t i = 0; i < count; ++i) {
            if (point_segment_distance(p, vertices_[i], vertices_[(i + 1) % count]) <= tol)
                return PolygonSide::Boundary;
        }
        const int ua = drop_axis_ == 0 ? 1 : 0;
        const int va = drop_axis_ == 2 ? 1 : 2;
        const double pu = p[ua];
        const double pv = p[va];
        bool inside = false;
        for (std::size_t i = 0, j = count - 1; i < count; j = i++) {
            const double ui = vertices_[i][ua], vi = vertices_[i][va];
            const double uj = vertices_[j][ua], vj = vertices_[j][va];
            if ((vi > pv) != (vj > pv)) {
                const double cross_u = uj + (pv - vj) * (ui - uj) / (vi - vj);
                if (pu < cross_u) inside = !inside;
            }
        }
        return inside ? PolygonSide::Inside : PolygonSide::Outside;
    }

    /// Point where the open segment crosses the closed polygon. Segments with an
    /// endpoint within `tol` of the supporting plane never cross.
    std::optional<Point3> intersect(const Segment& seg, double tol = kGeometryTolerance) const {
        const double d0 = signed_distance(seg.start);
        const double d1 = signed_distance(seg.end);
        if (std::abs(d0) <= tol || std::abs(d1) <= tol) return std::nullopt;
        if ((d0 > 0.0) == (d1 > 0.0)) return std::nullopt;
        const double t = d0 / (d0 - d1);
        const Point3 p = seg.at(t);
        if (classify(p, tol) == PolygonSide::Outside) return std::nullopt;
        return p;
    }

    /// Mirror image of a point across the supporting plane.
    Point3 mirror(const Point3& p) const { return p - 2.0 * signed_distance(p) * normal_; }

private:
    std::vector<Point3> vertices_;
    Vec3 normal_;
    double offset_ = 0.0;
    int drop_axis_ = 2;
};

/// True when two non-adjacent edges of the polygon (projected onto its plane) touch.
inline bool is_self_intersecting(const PlanarPolygon& poly) {
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    if (n < 4) return false;
    const Vec3 nn = poly.normal();
    // In-plane basis for a 2D test.
    const Vec3 helper = std::abs(nn.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 e1 = cross(nn, helper) / norm(cross(nn, helper));
    const Vec3 e2 = cross(nn, e1);
    std::vector<std::array<double, 2>> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = {dot(v[i], e1), dot(v[i], e2)};
    auto orient = [](const std::array<double, 2>& a, const std::array<double, 2>& b,
                     const std::array<double, 2>& c) {
        const double o = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        return (o > 1e-12) - (o < -1e-12);
    };
    auto on_seg = [](const std::array<double, 2>& a, const std::array<double, 2>& b,
                     const std::array<double, 2>& p) {
        return std::min(a[0], b[0]) - 1e-12 <= p[0] && p[0] <= std::max(a[0], b[0]) + 1e-12 &&
               std::min(a[1], b[1]) - 1e-12 <= p[1] && p[1] <= std::max(a[1], b[1]) + 1e-12;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            const auto& a = q[i];
            const auto& b = q[(i + 1) % n];
            const auto& c = q[j];
            const auto& d = q[(j + 1) % n];
            const int o1 = orient(a, b, c), o2 = orient(a, b, d);
            const int o3 = orient(c, d, a), o4 = orient(c, d, b);
            if (o1 != o2 && o3 != o4) return true;
            if (o1 == 0 && on_seg(a, b, c)) return true;
            if (o2 == 0 && on_seg(a, b, d)) return true;
            if (o3 == 0 && on_seg(c, d, a)) return true;
            if (o4 == 0 && on_seg(c, d, b)) return true;
        }
    }
    return false;
}

}  // namespace geocsi
