#pragma once

// Scene geometry: loading, coordinate normalization, quantization and the
// feasible receiver lattice.
//
// Scene file format (UTF-8, one directive per line, '#' starts a comment):
//
//   unit cm|m                      # applies to bs, bounds and vertices
//   resolution <meters>
//   bs <x> <y> <z>
//   bounds <xmin> <ymin> <zmin> <xmax> <ymax> <zmax>
//   materials
//     <material_id> <reflection_coefficient> <roughness_factor>
//   end
//   planes
//     <object_tag> <material_id> <x1> <y1> <z1> <x2> <y2> <z2> <x3> <y3> <z3> ...
//   end
//
// Planes sharing an object tag other than "-" form one closed solid; "-" marks
// a free-standing surface such as a room wall.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "geocsi/error.hpp"
#include "geocsi/geometry.hpp"

namespace geocsi {

inline constexpr std::string_view kOpenSurfaceTag = "-";
inline constexpr double kCoplanarityTolerance = 1e-6;

struct Material {
    double reflection_coefficient = 1.0;  // [0, 1]
    double roughness_factor = 1.0;        // (0, 1]

    bool valid() const {
        return reflection_coefficient >= 0.0 && reflection_coefficient <= 1.0 &&
               roughness_factor > 0.0 && roughness_factor <= 1.0;
    }
};

struct Plane {
    PlanarPolygon polygon;
    std::string material_id;
    std::string object_tag{kOpenSurfaceTag};

    const std::vector<Point3>& vertices() const { return polygon.vertices(); }
    bool closed_object() const { return object_tag != kOpenSurfaceTag; }
};

struct Box {
    Point3 min;
    Point3 max;

    bool contains(const Point3& p, double tol = kGeometryTolerance) const {
        for (std::size_t i = 0; i < 3; ++i)
            if (p[i] < min[i] - tol || p[i] > max[i] + tol) return false;
        return true;
    }
};

struct Scene {
    std::vector<Plane> planes;
    std::map<std::string, Material> materials;
    Point3 bs_position;
    Box bounds;
    double resolution = 0.5;

    const Material& material_of(const Plane& plane) const {
        auto it = materials.find(plane.material_id);
        if (it == materials.end()) throw Error("unknown material_id '" + plane.material_id + "'");
        return it->second;
    }
};

enum class Containment { Outside, Inside, OnSurface };

/// Point-in-solid queries against the closed objects of a scene, by ray-casting
/// parity. Rays that graze an edge are re-cast with a 1e-9 m origin jitter
/// along a different direction.
class SolidIndex {
public:
    explicit SolidIndex(const Scene& scene) {
        std::map<std::string, std::size_t> slot;
        for (const auto& plane : scene.planes) {
            if (!plane.closed_object()) continue;
            auto [it, inserted] = slot.emplace(plane.object_tag, objects_.size());
            if (inserted) objects_.push_back({});
            Object& obj = objects_[it->second];
            obj.faces.push_back(&plane.polygon);
            for (const auto& v : plane.vertices()) {
                for (std::size_t i = 0; i < 3; ++i) {
                    obj.box.min[i] = std::min(obj.box.min[i], v[i]);
                    obj.box.max[i] = std::max(obj.box.max[i], v[i]);
                }
            }
        }
    }

    std::size_t object_count() const { return objects_.size(); }

    Containment classify(const Point3& p) const {
        for (const auto& obj : objects_) {
            if (!obj.box.contains(p, 2 * kGeometryTolerance)) continue;
            const Containment c = classify(obj, p);
            if (c != Containment::Outside) return c;
        }
        return Containment::Outside;
    }

private:
    struct Object {
        std::vector<const PlanarPolygon*> faces;
        Box box{{kInf, kInf, kInf}, {-kInf, -kInf, -kInf}};
    };
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    static Containment classify(const Object& obj, const Point3& p) {
        for (const PlanarPolygon* face : obj.faces) {
            if (std::abs(face->signed_distance(p)) <= kGeometryTolerance &&
                face->classify(p) != PolygonSide::Outside)
                return Containment::OnSurface;
        }
        static const std::array<Vec3, 6> directions{{
            {0.5377, 0.3183, 0.7808},
            {-0.2887, 0.8660, 0.4082},
            {0.7071, -0.5, 0.5},
            {-0.6124, -0.3536, 0.7071},
            {0.1768, 0.9186, -0.3536},
            {-0.8165, 0.2113, -0.5377},
        }};
        for (std::size_t attempt = 0; attempt < directions.size() * 4; ++attempt) {
            const Vec3 dir = directions[attempt % directions.size()] /
                             norm(directions[attempt % directions.size()]);
            const Point3 origin =
                p + static_cast<double>(attempt) * kGeometryTolerance * directions[(attempt + 1) % 6];
            int crossings = 0;
            bool ambiguous = false;
            for (const PlanarPolygon* face : obj.faces) {
                const double denom = dot(face->normal(), dir);
                if (std::abs(denom) < 1e-12) continue;
                const double t = -face->signed_distance(origin) / denom;
                if (t <= kGeometryTolerance) continue;
                const PolygonSide side = face->classify(origin + t * dir);
                if (side == PolygonSide::Boundary) {
                    ambiguous = true;
                    break;
                }
                if (side == PolygonSide::Inside) ++crossings;
            }
            if (!ambiguous) return (crossings % 2) ? Containment::Inside : Containment::Outside;
        }
        throw Error("point containment could not be resolved");
    }

    std::vector<Object> objects_;
};

/// Throws when a scene violates its structural invariants.
inline void validate_scene(const Scene& scene) {
    if (scene.planes.empty()) throw Error("scene has no planes");
    if (!(scene.resolution > 0.0)) throw Error("scene resolution must be positive");
    for (const auto& [id, mat] : scene.materials)
        if (!mat.valid()) throw Error("material '" + id + "' has out-of-range coefficients");
    for (const auto& plane : scene.planes) (void)scene.material_of(plane);
    if (!scene.bounds.contains(scene.bs_position)) throw Error("bs position lies outside the scene bounds");
    if (SolidIndex(scene).classify(scene.bs_position) != Containment::Outside)
        throw Error("bs position lies inside or on a closed object");
}

namespace detail {

inline std::string strip_comment(const std::string& line) {
    const auto hash = line.find('#');
    return hash == std::string::npos ? line : line.substr(0, hash);
}

inline std::vector<double> parse_numbers(std::istringstream& in, std::size_t line_no) {
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw ParseError("expected a number, got '" + token + "'", line_no);
        }
    }
    return values;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Parses a scene and translates it so that `origin` (meters, after unit
/// conversion) maps to (0, 0, 0).
inline Scene parse_scene(std::istream& in, const Point3& origin = {}) {
    Scene scene;
    double unit = 1.0;
    bool unit_seen = false, bs_seen = false, bounds_seen = false;
    struct RawPlane {
        std::string tag, material;
        std::vector<double> coords;
        std::size_t line;
    };
    std::vector<RawPlane> raw_planes;
    std::vector<double> raw_bs, raw_bounds;
    enum class Section { None, Materials, Planes } section = Section::None;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(detail::strip_comment(line));
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "end") {
            if (section == Section::None) throw ParseError("'end' outside of a section", line_no);
            section = Section::None;
            continue;
        }
        if (section == Section::Materials) {
            auto v = detail::parse_numbers(ls, line_no);
            if (v.size() != 2) throw ParseError("material needs 2 coefficients", line_no);
            Material m{v[0], v[1]};
            if (!m.valid()) throw ParseError("material '" + key + "' coefficients out of range", line_no);
            if (!scene.materials.emplace(key, m).second)
                throw ParseError("duplicate material '" + key + "'", line_no);
            continue;
        }
        if (section == Section::Planes) {
            RawPlane rp;
            rp.tag = key;
            rp.line = line_no;
            if (!(ls >> rp.material)) throw ParseError("plane needs a material id", line_no);
            rp.coords = detail::parse_numbers(ls, line_no);
            if (rp.coords.size() % 3 != 0 || rp.coords.size() < 9)
                throw ParseError("plane needs at least 3 vertices given as x y z triples", line_no);
            raw_planes.push_back(std::move(rp));
            continue;
        }
        if (key == "unit") {
            std::string u;
            ls >> u;
            if (u == "cm") unit = 100.0;
            else if (u == "m") unit = 1.0;
            else throw ParseError("unknown unit '" + u + "'", line_no);
            if (!raw_planes.empty() || bs_seen || bounds_seen)
                throw ParseError("'unit' must precede coordinates", line_no);
            unit_seen = true;
        } else if (key == "resolution") {
            auto v = detail::parse_numbers(ls, line_no);
            if (v.size() != 1 || !(v[0] > 0.0)) throw ParseError("resolution needs one positive value", line_no);
            scene.resolution = v[0];
        } else if (key == "bs") {
            raw_bs = detail::parse_numbers(ls, line_no);
            if (raw_bs.size() != 3) throw ParseError("bs needs 3 coordinates", line_no);
            bs_seen = true;
        } else if (key == "bounds") {
            raw_bounds = detail::parse_numbers(ls, line_no);
            if (raw_bounds.size() != 6) throw ParseError("bounds needs 6 values", line_no);
            bounds_seen = true;
        } else if (key == "materials") {
            section = Section::Materials;
        } else if (key == "planes") {
            section = Section::Planes;
        } else {
            throw ParseError("unknown directive '" + key + "'", line_no);
        }
    }
    (void)unit_seen;
    if (section != Section::None) throw ParseError("unterminated section at end of file", line_no);
    if (!bs_seen) throw ParseError("missing 'bs' directive");
    if (!bounds_seen) throw ParseError("missing 'bounds' directive");

    auto to_point = [&](const double* c) {
        return Point3{c[0] / unit, c[1] / unit, c[2] / unit} - origin;
    };
    scene.bs_position = to_point(raw_bs.data());
    scene.bounds = {to_point(raw_bounds.data()), to_point(raw_bounds.data() + 3)};
    for (std::size_t i = 0; i < 3; ++i)
        if (scene.bounds.min[i] > scene.bounds.max[i]) throw ParseError("bounds min exceeds max");

    for (std::size_t index = 0; index < raw_planes.size(); ++index) {
        const RawPlane& rp = raw_planes[index];
        if (!scene.materials.count(rp.material))
            throw ParseError("plane " + std::to_string(index) + " references unknown material '" +
                                 rp.material + "'",
                             rp.line);
        std::vector<Point3> verts;
        for (std::size_t k = 0; k < rp.coords.size(); k += 3) verts.push_back(to_point(&rp.coords[k]));
        const double dev = max_plane_deviation(verts);
        if (!std::isfinite(dev)) throw ParseError("plane " + std::to_string(index) + " has zero area", rp.line);
        if (dev > kCoplanarityTolerance) throw NonCoplanarPlane(index, dev);
        Plane plane{PlanarPolygon(std::move(verts)), rp.material, rp.tag};
        if (is_self_intersecting(plane.polygon))
            throw ParseError("plane " + std::to_string(index) + " is self-intersecting", rp.line);
        scene.planes.push_back(std::move(plane));
    }
    validate_scene(scene);
    return scene;
}

inline Scene load_scene(const std::string& path, const Point3& origin = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scene file '" + path + "'");
    return parse_scene(in, origin);
}

/// Writes the scene in meters with full precision so that reloading is exact.
inline void write_scene(std::ostream& out, const Scene& scene) {
    using detail::format_double;
    auto pt = [&](const Point3& p) {
        return format_double(p.x) + " " + format_double(p.y) + " " + format_double(p.z);
    };
    out << "unit m\n";
    out << "resolution " << format_double(scene.resolution) << "\n";
    out << "bs " << pt(scene.bs_position) << "\n";
    out << "bounds " << pt(scene.bounds.min) << " " << pt(scene.bounds.max) << "\n";
    out << "materials\n";
    for (const auto& [id, m] : scene.materials)
        out << "  " << id << " " << format_double(m.reflection_coefficient) << " "
            << format_double(m.roughness_factor) << "\n";
    out << "end\nplanes\n";
    for (const auto& plane : scene.planes) {
        out << "  " << plane.object_tag << " " << plane.material_id;
        for (const auto& v : plane.vertices()) out << " " << pt(v);
        out << "\n";
    }
    out << "end\n";
}

inline void save_scene(const std::string& path, const Scene& scene) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scene file '" + path + "'");
    write_scene(out, scene);
}

/// Rounds to the nearest multiple of `resolution`, halves away from zero.
inline double quantize(double v, double resolution) {
    const double q = std::round(v / resolution) * resolution;
    return q == 0.0 ? 0.0 : q;  // no negative zero
}

struct QuantizedScene {
    Scene scene;
    std::size_t dropped_degenerate = 0;
    std::size_t merged = 0;
    std::size_t split_nonplanar = 0;
};

/// Snaps every vertex to the resolution lattice and merges planes whose
/// quantized vertex sets coincide (first plane's material and tag win).
/// Planes that collapse to a line or a point are dropped; planes that lose
/// planarity are fanned into triangles.
inline QuantizedScene quantize_merge_report(const Scene& scene, double resolution) {
    if (!(resolution > 0.0)) throw std::invalid_argument("quantize_merge: resolution must be positive");
    QuantizedScene result;
    result.scene.materials = scene.materials;
    result.scene.bs_position = scene.bs_position;
    result.scene.bounds = scene.bounds;
    result.scene.resolution = resolution;

    std::set<std::vector<std::array<double, 3>>> seen;
    auto emit = [&](std::vector<Point3> verts, const Plane& src) {
        std::vector<std::array<double, 3>> key;
        for (const auto& v : verts) key.push_back({v.x, v.y, v.z});
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) {
            ++result.merged;
            return;
        }
        result.scene.planes.push_back({PlanarPolygon(std::move(verts)), src.material_id, src.object_tag});
    };

    for (const auto& plane : scene.planes) {
        std::vector<Point3> q;
        for (const auto& v : plane.vertices()) {
            Point3 p{quantize(v.x, resolution), quantize(v.y, resolution), quantize(v.z, resolution)};
            if (q.empty() || !(q.back() == p)) q.push_back(p);
        }
        while (q.size() > 1 && q.front() == q.back()) q.pop_back();
        const double area = 0.5 * norm(newell_normal(q));
        if (q.size() < 3 || area <= 1e-12 * resolution * resolution) {
            ++result.dropped_degenerate;
            continue;
        }
        if (max_plane_deviation(q) <= kCoplanarityTolerance && !is_self_intersecting(PlanarPolygon(q))) {
            emit(std::move(q), plane);
            continue;
        }
        ++result.split_nonplanar;
        for (std::size_t k = 1; k + 1 < q.size(); ++k) {
            std::vector<Point3> tri{q[0], q[k], q[k + 1]};
            if (0.5 * norm(newell_normal(tri)) <= 1e-12 * resolution * resolution) continue;
            emit(std::move(tri), plane);
        }
    }
    return result;
}

inline Scene quantize_merge(const Scene& scene, double resolution) {
    return quantize_merge_report(scene, resolution).scene;
}

/// Lattice points (integer multiples of `spacing`) inside the bounds that are
/// strictly outside every closed object, not on any plane, and not the BS.
/// Ordered with x outermost and z innermost.
inline std::vector<Point3> feasible_locations(const Scene& scene, double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("feasible_locations: spacing must be positive");
    const SolidIndex solids(scene);
    auto range = [&](std::size_t axis) {
        const long lo = static_cast<long>(std::ceil(scene.bounds.min[axis] / spacing - 1e-9));
        const long hi = static_cast<long>(std::floor(scene.bounds.max[axis] / spacing + 1e-9));
        return std::pair{lo, hi};
    };
    const auto [x0, x1] = range(0);
    const auto [y0, y1] = range(1);
    const auto [z0, z1] = range(2);
    std::vector<Point3> out;
    for (long i = x0; i <= x1; ++i) {
        for (long j = y0; j <= y1; ++j) {
            for (long k = z0; k <= z1; ++k) {
                const Point3 p{quantize(i * spacing, spacing), quantize(j * spacing, spacing),
                               quantize(k * spacing, spacing)};
                if (distance(p, scene.bs_position) <= kGeometryTolerance) continue;
                bool on_plane = false;
                for (const auto& plane : scene.planes) {
                    if (std::abs(plane.polygon.signed_distance(p)) <= kGeometryTolerance &&
                        plane.polygon.classify(p) != PolygonSide::Outside) {
                        on_plane = true;
                        break;
                    }
                }
                if (on_plane) continue;
                if (solids.classify(p) != Containment::Outside) continue;
                out.push_back(p);
            }
        }
    }
    if (out.empty()) throw Error("no feasible locations: bounds smaller than spacing or fully occupied");
    return out;
}

}  // namespace geocsi
