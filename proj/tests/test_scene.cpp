#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "geocsi/scene.hpp"
#include "support.hpp"

using namespace geocsi;

namespace {

const char* kCmScene = R"(
unit cm
bs 100 100 250
bounds 0 0 0 2000 2000 500
materials
  concrete 0.6 0.9
end
planes
  - concrete 950 1570 400  1950 1570 400  1950 1970 400
  - concrete 0 0 0  1000 0 0  1000 1000 0  0 1000 0
end
)";

Scene parse(const std::string& text, Point3 origin = {}) {
    std::istringstream in(text);
    return parse_scene(in, origin);
}

bool on_lattice(double v, double r) {
    const double k = v / r;
    return std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

TEST(LoadScene, ConvertsCentimetresToMetres) {
    const Scene s = parse(kCmScene);
    const Point3 v = s.planes[0].vertices()[0];
    EXPECT_NEAR(v.x, 9.5, 1e-12);
    EXPECT_NEAR(v.y, 15.7, 1e-12);
    EXPECT_NEAR(v.z, 4.0, 1e-12);
    EXPECT_NEAR(s.bs_position.z, 2.5, 1e-12);
}

TEST(LoadScene, OriginAtFirstVertexMapsToZero) {
    const Scene s = parse(kCmScene, {9.5, 15.7, 4.0});
    const Point3 v = s.planes[0].vertices()[0];
    EXPECT_EQ(v.x, 0.0);
    EXPECT_EQ(v.y, 0.0);
    EXPECT_EQ(v.z, 0.0);
}

TEST(LoadScene, RoundTripReproducesVertices) {
    const Scene a = parse(kCmScene);
    std::ostringstream out;
    write_scene(out, a);
    const Scene b = parse(out.str());
    ASSERT_EQ(a.planes.size(), b.planes.size());
    for (std::size_t i = 0; i < a.planes.size(); ++i) {
        ASSERT_EQ(a.planes[i].vertices().size(), b.planes[i].vertices().size());
        for (std::size_t k = 0; k < a.planes[i].vertices().size(); ++k)
            EXPECT_TRUE(a.planes[i].vertices()[k] == b.planes[i].vertices()[k]);
        EXPECT_EQ(a.planes[i].material_id, b.planes[i].material_id);
    }
    EXPECT_TRUE(a.bs_position == b.bs_position);
}

TEST(LoadScene, TranslationInvariance) {
    const Point3 o{1.25, -3.5, 0.75};
    const Scene shifted = parse(kCmScene, o);
    const Scene plain = parse(kCmScene);
    for (std::size_t i = 0; i < plain.planes.size(); ++i)
        for (std::size_t k = 0; k < plain.planes[i].vertices().size(); ++k) {
            const Point3 a = shifted.planes[i].vertices()[k] + o;
            const Point3 b = plain.planes[i].vertices()[k];
            EXPECT_NEAR(a.x, b.x, 1e-12);
            EXPECT_NEAR(a.y, b.y, 1e-12);
            EXPECT_NEAR(a.z, b.z, 1e-12);
        }
}

TEST(LoadScene, RejectsNonCoplanarPlaneWithIndexAndDeviation) {
    const std::string text = R"(
bs 1 1 1
bounds 0 0 0 5 5 5
materials
  m 1 1
end
planes
  - m 0 0 0  1 0 0  1 1 0  0 1 0
  - m 0 0 0  1 0 0  1 1 0.2  0 1 0
end
)";
    try {
        parse(text);
        FAIL() << "expected NonCoplanarPlane";
    } catch (const NonCoplanarPlane& e) {
        EXPECT_EQ(e.plane_index(), 1u);
        EXPECT_GT(e.deviation(), 1e-3);
    }
}

TEST(LoadScene, RejectsUnknownMaterialAndSyntax) {
    EXPECT_THROW(parse("bs 1 1 1\nbounds 0 0 0 5 5 5\nplanes\n - nope 0 0 0 1 0 0 1 1 0\nend\n"), ParseError);
    EXPECT_THROW(parse("bs 1 1\nbounds 0 0 0 5 5 5\n"), ParseError);
    EXPECT_THROW(parse("bogus 1\n"), ParseError);
    EXPECT_THROW(parse("bs 1 1 1\nbounds 0 0 0 5 5 5\nmaterials\n m 2 1\nend\n"), ParseError);
    EXPECT_THROW(load_scene("/nonexistent/scene.txt"), ParseError);
}

TEST(Quantize, RoundsHalfAwayFromZero) {
    EXPECT_EQ(quantize(0.26, 0.5), 0.5);
    EXPECT_EQ(quantize(0.74, 0.5), 0.5);
    EXPECT_EQ(quantize(1.01, 0.5), 1.0);
    EXPECT_EQ(quantize(0.25, 0.5), 0.5);
    EXPECT_EQ(quantize(-0.25, 0.5), -0.5);
    EXPECT_EQ(quantize(-0.1, 0.5), 0.0);
    EXPECT_FALSE(std::signbit(quantize(-0.1, 0.5)));
}

TEST(Quantize, MergesNearbyParallelWalls) {
    Scene s = support::base_scene({0, 0, 0}, {5, 5, 3}, {1, 1, 1});
    s.materials["glass"] = {0.3, 1.0};
    s.planes.push_back(support::make_plane({{2.0, 0, 0}, {2.0, 4, 0}, {2.0, 4, 3}, {2.0, 0, 3}}, "m"));
    s.planes.push_back(support::make_plane({{2.1, 0, 0}, {2.1, 4, 0}, {2.1, 4, 3}, {2.1, 0, 3}}, "glass"));
    const auto q = quantize_merge_report(s, 0.5);
    ASSERT_EQ(q.scene.planes.size(), 1u);
    EXPECT_EQ(q.merged, 1u);
    EXPECT_EQ(q.scene.planes[0].material_id, "m");
}

TEST(Quantize, DropsCollapsedPlanes) {
    Scene s = support::base_scene({0, 0, 0}, {5, 5, 3}, {1, 1, 1});
    s.planes.push_back(support::make_plane({{0, 0, 0}, {4, 0, 0}, {4, 4, 0}}));
    s.planes.push_back(support::make_plane({{1.0, 1.0, 1.0}, {1.1, 1.0, 1.0}, {1.1, 1.1, 1.0}}));
    const auto q = quantize_merge_report(s, 0.5);
    EXPECT_EQ(q.scene.planes.size(), 1u);
    EXPECT_EQ(q.dropped_degenerate, 1u);
}

TEST(Quantize, BundledSceneLandsOnLatticeAndIsIdempotent) {
    const Scene s = load_scene(std::string(GEOCSI_DATA_DIR) + "/synthetic_room.scene");
    const Scene q = quantize_merge(s, 0.5);
    for (const auto& p : q.planes)
        for (const auto& v : p.vertices()) {
            EXPECT_TRUE(on_lattice(v.x, 0.5));
            EXPECT_TRUE(on_lattice(v.y, 0.5));
            EXPECT_TRUE(on_lattice(v.z, 0.5));
        }
    const Scene qq = quantize_merge(q, 0.5);
    ASSERT_EQ(q.planes.size(), qq.planes.size());
    for (std::size_t i = 0; i < q.planes.size(); ++i)
        EXPECT_EQ(q.planes[i].vertices(), qq.planes[i].vertices());
}

TEST(Quantize, IdempotentOnRandomScenes) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        Scene s = support::base_scene({-5, -5, -5}, {5, 5, 5}, {4.9, 4.9, 4.9});
        for (int k = 0; k < 8; ++k) {
            const Point3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
            if (norm(cross(b - a, c - a)) < 1e-3) continue;
            s.planes.push_back(support::make_plane({a, b, c}));
        }
        const double r = trial % 2 ? 0.5 : 0.3;
        const Scene q1 = quantize_merge(s, r);
        const Scene q2 = quantize_merge(q1, r);
        ASSERT_EQ(q1.planes.size(), q2.planes.size());
        for (std::size_t i = 0; i < q1.planes.size(); ++i) EXPECT_EQ(q1.planes[i].vertices(), q2.planes[i].vertices());
    }
}

TEST(Feasible, EmptyUnitBoxHas27PointsMinusBs) {
    Scene s = support::base_scene({0, 0, 0}, {1, 1, 1}, {0.25, 0.25, 0.25});
    EXPECT_EQ(feasible_locations(s, 0.5).size(), 27u);
    s.bs_position = {0.5, 0.5, 0.5};
    const auto pts = feasible_locations(s, 0.5);
    EXPECT_EQ(pts.size(), 26u);
    for (const auto& p : pts) EXPECT_FALSE(p == s.bs_position);
}

TEST(Feasible, ExcludesPointsInsideClosedBox) {
    Scene s = support::base_scene({0, 0, 0}, {2, 2, 2}, {0.25, 0.25, 0.25});
    s.planes = support::box_faces({0.75, 0.75, 0.75}, {1.25, 1.25, 1.25}, "box");
    const auto pts = feasible_locations(s, 0.5);
    EXPECT_EQ(pts.size(), 124u);
    for (const auto& p : pts) EXPECT_FALSE(p == Point3(1.0, 1.0, 1.0));
}

TEST(Feasible, ErrorWhenBoundsSmallerThanSpacing) {
    Scene s = support::base_scene({0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.15, 0.15, 0.15});
    EXPECT_THROW(feasible_locations(s, 0.5), Error);
    EXPECT_THROW(feasible_locations(s, 0.0), std::invalid_argument);
}

TEST(Feasible, ContainmentAgreesWithWindingNumberOracle) {
    const Scene s = support::closed_room();
    const SolidIndex index(s);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(3.9, 5.6), uy(3.0, 4.7), uz(0.0, 1.6);
    int inside = 0;
    for (int i = 0; i < 1000; ++i) {
        const Point3 p{ux(rng), uy(rng), uz(rng)};
        const bool oracle = support::inside_any_object(s, p);
        const auto c = index.classify(p);
        ASSERT_NE(c, Containment::OnSurface);
        EXPECT_EQ(c == Containment::Inside, oracle) << p.x << "," << p.y << "," << p.z;
        inside += oracle;
    }
    EXPECT_GT(inside, 100);
}

TEST(Feasible, SubsetOfLatticeAndOutsideObjects) {
    const Scene s = quantize_merge(load_scene(std::string(GEOCSI_DATA_DIR) + "/synthetic_room.scene"), 0.25);
    const auto pts = feasible_locations(s, 0.5);
    std::set<std::tuple<double, double, double>> unique;
    for (const auto& p : pts) {
        EXPECT_TRUE(on_lattice(p.x, 0.5) && on_lattice(p.y, 0.5) && on_lattice(p.z, 0.5));
        EXPECT_TRUE(s.bounds.contains(p));
        EXPECT_FALSE(support::inside_any_object(s, p));
        unique.insert({p.x, p.y, p.z});
    }
    EXPECT_EQ(unique.size(), pts.size());
    // 11 x 9 x 5 interior lattice minus the 8 points inside the cabinet
    EXPECT_EQ(pts.size(), 487u);
}

TEST(ValidateScene, RejectsBsInsideObject) {
    Scene s = support::base_scene({0, 0, 0}, {2, 2, 2}, {1.0, 1.0, 1.0});
    s.planes = support::box_faces({0.5, 0.5, 0.5}, {1.5, 1.5, 1.5}, "box");
    EXPECT_THROW(validate_scene(s), Error);
    s.bs_position = {0.1, 0.1, 0.1};
    EXPECT_NO_THROW(validate_scene(s));
    s.bs_position = {3, 3, 3};
    EXPECT_THROW(validate_scene(s), Error);
}
