#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sbc/mesh.hpp"

using namespace sbc;

namespace {

double area_sum(const Mesh& m) {
    double a = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) a += m.signed_area(t);
    return a;
}

std::set<std::pair<int, int>> unique_edges(const Mesh& m) {
    std::set<std::pair<int, int>> e;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            auto mm = std::minmax(t[k], t[(k + 1) % 3]);
            e.insert(mm);
        }
    return e;
}

std::vector<std::pair<double, double>> sorted_coords(const Mesh& m) {
    std::vector<std::pair<double, double>> c;
    for (const auto& v : m.vertices) c.emplace_back(v[0], v[1]);
    std::sort(c.begin(), c.end());
    return c;
}

} // namespace

TEST_CASE("structured mesh counts") {
    const Mesh m1 = build_structured_mesh(1);
    CHECK(m1.vertex_count() == 4);
    CHECK(m1.triangle_count() == 2);
    CHECK(m1.boundary_edges.size() == 4);

    const Mesh m2 = build_structured_mesh(2);
    CHECK(m2.vertex_count() == 9);
    CHECK(m2.triangle_count() == 8);
    CHECK(m2.boundary_edges.size() == 8);

    CHECK_THROWS_AS(build_structured_mesh(0), InvalidArgument);
}

TEST_CASE("triangles are positive and partition the unit square") {
    for (int n : {1, 2, 3, 5, 8}) {
        const Mesh m = build_structured_mesh(n);
        for (int t = 0; t < m.triangle_count(); ++t) CHECK(m.signed_area(t) > 0.0);
        CHECK(area_sum(m) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.max_diameter() == doctest::Approx(std::sqrt(2.0) / n).epsilon(1e-13));
    }
}

TEST_CASE("boundary arclength") {
    const Mesh m = build_structured_mesh(4);
    const auto s = boundary_arclength(m);
    // locate vertices (1,0), (1,1) in the structured numbering
    const int np = 5;
    CHECK(s.at(0) == doctest::Approx(0.0));
    CHECK(s.at(4) == doctest::Approx(1.0));            // (1,0)
    CHECK(s.at(4 * np + 4) == doctest::Approx(2.0));   // (1,1)
    CHECK(m.perimeter() == doctest::Approx(4.0));
    // max s < L, injective, ordering matches the loop
    double prev = -1.0;
    for (int k = 0; k < m.boundary_vertex_count(); ++k) {
        CHECK(m.boundary_arclength_values[k] > prev);
        prev = m.boundary_arclength_values[k];
    }
    CHECK(prev < 4.0);
    CHECK(static_cast<int>(s.size()) == m.boundary_vertex_count());
}

TEST_CASE("broken boundary loop is rejected") {
    Mesh m = build_structured_mesh(2);
    m.boundary_edges[3][0] = m.boundary_edges[3][1];  // corrupt the loop
    CHECK_THROWS_AS(boundary_arclength(m), StructuralError);
    Mesh m2 = build_structured_mesh(2);
    m2.boundary_edges.pop_back();
    CHECK_THROWS_AS(boundary_arclength(m2), StructuralError);
}

TEST_CASE("red refinement") {
    const Mesh m = build_structured_mesh(1);
    const Mesh r = refine(m);
    CHECK(r.triangle_count() == 8);
    CHECK(r.boundary_edges.size() == 8);
    CHECK(r.max_diameter() == doctest::Approx(m.max_diameter() / 2).epsilon(1e-13));
    CHECK(area_sum(r) == doctest::Approx(1.0).epsilon(1e-12));
    // parent vertices preserved with identical coordinates
    for (int v = 0; v < m.vertex_count(); ++v) {
        CHECK(r.vertices[v][0] == m.vertices[v][0]);
        CHECK(r.vertices[v][1] == m.vertices[v][1]);
    }

    const Mesh rr = refine(r);
    const Mesh m4 = build_structured_mesh(4);
    CHECK(rr.vertex_count() == m4.vertex_count());
    CHECK(sorted_coords(rr) == sorted_coords(m4));
}

TEST_CASE("euler relation and quasi-uniformity across levels") {
    Mesh m = build_structured_mesh(1);
    for (int level = 0; level < 4; ++level) {
        const int V = m.vertex_count();
        const int E = static_cast<int>(unique_edges(m).size());
        const int F = m.triangle_count();
        CHECK(V - E + F == 1);
        CHECK(m.max_diameter() / m.min_diameter() <= std::sqrt(2.0) * (1.0 + 1e-12));
        m = refine(m);
    }
}

TEST_CASE("nested vertices under refinement") {
    const Mesh m = build_structured_mesh(2);
    const Mesh r = refine(m);
    const auto fine = sorted_coords(r);
    for (const auto& c : sorted_coords(m))
        CHECK(std::binary_search(fine.begin(), fine.end(), c));
}
