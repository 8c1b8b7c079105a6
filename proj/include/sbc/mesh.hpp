#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "sbc/errors.hpp"

namespace sbc {

/// Conforming triangulation of the unit square. The boundary is kept as an
/// ordered counterclockwise loop starting at (0,0) so it can be read as a
/// closed curve parameterized by arclength.
struct Mesh {
    std::vector<std::array<double, 2>> vertices;
    std::vector<std::array<int, 3>> triangles;       // counterclockwise
    std::vector<std::array<int, 2>> boundary_edges;  // ordered loop tracing the boundary
    std::vector<int> boundary_vertices;              // loop order, boundary_vertices[0] at (0,0)
    std::vector<double> boundary_arclength_values;   // s of boundary_vertices[k], s[0] = 0
    int refinement_level = 0;
    int structured_n = 0;  // subdivisions per side when built structured, else 0

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
    int boundary_vertex_count() const { return static_cast<int>(boundary_vertices.size()); }

    double signed_area(int t) const {
        const auto& tri = triangles[t];
        const auto& a = vertices[tri[0]];
        const auto& b = vertices[tri[1]];
        const auto& c = vertices[tri[2]];
        return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    }

    double diameter(int t) const {
        const auto& tri = triangles[t];
        double d = 0.0;
        for (int e = 0; e < 3; ++e) {
            const auto& p = vertices[tri[e]];
            const auto& q = vertices[tri[(e + 1) % 3]];
            d = std::max(d, std::hypot(q[0] - p[0], q[1] - p[1]));
        }
        return d;
    }

    /// h: maximum element diameter.
    double max_diameter() const {
        double h = 0.0;
        for (int t = 0; t < triangle_count(); ++t) h = std::max(h, diameter(t));
        return h;
    }

    double min_diameter() const {
        double h = std::numeric_limits<double>::infinity();
        for (int t = 0; t < triangle_count(); ++t) h = std::min(h, diameter(t));
        return h;
    }

    double edge_length(int v0, int v1) const {
        const auto& p = vertices[v0];
        const auto& q = vertices[v1];
        return std::hypot(q[0] - p[0], q[1] - p[1]);
    }

    double perimeter() const {
        double L = 0.0;
        for (const auto& e : boundary_edges) L += edge_length(e[0], e[1]);
        return L;
    }
};

/// Structured triangulation of (0,1)^2 with n subdivisions per side, each cell
/// split along its bottom-left/top-right diagonal. (n+1)^2 vertices, 2n^2
/// triangles, 4n boundary edges, h = sqrt(2)/n.
inline Mesh build_structured_mesh(int n) {
    if (n < 1) throw InvalidArgument("build_structured_mesh: n must be >= 1");
    Mesh m;
    m.structured_n = n;
    const int np = n + 1;
    m.vertices.reserve(static_cast<std::size_t>(np) * np);
    for (int j = 0; j < np; ++j)
        for (int i = 0; i < np; ++i)
            m.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});

    auto vid = [np](int i, int j) { return j * np + i; };

    m.triangles.reserve(2u * n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = vid(i, j), v10 = vid(i + 1, j);
            const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            m.triangles.push_back({v00, v10, v11});
            m.triangles.push_back({v00, v11, v01});
        }
    }

    // boundary loop, counterclockwise from (0,0)
    m.boundary_vertices.reserve(4u * n);
    for (int i = 0; i < n; ++i) m.boundary_vertices.push_back(vid(i, 0));
    for (int j = 0; j < n; ++j) m.boundary_vertices.push_back(vid(n, j));
    for (int i = n; i > 0; --i) m.boundary_vertices.push_back(vid(i, n));
    for (int j = n; j > 0; --j) m.boundary_vertices.push_back(vid(0, j));

    const int nb = m.boundary_vertex_count();
    m.boundary_edges.reserve(nb);
    for (int k = 0; k < nb; ++k)
        m.boundary_edges.push_back({m.boundary_vertices[k], m.boundary_vertices[(k + 1) % nb]});

    m.boundary_arclength_values.resize(nb);
    double s = 0.0;
    for (int k = 0; k < nb; ++k) {
        m.boundary_arclength_values[k] = s;
        s += m.edge_length(m.boundary_edges[k][0], m.boundary_edges[k][1]);
    }
    return m;
}

/// Uniform red refinement: each triangle is split into four by its edge
/// midpoints. Parent vertices keep their indices and coordinates.
inline Mesh refine(const Mesh& coarse) {
    Mesh fine;
    fine.vertices = coarse.vertices;
    fine.refinement_level = coarse.refinement_level + 1;
    fine.structured_n = 0;  // vertex ordering no longer follows the structured convention

    std::map<std::pair<int, int>, int> midpoint;
    auto mid_of = [&](int a, int b) -> int {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const auto& p = fine.vertices[a];
        const auto& q = fine.vertices[b];
        const int id = static_cast<int>(fine.vertices.size());
        fine.vertices.push_back({0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])});
        midpoint.emplace(key, id);
        return id;
    };

    fine.triangles.reserve(coarse.triangles.size() * 4);
    for (const auto& t : coarse.triangles) {
        const int a = t[0], b = t[1], c = t[2];
        const int ab = mid_of(a, b), bc = mid_of(b, c), ca = mid_of(c, a);
        fine.triangles.push_back({a, ab, ca});
        fine.triangles.push_back({ab, b, bc});
        fine.triangles.push_back({ca, bc, c});
        fine.triangles.push_back({ab, bc, ca});
    }

    fine.boundary_vertices.reserve(coarse.boundary_vertices.size() * 2);
    for (const auto& e : coarse.boundary_edges) {
        fine.boundary_vertices.push_back(e[0]);
        fine.boundary_vertices.push_back(mid_of(e[0], e[1]));
    }
    const int nb = fine.boundary_vertex_count();
    fine.boundary_edges.reserve(nb);
    for (int k = 0; k < nb; ++k)
        fine.boundary_edges.push_back({fine.boundary_vertices[k], fine.boundary_vertices[(k + 1) % nb]});

    fine.boundary_arclength_values.resize(nb);
    double s = 0.0;
    for (int k = 0; k < nb; ++k) {
        fine.boundary_arclength_values[k] = s;
        s += fine.edge_length(fine.boundary_edges[k][0], fine.boundary_edges[k][1]);
    }
    return fine;
}

/// Arclength s of every boundary vertex, counterclockwise from (0,0).
/// Throws StructuralError when the boundary edges do not form one closed loop.
inline std::map<int, double> boundary_arclength(const Mesh& mesh) {
    const int nb = mesh.boundary_vertex_count();
    if (nb == 0 || static_cast<int>(mesh.boundary_edges.size()) != nb)
        throw StructuralError("boundary_arclength: boundary is not a closed loop");
    for (int k = 0; k < nb; ++k) {
        if (mesh.boundary_edges[k][0] != mesh.boundary_vertices[k] ||
            mesh.boundary_edges[k][1] != mesh.boundary_vertices[(k + 1) % nb])
            throw StructuralError("boundary_arclength: edge loop is broken or mis-ordered");
    }
    std::map<int, double> s;
    for (int k = 0; k < nb; ++k) {
        auto inserted = s.emplace(mesh.boundary_vertices[k], mesh.boundary_arclength_values[k]);
        if (!inserted.second)
            throw StructuralError("boundary_arclength: vertex visited twice in loop");
    }
    return s;
}

} // namespace sbc
