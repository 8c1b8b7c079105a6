#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <memory>
#include <vector>

#include "sbc/errors.hpp"
#include "sbc/mesh.hpp"

namespace sbc {

using NodalField = Eigen::VectorXd;     // one value per mesh vertex
using BoundaryField = Eigen::VectorXd;  // one value per boundary vertex (loop order)

/// Assembled P1 operators on a mesh, with the implicit-Euler step matrix
/// M + tau*K factorized once. K carries the full bilinear form
/// grad*grad + mass, i.e. <-A_h v, w> = v^T K w.
struct DiscreteOperators {
    std::shared_ptr<const Mesh> mesh;
    double tau = 0.0;

    Eigen::SparseMatrix<double> M;      // mass, vertex space
    Eigen::SparseMatrix<double> K;      // stiffness + mass, vertex space
    Eigen::SparseMatrix<double> M_bnd;  // boundary mass, boundary-DOF space
    Eigen::SparseMatrix<double> step_matrix;  // M + tau*K

    using SparseFactorization = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
    std::shared_ptr<SparseFactorization> step_factorization;
    std::shared_ptr<SparseFactorization> bnd_mass_factorization;

    std::vector<int> boundary_dof_to_vertex;  // = mesh->boundary_vertices
    std::vector<int> vertex_to_boundary_dof;  // -1 for interior vertices
    Eigen::VectorXd bnd_lumped;               // row sums of M_bnd (quadrature weights)

    int n_vertices() const { return static_cast<int>(M.rows()); }
    int n_boundary() const { return static_cast<int>(M_bnd.rows()); }

    double m_norm2(const NodalField& v) const { return v.dot(M * v); }
    double bnd_norm2(const BoundaryField& v) const { return v.dot(M_bnd * v); }
};

/// Assemble mass, stiffness-plus-mass and boundary-mass operators and
/// factorize M + tau*K. Element integrals are closed-form (exact for P1).
inline DiscreteOperators assemble(const Mesh& mesh, double tau) {
    if (tau <= 0.0) throw InvalidArgument("assemble: tau must be positive");
    DiscreteOperators ops;
    ops.mesh = std::make_shared<Mesh>(mesh);
    ops.tau = tau;

    const int nv = mesh.vertex_count();
    std::vector<Eigen::Triplet<double>> tm, tk;
    tm.reserve(mesh.triangles.size() * 9);
    tk.reserve(mesh.triangles.size() * 9);

    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double area = mesh.signed_area(t);
        if (area <= 0.0) throw StructuralError("assemble: non-positive triangle area");
        const auto& p0 = mesh.vertices[tri[0]];
        const auto& p1 = mesh.vertices[tri[1]];
        const auto& p2 = mesh.vertices[tri[2]];
        // constant P1 gradients: grad psi_i = (beta_i, gamma_i) / (2 area)
        const double beta[3] = {p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]};
        const double gamma[3] = {p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double mass = area / 12.0 * (i == j ? 2.0 : 1.0);
                const double stiff = (beta[i] * beta[j] + gamma[i] * gamma[j]) / (4.0 * area);
                tm.emplace_back(tri[i], tri[j], mass);
                tk.emplace_back(tri[i], tri[j], stiff + mass);
            }
        }
    }
    ops.M.resize(nv, nv);
    ops.M.setFromTriplets(tm.begin(), tm.end());
    ops.K.resize(nv, nv);
    ops.K.setFromTriplets(tk.begin(), tk.end());

    const int nb = mesh.boundary_vertex_count();
    ops.boundary_dof_to_vertex = mesh.boundary_vertices;
    ops.vertex_to_boundary_dof.assign(nv, -1);
    for (int k = 0; k < nb; ++k) ops.vertex_to_boundary_dof[mesh.boundary_vertices[k]] = k;

    std::vector<Eigen::Triplet<double>> tb;
    tb.reserve(4u * nb);
    for (int k = 0; k < nb; ++k) {
        const int a = k, b = (k + 1) % nb;
        const double len = mesh.edge_length(mesh.boundary_edges[k][0], mesh.boundary_edges[k][1]);
        tb.emplace_back(a, a, len / 3.0);
        tb.emplace_back(b, b, len / 3.0);
        tb.emplace_back(a, b, len / 6.0);
        tb.emplace_back(b, a, len / 6.0);
    }
    ops.M_bnd.resize(nb, nb);
    ops.M_bnd.setFromTriplets(tb.begin(), tb.end());
    ops.bnd_lumped = ops.M_bnd * Eigen::VectorXd::Ones(nb);

    ops.step_matrix = ops.M + tau * ops.K;
    ops.step_factorization = std::make_shared<DiscreteOperators::SparseFactorization>();
    ops.step_factorization->compute(ops.step_matrix);
    if (ops.step_factorization->info() != Eigen::Success)
        throw ConditioningError("assemble: singular step factorization");
    ops.bnd_mass_factorization = std::make_shared<DiscreteOperators::SparseFactorization>();
    ops.bnd_mass_factorization->compute(ops.M_bnd);
    if (ops.bnd_mass_factorization->info() != Eigen::Success)
        throw ConditioningError("assemble: singular boundary mass");
    return ops;
}

/// rhs += scale * b(v) with b_i = integral over the boundary of v*psi_i ds,
/// for a piecewise-linear boundary field v. Touches boundary rows only.
inline void add_boundary_load(const DiscreteOperators& ops,
                              const Eigen::Ref<const Eigen::VectorXd>& v, double scale,
                              NodalField& rhs) {
    if (v.size() != ops.n_boundary())
        throw StructuralError("boundary_load: boundary field has wrong length");
    const Eigen::VectorXd w = ops.M_bnd * v;
    for (int k = 0; k < ops.n_boundary(); ++k)
        rhs[ops.boundary_dof_to_vertex[k]] += scale * w[k];
}

/// Load vector b with b_i = integral over the boundary of v*psi_i ds for a
/// piecewise-linear boundary field v. Zero at interior vertices; exact.
inline NodalField boundary_load(const DiscreteOperators& ops, const BoundaryField& v) {
    NodalField b = NodalField::Zero(ops.n_vertices());
    add_boundary_load(ops, v, 1.0, b);
    return b;
}

namespace detail {
// 4-point Gauss-Legendre on [0,1]
inline constexpr double kGauss4X[4] = {0.06943184420297371, 0.33000947820757187,
                                       0.66999052179242813, 0.93056815579702629};
inline constexpr double kGauss4W[4] = {0.17392742256872693, 0.32607257743127307,
                                       0.32607257743127307, 0.17392742256872693};
} // namespace detail

/// Load vector of an analytic boundary profile given in arclength,
/// 4-point Gauss per boundary edge.
inline NodalField boundary_load(const DiscreteOperators& ops,
                                const std::function<double(double)>& profile) {
    const Mesh& mesh = *ops.mesh;
    const int nb = ops.n_boundary();
    NodalField b = NodalField::Zero(ops.n_vertices());
    for (int k = 0; k < nb; ++k) {
        const int va = mesh.boundary_vertices[k];
        const int vb = mesh.boundary_vertices[(k + 1) % nb];
        const double s0 = mesh.boundary_arclength_values[k];
        const double len = mesh.edge_length(va, vb);
        double ba = 0.0, bb = 0.0;
        for (int q = 0; q < 4; ++q) {
            const double x = detail::kGauss4X[q];
            const double f = profile(s0 + x * len) * detail::kGauss4W[q] * len;
            ba += f * (1.0 - x);
            bb += f * x;
        }
        b[va] += ba;
        b[vb] += bb;
    }
    return b;
}

/// Restriction of a P1 function to the boundary vertices.
inline BoundaryField trace(const DiscreteOperators& ops, const NodalField& y) {
    if (y.size() != ops.n_vertices())
        throw StructuralError("trace: nodal field has wrong length");
    BoundaryField t(ops.n_boundary());
    for (int k = 0; k < ops.n_boundary(); ++k) t[k] = y[ops.boundary_dof_to_vertex[k]];
    return t;
}

/// Scatter a boundary field to a nodal field (zero at interior vertices).
inline NodalField inject_boundary(const DiscreteOperators& ops, const BoundaryField& v) {
    if (v.size() != ops.n_boundary())
        throw StructuralError("inject_boundary: boundary field has wrong length");
    NodalField y = NodalField::Zero(ops.n_vertices());
    for (int k = 0; k < ops.n_boundary(); ++k) y[ops.boundary_dof_to_vertex[k]] = v[k];
    return y;
}

/// One implicit-Euler step: solve (M + tau*K) x = rhs.
inline NodalField step_solve(const DiscreteOperators& ops, const NodalField& rhs) {
    if (rhs.size() != ops.n_vertices())
        throw StructuralError("step_solve: rhs has wrong length");
    return ops.step_factorization->solve(rhs);
}

} // namespace sbc
