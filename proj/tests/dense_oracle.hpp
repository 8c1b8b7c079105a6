// Test-only dense oracle: re-assembles the P1 operators by quadrature
// (edge-midpoint mass, fitted-gradient stiffness, Simpson boundary mass) and
// runs the space-time recursions with dense LU. Independent of the library's
// assembly and sparse solve path.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sbc/mesh.hpp"

namespace oracle {

struct DenseFem {
    Eigen::MatrixXd M, K, D, Mb, B;  // B scatters boundary loads to vertices
    std::vector<int> bdof;
    double tau = 0.0;
};

inline DenseFem dense_fem(const sbc::Mesh& mesh, double tau) {
    const int nv = mesh.vertex_count();
    DenseFem f;
    f.tau = tau;
    f.M = Eigen::MatrixXd::Zero(nv, nv);
    f.K = Eigen::MatrixXd::Zero(nv, nv);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double A = mesh.signed_area(t);
        // psi values at the three edge midpoints; the rule is exact for quadratics
        const double psi[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double acc = 0.0;
                for (int q = 0; q < 3; ++q) acc += psi[q][i] * psi[q][j];
                f.M(tri[i], tri[j]) += A / 3.0 * acc;
            }
        Eigen::Matrix3d V;
        for (int i = 0; i < 3; ++i)
            V.row(i) << 1.0, mesh.vertices[tri[i]][0], mesh.vertices[tri[i]][1];
        const Eigen::Matrix3d C = V.inverse();  // column i = coefficients of psi_i
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                f.K(tri[i], tri[j]) += A * (C(1, i) * C(1, j) + C(2, i) * C(2, j));
    }
    f.K += f.M;
    f.D = f.M + tau * f.K;

    const int nb = mesh.boundary_vertex_count();
    f.bdof = mesh.boundary_vertices;
    f.Mb = Eigen::MatrixXd::Zero(nb, nb);
    for (int k = 0; k < nb; ++k) {
        const int a = k, b = (k + 1) % nb;
        const double len = mesh.edge_length(mesh.boundary_edges[k][0], mesh.boundary_edges[k][1]);
        auto simpson = [len](double fa, double fm, double fb) {
            return len / 6.0 * (fa + 4.0 * fm + fb);
        };
        f.Mb(a, a) += simpson(1.0, 0.25, 0.0);
        f.Mb(b, b) += simpson(0.0, 0.25, 1.0);
        f.Mb(a, b) += simpson(0.0, 0.25, 0.0);
        f.Mb(b, a) += simpson(0.0, 0.25, 0.0);
    }
    f.B = Eigen::MatrixXd::Zero(nv, nb);
    for (int k = 0; k < nb; ++k) f.B.row(f.bdof[k]) += f.Mb.row(k);
    return f;
}

/// Forward then backward dense recursions; returns tr P_{j+1} stacked per step.
inline Eigen::VectorXd dense_adjoint_traces(const DenseFem& f, const Eigen::MatrixXd& U,
                                            const Eigen::MatrixXd& yd) {
    const int nv = static_cast<int>(f.M.rows());
    const int nb = static_cast<int>(f.Mb.rows());
    const int J = static_cast<int>(U.cols());
    const auto lu = f.D.fullPivLu();
    std::vector<Eigen::VectorXd> Y(J + 1, Eigen::VectorXd::Zero(nv));
    for (int j = 0; j < J; ++j) Y[j + 1] = lu.solve(f.M * Y[j] + f.tau * f.B * U.col(j));
    std::vector<Eigen::VectorXd> P(J + 1, Eigen::VectorXd::Zero(nv));
    for (int j = J - 1; j >= 0; --j)
        P[j] = lu.solve(f.M * P[j + 1] + f.tau * f.M * (Y[j] - yd.col(j)));
    Eigen::VectorXd out(nb * J);
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < nb; ++k) out[j * nb + k] = P[j + 1][f.bdof[k]];
    return out;
}

/// Interval averages of sin(pi t) * x * y with 4-point Gauss in time.
inline Eigen::MatrixXd sinpit_xy_averages(const sbc::Mesh& mesh, int J, double tau) {
    const double X[4] = {0.06943184420297371, 0.33000947820757187, 0.66999052179242813,
                         0.93056815579702629};
    const double W[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                         0.17392742256872693};
    Eigen::MatrixXd yd = Eigen::MatrixXd::Zero(mesh.vertex_count(), J);
    for (int j = 0; j < J; ++j)
        for (int q = 0; q < 4; ++q) {
            const double t = tau * (j + X[q]);
            for (int i = 0; i < mesh.vertex_count(); ++i)
                yd(i, j) += W[q] * std::sin(M_PI * t) * mesh.vertices[i][0] *
                            mesh.vertices[i][1];
        }
    return yd;
}

/// Unconstrained KKT solution of nu U_j + tr P_{j+1} = 0 assembled columnwise.
inline Eigen::MatrixXd dense_kkt_control(const DenseFem& f, const Eigen::MatrixXd& yd,
                                         double nu, int J) {
    const int nb = static_cast<int>(f.Mb.rows());
    const Eigen::VectorXd c = dense_adjoint_traces(f, Eigen::MatrixXd::Zero(nb, J), yd);
    const Eigen::VectorXd c0 = dense_adjoint_traces(
        f, Eigen::MatrixXd::Zero(nb, J), Eigen::MatrixXd::Zero(f.M.rows(), J));
    Eigen::MatrixXd L(nb * J, nb * J);
    for (int col = 0; col < nb * J; ++col) {
        Eigen::MatrixXd U = Eigen::MatrixXd::Zero(nb, J);
        U(col % nb, col / nb) = 1.0;
        L.col(col) = dense_adjoint_traces(f, U, Eigen::MatrixXd::Zero(f.M.rows(), J)) - c0;
    }
    const Eigen::MatrixXd A =
        L + nu * Eigen::MatrixXd::Identity(nb * J, nb * J);
    const Eigen::VectorXd u = A.fullPivLu().solve(-c);
    Eigen::MatrixXd out(nb, J);
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < nb; ++k) out(k, j) = u[j * nb + k];
    return out;
}

} // namespace oracle
