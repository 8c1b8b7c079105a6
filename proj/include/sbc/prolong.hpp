#pragma once

#include <Eigen/Dense>

#include "sbc/errors.hpp"
#include "sbc/mesh.hpp"

namespace sbc {

// Nested injection between structured meshes with doubled resolution. Since
// the fine triangles sit inside coarse ones, P1 interpolation at the fine
// vertices represents the coarse function exactly in the fine space, so error
// norms computed on the fine mesh are exact L2 norms of the difference.

inline void require_doubling(const Mesh& coarse, const Mesh& fine, const char* who) {
    if (coarse.structured_n < 1 || fine.structured_n != 2 * coarse.structured_n)
        throw StructuralError(std::string(who) +
                              ": meshes must be structured with doubled resolution");
}

/// Interpolate a nodal field from a structured n-mesh onto the 2n-mesh.
inline Eigen::VectorXd prolong_nodal(const Mesh& coarse, const Mesh& fine,
                                     const Eigen::VectorXd& v) {
    require_doubling(coarse, fine, "prolong_nodal");
    const int n = coarse.structured_n;
    if (v.size() != coarse.vertex_count())
        throw StructuralError("prolong_nodal: field has wrong length");
    const int npc = n + 1, npf = 2 * n + 1;
    Eigen::VectorXd out(fine.vertex_count());
    auto cid = [npc](int i, int j) { return j * npc + i; };
    for (int j = 0; j < npf; ++j) {
        for (int i = 0; i < npf; ++i) {
            double val;
            if (i % 2 == 0 && j % 2 == 0) {
                val = v[cid(i / 2, j / 2)];
            } else if (j % 2 == 0) {
                val = 0.5 * (v[cid((i - 1) / 2, j / 2)] + v[cid((i + 1) / 2, j / 2)]);
            } else if (i % 2 == 0) {
                val = 0.5 * (v[cid(i / 2, (j - 1) / 2)] + v[cid(i / 2, (j + 1) / 2)]);
            } else {
                // interior cell point: midpoint of the bottom-left/top-right diagonal
                val = 0.5 * (v[cid((i - 1) / 2, (j - 1) / 2)] + v[cid((i + 1) / 2, (j + 1) / 2)]);
            }
            out[j * npf + i] = val;
        }
    }
    return out;
}

/// Interpolate a boundary field (loop order) from an n-mesh onto the 2n-mesh.
inline Eigen::VectorXd prolong_boundary(const Mesh& coarse, const Mesh& fine,
                                        const Eigen::VectorXd& v) {
    require_doubling(coarse, fine, "prolong_boundary");
    const int nb = coarse.boundary_vertex_count();
    if (v.size() != nb)
        throw StructuralError("prolong_boundary: field has wrong length");
    Eigen::VectorXd out(fine.boundary_vertex_count());
    for (int k = 0; k < nb; ++k) {
        out[2 * k] = v[k];
        out[2 * k + 1] = 0.5 * (v[k] + v[(k + 1) % nb]);
    }
    return out;
}

/// Repeat a coarse per-step matrix over the covered fine steps.
inline Eigen::MatrixXd inject_time(const Eigen::MatrixXd& coarse, int fine_steps) {
    const int Jc = static_cast<int>(coarse.cols());
    if (Jc < 1 || fine_steps % Jc != 0)
        throw StructuralError("inject_time: step counts must nest");
    const int factor = fine_steps / Jc;
    Eigen::MatrixXd out(coarse.rows(), fine_steps);
    for (int j = 0; j < fine_steps; ++j) out.col(j) = coarse.col(j / factor);
    return out;
}

} // namespace sbc
