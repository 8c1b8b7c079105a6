#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sbc/fem.hpp"
#include "sbc/noise.hpp"

namespace sbc {

/// Time-indexed family of nodal fields. fields[j] is the value on
/// [t_j, t_{j+1}), so L2-in-time sums run over the left endpoints j < J.
/// Forward trajectories have fields[0] = 0, backward ones fields[J] = 0.
struct Trajectory {
    double tau = 0.0;
    std::vector<NodalField> fields;  // size J+1

    int steps() const { return static_cast<int>(fields.size()) - 1; }
};

/// sqrt( sum_{j<J} tau * |fields[j]|_M^2 ), the discrete L2(0,T;L2) norm.
inline double trajectory_l2_m(const DiscreteOperators& ops, const Trajectory& tr) {
    double acc = 0.0;
    for (int j = 0; j < tr.steps(); ++j) acc += tr.tau * ops.m_norm2(tr.fields[j]);
    return std::sqrt(acc);
}

/// Per-mode boundary load vectors b(phi_n), one column per mode. Computed
/// once and reused by every noise step.
inline Eigen::MatrixXd mode_loads(const DiscreteOperators& ops, const NoiseSpec& spec) {
    Eigen::MatrixXd B(ops.n_vertices(), spec.n_modes);
    for (int n = 0; n < spec.n_modes; ++n)
        B.col(n) = boundary_load(ops, [&](double s) { return fourier_mode(spec, n, s); });
    return B;
}

/// Generic implicit-Euler forward recursion: Y_0 = 0 and
/// (M + tau*K) Y_{j+1} = M Y_j + load(j).
inline Trajectory forward_sweep(const DiscreteOperators& ops, int J,
                                const std::function<void(int, NodalField&)>& add_load) {
    Trajectory tr;
    tr.tau = ops.tau;
    tr.fields.resize(J + 1);
    tr.fields[0] = NodalField::Zero(ops.n_vertices());
    NodalField rhs(ops.n_vertices());
    for (int j = 0; j < J; ++j) {
        rhs.noalias() = ops.M * tr.fields[j];
        add_load(j, rhs);
        tr.fields[j + 1] = ops.step_factorization->solve(rhs);
    }
    return tr;
}

/// Controlled forward operator: per step
/// (M + tau*K) Y_{j+1} = M Y_j + tau * b(U_j), with U piecewise constant.
/// U has one column per step (boundary DOF values).
inline Trajectory forward_S0(const DiscreteOperators& ops, const Eigen::MatrixXd& U) {
    if (U.rows() != ops.n_boundary())
        throw StructuralError("forward_S0: control has wrong boundary dimension");
    const int J = static_cast<int>(U.cols());
    return forward_sweep(ops, J, [&](int j, NodalField& rhs) {
        add_boundary_load(ops, U.col(j), ops.tau, rhs);
    });
}

/// Per-step noise load sum_n sqrt(lambda_n) mu_n sbar_j b(phi_n) dbeta_n^j,
/// written into coef so the step costs one matrix-vector product.
inline void noise_step_coefficients(const NoiseSpec& spec, const NoiseEnsemble& ens,
                                    int sample, int j, Eigen::VectorXd& coef) {
    const double t0 = j * ens.tau;
    const double sj = spec.sbar(t0, t0 + ens.tau);
    for (int n = 0; n < spec.n_modes; ++n)
        coef[n] = std::sqrt(spec.lambda(n)) * spec.mu(n) * sj * ens.incr(sample, j, n);
}

/// Noise-driven forward operator for one sample path:
/// (M + tau*K) G_{j+1} = M G_j + sum_n sqrt(lambda_n) mu_n sbar_j b(phi_n) dbeta_n^j.
inline Trajectory forward_G(const DiscreteOperators& ops, const NoiseSpec& spec,
                            const NoiseEnsemble& ens, int sample,
                            const Eigen::MatrixXd& loads) {
    Eigen::VectorXd coef(spec.n_modes);
    return forward_sweep(ops, ens.J, [&](int j, NodalField& rhs) {
        noise_step_coefficients(spec, ens, sample, j, coef);
        rhs.noalias() += loads * coef;
    });
}

/// Forward state with both control and noise in one recursion; equals
/// forward_S0(U) + forward_G(sample) by superposition.
inline Trajectory forward_state(const DiscreteOperators& ops, const NoiseSpec& spec,
                                const NoiseEnsemble& ens, int sample,
                                const Eigen::MatrixXd& loads, const Eigen::MatrixXd& U) {
    if (U.cols() != ens.J)
        throw StructuralError("forward_state: control/ensemble step mismatch");
    Eigen::VectorXd coef(spec.n_modes);
    return forward_sweep(ops, ens.J, [&](int j, NodalField& rhs) {
        add_boundary_load(ops, U.col(j), ops.tau, rhs);
        noise_step_coefficients(spec, ens, sample, j, coef);
        rhs.noalias() += loads * coef;
    });
}

/// Backward operator: P_J = 0 and (M + tau*K) P_j = M P_{j+1} + tau * M q_j,
/// where q_j is the nodal interval load on [t_j, t_{j+1}). q has one column
/// per step.
inline Trajectory backward_S1(const DiscreteOperators& ops, const Eigen::MatrixXd& q) {
    if (q.rows() != ops.n_vertices())
        throw StructuralError("backward_S1: load has wrong nodal dimension");
    const int J = static_cast<int>(q.cols());
    Trajectory tr;
    tr.tau = ops.tau;
    tr.fields.resize(J + 1);
    tr.fields[J] = NodalField::Zero(ops.n_vertices());
    NodalField rhs(ops.n_vertices());
    for (int j = J - 1; j >= 0; --j) {
        rhs.noalias() = ops.M * tr.fields[j + 1];
        rhs.noalias() += ops.tau * (ops.M * q.col(j));
        tr.fields[j] = ops.step_factorization->solve(rhs);
    }
    return tr;
}

struct DualityResult {
    double lhs = 0.0;  // integral of [S0 R f, g]
    double rhs = 0.0;  // sum_j integral of <f, (S1 g)_{j+1}>
    double gap = 0.0;  // |lhs - rhs|
};

/// Discrete duality identity between the forward and backward operators,
/// computed from both sides. Exact in exact arithmetic for any piecewise
/// constant f (boundary) and g (domain).
inline DualityResult duality_gap(const DiscreteOperators& ops, const Eigen::MatrixXd& f,
                                 const Eigen::MatrixXd& g) {
    if (f.cols() != g.cols())
        throw StructuralError("duality_gap: f and g must share the step count");
    const int J = static_cast<int>(f.cols());
    const Trajectory Y = forward_S0(ops, f);
    const Trajectory P = backward_S1(ops, g);
    DualityResult r;
    for (int j = 0; j < J; ++j) {
        r.lhs += ops.tau * Y.fields[j].dot(ops.M * g.col(j));
        r.rhs += ops.tau * BoundaryField(f.col(j)).dot(ops.M_bnd * trace(ops, P.fields[j + 1]));
    }
    r.gap = std::abs(r.lhs - r.rhs);
    return r;
}

/// Conditional expectation of the noise convolution: with deterministic sigma
/// the future increments are independent and centered, so
/// E_{t_j} G_k = ((M+tau*K)^{-1} M)^{k-j} G_j.
inline NodalField cond_exp_G(const DiscreteOperators& ops, const NodalField& G_j, int horizon) {
    if (horizon < 0) throw InvalidArgument("cond_exp_G: horizon must be >= 0");
    NodalField x = G_j;
    for (int i = 0; i < horizon; ++i) x = ops.step_factorization->solve(ops.M * x);
    return x;
}

/// Interval averages (1/tau) * integral over [t_j, t_{j+1}) of a deterministic
/// profile, 4-point Gauss in time. This is P_tau on deterministic data, where
/// the conditioning is the identity.
inline std::vector<Eigen::VectorXd> interval_averages(
    const std::function<Eigen::VectorXd(double)>& v, int J, double tau) {
    static constexpr double X[4] = {0.06943184420297371, 0.33000947820757187,
                                    0.66999052179242813, 0.93056815579702629};
    static constexpr double W[4] = {0.17392742256872693, 0.32607257743127307,
                                    0.32607257743127307, 0.17392742256872693};
    std::vector<Eigen::VectorXd> out(J);
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd acc = W[0] * v(tau * (j + X[0]));
        for (int q = 1; q < 4; ++q) acc += W[q] * v(tau * (j + X[q]));
        out[j] = acc;
    }
    return out;
}

/// P_tau on a pathwise piecewise-constant process: the time average over an
/// interval is the interval value itself, so P_tau reduces to conditioning at
/// t_j. `values[s]` holds one column per step; `ce(j, slice)` conditions the
/// per-sample columns at step j.
inline std::vector<Eigen::MatrixXd> apply_Ptau(
    const std::vector<Eigen::MatrixXd>& values,
    const std::function<Eigen::MatrixXd(int, const Eigen::MatrixXd&)>& ce) {
    if (values.empty()) return {};
    const int S = static_cast<int>(values.size());
    const int n = static_cast<int>(values[0].rows());
    const int J = static_cast<int>(values[0].cols());
    std::vector<Eigen::MatrixXd> out(S, Eigen::MatrixXd(n, J));
    Eigen::MatrixXd slice(n, S);
    for (int j = 0; j < J; ++j) {
        for (int s = 0; s < S; ++s) slice.col(s) = values[s].col(j);
        const Eigen::MatrixXd cond = ce(j, slice);
        for (int s = 0; s < S; ++s) out[s].col(j) = cond.col(s);
    }
    return out;
}

} // namespace sbc
