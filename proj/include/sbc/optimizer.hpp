#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbc/condexp.hpp"
#include "sbc/evolution.hpp"
#include "sbc/parallel.hpp"

namespace sbc {

/// Deterministic space-time profile, evaluated as yd(t, x, y).
using YdProfile = std::function<double(double, double, double)>;

/// Named catalog used by configs: "zero", "const:<c>", "sinpit_xy"
/// (sin(pi t) * x * y).
inline YdProfile make_yd(const std::string& name) {
    if (name == "zero") return [](double, double, double) { return 0.0; };
    if (name.rfind("const:", 0) == 0) {
        const double c = std::stod(name.substr(6));
        return [c](double, double, double) { return c; };
    }
    if (name == "sinpit_xy")
        return [](double t, double x, double y) { return std::sin(M_PI * t) * x * y; };
    throw InvalidArgument("unknown yd profile: " + name);
}

/// Adapted piecewise-constant boundary control, one matrix per sample with a
/// column per step.
struct ControlProcess {
    std::vector<Eigen::MatrixXd> values;  // [sample], n_boundary x J
    double lower = 0.0;
    double upper = 0.0;
    double tau = 0.0;

    int samples() const { return static_cast<int>(values.size()); }
    int steps() const { return values.empty() ? 0 : static_cast<int>(values[0].cols()); }
};

/// Componentwise clamp to [u_*, u^*]: u_* below, u^* above, identity between.
inline double clamp_value(double r, double lo, double hi) {
    if (r < lo) return lo;
    if (r > hi) return hi;
    return r;
}

inline Eigen::MatrixXd project_box(const Eigen::MatrixXd& u, double lo, double hi) {
    return u.unaryExpr([lo, hi](double r) { return clamp_value(r, lo, hi); });
}

inline ControlProcess project_box(const ControlProcess& u) {
    ControlProcess out = u;
    for (auto& m : out.values) m = project_box(m, u.lower, u.upper);
    return out;
}

/// One instance of the discrete control problem: operators, noise model,
/// target profile, weights and bounds, plus the noise source it is solved on.
struct ControlProblem {
    std::shared_ptr<const DiscreteOperators> ops;
    NoiseSpec spec;
    YdProfile yd;
    double nu = 1.0;
    double lower = -1.0;
    double upper = 1.0;
    double T = 1.0;
    int J = 1;
    double tau = 1.0;
    NoiseSource source;

    Eigen::MatrixXd loads;   // per-mode boundary loads b(phi_n)
    Eigen::MatrixXd yd_avg;  // nodal interval averages of yd, one column per step

    int samples() const { return source.paths.sample_count; }
    double weight(int s) const { return source.paths.weights[s]; }
};

inline ControlProblem make_problem(std::shared_ptr<const DiscreteOperators> ops,
                                   const NoiseSpec& spec, YdProfile yd, double nu,
                                   double lower, double upper, double T, int J,
                                   NoiseSource source) {
    if (!(nu > 0.0)) throw InvalidArgument("problem: nu must be positive");
    if (!(lower < upper)) throw InvalidArgument("problem: need u_* < u^*");
    if (J < 1 || T <= 0.0) throw InvalidArgument("problem: need J >= 1 and T > 0");
    if (source.paths.J != J)
        throw StructuralError("problem: noise source step count differs from J");

    ControlProblem p;
    p.ops = std::move(ops);
    p.spec = spec;
    p.yd = std::move(yd);
    p.nu = nu;
    p.lower = lower;
    p.upper = upper;
    p.T = T;
    p.J = J;
    p.tau = T / J;
    p.source = std::move(source);
    if (std::abs(p.tau - p.ops->tau) > 1e-14 * std::max(1.0, p.tau))
        throw StructuralError("problem: operators assembled with a different tau");

    p.loads = mode_loads(*p.ops, spec);

    const Mesh& mesh = *p.ops->mesh;
    p.yd_avg.resize(p.ops->n_vertices(), J);
    const auto nodal = [&](double t) {
        Eigen::VectorXd v(p.ops->n_vertices());
        for (int i = 0; i < p.ops->n_vertices(); ++i)
            v[i] = p.yd(t, mesh.vertices[i][0], mesh.vertices[i][1]);
        return v;
    };
    const auto avg = interval_averages(nodal, J, p.tau);
    for (int j = 0; j < J; ++j) p.yd_avg.col(j) = avg[j];
    return p;
}

/// Zero control clamped into the box, replicated over all samples.
inline ControlProcess initial_control(const ControlProblem& p) {
    ControlProcess u;
    u.lower = p.lower;
    u.upper = p.upper;
    u.tau = p.tau;
    u.values.assign(p.samples(),
                    project_box(Eigen::MatrixXd::Zero(p.ops->n_boundary(), p.J),
                                p.lower, p.upper));
    return u;
}

inline void check_feasible(const ControlProblem& p, const ControlProcess& u) {
    if (u.samples() != p.samples() || u.steps() != p.J)
        throw StructuralError("control process has wrong shape");
    const double slack = 1e-12 * std::max(1.0, std::max(std::abs(p.lower), std::abs(p.upper)));
    for (const auto& m : u.values)
        if (m.minCoeff() < p.lower - slack || m.maxCoeff() > p.upper + slack)
            throw FeasibilityError("control violates its bounds");
}

namespace detail {

struct SweepResult {
    double cost = 0.0;
    // targets[j] = trace(P_{j+1}) per sample, the raw (unconditioned) adjoint data
    std::vector<Eigen::MatrixXd> targets;
};

/// Forward + backward pass over all samples: discrete cost and adjoint trace
/// targets. Per-sample work runs in parallel; reductions keep sample order.
inline SweepResult sweep(const ControlProblem& p, const ControlProcess& u, int threads,
                         bool want_targets) {
    const DiscreteOperators& ops = *p.ops;
    const int S = p.samples();
    const int J = p.J;

    SweepResult r;
    if (want_targets)
        r.targets.assign(J, Eigen::MatrixXd(ops.n_boundary(), S));
    std::vector<double> cost_s(S, 0.0);

    parallel_for(S, threads, [&](int s) {
        const Trajectory Z =
            forward_state(ops, p.spec, p.source.paths, s, p.loads, u.values[s]);
        // backward sweep fused with the cost: M*q serves both the data-term
        // norm and the adjoint load
        double acc = 0.0;
        NodalField P = NodalField::Zero(ops.n_vertices());
        NodalField q(ops.n_vertices()), Mq(ops.n_vertices()), rhs(ops.n_vertices());
        for (int j = J - 1; j >= 0; --j) {
            if (want_targets) r.targets[j].col(s) = trace(ops, P);  // P holds P_{j+1}
            q = Z.fields[j] - p.yd_avg.col(j);
            Mq.noalias() = ops.M * q;
            acc += 0.5 * p.tau * q.dot(Mq);
            if (want_targets) {
                rhs.noalias() = ops.M * P;
                rhs += p.tau * Mq;
                P = ops.step_factorization->solve(rhs);
            }
        }
        for (int j = 0; j < J; ++j)
            acc += 0.5 * p.nu * p.tau * ops.bnd_norm2(u.values[s].col(j));
        cost_s[s] = acc;
    });
    for (int s = 0; s < S; ++s) r.cost += p.weight(s) * cost_s[s];
    return r;
}

/// Conditioned adjoint traces ce_j(trace P_{j+1}), one matrix per step.
inline std::vector<Eigen::MatrixXd> condition_targets(const ControlProblem& p,
                                                      const CEEstimator& ce,
                                                      const std::vector<Eigen::MatrixXd>& t) {
    std::vector<Eigen::MatrixXd> out(t.size());
    for (std::size_t j = 0; j < t.size(); ++j)
        out[j] = apply_ce(p.source, ce, static_cast<int>(j), t[j]);
    return out;
}

/// max_j of the sample-mean M_Gamma norm of a per-sample per-step field.
inline double max_step_norm(const ControlProblem& p,
                            const std::function<Eigen::VectorXd(int, int)>& field) {
    double worst = 0.0;
    for (int j = 0; j < p.J; ++j) {
        double acc = 0.0;
        for (int s = 0; s < p.samples(); ++s) acc += p.weight(s) * p.ops->bnd_norm2(field(s, j));
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

} // namespace detail

/// Discrete cost: E[ sum_j tau ( 1/2 |Y_j + G_j - yd_j|_M^2 ) ]
///              + (nu/2) E[ sum_j tau |U_j|_{M_Gamma}^2 ].
inline double cost(const ControlProblem& p, const ControlProcess& u, int threads = 1) {
    check_feasible(p, u);
    return detail::sweep(p, u, threads, false).cost;
}

/// Adapted gradient representative g_j = nu U_j + ce_j(trace P_{j+1}) with
/// P = S1(S0 R U + G - yd). With a tree estimator this is the exact Riesz
/// representative of the cost derivative over adapted variations.
inline std::vector<Eigen::MatrixXd> gradient(const ControlProblem& p, const ControlProcess& u,
                                             const CEEstimator& ce, int threads = 1) {
    check_feasible(p, u);
    const auto sw = detail::sweep(p, u, threads, true);
    const auto cehat = detail::condition_targets(p, ce, sw.targets);
    std::vector<Eigen::MatrixXd> g(p.samples(),
                                   Eigen::MatrixXd(p.ops->n_boundary(), p.J));
    for (int s = 0; s < p.samples(); ++s)
        for (int j = 0; j < p.J; ++j)
            g[s].col(j) = p.nu * u.values[s].col(j) + cehat[j].col(s);
    return g;
}

struct SolveOptions {
    double step = 0.0;  // 0 means 1/nu: the pure fixed-point map
    double tol = 1e-10;
    int max_iter = 200;
    int threads = 1;
};

struct SolveReport {
    int iterations = 0;
    double final_cost = 0.0;
    double final_residual = 0.0;  // max_j |U_j - clamp(-ce_j(tr P_{j+1})/nu)|
    bool converged = false;
    std::string ce_kind;
    std::vector<double> cost_history;
    std::vector<double> residual_history;
    std::vector<double> delta_history;
    double seconds = 0.0;
};

/// Projected fixed-point iteration U <- clamp(U - s(nu U + ce(tr P_{j+1}))).
/// With s = 1/nu this is exactly the clamp representation of the discrete
/// optimality system. Stops when the sample-mean update norm drops below tol;
/// exceeding max_iter is reported, not thrown.
inline std::pair<ControlProcess, SolveReport> solve(const ControlProblem& p,
                                                    const CEEstimator& ce,
                                                    const SolveOptions& opts = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    const double s_step = opts.step > 0.0 ? opts.step : 1.0 / p.nu;
    if (s_step > 1.0 / p.nu + 1e-15)
        throw InvalidArgument("solve: step must satisfy 0 < s <= 1/nu");

    ControlProcess u = initial_control(p);
    SolveReport rep;
    rep.ce_kind = ce_kind_name(ce.kind);

    for (int k = 0; k < opts.max_iter; ++k) {
        const auto sw = detail::sweep(p, u, opts.threads, true);
        const auto cehat = detail::condition_targets(p, ce, sw.targets);

        const double rho = detail::max_step_norm(p, [&](int s, int j) -> Eigen::VectorXd {
            return u.values[s].col(j) -
                   project_box(Eigen::MatrixXd(-cehat[j].col(s) / p.nu), p.lower, p.upper);
        });

        ControlProcess next = u;
        for (int s = 0; s < p.samples(); ++s)
            for (int j = 0; j < p.J; ++j)
                next.values[s].col(j) =
                    project_box(Eigen::MatrixXd(u.values[s].col(j) -
                                                s_step * (p.nu * u.values[s].col(j) +
                                                          cehat[j].col(s))),
                                p.lower, p.upper)
                        .col(0);

        const double delta = detail::max_step_norm(p, [&](int s, int j) -> Eigen::VectorXd {
            return next.values[s].col(j) - u.values[s].col(j);
        });

        rep.cost_history.push_back(sw.cost);
        rep.residual_history.push_back(rho);
        rep.delta_history.push_back(delta);
        u = std::move(next);
        rep.iterations = k + 1;
        if (delta <= opts.tol) {
            rep.converged = true;
            break;
        }
    }

    // honest final evaluation at the returned control
    const auto sw = detail::sweep(p, u, opts.threads, true);
    const auto cehat = detail::condition_targets(p, ce, sw.targets);
    rep.final_cost = sw.cost;
    rep.cost_history.push_back(sw.cost);
    rep.final_residual = detail::max_step_norm(p, [&](int s, int j) -> Eigen::VectorXd {
        return u.values[s].col(j) -
               project_box(Eigen::MatrixXd(-cehat[j].col(s) / p.nu), p.lower, p.upper);
    });
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(u), std::move(rep)};
}

/// Lumped-quadrature pairing sum_j tau E <g_j, w_j - u_j> of the boundary
/// integral; under it the nodal clamp fixed point and the variational
/// inequality are exactly equivalent.
inline double vi_pairing(const ControlProblem& p, const std::vector<Eigen::MatrixXd>& g,
                         const ControlProcess& w, const ControlProcess& u) {
    double acc = 0.0;
    for (int s = 0; s < p.samples(); ++s) {
        double path = 0.0;
        for (int j = 0; j < p.J; ++j)
            path += p.tau * (p.ops->bnd_lumped.array() * g[s].col(j).array() *
                             (w.values[s].col(j) - u.values[s].col(j)).array())
                                .sum();
        acc += p.weight(s) * path;
    }
    return acc;
}

/// Random feasible adapted probe: node-measurable on trees, deterministic
/// per step otherwise.
inline ControlProcess random_feasible_probe(const ControlProblem& p, std::uint64_t seed) {
    ControlProcess w = initial_control(p);
    if (p.source.is_tree()) {
        const ScenarioTree& tree = *p.source.tree;
        for (int j = 0; j < p.J; ++j) {
            const std::int64_t nodes = tree.node_count(j);
            Eigen::MatrixXd node_vals(p.ops->n_boundary(), nodes);
            for (std::int64_t nd = 0; nd < nodes; ++nd)
                for (int i = 0; i < p.ops->n_boundary(); ++i)
                    node_vals(i, nd) = p.lower + (p.upper - p.lower) *
                        uniform_from_key(counter_key(seed, static_cast<std::uint64_t>(nd), j, i));
            for (int s = 0; s < p.samples(); ++s)
                w.values[s].col(j) = node_vals.col(tree.node_of(s, j));
        }
    } else {
        for (int j = 0; j < p.J; ++j) {
            Eigen::VectorXd col(p.ops->n_boundary());
            for (int i = 0; i < p.ops->n_boundary(); ++i)
                col[i] = p.lower + (p.upper - p.lower) *
                    uniform_from_key(counter_key(seed, 0, j, i));
            for (int s = 0; s < p.samples(); ++s) w.values[s].col(j) = col;
        }
    }
    return w;
}

/// Minimum of the VI pairing over `probe_count` random feasible adapted
/// probes. At the solver optimum this must not be below -tol.
inline double vi_residual(const ControlProblem& p, const ControlProcess& u,
                          const CEEstimator& ce, int probe_count,
                          std::uint64_t seed = 2024, int threads = 1) {
    check_feasible(p, u);
    const auto g = gradient(p, u, ce, threads);
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < probe_count; ++k) {
        const ControlProcess w = random_feasible_probe(p, mix64(seed + k));
        worst = std::min(worst, vi_pairing(p, g, w, u));
    }
    return worst;
}

} // namespace sbc
