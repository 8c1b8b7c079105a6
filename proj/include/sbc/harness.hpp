#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbc/config.hpp"
#include "sbc/csv.hpp"
#include "sbc/optimizer.hpp"
#include "sbc/prolong.hpp"

namespace sbc {

/// Least-squares slope of log(error) against log(step).
inline double estimate_order(const std::vector<double>& steps,
                             const std::vector<double>& errors) {
    if (steps.size() != errors.size() || steps.size() < 3)
        throw InvalidArgument("estimate_order: need at least 3 levels");
    const int n = static_cast<int>(steps.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!(steps[i] > 0.0) || !(errors[i] > 0.0))
            throw InvalidArgument("estimate_order: inputs must be positive");
        const double x = std::log(steps[i]);
        const double y = std::log(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct RateRow {
    std::string study;
    int level = 0;
    int mesh_n = 0;
    int J = 0;
    int samples = 0;
    double error = 0.0;
    double ci_half = 0.0;
    double seconds = 0.0;
};

struct RateTable {
    std::string study;
    std::vector<RateRow> rows;
    double fitted_order = 0.0;
    double target_order = 0.0;
    std::string pass = "0";  // "1", "0", "degenerate" or "inconclusive"
};

namespace detail {

/// Mean-square error accumulator with a 95% delta-method CI on the rms scale.
struct ErrorStat {
    double sum2 = 0.0, sum4 = 0.0;
    int count = 0;
    void add(double err2) {
        sum2 += err2;
        sum4 += err2 * err2;
        ++count;
    }
    double error() const { return count ? std::sqrt(sum2 / count) : 0.0; }
    double ci_half() const {
        if (count < 2) return 0.0;
        const double m2 = sum2 / count;
        const double var = std::max(sum4 / count - m2 * m2, 0.0);
        const double se = 1.96 * std::sqrt(var / count);
        const double e = error();
        return e > 0.0 ? se / (2.0 * e) : 0.0;
    }
};

/// Fitted order plus the pass flag (lower-bound slope, conclusive CIs,
/// monotone refinement over the three finest levels within one CI).
inline void finish_table(RateTable& t, const std::vector<double>& xs, double target) {
    t.target_order = target;
    bool degenerate = true;
    for (const auto& r : t.rows)
        if (r.error > 1e-14) degenerate = false;
    if (degenerate) {
        t.fitted_order = 0.0;
        t.pass = "degenerate";
        return;
    }
    std::vector<double> errs;
    for (const auto& r : t.rows) errs.push_back(r.error);
    t.fitted_order = estimate_order(xs, errs);

    bool conclusive = true;
    for (std::size_t i = 0; i + 1 < t.rows.size(); ++i)
        if (std::abs(t.rows[i].error - t.rows[i + 1].error) <=
            t.rows[i].ci_half + t.rows[i + 1].ci_half)
            conclusive = false;
    bool monotone = true;
    const std::size_t first = t.rows.size() > 3 ? t.rows.size() - 3 : 0;
    for (std::size_t i = first; i + 1 < t.rows.size(); ++i)
        if (t.rows[i + 1].error >
            t.rows[i].error + t.rows[i].ci_half + t.rows[i + 1].ci_half)
            monotone = false;

    if (!conclusive)
        t.pass = "inconclusive";
    else
        t.pass = (t.fitted_order >= target && monotone) ? "1" : "0";
}

inline NoiseSpec spec_from(const RunConfig& cfg) {
    NoiseSpec s;
    s.n_modes = cfg.n_modes;
    s.lambda_exponent = cfg.lambda_exponent;
    s.mu_scale = cfg.mu;
    return s;
}

inline CEEstimator estimator_from(const RunConfig& cfg) {
    CEEstimator ce;
    if (cfg.ce_kind == "tree")
        ce.kind = CEKind::tree;
    else if (cfg.ce_kind == "mean")
        ce.kind = CEKind::mean;
    else
        ce.kind = CEKind::lsmc;
    ce.features.degree = cfg.ce_degree;
    ce.features.modes = cfg.ce_modes;
    ce.features.ridge = cfg.ce_ridge;
    return ce;
}

inline SolveOptions solve_options_from(const RunConfig& cfg, int threads) {
    SolveOptions o;
    o.step = cfg.step;
    o.tol = cfg.tol;
    o.max_iter = cfg.max_iter;
    o.threads = threads;
    return o;
}

/// Meshes for every dyadic resolution between the coarsest level and the
/// reference, so coarse fields can be injected stepwise.
inline std::map<int, Mesh> mesh_chain(const std::vector<int>& levels, int ref) {
    std::map<int, Mesh> chain;
    for (int n : levels) {
        if (n < 1 || ref % n != 0)
            throw InvalidArgument("mesh levels must divide the reference resolution");
        int k = ref / n;
        if ((k & (k - 1)) != 0)
            throw InvalidArgument("mesh level ratios must be powers of two");
        if (n >= ref) throw InvalidArgument("reference level must be strictly finest");
        for (int m = n; m <= ref; m *= 2)
            if (!chain.count(m)) chain.emplace(m, build_structured_mesh(m));
    }
    return chain;
}

/// Inject a nodal field from resolution n up to the reference resolution.
inline Eigen::VectorXd inject_to_ref(const std::map<int, Mesh>& chain, int n, int ref,
                                     Eigen::VectorXd v) {
    for (int m = n; m < ref; m *= 2) v = prolong_nodal(chain.at(m), chain.at(2 * m), v);
    return v;
}

inline Eigen::VectorXd inject_boundary_to_ref(const std::map<int, Mesh>& chain, int n,
                                              int ref, Eigen::VectorXd v) {
    for (int m = n; m < ref; m *= 2) v = prolong_boundary(chain.at(m), chain.at(2 * m), v);
    return v;
}

inline double elapsed(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

struct NoiseStudyResult {
    RateTable spatial;
    RateTable temporal;
};

/// Self-convergence of the noise convolution under synchronous coupling:
/// spatial table against a finer mesh at fixed tau, temporal table against a
/// finer step on a fixed mesh with aggregated increments.
inline NoiseStudyResult converge_noise(const RunConfig& cfg, int threads = 1,
                                       bool timing = false) {
    const NoiseSpec spec = detail::spec_from(cfg);
    const int S = cfg.study_samples;
    NoiseStudyResult out;
    out.spatial.study = "noise_h";
    out.temporal.study = "noise_tau";

    {  // spatial: levels vs mesh_ref at fixed J
        const int J = cfg.J;
        const double tau = cfg.T / J;
        const auto chain = detail::mesh_chain(cfg.mesh_levels, cfg.mesh_ref);
        const auto ops_ref = assemble(chain.at(cfg.mesh_ref), tau);
        const auto loads_ref = mode_loads(ops_ref, spec);
        const auto ens = sample_ensemble(spec, J, tau, S, cfg.seed);

        std::vector<double> xs;
        int level = 0;
        for (int n : cfg.mesh_levels) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto ops = assemble(chain.at(n), tau);
            const auto loads = mode_loads(ops, spec);
            std::vector<double> err2(S, 0.0);
            parallel_for(S, threads, [&](int s) {
                const Trajectory g = forward_G(ops, spec, ens, s, loads);
                const Trajectory gref = forward_G(ops_ref, spec, ens, s, loads_ref);
                double acc = 0.0;
                for (int j = 0; j < J; ++j) {
                    const Eigen::VectorXd d =
                        detail::inject_to_ref(chain, n, cfg.mesh_ref, g.fields[j]) -
                        gref.fields[j];
                    acc += tau * ops_ref.m_norm2(d);
                }
                err2[s] = acc;
            });
            detail::ErrorStat stat;
            for (double e : err2) stat.add(e);
            RateRow row{out.spatial.study, level++, n, J, S, stat.error(), stat.ci_half(),
                        timing ? detail::elapsed(t0) : 0.0};
            out.spatial.rows.push_back(row);
            xs.push_back(std::sqrt(2.0) / n);
        }
        detail::finish_table(out.spatial, xs, 0.4);
    }

    {  // temporal: J levels vs j_ref on a fixed mesh
        const int n = cfg.mesh_n;
        const Mesh mesh = build_structured_mesh(n);
        const double tau_ref = cfg.T / cfg.j_ref;
        const auto ops_ref = assemble(mesh, tau_ref);
        const auto loads_ref = mode_loads(ops_ref, spec);
        const auto ens_ref = sample_ensemble(spec, cfg.j_ref, tau_ref, S, cfg.seed);

        std::vector<double> xs;
        int level = 0;
        for (int J : cfg.j_levels) {
            if (J >= cfg.j_ref || cfg.j_ref % J != 0)
                throw InvalidArgument("temporal levels must divide the reference step count");
            const auto t0 = std::chrono::steady_clock::now();
            const int factor = cfg.j_ref / J;
            const double tau = cfg.T / J;
            const auto ops = assemble(mesh, tau);
            const auto loads = mode_loads(ops, spec);
            const auto ens = coarsen(ens_ref, factor);
            std::vector<double> err2(S, 0.0);
            parallel_for(S, threads, [&](int s) {
                const Trajectory g = forward_G(ops, spec, ens, s, loads);
                const Trajectory gref = forward_G(ops_ref, spec, ens_ref, s, loads_ref);
                double acc = 0.0;
                for (int j = 0; j < cfg.j_ref; ++j) {
                    const Eigen::VectorXd d = gref.fields[j] - g.fields[j / factor];
                    acc += tau_ref * ops_ref.m_norm2(d);
                }
                err2[s] = acc;
            });
            detail::ErrorStat stat;
            for (double e : err2) stat.add(e);
            RateRow row{out.temporal.study, level++, n, J, S, stat.error(), stat.ci_half(),
                        timing ? detail::elapsed(t0) : 0.0};
            out.temporal.rows.push_back(row);
            xs.push_back(tau);
        }
        detail::finish_table(out.temporal, xs, 0.2);
    }
    return out;
}

enum class StudyAxis { h, tau };

struct ControlStudyResult {
    RateTable control;
    RateTable state;
};

/// Self-convergence of the solved control (and its controlled state) against
/// the finest level, all levels driven by the same coupled noise.
inline ControlStudyResult converge_control(const RunConfig& cfg, StudyAxis axis,
                                           int threads = 1, bool timing = false) {
    const NoiseSpec spec = detail::spec_from(cfg);
    const CEEstimator ce = detail::estimator_from(cfg);
    const SolveOptions opts = detail::solve_options_from(cfg, threads);
    const int S = cfg.study_samples;
    const YdProfile yd = make_yd(cfg.yd);

    ControlStudyResult out;
    out.control.study = axis == StudyAxis::h ? "control_h" : "control_tau";
    out.state.study = axis == StudyAxis::h ? "state_h" : "state_tau";

    auto solve_instance = [&](std::shared_ptr<const DiscreteOperators> ops, int J,
                              NoiseEnsemble ens) {
        NoiseSource src{std::move(ens), nullptr};
        const auto problem = make_problem(std::move(ops), spec, yd, cfg.nu, cfg.lower,
                                          cfg.upper, cfg.T, J, std::move(src));
        auto [u, rep] = solve(problem, ce, opts);
        if (!rep.converged)
            throw Error("converge_control: solver did not converge at a level (residual " +
                        fmt_double(rep.final_residual) + ")");
        return u;
    };

    std::vector<double> xs;
    if (axis == StudyAxis::h) {
        const int J = cfg.J;
        const double tau = cfg.T / J;
        const auto chain = detail::mesh_chain(cfg.mesh_levels, cfg.mesh_ref);
        const auto ens = sample_ensemble(spec, J, tau, S, cfg.seed);
        auto ops_ref =
            std::make_shared<const DiscreteOperators>(assemble(chain.at(cfg.mesh_ref), tau));
        const ControlProcess u_ref = solve_instance(ops_ref, J, ens);

        int level = 0;
        for (int n : cfg.mesh_levels) {
            const auto t0 = std::chrono::steady_clock::now();
            auto ops =
                std::make_shared<const DiscreteOperators>(assemble(chain.at(n), tau));
            const ControlProcess u = solve_instance(ops, J, ens);
            std::vector<double> err2u(S, 0.0), err2y(S, 0.0);
            parallel_for(S, threads, [&](int s) {
                double au = 0.0, ay = 0.0;
                for (int j = 0; j < J; ++j) {
                    const Eigen::VectorXd d =
                        detail::inject_boundary_to_ref(chain, n, cfg.mesh_ref,
                                                       u.values[s].col(j)) -
                        u_ref.values[s].col(j);
                    au += tau * d.dot(ops_ref->M_bnd * d);
                }
                const Trajectory y = forward_S0(*ops, u.values[s]);
                const Trajectory yref = forward_S0(*ops_ref, u_ref.values[s]);
                for (int j = 0; j < J; ++j) {
                    const Eigen::VectorXd d =
                        detail::inject_to_ref(chain, n, cfg.mesh_ref, y.fields[j]) -
                        yref.fields[j];
                    ay += tau * ops_ref->m_norm2(d);
                }
                err2u[s] = au;
                err2y[s] = ay;
            });
            detail::ErrorStat su, sy;
            for (int s = 0; s < S; ++s) {
                su.add(err2u[s]);
                sy.add(err2y[s]);
            }
            const double secs = timing ? detail::elapsed(t0) : 0.0;
            out.control.rows.push_back(
                {out.control.study, level, n, J, S, su.error(), su.ci_half(), secs});
            out.state.rows.push_back(
                {out.state.study, level, n, J, S, sy.error(), sy.ci_half(), secs});
            xs.push_back(std::sqrt(2.0) / n);
            ++level;
        }
        detail::finish_table(out.control, xs, 0.4);
        detail::finish_table(out.state, xs, 0.4);
    } else {
        const int n = cfg.mesh_n;
        const Mesh mesh = build_structured_mesh(n);
        const double tau_ref = cfg.T / cfg.j_ref;
        const auto ens_ref = sample_ensemble(spec, cfg.j_ref, tau_ref, S, cfg.seed);
        auto ops_ref = std::make_shared<const DiscreteOperators>(assemble(mesh, tau_ref));
        const ControlProcess u_ref = solve_instance(ops_ref, cfg.j_ref, ens_ref);

        int level = 0;
        for (int J : cfg.j_levels) {
            if (J >= cfg.j_ref || cfg.j_ref % J != 0)
                throw InvalidArgument("temporal levels must divide the reference step count");
            const auto t0 = std::chrono::steady_clock::now();
            const int factor = cfg.j_ref / J;
            const double tau = cfg.T / J;
            auto ops = std::make_shared<const DiscreteOperators>(assemble(mesh, tau));
            const ControlProcess u = solve_instance(ops, J, coarsen(ens_ref, factor));
            std::vector<double> err2u(S, 0.0), err2y(S, 0.0);
            parallel_for(S, threads, [&](int s) {
                double au = 0.0, ay = 0.0;
                for (int j = 0; j < cfg.j_ref; ++j) {
                    const Eigen::VectorXd d =
                        u.values[s].col(j / factor) - u_ref.values[s].col(j);
                    au += tau_ref * d.dot(ops_ref->M_bnd * d);
                }
                const Trajectory y = forward_S0(*ops, u.values[s]);
                const Trajectory yref = forward_S0(*ops_ref, u_ref.values[s]);
                for (int j = 0; j < cfg.j_ref; ++j) {
                    const Eigen::VectorXd d = y.fields[j / factor] - yref.fields[j];
                    ay += tau_ref * ops_ref->m_norm2(d);
                }
                err2u[s] = au;
                err2y[s] = ay;
            });
            detail::ErrorStat su, sy;
            for (int s = 0; s < S; ++s) {
                su.add(err2u[s]);
                sy.add(err2y[s]);
            }
            const double secs = timing ? detail::elapsed(t0) : 0.0;
            out.control.rows.push_back(
                {out.control.study, level, n, J, S, su.error(), su.ci_half(), secs});
            out.state.rows.push_back(
                {out.state.study, level, n, J, S, sy.error(), sy.ci_half(), secs});
            xs.push_back(tau);
            ++level;
        }
        detail::finish_table(out.control, xs, 0.2);
        detail::finish_table(out.state, xs, 0.2);
    }
    return out;
}

struct DualityRow {
    int mesh_n = 0;
    int J = 0;
    int pairs = 0;
    double max_rel_gap = 0.0;
};

struct DualityReport {
    std::vector<DualityRow> rows;
    double overall_max = 0.0;
    bool pass = false;
};

/// Max relative duality gap over random (f, g) pairs on a grid of
/// (mesh, step-count) combinations.
inline DualityReport duality_check(const RunConfig& cfg) {
    DualityReport rep;
    SplitMix64 rng(cfg.seed);
    for (int n : cfg.duality_mesh) {
        const Mesh mesh = build_structured_mesh(n);
        for (int J : cfg.duality_j) {
            const double tau = cfg.T / J;
            const auto ops = assemble(mesh, tau);
            double worst = 0.0;
            for (int pair = 0; pair < cfg.duality_pairs; ++pair) {
                Eigen::MatrixXd f(ops.n_boundary(), J), g(ops.n_vertices(), J);
                for (int j = 0; j < J; ++j) {
                    for (int i = 0; i < f.rows(); ++i) f(i, j) = rng.next_normal();
                    for (int i = 0; i < g.rows(); ++i) g(i, j) = rng.next_normal();
                }
                const auto r = duality_gap(ops, f, g);
                worst = std::max(worst,
                                 r.gap / (std::abs(r.lhs) + std::abs(r.rhs) + 1.0));
            }
            rep.rows.push_back({n, J, cfg.duality_pairs, worst});
            rep.overall_max = std::max(rep.overall_max, worst);
        }
    }
    rep.pass = rep.overall_max <= 1e-10;
    return rep;
}

struct TreeMcRow {
    std::string name;
    int samples = 0;
    double control_gap = 0.0;
    double gradient_gap = 0.0;
    std::string pass = "0";
};

struct TreeMcReport {
    std::vector<TreeMcRow> rows;
    bool pass = false;
};

namespace detail {

/// sqrt( sum_j tau |E[a_j] - E[b_j]|^2_{M_Gamma} ) for per-sample controls on
/// possibly different sample spaces.
inline double expected_control_gap(const ControlProblem& pa, const ControlProcess& a,
                                   const ControlProblem& pb, const ControlProcess& b) {
    double acc = 0.0;
    for (int j = 0; j < pa.J; ++j) {
        Eigen::VectorXd ma = Eigen::VectorXd::Zero(pa.ops->n_boundary());
        for (int s = 0; s < pa.samples(); ++s) ma += pa.weight(s) * a.values[s].col(j);
        Eigen::VectorXd mb = Eigen::VectorXd::Zero(pb.ops->n_boundary());
        for (int s = 0; s < pb.samples(); ++s) mb += pb.weight(s) * b.values[s].col(j);
        const Eigen::VectorXd d = ma - mb;
        acc += pa.tau * d.dot(pa.ops->M_bnd * d);
    }
    return std::sqrt(acc);
}

inline double expected_gradient_gap(const ControlProblem& pa, const ControlProcess& a,
                                    const CEEstimator& cea, const ControlProblem& pb,
                                    const ControlProcess& b, const CEEstimator& ceb,
                                    int threads) {
    const auto ga = gradient(pa, a, cea, threads);
    const auto gb = gradient(pb, b, ceb, threads);
    double acc = 0.0;
    for (int j = 0; j < pa.J; ++j) {
        Eigen::VectorXd ma = Eigen::VectorXd::Zero(pa.ops->n_boundary());
        for (int s = 0; s < pa.samples(); ++s) ma += pa.weight(s) * ga[s].col(j);
        Eigen::VectorXd mb = Eigen::VectorXd::Zero(pb.ops->n_boundary());
        for (int s = 0; s < pb.samples(); ++s) mb += pb.weight(s) * gb[s].col(j);
        const Eigen::VectorXd d = ma - mb;
        acc += pa.tau * d.dot(pa.ops->M_bnd * d);
    }
    return std::sqrt(acc);
}

} // namespace detail

/// Quantifies the conditional-expectation estimation error: exact tree
/// solutions against LSMC solutions on matched instances.
inline TreeMcReport tree_vs_mc(const RunConfig& cfg, int threads = 1) {
    const NoiseSpec spec = detail::spec_from(cfg);
    const double tau = cfg.T / cfg.J;
    const YdProfile yd = make_yd(cfg.yd);
    const SolveOptions opts = detail::solve_options_from(cfg, threads);
    auto ops = std::make_shared<const DiscreteOperators>(
        assemble(build_structured_mesh(cfg.mesh_n), tau));

    auto make_with_source = [&](NoiseSource src, double lo, double hi) {
        return make_problem(ops, spec, yd, cfg.nu, lo, hi, cfg.T, cfg.J, std::move(src));
    };

    CEEstimator tree_ce;
    tree_ce.kind = CEKind::tree;
    const auto p_tree =
        make_with_source(tree_source(spec, cfg.J, tau, cfg.tree_m, cfg.tree_budget),
                         cfg.lower, cfg.upper);
    const auto [u_tree, rep_tree] = solve(p_tree, tree_ce, opts);

    TreeMcReport rep;

    {   // tree leaves fed to LSMC with indicator-spanning features: estimators
        // coincide, so the two solutions agree pathwise
        CEEstimator ind;
        ind.kind = CEKind::lsmc;
        ind.features.indicator = true;
        NoiseSource leaves{tree_paths(*p_tree.source.tree), nullptr};
        const auto p_ind = make_with_source(std::move(leaves), cfg.lower, cfg.upper);
        const auto [u_ind, r_ind] = solve(p_ind, ind, opts);
        double acc = 0.0;
        for (int s = 0; s < p_ind.samples(); ++s)
            for (int j = 0; j < cfg.J; ++j) {
                const Eigen::VectorXd d = u_ind.values[s].col(j) - u_tree.values[s].col(j);
                acc += p_ind.weight(s) * tau * d.dot(ops->M_bnd * d);
            }
        const double gap = std::sqrt(acc);
        rep.rows.push_back({"indicator", p_ind.samples(), gap, 0.0,
                            gap <= 1e-8 ? "1" : "0"});
    }

    const CEEstimator lsmc = detail::estimator_from(cfg);
    std::vector<double> mc_gaps;
    for (int S : cfg.treemc_samples) {
        // small seed average to stabilize the sample-size comparison
        double gap = 0.0, ggap = 0.0;
        const int reps = 3;
        for (int r = 0; r < reps; ++r) {
            const auto p_mc = make_with_source(
                mc_source(spec, cfg.J, tau, S, cfg.seed + 1000 * r), cfg.lower, cfg.upper);
            const auto [u_mc, rep_mc] = solve(p_mc, lsmc, opts);
            gap += detail::expected_control_gap(p_mc, u_mc, p_tree, u_tree) / reps;
            ggap += detail::expected_gradient_gap(p_mc, u_mc, lsmc, p_tree, u_tree,
                                                  tree_ce, threads) /
                    reps;
        }
        mc_gaps.push_back(gap);
        rep.rows.push_back({"mc", S, gap, ggap, ""});
    }
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < mc_gaps.size(); ++i)
        if (mc_gaps[i + 1] >= mc_gaps[i]) decreasing = false;
    for (auto& r : rep.rows)
        if (r.name == "mc") r.pass = decreasing ? "1" : "0";

    {   // unconstrained instance: the adjoint is affine in the noise
        // coordinates, degree-1 regression is unbiased and the gap is purely
        // statistical
        const auto p_tree_u = make_with_source(
            tree_source(spec, cfg.J, tau, cfg.tree_m, cfg.tree_budget), -1e6, 1e6);
        const auto [u_tree_u, r_tu] = solve(p_tree_u, tree_ce, opts);
        const int S = cfg.treemc_samples.back();
        CEEstimator d1 = lsmc;
        d1.features.degree = 1;
        const auto p_mc_u =
            make_with_source(mc_source(spec, cfg.J, tau, S, cfg.seed + 77), -1e6, 1e6);
        const auto [u_mc_u, r_mu] = solve(p_mc_u, d1, opts);
        const double gap = detail::expected_control_gap(p_mc_u, u_mc_u, p_tree_u, u_tree_u);
        double scale = 0.0;
        for (int j = 0; j < cfg.J; ++j) {
            Eigen::VectorXd m = Eigen::VectorXd::Zero(ops->n_boundary());
            for (int s = 0; s < p_tree_u.samples(); ++s)
                m += p_tree_u.weight(s) * u_tree_u.values[s].col(j);
            scale += tau * m.dot(ops->M_bnd * m);
        }
        scale = std::sqrt(scale);
        rep.rows.push_back({"affine_d1", S, gap, 0.0,
                            gap <= 0.05 * scale + 2.0 * opts.tol ? "1" : "0"});
    }

    rep.pass = true;
    for (const auto& r : rep.rows)
        if (r.pass == "0") rep.pass = false;
    return rep;
}

// ---- CSV emission (bit-exact column order) --------------------------------

inline CsvFile rate_rows_csv(const std::vector<RateTable>& tables) {
    CsvFile csv("study,level,mesh_n,J,samples,error,ci_half,seconds");
    for (const auto& t : tables)
        for (const auto& r : t.rows)
            csv.add_row({r.study, std::to_string(r.level), std::to_string(r.mesh_n),
                         std::to_string(r.J), std::to_string(r.samples), fmt_double(r.error),
                         fmt_double(r.ci_half), fmt_double(r.seconds)});
    return csv;
}

inline CsvFile rate_summary_csv(const std::vector<RateTable>& tables) {
    CsvFile csv("study,fitted_order,target_order,pass");
    for (const auto& t : tables)
        csv.add_row({t.study, fmt_double(t.fitted_order), fmt_double(t.target_order), t.pass});
    return csv;
}

inline CsvFile duality_csv(const DualityReport& rep) {
    CsvFile csv("mesh_n,J,pairs,max_rel_gap");
    for (const auto& r : rep.rows)
        csv.add_row({std::to_string(r.mesh_n), std::to_string(r.J), std::to_string(r.pairs),
                     fmt_double(r.max_rel_gap)});
    return csv;
}

inline CsvFile treemc_csv(const TreeMcReport& rep) {
    CsvFile csv("case,samples,control_gap,gradient_gap,pass");
    for (const auto& r : rep.rows)
        csv.add_row({r.name, std::to_string(r.samples), fmt_double(r.control_gap),
                     fmt_double(r.gradient_gap), r.pass});
    return csv;
}

} // namespace sbc
