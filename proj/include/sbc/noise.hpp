#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbc/errors.hpp"
#include "sbc/rng.hpp"

namespace sbc {

/// Boundary noise model: W(t) = sum_n sqrt(lambda_n) beta_n(t) phi_n with the
/// real Fourier basis in arclength on the closed boundary curve, and a
/// diagonal diffusion sigma(t) phi_n = s(t) * mu_n * phi_n.
struct NoiseSpec {
    int n_modes = 8;
    double lambda_exponent = 2.0;  // lambda_n = (1+n)^{-exponent}
    double mu_scale = 1.0;         // mu_n = mu_scale for every mode
    std::function<double(double)> s;  // deterministic time profile, empty means s == 1
    double perimeter = 4.0;

    double lambda(int n) const { return std::pow(1.0 + n, -lambda_exponent); }
    double mu(int) const { return mu_scale; }

    double s_at(double t) const { return s ? s(t) : 1.0; }

    /// sqrt of the mean of s^2 over [t0,t1]; weighting that keeps the
    /// one-step Ito isometry exact for deterministic s.
    double sbar(double t0, double t1) const {
        if (!s) return 1.0;
        static constexpr double X[4] = {0.06943184420297371, 0.33000947820757187,
                                        0.66999052179242813, 0.93056815579702629};
        static constexpr double W[4] = {0.17392742256872693, 0.32607257743127307,
                                        0.32607257743127307, 0.17392742256872693};
        double acc = 0.0;
        for (int q = 0; q < 4; ++q) {
            const double v = s(t0 + X[q] * (t1 - t0));
            acc += W[q] * v * v;
        }
        return std::sqrt(acc);
    }

    void validate() const {
        if (n_modes < 1) throw InvalidArgument("noise: n_modes must be >= 1");
        for (int n = 0; n < n_modes; ++n)
            if (!(lambda(n) > 0.0)) throw InvalidArgument("noise: lambda_n must be positive");
    }
};

/// phi_n evaluated at arclength s: phi_0 = 1/sqrt(L),
/// phi_{2m-1} = sqrt(2/L) cos(2 pi m s / L), phi_{2m} = sqrt(2/L) sin(2 pi m s / L).
inline double fourier_mode(const NoiseSpec& spec, int n, double s) {
    const double L = spec.perimeter;
    if (n == 0) return 1.0 / std::sqrt(L);
    const int m = (n + 1) / 2;
    const double arg = 2.0 * M_PI * m * s / L;
    const double amp = std::sqrt(2.0 / L);
    return (n % 2 == 1) ? amp * std::cos(arg) : amp * std::sin(arg);
}

/// Brownian increments per (sample, step, mode) plus a probability weight per
/// sample. Sampled ensembles carry uniform weights; tree enumerations carry
/// leaf probabilities.
struct NoiseEnsemble {
    int J = 0;
    double tau = 0.0;
    int n_modes = 0;
    int sample_count = 0;
    std::uint64_t seed = 0;
    std::vector<double> increments;  // [sample][step][mode]
    std::vector<double> weights;     // per sample, sums to 1
    bool from_tree = false;

    double incr(int sample, int step, int mode) const {
        return increments[(static_cast<std::size_t>(sample) * J + step) * n_modes + mode];
    }
    double& incr(int sample, int step, int mode) {
        return increments[(static_cast<std::size_t>(sample) * J + step) * n_modes + mode];
    }
    /// beta_n(t_j) = sum of increments with step index < j.
    double beta(int sample, int j, int mode) const {
        double b = 0.0;
        for (int k = 0; k < j; ++k) b += incr(sample, k, mode);
        return b;
    }
};

/// i.i.d. N(0, tau) increments, derived counter-style from
/// (seed, sample, step, mode): identical for any worker schedule.
inline NoiseEnsemble sample_ensemble(const NoiseSpec& spec, int J, double tau,
                                     int sample_count, std::uint64_t seed) {
    if (J < 1) throw InvalidArgument("sample_ensemble: J must be >= 1");
    if (tau <= 0.0) throw InvalidArgument("sample_ensemble: tau must be positive");
    if (sample_count < 1) throw InvalidArgument("sample_ensemble: need at least one sample");
    spec.validate();
    NoiseEnsemble e;
    e.J = J;
    e.tau = tau;
    e.n_modes = spec.n_modes;
    e.sample_count = sample_count;
    e.seed = seed;
    e.increments.resize(static_cast<std::size_t>(sample_count) * J * spec.n_modes);
    e.weights.assign(sample_count, 1.0 / sample_count);
    for (int s = 0; s < sample_count; ++s)
        for (int j = 0; j < J; ++j)
            for (int n = 0; n < spec.n_modes; ++n)
                e.incr(s, j, n) = gaussian_increment(seed, s, j, n, tau);
    return e;
}

/// Aggregate groups of `factor` consecutive increments: the coarse ensemble on
/// step factor*tau driven by exactly the same Brownian paths.
inline NoiseEnsemble coarsen(const NoiseEnsemble& fine, int factor) {
    if (factor < 1 || fine.J % factor != 0)
        throw StructuralError("coarsen: factor must divide the step count");
    NoiseEnsemble c;
    c.J = fine.J / factor;
    c.tau = fine.tau * factor;
    c.n_modes = fine.n_modes;
    c.sample_count = fine.sample_count;
    c.seed = fine.seed;
    c.weights = fine.weights;
    c.from_tree = fine.from_tree;
    c.increments.assign(static_cast<std::size_t>(c.sample_count) * c.J * c.n_modes, 0.0);
    for (int s = 0; s < c.sample_count; ++s)
        for (int j = 0; j < c.J; ++j)
            for (int n = 0; n < c.n_modes; ++n) {
                double sum = 0.0;
                for (int k = 0; k < factor; ++k) sum += fine.incr(s, j * factor + k, n);
                c.incr(s, j, n) = sum;
            }
    return c;
}

/// Exact finite filtration model: at every step each node branches into
/// m^{n_modes} children, one Gauss-Hermite increment value per mode. All
/// conditional expectations are then finite sums.
struct ScenarioTree {
    int J = 0;
    int n_modes = 0;
    int m = 2;  // quadrature points per mode
    double tau = 0.0;
    std::int64_t branching = 0;   // m^{n_modes}
    std::int64_t leaf_count = 0;  // branching^J
    Eigen::MatrixXd child_increments;  // branching x n_modes
    Eigen::VectorXd child_prob;        // branching

    std::int64_t pow_branching(int k) const {
        std::int64_t p = 1;
        for (int i = 0; i < k; ++i) p *= branching;
        return p;
    }
    std::int64_t node_count(int depth) const { return pow_branching(depth); }
    /// Depth-j ancestor of a leaf (the first j branching digits).
    std::int64_t node_of(std::int64_t leaf, int depth) const {
        return leaf / pow_branching(J - depth);
    }
    /// Child digit taken at step j on the way to a leaf.
    int digit(std::int64_t leaf, int step) const {
        return static_cast<int>((leaf / pow_branching(J - 1 - step)) % branching);
    }
    double increment(std::int64_t leaf, int step, int mode) const {
        return child_increments(digit(leaf, step), mode);
    }
    double leaf_prob(std::int64_t leaf) const {
        double p = 1.0;
        for (int j = 0; j < J; ++j) p *= child_prob[digit(leaf, j)];
        return p;
    }
};

/// Gauss-Hermite tree with m in {2,3}; m=2 uses +-sqrt(tau) with probability
/// 1/2, m=3 uses {-sqrt(3),0,sqrt(3)}*sqrt(tau) with weights {1/6,2/3,1/6}.
/// First and second moments match the Brownian increment exactly.
inline ScenarioTree build_tree(const NoiseSpec& spec, int J, double tau, int m,
                               std::int64_t budget = 1000000) {
    if (J < 1) throw InvalidArgument("build_tree: J must be >= 1");
    if (tau <= 0.0) throw InvalidArgument("build_tree: tau must be positive");
    if (m != 2 && m != 3) throw InvalidArgument("build_tree: m must be 2 or 3");
    spec.validate();

    ScenarioTree t;
    t.J = J;
    t.n_modes = spec.n_modes;
    t.m = m;
    t.tau = tau;
    t.branching = 1;
    for (int n = 0; n < spec.n_modes; ++n) {
        t.branching *= m;
        if (t.branching > budget)
            throw SizeError("build_tree: branching m^n_modes exceeds budget " +
                            std::to_string(budget));
    }
    t.leaf_count = 1;
    for (int j = 0; j < J; ++j) {
        if (t.leaf_count > budget / t.branching)
            throw SizeError("build_tree: needs " + std::to_string(t.leaf_count * t.branching) +
                            "+ leaves, budget is " + std::to_string(budget));
        t.leaf_count *= t.branching;
    }

    double nodes[3], probs[3];
    const double rt = std::sqrt(tau);
    if (m == 2) {
        nodes[0] = -rt; nodes[1] = rt;
        probs[0] = 0.5; probs[1] = 0.5;
    } else {
        const double r3 = std::sqrt(3.0) * rt;
        nodes[0] = -r3; nodes[1] = 0.0; nodes[2] = r3;
        probs[0] = 1.0 / 6.0; probs[1] = 2.0 / 3.0; probs[2] = 1.0 / 6.0;
    }

    t.child_increments.resize(t.branching, spec.n_modes);
    t.child_prob.resize(t.branching);
    for (std::int64_t c = 0; c < t.branching; ++c) {
        std::int64_t rem = c;
        double p = 1.0;
        for (int n = spec.n_modes - 1; n >= 0; --n) {
            const int d = static_cast<int>(rem % m);
            rem /= m;
            t.child_increments(c, n) = nodes[d];
            p *= probs[d];
        }
        t.child_prob[c] = p;
    }
    return t;
}

/// Enumerate all leaves of a tree as a weighted ensemble (weights = leaf
/// probabilities). Gives the evolution operators one path layout for both
/// Monte Carlo and tree-exact runs.
inline NoiseEnsemble tree_paths(const ScenarioTree& t) {
    NoiseEnsemble e;
    e.J = t.J;
    e.tau = t.tau;
    e.n_modes = t.n_modes;
    e.sample_count = static_cast<int>(t.leaf_count);
    e.seed = 0;
    e.from_tree = true;
    e.increments.resize(static_cast<std::size_t>(t.leaf_count) * t.J * t.n_modes);
    e.weights.resize(t.leaf_count);
    for (std::int64_t leaf = 0; leaf < t.leaf_count; ++leaf) {
        e.weights[leaf] = t.leaf_prob(leaf);
        for (int j = 0; j < t.J; ++j)
            for (int n = 0; n < t.n_modes; ++n)
                e.incr(static_cast<int>(leaf), j, n) = t.increment(leaf, j, n);
    }
    return e;
}

} // namespace sbc
