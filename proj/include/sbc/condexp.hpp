#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbc/errors.hpp"
#include "sbc/noise.hpp"

namespace sbc {

/// LSMC feature map: monomials of the cumulative Brownian coordinates
/// beta_n(t_j) up to `degree`, over the first `modes` modes. `indicator`
/// switches to one-hot features over distinct increment prefixes, which spans
/// the node indicator algebra for tree-distributed inputs.
struct FeatureSpec {
    int degree = 1;  // 1 or 2
    int modes = 4;
    double ridge = 1e-10;  // scaled by trace(Gram)/p
    bool indicator = false;
};

enum class CEKind { tree, lsmc, mean };

inline const char* ce_kind_name(CEKind k) {
    switch (k) {
        case CEKind::tree: return "tree";
        case CEKind::lsmc: return "lsmc";
        default: return "mean";
    }
}

/// Conditional-expectation estimator: exact on scenario trees, least-squares
/// Monte Carlo on sampled ensembles, plain mean for diagnostics (valid at
/// j = 0 or for data independent of the filtration; caller-asserted).
struct CEEstimator {
    CEKind kind = CEKind::lsmc;
    FeatureSpec features;
};

/// Paths plus, when present, the exact filtration model they came from.
struct NoiseSource {
    NoiseEnsemble paths;
    std::shared_ptr<const ScenarioTree> tree;  // null for Monte Carlo sources

    bool is_tree() const { return tree != nullptr; }
};

inline NoiseSource mc_source(const NoiseSpec& spec, int J, double tau, int samples,
                             std::uint64_t seed) {
    return NoiseSource{sample_ensemble(spec, J, tau, samples, seed), nullptr};
}

inline NoiseSource tree_source(const NoiseSpec& spec, int J, double tau, int m,
                               std::int64_t budget = 1000000) {
    auto tree = std::make_shared<ScenarioTree>(build_tree(spec, J, tau, m, budget));
    NoiseEnsemble paths = tree_paths(*tree);
    return NoiseSource{std::move(paths), std::move(tree)};
}

/// Exact conditional expectation on a scenario tree: the value at a depth-j
/// node is the probability-weighted average over its leaf descendants.
/// `values` holds one column per leaf; the result repeats each node value on
/// all of its leaves.
inline Eigen::MatrixXd ce_tree(const ScenarioTree& tree, int j, const Eigen::MatrixXd& values) {
    if (j < 0 || j > tree.J) throw InvalidArgument("ce_tree: depth out of range");
    if (values.cols() != tree.leaf_count)
        throw StructuralError("ce_tree: values must cover all leaves");
    const std::int64_t nodes = tree.node_count(j);
    const std::int64_t span = tree.leaf_count / nodes;  // leaves per depth-j node
    Eigen::MatrixXd out(values.rows(), values.cols());
    Eigen::VectorXd acc(values.rows());
    for (std::int64_t node = 0; node < nodes; ++node) {
        acc.setZero();
        double prob = 0.0;
        for (std::int64_t leaf = node * span; leaf < (node + 1) * span; ++leaf) {
            const double p = tree.leaf_prob(leaf);
            acc += p * values.col(leaf);
            prob += p;
        }
        acc /= prob;
        for (std::int64_t leaf = node * span; leaf < (node + 1) * span; ++leaf)
            out.col(leaf) = acc;
    }
    return out;
}

/// Probability-weighted sample mean broadcast to every sample.
inline Eigen::MatrixXd ce_mean(const NoiseEnsemble& ens, const Eigen::MatrixXd& values) {
    if (values.cols() != ens.sample_count)
        throw StructuralError("ce_mean: values/sample mismatch");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(values.rows());
    for (int s = 0; s < ens.sample_count; ++s) mean += ens.weights[s] * values.col(s);
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (int s = 0; s < ens.sample_count; ++s) out.col(s) = mean;
    return out;
}

namespace detail {

/// Polynomial feature matrix (samples x features), no constant column.
inline Eigen::MatrixXd poly_features(const NoiseEnsemble& ens, int j, const FeatureSpec& spec) {
    const int S = ens.sample_count;
    const int m = std::min(spec.modes, ens.n_modes);
    Eigen::MatrixXd beta(S, m);
    for (int s = 0; s < S; ++s)
        for (int n = 0; n < m; ++n) beta(s, n) = ens.beta(s, j, n);
    if (spec.degree <= 1) return beta;
    const int p2 = m * (m + 1) / 2;
    Eigen::MatrixXd F(S, m + p2);
    F.leftCols(m) = beta;
    int col = m;
    for (int a = 0; a < m; ++a)
        for (int b = a; b < m; ++b, ++col)
            F.col(col) = beta.col(a).cwiseProduct(beta.col(b));
    return F;
}

/// Group id per sample keyed by the exact increment prefix (steps < j).
inline std::vector<int> prefix_groups(const NoiseEnsemble& ens, int j, int* group_count) {
    std::map<std::vector<double>, int> ids;
    std::vector<int> group(ens.sample_count);
    for (int s = 0; s < ens.sample_count; ++s) {
        std::vector<double> key;
        key.reserve(static_cast<std::size_t>(j) * ens.n_modes);
        for (int k = 0; k < j; ++k)
            for (int n = 0; n < ens.n_modes; ++n) key.push_back(ens.incr(s, k, n));
        group[s] = static_cast<int>(ids.emplace(std::move(key), static_cast<int>(ids.size()))
                                        .first->second);
    }
    *group_count = static_cast<int>(ids.size());
    return group;
}

} // namespace detail

/// Least-squares Monte Carlo regression of per-sample targets on adapted
/// features of the path up to t_j. `values` holds one column per sample;
/// vector targets share a single factorization of the normal equations.
/// Ridge never penalizes the intercept, so a huge ridge recovers the mean.
inline Eigen::MatrixXd ce_lsmc(const NoiseEnsemble& ens, int j, const Eigen::MatrixXd& values,
                               const FeatureSpec& spec) {
    if (values.cols() != ens.sample_count)
        throw StructuralError("ce_lsmc: values/sample mismatch");
    if (j < 0 || j > ens.J) throw InvalidArgument("ce_lsmc: step out of range");
    const int S = ens.sample_count;
    const Eigen::Map<const Eigen::VectorXd> w(ens.weights.data(), S);

    if (spec.indicator) {
        // groupwise weighted means: exact CE for tree-distributed inputs
        int groups = 0;
        const std::vector<int> gid = detail::prefix_groups(ens, j, &groups);
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(values.rows(), groups);
        Eigen::VectorXd mass = Eigen::VectorXd::Zero(groups);
        for (int s = 0; s < S; ++s) {
            acc.col(gid[s]) += w[s] * values.col(s);
            mass[gid[s]] += w[s];
        }
        for (int g = 0; g < groups; ++g) acc.col(g) /= mass[g];
        Eigen::MatrixXd out(values.rows(), S);
        for (int s = 0; s < S; ++s) out.col(s) = acc.col(gid[s]);
        return out;
    }

    Eigen::MatrixXd F = detail::poly_features(ens, j, spec);
    const int p = static_cast<int>(F.cols());

    // weighted centering; zero-variance columns (e.g. every feature at j = 0)
    // drop out so only the intercept survives
    const Eigen::RowVectorXd fmean = w.transpose() * F;
    F.rowwise() -= fmean;
    std::vector<int> keep;
    Eigen::VectorXd var(p);
    for (int k = 0; k < p; ++k) var[k] = w.dot(F.col(k).cwiseAbs2());
    const double vmax = p > 0 ? var.maxCoeff() : 0.0;
    for (int k = 0; k < p; ++k)
        if (var[k] > vmax * 1e-24 && var[k] > 0.0) keep.push_back(k);

    Eigen::VectorXd ymean = Eigen::VectorXd::Zero(values.rows());
    for (int s = 0; s < S; ++s) ymean += w[s] * values.col(s);

    Eigen::MatrixXd out(values.rows(), S);
    for (int s = 0; s < S; ++s) out.col(s) = ymean;
    if (keep.empty()) return out;

    Eigen::MatrixXd Fk(S, static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) Fk.col(static_cast<int>(k)) = F.col(keep[k]);
    const Eigen::MatrixXd Fw = w.asDiagonal() * Fk;
    Eigen::MatrixXd gram = Fk.transpose() * Fw;
    const int pk = static_cast<int>(gram.rows());
    const double rho = spec.ridge * gram.trace() / pk;
    gram.diagonal().array() += rho;

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success ||
        d.minCoeff() <= 1e-13 * std::max(d.maxCoeff(), 0.0))
        throw ConditioningError(
            "ce_lsmc: rank-deficient normal equations; set ce.ridge > 0");

    Eigen::MatrixXd centered = values.transpose();  // S x n_comp
    centered.rowwise() -= ymean.transpose();
    const Eigen::MatrixXd rhs = Fw.transpose() * centered;      // pk x n_comp
    const Eigen::MatrixXd coef = ldlt.solve(rhs);               // pk x n_comp
    out += (Fk * coef).transpose();
    return out;
}

/// Dispatch on the estimator kind. Tree estimators demand a tree source.
inline Eigen::MatrixXd apply_ce(const NoiseSource& source, const CEEstimator& est, int j,
                                const Eigen::MatrixXd& values) {
    switch (est.kind) {
        case CEKind::tree:
            if (!source.is_tree())
                throw StructuralError("apply_ce: tree estimator needs a tree noise source");
            return ce_tree(*source.tree, j, values);
        case CEKind::lsmc:
            return ce_lsmc(source.paths, j, values, est.features);
        case CEKind::mean:
            return ce_mean(source.paths, values);
    }
    throw StructuralError("apply_ce: unknown estimator kind");
}

} // namespace sbc
