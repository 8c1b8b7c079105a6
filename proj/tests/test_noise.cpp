#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>

#include "sbc/noise.hpp"

using namespace sbc;

namespace {

// 16-point Gauss-Legendre nodes/weights on [0,1]
const double kX16[16] = {
    0.0052995325041750335, 0.0277124884633837, 0.06718439880608412, 0.12229779582249845,
    0.19106187779867811,  0.27099161117138633, 0.35919822461037054, 0.45249374508118123,
    0.54750625491881877,  0.64080177538962946, 0.72900838882861367, 0.80893812220132189,
    0.87770220417750155,  0.93281560119391588, 0.9722875115366163,  0.99470046749582497};
const double kW16[16] = {
    0.013576229705877047, 0.031126761969323946, 0.047579255841246392, 0.062314485627766936,
    0.074797994408288368, 0.084578259697501269, 0.091301707522461794, 0.094725305227534248,
    0.094725305227534248, 0.091301707522461794, 0.084578259697501269, 0.074797994408288368,
    0.062314485627766936, 0.047579255841246392, 0.031126761969323946, 0.013576229705877047};

// quadrature of phi_n * phi_m over the boundary, 16 points per unit edge
double mode_pairing(const NoiseSpec& spec, int n, int m, int edges_per_side = 4) {
    const double L = spec.perimeter;
    const int edges = 4 * edges_per_side;
    const double len = L / edges;
    double acc = 0.0;
    for (int e = 0; e < edges; ++e)
        for (int q = 0; q < 16; ++q) {
            const double s = (e + kX16[q]) * len;
            acc += kW16[q] * len * fourier_mode(spec, n, s) * fourier_mode(spec, m, s);
        }
    return acc;
}

} // namespace

TEST_CASE("fourier boundary basis") {
    NoiseSpec spec;
    CHECK(fourier_mode(spec, 0, 0.0) == doctest::Approx(0.5));
    CHECK(fourier_mode(spec, 0, 2.7) == doctest::Approx(0.5));
    CHECK(fourier_mode(spec, 1, 0.0) == doctest::Approx(std::sqrt(0.5)));
    for (int n = 0; n <= 8; ++n)
        for (int m = 0; m <= 8; ++m)
            CHECK(mode_pairing(spec, n, m) ==
                  doctest::Approx(n == m ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
}

TEST_CASE("lambda decay and validation") {
    NoiseSpec spec;
    CHECK(spec.lambda(0) == doctest::Approx(1.0));
    CHECK(spec.lambda(1) == doctest::Approx(0.25));
    spec.n_modes = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
}

TEST_CASE("time-profile weighting preserves the one-step variance") {
    NoiseSpec spec;
    spec.s = [](double t) { return 1.0 + t; };
    // sbar^2 = (1/tau) integral of (1+t)^2, exact for the 4-point rule
    const double tau = 0.4;
    const double exact = (std::pow(1.0 + tau, 3) - 1.0) / (3.0 * tau);
    CHECK(spec.sbar(0.0, tau) == doctest::Approx(std::sqrt(exact)).epsilon(1e-13));
    NoiseSpec flat;
    CHECK(flat.sbar(0.3, 0.7) == 1.0);
}

TEST_CASE("ensemble determinism and moments") {
    NoiseSpec spec;
    spec.n_modes = 2;
    const double tau = 0.01;
    const int S = 100000;
    const auto a = sample_ensemble(spec, 4, tau, S, 42);
    const auto b = sample_ensemble(spec, 4, tau, S, 42);
    REQUIRE(a.increments.size() == b.increments.size());
    CHECK(std::memcmp(a.increments.data(), b.increments.data(),
                      a.increments.size() * sizeof(double)) == 0);

    const auto c = sample_ensemble(spec, 4, tau, 1000, 43);
    CHECK(std::memcmp(a.increments.data(), c.increments.data(),
                      c.increments.size() * sizeof(double)) != 0);

    double mean = 0.0, var = 0.0;
    for (int s = 0; s < S; ++s) mean += a.incr(s, 0, 0);
    mean /= S;
    for (int s = 0; s < S; ++s) var += (a.incr(s, 0, 0) - mean) * (a.incr(s, 0, 0) - mean);
    var /= S - 1;
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(tau / S));
    CHECK(var >= tau * 0.95);
    CHECK(var <= tau * 1.05);
}

TEST_CASE("coarsen") {
    NoiseSpec spec;
    spec.n_modes = 3;
    const auto e = sample_ensemble(spec, 8, 0.125, 50, 7);

    const auto id = coarsen(e, 1);
    CHECK(std::memcmp(id.increments.data(), e.increments.data(),
                      e.increments.size() * sizeof(double)) == 0);

    const auto total = coarsen(e, 8);
    for (int s = 0; s < 50; ++s)
        for (int n = 0; n < 3; ++n)
            CHECK(total.incr(s, 0, n) == doctest::Approx(e.beta(s, 8, n)).epsilon(1e-15));

    const auto c22 = coarsen(coarsen(e, 2), 2);
    const auto c4 = coarsen(e, 4);
    CHECK(c22.J == c4.J);
    for (std::size_t i = 0; i < c4.increments.size(); ++i)
        CHECK(c22.increments[i] == doctest::Approx(c4.increments[i]).epsilon(1e-15));

    CHECK_THROWS_AS(coarsen(e, 3), StructuralError);
}

TEST_CASE("scenario tree structure") {
    NoiseSpec spec;
    spec.n_modes = 1;
    const double tau = 0.25;
    const auto t = build_tree(spec, 2, tau, 2);
    CHECK(t.branching == 2);
    CHECK(t.leaf_count == 4);
    const double rt = std::sqrt(tau);
    for (std::int64_t leaf = 0; leaf < 4; ++leaf) {
        CHECK(t.leaf_prob(leaf) == doctest::Approx(0.25));
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(t.increment(leaf, j, 0)) == doctest::Approx(rt));
    }
    // child probabilities sum to one, third moment vanishes exactly for m=2
    CHECK(t.child_prob.sum() == 1.0);
    double third = 0.0;
    for (int c = 0; c < t.branching; ++c)
        third += t.child_prob[c] * std::pow(t.child_increments(c, 0), 3);
    CHECK(third == 0.0);
}

TEST_CASE("tree matches gaussian moments (m = 2 and 3)") {
    NoiseSpec spec;
    spec.n_modes = 2;
    for (int m : {2, 3}) {
        const auto t = build_tree(spec, 1, 0.3, m);
        for (int n = 0; n < 2; ++n) {
            double m1 = 0.0, m2 = 0.0;
            for (int c = 0; c < t.branching; ++c) {
                m1 += t.child_prob[c] * t.child_increments(c, n);
                m2 += t.child_prob[c] * t.child_increments(c, n) * t.child_increments(c, n);
            }
            CHECK(std::abs(m1) <= 1e-16);
            CHECK(m2 == doctest::Approx(0.3).epsilon(1e-14));
        }
    }
}

TEST_CASE("tree budget") {
    NoiseSpec spec;
    spec.n_modes = 2;
    try {
        build_tree(spec, 12, 0.1, 3, 1000);
        FAIL("expected SizeError");
    } catch (const SizeError& err) {
        CHECK(std::string(err.what()).find("budget") != std::string::npos);
    }
}

TEST_CASE("tree paths agree with sampled ensembles on linear functionals") {
    NoiseSpec spec;
    spec.n_modes = 1;
    const double tau = 0.5;
    const int J = 2;
    const auto tree = build_tree(spec, J, tau, 2);
    const auto leaves = tree_paths(tree);

    // linear functional: sum of all increments
    double tree_mean = 0.0, tree_second = 0.0;
    for (int s = 0; s < leaves.sample_count; ++s) {
        double v = 0.0;
        for (int j = 0; j < J; ++j) v += leaves.incr(s, j, 0);
        tree_mean += leaves.weights[s] * v;
        tree_second += leaves.weights[s] * v * v;
    }
    CHECK(std::abs(tree_mean) <= 1e-15);
    CHECK(tree_second == doctest::Approx(J * tau).epsilon(1e-13));

    const int S = 200000;
    const auto mc = sample_ensemble(spec, J, tau, S, 99);
    double mc_second = 0.0;
    for (int s = 0; s < S; ++s) {
        double v = 0.0;
        for (int j = 0; j < J; ++j) v += mc.incr(s, j, 0);
        mc_second += v * v / S;
    }
    // var of v^2 is 2(J tau)^2 for gaussian v
    const double sigma = std::sqrt(2.0) * J * tau / std::sqrt(static_cast<double>(S));
    CHECK(std::abs(mc_second - tree_second) <= 3.0 * sigma);
}

TEST_CASE("truncated covariance consistency") {
    // E <W(t), v>^2 -> t * sum lambda_n <phi_n, v>^2 for v in the mode span
    NoiseSpec spec;
    spec.n_modes = 4;
    const double tau = 0.1;
    const int J = 5, S = 50000;
    const auto e = sample_ensemble(spec, J, tau, S, 2024);
    // v = phi_1 + 0.3 phi_2: <phi_n, v> = delta_{n1} + 0.3 delta_{n2}
    const double c1 = 1.0, c2 = 0.3;
    const double t = J * tau;
    double acc = 0.0;
    for (int s = 0; s < S; ++s) {
        const double inner = std::sqrt(spec.lambda(1)) * e.beta(s, J, 1) * c1 +
                             std::sqrt(spec.lambda(2)) * e.beta(s, J, 2) * c2;
        acc += inner * inner / S;
    }
    const double exact = t * (spec.lambda(1) * c1 * c1 + spec.lambda(2) * c2 * c2);
    const double sigma = std::sqrt(2.0) * exact / std::sqrt(static_cast<double>(S));
    CHECK(std::abs(acc - exact) <= 3.0 * sigma);
}

TEST_CASE("coarsen commutes with sample restriction") {
    NoiseSpec spec;
    spec.n_modes = 2;
    const auto e = sample_ensemble(spec, 4, 0.25, 20, 5);
    const auto coarse = coarsen(e, 2);
    // restriction: keep first 10 samples
    NoiseEnsemble sub = e;
    sub.sample_count = 10;
    sub.increments.resize(static_cast<std::size_t>(10) * e.J * e.n_modes);
    sub.weights.assign(10, 0.1);
    const auto coarse_sub = coarsen(sub, 2);
    for (int s = 0; s < 10; ++s)
        for (int j = 0; j < 2; ++j)
            for (int n = 0; n < 2; ++n)
                CHECK(coarse_sub.incr(s, j, n) == coarse.incr(s, j, n));
}
