#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "prox_oracles.hpp"
#include "trc/prox.hpp"

using namespace trc;
using namespace trc::testing;

TEST(Svt, DiagonalShrinkage) {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 3;
    a(1, 1) = 1;
    const SVTResult r = svt(a, 2.0);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 1;
    EXPECT_LE((r.matrix - expected).norm(), 1e-12);
    EXPECT_EQ(r.effective_rank, 1u);
    EXPECT_NEAR(r.nuclear_norm_after, 1.0, 1e-12);
}

TEST(Svt, ZeroThresholdIsIdentity) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = Matrix::Random(static_cast<Eigen::Index>(uniform_int(rng, 1, 12)),
                                        static_cast<Eigen::Index>(uniform_int(rng, 1, 12)));
        EXPECT_LE((svt(a, 0.0).matrix - a).norm(), 1e-12 * std::max(1.0, a.norm()));
    }
}

TEST(Svt, BeatsRandomPerturbationsOnProxObjective) {
    std::mt19937_64 rng(2);
    Eigen::Matrix<double, 8, 5> fixed;
    for (Eigen::Index k = 0; k < fixed.size(); ++k) fixed(k) = std::normal_distribution<double>()(rng);
    const Matrix a = fixed;
    const double beta = 0.3;
    const Matrix x = svt(a, beta).matrix;
    const double best = prox_objective(x, a, beta);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 1000; ++k) {
        Matrix d(8, 5);
        for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = nd(rng);
        const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-4, 0)(rng));
        EXPECT_LE(best, prox_objective(x + scale * d, a, beta) + 1e-12);
    }
}

TEST(Svt, VanishesAboveLargestSingularValue) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = Matrix::Random(6, 4);
        const double smax = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
        const SVTResult r = svt(a, smax * (1.0 + 1e-9));
        EXPECT_EQ(r.matrix.norm(), 0.0);
        EXPECT_EQ(r.effective_rank, 0u);
    }
}

TEST(Svt, NonExpansive) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rows = static_cast<Eigen::Index>(uniform_int(rng, 1, 10));
        const auto cols = static_cast<Eigen::Index>(uniform_int(rng, 1, 10));
        const Matrix a = Matrix::Random(rows, cols), b = Matrix::Random(rows, cols);
        const double beta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        EXPECT_LE((svt(a, beta).matrix - svt(b, beta).matrix).norm(), (a - b).norm() + 1e-10);
    }
}

TEST(Svt, RejectsBadInput) {
    Matrix a = Matrix::Ones(2, 2);
    EXPECT_THROW(svt(a, -1.0), std::invalid_argument);
    a(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(svt(a, 1.0), NumericalError);
}

TEST(RidgeSolve, IdentityAndScaledIdentity) {
    const Matrix b = Matrix::Random(3, 4);
    EXPECT_LE((ridge_solve(b, Matrix::Identity(4, 4)) - b).norm(), 1e-15);
    EXPECT_LE((ridge_solve(b, 2.5 * Matrix::Identity(4, 4)) - b / 2.5).norm(), 1e-15);
}

TEST(RidgeSolve, ResidualOnRandomSpd) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto k = static_cast<Eigen::Index>(uniform_int(rng, 1, 30));
        const Matrix g = Matrix::Random(k, k);
        const Matrix a = g * g.transpose() + 0.1 * Matrix::Identity(k, k);
        const Matrix b = Matrix::Random(5, k);
        const Matrix x = ridge_solve(b, a);
        EXPECT_LE((x * a - b).norm(), 1e-10 * b.norm());
    }
}

TEST(RidgeSolve, RejectsNonSpd) {
    Matrix a = Matrix::Identity(3, 3);
    a(2, 2) = -1.0;
    EXPECT_THROW(ridge_solve(Matrix::Ones(2, 3), a), NumericalError);
    EXPECT_THROW(ridge_solve(Matrix::Ones(2, 3), Matrix::Zero(3, 3)), NumericalError);
    Matrix asym = Matrix::Identity(3, 3);
    asym(0, 1) = 0.5;
    EXPECT_THROW(ridge_solve(Matrix::Ones(2, 3), asym), NumericalError);
    EXPECT_THROW(ridge_solve(Matrix::Ones(2, 2), Matrix::Identity(3, 3)), DimensionError);
}

TEST(CoreUpdateOlrf, LambdaZeroAveragesShiftedAuxiliaries) {
    std::mt19937_64 rng(6);
    auto c = random_core_instance(rng);
    c.lambda = 0.0;
    DenseTensor expected = (c.parts[0] + c.parts[1] + c.parts[2] + (c.ys[0] + c.ys[1] + c.ys[2]) * (1.0 / c.mu)) *
                           (1.0 / 3.0);
    EXPECT_LE(frobenius_norm(olrf_update(c) - expected), 1e-12 * frobenius_norm(expected));
}

TEST(CoreUpdateOlrf, StationaryByFiniteDifferences) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const auto c = random_core_instance(rng);
        const DenseTensor out = olrf_update(c);
        const auto f = [&](const DenseTensor& g) { return olrf_objective(c, g); };
        EXPECT_LT(relative_fd_gradient(f, out, c.tr.core(c.n)), 1e-5);
    }
}

TEST(CoreUpdateOlrf, DescentFromPreviousCore) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = random_core_instance(rng);
        EXPECT_LE(olrf_objective(c, olrf_update(c)), olrf_objective(c, c.tr.core(c.n)));
    }
}

TEST(CoreUpdateOlrf, MatchesDenseNormalEquations) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const auto c = random_core_instance(rng);
        const DenseTensor rhs = (c.parts[0] + c.parts[1] + c.parts[2]) * c.mu + c.ys[0] + c.ys[1] + c.ys[2];
        const DenseTensor oracle = normal_equation_update(c.x, c.tr, c.n, c.lambda, 3.0 * c.mu, rhs);
        EXPECT_LE(frobenius_norm(olrf_update(c) - oracle), 1e-9 * frobenius_norm(oracle));
    }
}

TEST(CoreUpdateOlrf, SingularWhenLambdaAndMuVanish) {
    std::mt19937_64 rng(10);
    const auto c = random_core_instance(rng);
    EXPECT_THROW(core_update_olrf(c.x, c.tr, c.parts, c.ys, c.n, 0.0, 0.0), NumericalError);
}

TEST(CoreUpdateLlrf, LambdaZeroIsLatentSumPlusScaledMultiplier) {
    std::mt19937_64 rng(11);
    auto c = random_core_instance(rng);
    c.lambda = 0.0;
    const DenseTensor expected = c.parts[0] + c.parts[1] + c.parts[2] + c.ys[0] * (1.0 / c.mu);
    EXPECT_LE(frobenius_norm(llrf_update(c) - expected), 1e-12 * frobenius_norm(expected));
}

TEST(CoreUpdateLlrf, StationaryByFiniteDifferences) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto c = random_core_instance(rng);
        const DenseTensor out = llrf_update(c);
        const auto f = [&](const DenseTensor& g) { return llrf_objective(c, g); };
        EXPECT_LT(relative_fd_gradient(f, out, c.tr.core(c.n)), 1e-5);
    }
}

TEST(CoreUpdateLlrf, UsesSinglePenaltyWeight) {
    // The dense oracle with weight mu agrees; with 3*mu it does not.
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const auto c = random_core_instance(rng);
        const DenseTensor rhs = (c.parts[0] + c.parts[1] + c.parts[2]) * c.mu + c.ys[0];
        const DenseTensor out = llrf_update(c);
        const DenseTensor oracle = normal_equation_update(c.x, c.tr, c.n, c.lambda, c.mu, rhs);
        const DenseTensor wrong = normal_equation_update(c.x, c.tr, c.n, c.lambda, 3.0 * c.mu, rhs);
        EXPECT_LE(frobenius_norm(out - oracle), 1e-9 * frobenius_norm(oracle));
        EXPECT_GT(frobenius_norm(out - wrong), 1e-6 * frobenius_norm(oracle));
    }
}

TEST(CoreUpdate, Deterministic) {
    std::mt19937_64 rng(14);
    const auto c = random_core_instance(rng);
    EXPECT_EQ(olrf_update(c), olrf_update(c));
    EXPECT_EQ(llrf_update(c), llrf_update(c));
}

TEST(SvtMode, FoldsBackToCoreShape) {
    const DenseTensor g = random_normal({3, 4, 2}, 0.0, 1.0, 15);
    for (std::size_t i = 1; i <= 3; ++i) {
        const DenseTensor out = svt_mode(g, i, 0.0);
        EXPECT_EQ(out.shape(), g.shape());
        EXPECT_LE(frobenius_norm(out - g), 1e-12 * frobenius_norm(g));
    }
}
