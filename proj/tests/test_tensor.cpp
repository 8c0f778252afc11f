#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "trc/tensor.hpp"

using namespace trc;
using namespace trc::testing;

namespace {

DenseTensor iota_2x2x2() { return DenseTensor({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7}); }

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
    Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (auto row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

} // namespace

TEST(DenseTensor, ConstructionChecksShape) {
    EXPECT_THROW(DenseTensor(Shape{}), DimensionError);
    EXPECT_THROW(DenseTensor(Shape{2, 0}), DimensionError);
    EXPECT_THROW(DenseTensor(Shape{2, 2}, std::vector<double>(3)), DimensionError);
    DenseTensor t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.order(), 3u);
}

TEST(DenseTensor, FirstIndexVariesFastest) {
    DenseTensor t({2, 3, 4});
    const Index idx{1, 2, 3};
    EXPECT_EQ(t.offset(idx), 1u + 2u * (2u + 3u * 3u));
    EXPECT_THROW((void)t.offset(Index{2, 0, 0}), std::out_of_range);
    EXPECT_THROW((void)t.offset(Index{0, 0}), DimensionError);
}

TEST(GammaUnfold, HandExample) {
    EXPECT_EQ(gamma_unfold(iota_2x2x2(), 1), rows({{0, 2, 4, 6}, {1, 3, 5, 7}}));
}

TEST(DeltaUnfold, HandExampleMode2) {
    // Row i2, column i3 + 2*i1; frozen from brute_unfold.
    const Matrix expected = rows({{0, 4, 1, 5}, {2, 6, 3, 7}});
    EXPECT_EQ(brute_unfold(iota_2x2x2(), 2, true), expected);
    EXPECT_EQ(delta_unfold(iota_2x2x2(), 2), expected);
}

TEST(Unfold, OrderOneIsTheDataVector) {
    DenseTensor t({5}, {1, 2, 3, 4, 5});
    const Matrix g = gamma_unfold(t, 1);
    ASSERT_EQ(g.rows(), 5);
    ASSERT_EQ(g.cols(), 1);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(g(k, 0), k + 1);
    EXPECT_EQ(delta_unfold(t, 1), g);
}

TEST(Unfold, ModeOutOfRange) {
    DenseTensor t({2, 3});
    EXPECT_THROW(gamma_unfold(t, 0), std::out_of_range);
    EXPECT_THROW(delta_unfold(t, 3), std::out_of_range);
}

TEST(Unfold, MatchesBruteForceEnumeration) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const Shape s = random_shape(rng, 1, 5, 1, 4);
        const DenseTensor t = random_tensor(s, rng);
        for (std::size_t n = 1; n <= s.size(); ++n) {
            EXPECT_EQ(gamma_unfold(t, n), brute_unfold(t, n, false));
            EXPECT_EQ(delta_unfold(t, n), brute_unfold(t, n, true));
        }
    }
}

TEST(Unfold, FoldInvertsUnfold) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const Shape s = random_shape(rng, 2, 6, 1, 4);
        const DenseTensor t = random_tensor(s, rng);
        for (std::size_t n = 1; n <= s.size(); ++n) {
            EXPECT_EQ(gamma_fold(gamma_unfold(t, n), n, s), t);
            EXPECT_EQ(delta_fold(delta_unfold(t, n), n, s), t);
        }
    }
}

TEST(Unfold, UnfoldInvertsFold) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const Shape s = random_shape(rng, 2, 5, 1, 4);
        const std::size_t n = uniform_int(rng, 1, s.size());
        const Matrix m = Matrix::Random(static_cast<Eigen::Index>(s[n - 1]),
                                        static_cast<Eigen::Index>(shape_numel(s) / s[n - 1]));
        EXPECT_EQ(gamma_unfold(gamma_fold(m, n, s), n), m);
        EXPECT_EQ(delta_unfold(delta_fold(m, n, s), n), m);
        EXPECT_EQ(unfold(fold(m, {Matricization::Family::Delta, n}, s), {Matricization::Family::Delta, n}), m);
    }
}

TEST(Unfold, FoldRejectsWrongColumnCount) {
    EXPECT_THROW(gamma_fold(Matrix::Zero(2, 3), 1, {2, 2, 2}), DimensionError);
    EXPECT_THROW(delta_fold(Matrix::Zero(3, 4), 1, {2, 2, 2}), DimensionError);
}

TEST(Unfold, DeltaAndGammaAgreeAtModeOne) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseTensor t = random_tensor(random_shape(rng, 1, 5, 1, 4), rng);
        EXPECT_EQ(delta_unfold(t, 1), gamma_unfold(t, 1));
    }
}

TEST(Unfold, PreservesFrobeniusNorm) {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseTensor t = random_tensor(random_shape(rng, 2, 5, 1, 4), rng);
        const double f = frobenius_norm(t);
        for (std::size_t n = 1; n <= t.order(); ++n) {
            EXPECT_NEAR(gamma_unfold(t, n).norm(), f, 1e-12 * f);
            EXPECT_NEAR(delta_unfold(t, n).norm(), f, 1e-12 * f);
        }
    }
}

TEST(Hadamard, IdentityAndAbsorbingElements) {
    std::mt19937_64 rng(16);
    const DenseTensor a = random_tensor({3, 4, 2}, rng);
    EXPECT_EQ(hadamard(a, DenseTensor::ones(a.shape())), a);
    EXPECT_EQ(hadamard(a, DenseTensor::zeros(a.shape())), DenseTensor::zeros(a.shape()));
    EXPECT_THROW(hadamard(a, DenseTensor({3, 4})), DimensionError);
}

TEST(Hadamard, MatchesScalarLoop) {
    std::mt19937_64 rng(17);
    const DenseTensor a = random_tensor({3, 4, 2}, rng), b = random_tensor({3, 4, 2}, rng);
    const DenseTensor h = hadamard(a, b);
    for_each_index(a.shape(), [&](const Index& idx, std::size_t) { EXPECT_EQ(h.at(idx), a.at(idx) * b.at(idx)); });
}

TEST(Hadamard, CommutativeAndAssociative) {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const Shape s = random_shape(rng, 1, 4, 1, 5);
        const DenseTensor a = random_tensor(s, rng), b = random_tensor(s, rng), c = random_tensor(s, rng);
        EXPECT_EQ(hadamard(a, b), hadamard(b, a));
        const DenseTensor l = hadamard(hadamard(a, b), c), r = hadamard(a, hadamard(b, c));
        EXPECT_LE(frobenius_norm(l - r), 1e-12 * frobenius_norm(l));
    }
}

TEST(Norms, BasicValues) {
    EXPECT_EQ(frobenius_norm(DenseTensor::zeros({3, 3})), 0.0);
    DenseTensor one_hot({2, 3, 2});
    one_hot.at(Index{1, 2, 0}) = -2.5;
    EXPECT_DOUBLE_EQ(frobenius_norm(one_hot), 2.5);
    EXPECT_THROW(inner_product(one_hot, DenseTensor({2, 3})), DimensionError);
}

TEST(Norms, SquaredNormIsSelfInnerProduct) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        const DenseTensor t = random_tensor(random_shape(rng, 1, 5, 1, 5), rng);
        const double f = frobenius_norm(t);
        EXPECT_NEAR(f * f, inner_product(t, t), 1e-12 * f * f);
    }
}

TEST(RandomNormal, ZeroStddevIsConstant) {
    const DenseTensor t = random_normal({4, 5}, 1.25, 0.0, 3);
    for (double v : t.data()) EXPECT_EQ(v, 1.25);
    EXPECT_THROW(random_normal({2}, 0.0, -1.0, 0), std::invalid_argument);
}

TEST(RandomNormal, DeterministicGivenSeed) {
    EXPECT_EQ(random_normal({7, 9}, 0.0, 1.0, 42), random_normal({7, 9}, 0.0, 1.0, 42));
    EXPECT_NE(random_normal({7, 9}, 0.0, 1.0, 42), random_normal({7, 9}, 0.0, 1.0, 43));
}

TEST(RandomNormal, SampleMomentsWithinBounds) {
    const DenseTensor t = random_normal({100000}, 0.0, 1.0, 2024);
    double mean = 0.0;
    for (double v : t.data()) mean += v;
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t.data()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(t.size() - 1));
    EXPECT_LT(std::abs(mean), 0.02);
    EXPECT_LT(std::abs(sd - 1.0), 0.02);
}

TEST(ObservationMask, CountsAndProjection) {
    DenseTensor t({2, 2}, {1.0, NAN, 3.0, NAN});
    const auto mask = ObservationMask::from_finite(t);
    EXPECT_EQ(mask.observed_count(), 2u);
    EXPECT_EQ(mask.missing_count(), 2u);
    const DenseTensor p = project(t, mask);
    EXPECT_EQ(p, DenseTensor({2, 2}, {1.0, 0.0, 3.0, 0.0}));
    const DenseTensor merged = merge_observed(t, DenseTensor({2, 2}, {9, 8, 7, 6}), mask);
    EXPECT_EQ(merged, DenseTensor({2, 2}, {1.0, 8.0, 3.0, 6.0}));
    EXPECT_EQ(mask.as_weights(), DenseTensor({2, 2}, {1, 0, 1, 0}));
    EXPECT_EQ(mask.complement().observed_count(), 2u);
}
