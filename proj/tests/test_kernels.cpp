#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fdbreak/errors.hpp"
#include "fdbreak/kernels.hpp"

using namespace fdbreak;

namespace {

CurveSet constants(std::vector<double> levels, std::size_t m = 20) {
    RowMatrix x(levels.size(), m);
    for (std::size_t i = 0; i < levels.size(); ++i) x.row(i).setConstant(levels[i]);
    return CurveSet(Grid::uniform(m), x);
}

CurveSet random_curves(int n, int m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    RowMatrix x(n, m);
    for (int i = 0; i < n; ++i) {
        const double a = z(rng), b = z(rng), c = z(rng);
        for (int k = 0; k < m; ++k) {
            const double t = static_cast<double>(k) / (m - 1);
            x(i, k) = a + b * std::sin(6.28 * t) + c * t * t + 0.1 * z(rng);
        }
    }
    return CurveSet(Grid::uniform(m), x);
}

}  // namespace

TEST(MedianHeuristic, ConstantOffDiagonal) {
    Matrix d = Matrix::Constant(5, 5, 2.5);
    d.diagonal().setZero();
    EXPECT_DOUBLE_EQ(median_heuristic(d), 1.0 / 2.5);
}

TEST(MedianHeuristic, ThreeConstantCurves) {
    const auto d = sq_distance_matrix(constants({0.0, 1.0, 3.0}));
    EXPECT_DOUBLE_EQ(d(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(d(0, 2), 9.0);
    EXPECT_DOUBLE_EQ(d(1, 2), 4.0);
    EXPECT_DOUBLE_EQ(median_heuristic(d), 0.25);
}

TEST(MedianHeuristic, EvenCountAveragesMiddlePair) {
    // Four curves: six distances, median = mean of 3rd and 4th order statistics.
    const auto d = sq_distance_matrix(constants({0.0, 1.0, 3.0, 7.0}));
    std::vector<double> upper;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) upper.push_back(d(i, j));
    std::sort(upper.begin(), upper.end());
    EXPECT_DOUBLE_EQ(median_heuristic(d), 2.0 / (upper[2] + upper[3]));
}

TEST(MedianHeuristic, IdenticalCurvesAreDegenerate) {
    const auto d = sq_distance_matrix(constants({2.0, 2.0, 2.0}));
    EXPECT_THROW(median_heuristic(d), DegenerateDataError);
    EXPECT_THROW(gram(constants({2.0, 2.0, 2.0}), KernelSpec::grb_auto()), DegenerateDataError);
}

TEST(MedianHeuristic, PermutationInvariant) {
    const auto curves = random_curves(15, 30, 5);
    const auto d = sq_distance_matrix(curves);
    std::vector<int> perm(15);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix dp(15, 15);
        for (int i = 0; i < 15; ++i)
            for (int j = 0; j < 15; ++j) dp(i, j) = d(perm[i], perm[j]);
        EXPECT_EQ(median_heuristic(dp), median_heuristic(d));
    }
}

TEST(KernelSpec, Validation) {
    EXPECT_THROW(KernelSpec::grb(0.0).validate(), ArgumentError);
    EXPECT_THROW(KernelSpec::grb(-1.0).validate(), ArgumentError);
    EXPECT_THROW((KernelSpec{KernelFamily::Linear, 1.0}).validate(), ArgumentError);
    EXPECT_NO_THROW(KernelSpec::grb(0.3).validate());
    EXPECT_EQ(parse_kernel_family("quadratic"), KernelFamily::Quadratic);
    EXPECT_THROW(parse_kernel_family("rbf"), ArgumentError);
}

TEST(Gram, GrbUnitDiagonalAndKnownEntry) {
    const auto k = gram(constants({0.0, 1.0, 3.0}), KernelSpec::grb(0.25));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(k.entries(i, i), 1.0);
    EXPECT_NEAR(k.entries(0, 1), std::exp(-0.25), 1e-15);
    EXPECT_NEAR(k.entries(0, 1), 0.7788, 1e-4);
    EXPECT_DOUBLE_EQ(k.gamma_used, 0.25);
}

TEST(Gram, AutoResolvesMedianHeuristic) {
    const auto k = gram(constants({0.0, 1.0, 3.0}), KernelSpec::grb_auto());
    EXPECT_DOUBLE_EQ(k.gamma_used, 0.25);
}

TEST(Gram, LinearOnConstantOnes) {
    const auto k = gram(constants({1.0, 1.0}), KernelSpec::linear());
    EXPECT_DOUBLE_EQ(k.entries(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(k.entries(0, 0), 1.0);
}

TEST(Gram, QuadraticSquaresDemeanedInner) {
    const auto curves = random_curves(6, 25, 9);
    const auto k = gram(curves, KernelSpec::quadratic());
    const Vector mean = mean_curve(curves);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            std::vector<double> a(25), b(25);
            for (int t = 0; t < 25; ++t) {
                a[t] = curves.values()(i, t) - mean(t);
                b[t] = curves.values()(j, t) - mean(t);
            }
            const double ip = l2_inner(a, b, curves.grid());
            EXPECT_NEAR(k.entries(i, j), ip * ip, 1e-12);
        }
    }
}

TEST(Gram, SymmetricPsdAndInRange) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto k = gram(random_curves(30, 40, seed), KernelSpec::grb_auto());
        EXPECT_EQ((k.entries - k.entries.transpose()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_GT(k.entries.minCoeff(), 0.0);
        EXPECT_LE(k.entries.maxCoeff(), 1.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(k.entries, Eigen::EigenvaluesOnly);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * es.eigenvalues().maxCoeff());
    }
}

TEST(Gram, GrbTranslationInvariant) {
    const auto curves = random_curves(12, 30, 2);
    RowMatrix shifted = curves.values();
    for (int k = 0; k < 30; ++k) shifted.col(k).array() += std::cos(0.2 * k) * 3.0;
    const auto a = gram(curves, KernelSpec::grb(0.4));
    const auto b = gram(CurveSet(curves.grid(), shifted), KernelSpec::grb(0.4));
    EXPECT_LT((a.entries - b.entries).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GramFromMatrix, RejectsAsymmetric) {
    Matrix m(2, 2);
    m << 1, 0.5, 0.4, 1;
    EXPECT_THROW(gram_from_matrix(m), DataError);
    EXPECT_THROW(gram_from_matrix(Matrix::Zero(2, 3)), DimensionError);
}
