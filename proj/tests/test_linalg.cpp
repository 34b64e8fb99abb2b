#include <gtest/gtest.h>

#include <random>

#include "iontrap/linalg.hpp"
#include "iontrap/optimize.hpp"
#include "oracles.hpp"

using namespace iontrap;

namespace {

Matrix random_symmetric(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = u(rng);
    return a;
}

}  // namespace

TEST(SymmetricEigen, MatchesEigenOnRandomMatrices) {
    std::mt19937_64 rng(7);
    for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 13u, 24u}) {
        const Matrix a = random_symmetric(n, rng);
        const SymmetricEigen eig = symmetric_eigen(a);
        const std::vector<double> ref = oracle::eigenvalues(a);
        for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(eig.values[k], ref[k], 1e-12) << "n=" << n;

        // A v = lambda v and V^T V = I.
        for (std::size_t k = 0; k < n; ++k) {
            const auto v = eig.vectors.column(k);
            const auto av = a * std::span<const double>(v);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(av[i], eig.values[k] * v[i], 1e-12);
        }
        EXPECT_LT(max_abs_diff(transpose(eig.vectors) * eig.vectors, Matrix::identity(n)), 1e-13);
    }
}

TEST(SymmetricEigen, AscendingOrder) {
    Matrix a(3, 3);
    a(0, 0) = 5;
    a(1, 1) = -2;
    a(2, 2) = 1;
    const auto eig = symmetric_eigen(a);
    EXPECT_EQ(eig.values, (std::vector<double>{-2, 1, 5}));
}

TEST(SymmetricEigen, RejectsNonSquare) { EXPECT_THROW(symmetric_eigen(Matrix(2, 3)), ConfigError); }

TEST(SymmetricEigen, SweepBudgetExhaustedThrows) {
    std::mt19937_64 rng(3);
    EXPECT_THROW(symmetric_eigen(random_symmetric(6, rng), 1), NumericalError);
}

TEST(SolveLinear, RandomSystem) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix a(6, 6);
    std::vector<double> x(6);
    for (std::size_t i = 0; i < 6; ++i) {
        x[i] = u(rng);
        for (std::size_t j = 0; j < 6; ++j) a(i, j) = u(rng) + (i == j ? 4.0 : 0.0);
    }
    const auto b = a * std::span<const double>(x);
    const auto sol = solve_linear(a, b);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(sol[i], x[i], 1e-13);
}

TEST(SolveLinear, SingularThrows) {
    Matrix a(2, 2, 1.0);
    EXPECT_THROW(solve_linear(a, {1.0, 2.0}), NumericalError);
}

TEST(LeastSquares, MatchesEigenQr) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix a(40, 7);
    std::vector<double> b(40);
    for (std::size_t i = 0; i < 40; ++i) {
        b[i] = u(rng);
        for (std::size_t j = 0; j < 7; ++j) a(i, j) = u(rng);
    }
    const auto x = solve_least_squares(a, b);
    const Eigen::VectorXd ref =
        oracle::to_eigen(a).colPivHouseholderQr().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), 40));
    for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(x[j], ref(j), 1e-12);
}

TEST(LeastSquares, RankDeficientThrows) {
    Matrix a(5, 2);
    for (std::size_t i = 0; i < 5; ++i) a(i, 0) = a(i, 1) = static_cast<double>(i);
    EXPECT_THROW(solve_least_squares(a, std::vector<double>(5, 1.0)), NumericalError);
}

TEST(LeastSquares, Underdetermined) { EXPECT_THROW(solve_least_squares(Matrix(2, 3), {1, 2}), ConfigError); }

TEST(GoldenSection, Parabola) {
    const auto m = golden_section_minimize([](double x) { return (x - 1.234) * (x - 1.234); }, 0.0, 5.0, 1e-12);
    EXPECT_NEAR(m.x, 1.234, 1e-10);
}

TEST(LogGridMinimize, PicksGlobalOfTwoWells) {
    // Shallow well at 0.5, deep well at 3.
    auto f = [](double x) { return std::min(0.1 + (x - 0.5) * (x - 0.5), (x - 3.0) * (x - 3.0)); };
    const auto m = log_grid_minimize(f, 0.2, 5.0, 64);
    EXPECT_NEAR(m.x, 3.0, 1e-8);
}
