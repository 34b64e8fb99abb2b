#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "iontrap/matrix.hpp"

namespace oracle {

inline constexpr double pi = 3.141592653589793238462643383279502884;

/// Root of a sign-changing f on [a, b] by bisection.
inline double bisect(const std::function<double(double)>& f, double a, double b, int iterations = 200) {
    double fa = f(a);
    for (int i = 0; i < iterations; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Derivative-free compass (pattern) search. Returns the best point found.
inline std::vector<double> compass_search(const std::function<double(const std::vector<double>&)>& f,
                                          std::vector<double> x, double step, double min_step) {
    double fx = f(x);
    while (step > min_step) {
        bool moved = false;
        for (std::size_t i = 0; i < x.size(); ++i)
            for (double dir : {+1.0, -1.0}) {
                std::vector<double> y = x;
                y[i] += dir * step;
                const double fy = f(y);
                if (fy < fx) {
                    x = std::move(y);
                    fx = fy;
                    moved = true;
                }
            }
        if (!moved) step *= 0.5;
    }
    return x;
}

/// Dimensionless chain potential, written out independently of the library.
inline double chain_potential(const std::vector<double>& u) {
    double v = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        v += 0.5 * u[i] * u[i];
        for (std::size_t j = 0; j < i; ++j) v += 1.0 / std::abs(u[i] - u[j]);
    }
    return v;
}

inline Eigen::MatrixXd to_eigen(const iontrap::Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

/// Eigenvalues of a symmetric matrix via Eigen's tridiagonal QL solver.
inline std::vector<double> eigenvalues(const iontrap::Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
    const auto& v = es.eigenvalues();
    return {v.data(), v.data() + v.size()};
}

/// Eigenvalues of a symmetric 3x3 matrix from its characteristic polynomial
/// (trigonometric solution of the cubic), ascending.
inline std::vector<double> eigenvalues_3x3(const iontrap::Matrix& a) {
    const double tr = a(0, 0) + a(1, 1) + a(2, 2);
    const double q = tr / 3.0;
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) + (a(2, 2) - q) * (a(2, 2) - q) +
                      2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    double b[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a(i, j) - (i == j ? q : 0.0)) / p;
    const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                       b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                       b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    std::vector<double> out{e1, e2, e3};
    std::sort(out.begin(), out.end());
    return out;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Variant of the single-mode impurity inversion with prefactor 2N in place of 2:
///   M_i = M [1 + 2N (r - sqrt(mu)) / (r / N - sqrt(mu) b^2)].
/// Kept only to show that it does not converge to the true mass.
inline double inversion_with_2n_prefactor(double ratio, double eigenvalue, double component, int n_ions, double mass) {
    const double root = std::sqrt(eigenvalue);
    return mass * (1.0 + 2.0 * n_ions * (ratio - root) / (ratio / n_ions - root * component * component));
}

}  // namespace oracle
