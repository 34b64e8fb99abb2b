#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/matrix.hpp"

namespace iontrap {

/// Eigenpairs of a real symmetric matrix. Eigenvalues ascending; column k of
/// `vectors` belongs to `values[k]`.
struct SymmetricEigen {
    std::vector<double> values;
    Matrix vectors;
};

/// Cyclic Jacobi rotations. Accurate to working precision for the small,
/// well-conditioned matrices of ion chains and orthogonal by construction.
/// Throws NumericalError when `max_sweeps` is exhausted.
inline SymmetricEigen symmetric_eigen(const Matrix& input, int max_sweeps = 100) {
    const std::size_t n = input.rows();
    if (input.cols() != n) throw ConfigError("symmetric_eigen: matrix is not square");

    Matrix a = input;
    Matrix v = Matrix::identity(n);

    double frob2 = 0.0;
    for (double x : a.data()) frob2 += x * x;

    auto off_diagonal = [&] {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
        return s;
    };

    bool converged = n <= 1;
    double off = 0.0;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        off = off_diagonal();
        if (off <= 1e-32 * frob2 || off == 0.0) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        off = off_diagonal();
        if (off > 1e-32 * frob2)
            throw NumericalError("symmetric_eigen: Jacobi sweeps did not converge", std::sqrt(off));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

/// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw ConfigError("solve_linear: dimension mismatch");

    double scale = 0.0;
    for (double x : a.data()) scale = std::max(scale, std::abs(x));

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (std::abs(a(piv, k)) <= 1e-14 * scale)
            throw NumericalError("solve_linear: matrix is singular to working precision");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
        x[k] = s / a(k, k);
    }
    return x;
}

/// Minimizes ||a x - b||_2 with Householder QR. Requires rows >= cols and
/// full column rank; rank deficiency raises NumericalError.
inline std::vector<double> solve_least_squares(Matrix a, std::vector<double> b) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (b.size() != m) throw ConfigError("solve_least_squares: right-hand side has wrong length");
    if (m < n) throw ConfigError("solve_least_squares: underdetermined system");

    std::vector<double> diag(n);
    for (std::size_t k = 0; k < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < m; ++i) norm = std::hypot(norm, a(i, k));
        if (norm == 0.0) {
            diag[k] = 0.0;
            continue;
        }
        if (a(k, k) > 0.0) norm = -norm;
        // v = x - norm e1, stored in place; H = I - v v^T / (-norm * v_0).
        for (std::size_t i = k; i < m; ++i) a(i, k) /= -norm;
        a(k, k) += 1.0;
        for (std::size_t j = k + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += a(i, k) * a(i, j);
            s = -s / a(k, k);
            for (std::size_t i = k; i < m; ++i) a(i, j) += s * a(i, k);
        }
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += a(i, k) * b[i];
        s = -s / a(k, k);
        for (std::size_t i = k; i < m; ++i) b[i] += s * a(i, k);
        diag[k] = norm;
    }

    double largest = 0.0;
    for (double d : diag) largest = std::max(largest, std::abs(d));
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(diag[k]) <= 1e-13 * largest || largest == 0.0)
            throw NumericalError("solve_least_squares: design matrix is rank deficient (column " +
                                 std::to_string(k) + ")");

    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
        x[k] = s / diag[k];
    }
    return x;
}

}  // namespace iontrap
