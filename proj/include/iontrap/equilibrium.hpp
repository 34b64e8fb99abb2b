#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/linalg.hpp"
#include "iontrap/matrix.hpp"
#include "iontrap/trap.hpp"

namespace iontrap {

/// Equilibrium of the chain. `positions` are dimensionless (x_m = l * u_m),
/// ascending; `length_scale` is l in metres.
struct EquilibriumChain {
    std::vector<double> positions;
    double length_scale = 0.0;

    int size() const { return static_cast<int>(positions.size()); }

    double min_spacing() const {
        double s = INFINITY;
        for (std::size_t i = 1; i < positions.size(); ++i) s = std::min(s, positions[i] - positions[i - 1]);
        return s;
    }
};

struct EquilibriumOptions {
    double step_tolerance = 1e-12;
    double residual_tolerance = 1e-10;
    int max_iterations = 200;
};

// Potential energy in units of kappa * l^2:
//   V(u) = 1/2 sum u_m^2 + sum_{m<k} 1/|u_m - u_k|
inline double dimensionless_potential(std::span<const double> u) {
    double v = 0.0;
    for (std::size_t m = 0; m < u.size(); ++m) {
        v += 0.5 * u[m] * u[m];
        for (std::size_t k = m + 1; k < u.size(); ++k) v += 1.0 / std::abs(u[m] - u[k]);
    }
    return v;
}

/// Gradient of the dimensionless potential. Zero at equilibrium.
inline std::vector<double> potential_gradient(std::span<const double> u) {
    const std::size_t n = u.size();
    std::vector<double> g(n);
    for (std::size_t m = 0; m < n; ++m) {
        double s = u[m];
        for (std::size_t k = 0; k < n; ++k) {
            if (k == m) continue;
            const double d = u[m] - u[k];
            s -= (d > 0.0 ? 1.0 : -1.0) / (d * d);
        }
        g[m] = s;
    }
    return g;
}

/// Hessian of the dimensionless potential; at equilibrium this is the ion
/// coupling matrix. Throws on coincident positions.
inline Matrix potential_hessian(std::span<const double> u) {
    const std::size_t n = u.size();
    Matrix h(n, n);
    for (std::size_t m = 0; m < n; ++m) {
        double diag = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == m) continue;
            const double d = std::abs(u[m] - u[k]);
            if (d == 0.0)
                throw ConfigError("coincident ion positions at indices " + std::to_string(m) + " and " +
                                  std::to_string(k));
            const double c = 2.0 / (d * d * d);
            diag += c;
            h(m, k) = -c;
        }
        h(m, m) = diag;
    }
    return h;
}

/// Dimensionless equilibrium positions of `n_ions` ions, ascending.
///
/// Newton iteration on the force balance with the analytic Jacobian, started
/// from a uniform chain at the two-ion spacing. Steps are halved when they
/// would reorder the ions or fail to reduce the residual, which keeps the
/// iteration inside the ordered basin for long chains whose centre is much
/// denser than the initial guess.
inline std::vector<double> solve_equilibrium(int n_ions, const EquilibriumOptions& opts = {}) {
    if (n_ions < 1) throw ConfigError("solve_equilibrium: n_ions must be >= 1");
    if (n_ions == 1) return std::vector<double>(1, 0.0);

    const std::size_t n = static_cast<std::size_t>(n_ions);
    const double spacing = 2.0 * std::cbrt(0.25);
    std::vector<double> u(n);
    for (std::size_t m = 0; m < n; ++m) u[m] = (static_cast<double>(m + 1) - 0.5 * (n_ions + 1)) * spacing;

    auto ordered = [](const std::vector<double>& x) {
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1])) return false;
        return true;
    };

    std::vector<double> g = potential_gradient(u);
    double residual = max_abs(g);
    for (int it = 0; it < opts.max_iterations; ++it) {
        std::vector<double> rhs(n);
        for (std::size_t m = 0; m < n; ++m) rhs[m] = -g[m];
        const std::vector<double> step = solve_linear(potential_hessian(u), rhs);

        double lambda = 1.0;
        std::vector<double> trial(n);
        std::vector<double> g_trial;
        for (int halvings = 0; halvings < 60; ++halvings, lambda *= 0.5) {
            for (std::size_t m = 0; m < n; ++m) trial[m] = u[m] + lambda * step[m];
            if (!ordered(trial)) continue;
            g_trial = potential_gradient(trial);
            if (max_abs(g_trial) < residual || residual < opts.residual_tolerance) break;
        }
        if (g_trial.empty())
            throw NumericalError("solve_equilibrium: line search lost ion ordering", residual);

        const double step_norm = lambda * max_abs(step);
        u = trial;
        g = std::move(g_trial);
        residual = max_abs(g);
        if (step_norm < opts.step_tolerance && residual < opts.residual_tolerance) break;
    }

    if (!(residual < opts.residual_tolerance))
        throw NumericalError("solve_equilibrium: no convergence for N=" + std::to_string(n_ions) +
                                 ", residual " + std::to_string(residual),
                             residual);

    // The trap is reflection symmetric; remove the last-bit asymmetry so the
    // chain is exactly antisymmetric and centred.
    for (std::size_t m = 0; m < n / 2; ++m) {
        const double a = 0.5 * (u[n - 1 - m] - u[m]);
        u[m] = -a;
        u[n - 1 - m] = a;
    }
    if (n % 2 == 1) u[n / 2] = 0.0;
    return u;
}

inline EquilibriumChain equilibrium_chain(const TrapConfig& config, const EquilibriumOptions& opts = {}) {
    return {solve_equilibrium(config.n_ions, opts), characteristic_length(config)};
}

}  // namespace iontrap
