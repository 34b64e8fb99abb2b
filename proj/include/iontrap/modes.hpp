#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "iontrap/equilibrium.hpp"
#include "iontrap/error.hpp"
#include "iontrap/linalg.hpp"
#include "iontrap/matrix.hpp"
#include "iontrap/trap.hpp"

namespace iontrap {

/// Dimensionless ion coupling matrix A (Hessian of the potential in units of
/// kappa). Symmetric, positive definite, unit row sums.
struct CouplingMatrix {
    Matrix entries;

    std::size_t size() const { return entries.rows(); }
    double operator()(std::size_t m, std::size_t n) const { return entries(m, n); }
};

/// Normal-mode basis of a homogeneous chain.
///
/// Modes and ions are stored 0-based: `eigenvectors(m, p)` is the component on
/// ion m+1 of mode p+1. Eigenvalues ascend, so mode 0 is the centre-of-mass
/// mode (eigenvalue 1, uniform vector) and mode 1 the stretch mode
/// (eigenvalue 3). Every eigenvector has a positive component on the leftmost
/// ion. `frequencies` (rad/s) is empty until filled by with_frequencies().
struct ModeBasis {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
    std::vector<double> frequencies;

    int size() const { return static_cast<int>(eigenvalues.size()); }
    double component(std::size_t ion, std::size_t mode) const { return eigenvectors(ion, mode); }
};

/// Eigenvalue gap below which the spectrum is treated as degenerate.
inline constexpr double degeneracy_gap = 1e-10;

inline CouplingMatrix build_coupling_matrix(const EquilibriumChain& chain) {
    if (chain.positions.empty()) throw ConfigError("build_coupling_matrix: empty chain");
    return {potential_hessian(chain.positions)};
}

/// Symmetric eigendecomposition with the b_1 > 0 sign convention.
/// Throws NumericalError on solver failure or a degenerate spectrum.
inline ModeBasis eigendecompose(const CouplingMatrix& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-12 * (1.0 + std::abs(a(i, j))))
                throw ConfigError("eigendecompose: coupling matrix is not symmetric");

    SymmetricEigen eig = symmetric_eigen(a.entries);
    for (std::size_t p = 0; p < n; ++p) {
        if (!(eig.values[p] > 0.0))
            throw NumericalError("eigendecompose: coupling matrix is not positive definite", eig.values[p]);
        if (p > 0 && eig.values[p] - eig.values[p - 1] < degeneracy_gap)
            throw NumericalError("eigendecompose: degenerate eigenvalues for modes " + std::to_string(p) +
                                     " and " + std::to_string(p + 1),
                                 eig.values[p] - eig.values[p - 1]);

        // First clearly nonzero component fixes the sign; for a chain this is ion 1.
        std::size_t pivot = 0;
        while (pivot + 1 < n && std::abs(eig.vectors(pivot, p)) < 1e-12) ++pivot;
        if (eig.vectors(pivot, p) < 0.0)
            for (std::size_t m = 0; m < n; ++m) eig.vectors(m, p) = -eig.vectors(m, p);
    }
    return {std::move(eig.values), std::move(eig.vectors), {}};
}

/// omega_p = omega0 * sqrt(mu_p) = sqrt(kappa mu_p / M).
inline std::vector<double> mode_frequencies(const ModeBasis& basis, const TrapConfig& config) {
    config.validate();
    const double w0 = config.omega0();
    std::vector<double> w(basis.eigenvalues.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = w0 * std::sqrt(basis.eigenvalues[p]);
    return w;
}

inline ModeBasis with_frequencies(ModeBasis basis, const TrapConfig& config) {
    basis.frequencies = mode_frequencies(basis, config);
    return basis;
}

/// Equilibrium, coupling matrix and frequency-filled basis for a trap.
inline ModeBasis compute_modes(const TrapConfig& config) {
    config.validate();
    return with_frequencies(eigendecompose(build_coupling_matrix(equilibrium_chain(config))), config);
}

/// Q_p = sum_m q_m b^(p)_m.
inline std::vector<double> normal_coordinates(std::span<const double> displacements, const ModeBasis& basis) {
    const std::size_t n = basis.eigenvalues.size();
    if (displacements.size() != n)
        throw ConfigError("normal_coordinates: expected " + std::to_string(n) + " displacements, got " +
                          std::to_string(displacements.size()));
    std::vector<double> q(n, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t m = 0; m < n; ++m) q[p] += displacements[m] * basis.eigenvectors(m, p);
    return q;
}

/// Inverse of normal_coordinates: q_m = sum_p b^(p)_m Q_p.
inline std::vector<double> displacements_from_normal(std::span<const double> modes, const ModeBasis& basis) {
    const std::size_t n = basis.eigenvalues.size();
    if (modes.size() != n) throw ConfigError("displacements_from_normal: length mismatch");
    std::vector<double> q(n, 0.0);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t p = 0; p < n; ++p) q[m] += basis.eigenvectors(m, p) * modes[p];
    return q;
}

/// sum_p mu_p b^(p) b^(p)^T, which equals A for a faithful decomposition.
inline Matrix reconstruct_coupling(const ModeBasis& basis) {
    const std::size_t n = basis.eigenvalues.size();
    Matrix a(n, n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t m = 0; m < n; ++m)
            for (std::size_t k = 0; k < n; ++k)
                a(m, k) += basis.eigenvalues[p] * basis.eigenvectors(m, p) * basis.eigenvectors(k, p);
    return a;
}

}  // namespace iontrap
