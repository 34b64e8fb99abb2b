#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "iontrap/constants.hpp"
#include "iontrap/equilibrium.hpp"
#include "iontrap/error.hpp"
#include "iontrap/matrix.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/trap.hpp"

namespace iontrap {

/// An instantaneous axial kick: ion `ion` (1-based, left to right) acquires
/// velocity `velocity` (m/s, signed) at t = 0 while every ion sits at rest
/// in equilibrium.
struct ImpulseEvent {
    int ion = 1;
    double velocity = 0.0;
};

/// Uniformly sampled displacements from equilibrium. Row k of
/// `displacements` holds q_1..q_N (metres) at `times[k]` (seconds).
struct Trajectory {
    std::vector<double> times;
    Matrix displacements;
    double sample_rate = 0.0;  // Hz

    int n_ions() const { return static_cast<int>(displacements.cols()); }
    std::size_t samples() const { return times.size(); }
    double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }

    /// Time series of one ion (1-based).
    std::vector<double> ion_series(int ion) const {
        if (ion < 1 || ion > n_ions())
            throw ConfigError("Trajectory: ion index " + std::to_string(ion) + " out of range");
        return displacements.column(static_cast<std::size_t>(ion - 1));
    }

    double peak_displacement() const { return max_abs(displacements.data()); }
};

namespace detail {

inline void check_event(const ImpulseEvent& event, int n_ions) {
    if (event.ion < 1 || event.ion > n_ions)
        throw ConfigError("impulse ion index " + std::to_string(event.ion) + " outside 1.." +
                          std::to_string(n_ions));
    if (!std::isfinite(event.velocity)) throw ConfigError("impulse velocity must be finite");
}

inline void check_sampling(double sample_rate, double duration, double max_omega) {
    if (!(duration > 0.0)) throw ConfigError("trajectory duration must be positive");
    if (!(sample_rate > max_omega / constants::pi))
        throw ConfigError("sample rate " + std::to_string(sample_rate) + " Hz is below the Nyquist rate " +
                          std::to_string(max_omega / constants::pi) + " Hz of the fastest mode");
}

inline std::vector<double> sample_times(double sample_rate, double duration) {
    const auto count = static_cast<std::size_t>(std::floor(duration * sample_rate * (1.0 + 1e-12))) + 1;
    std::vector<double> t(count);
    for (std::size_t k = 0; k < count; ++k) t[k] = static_cast<double>(k) / sample_rate;
    return t;
}

}  // namespace detail

/// Largest displacement (m) for which the harmonic expansion is trusted:
/// one tenth of the smallest equilibrium spacing.
inline double harmonic_displacement_limit(const TrapConfig& config) {
    if (config.n_ions < 2) return INFINITY;
    const EquilibriumChain chain = equilibrium_chain(config);
    return 0.1 * chain.min_spacing() * chain.length_scale;
}

/// Default kick: v0 / omega0 = 0.01 * (smallest spacing in metres).
inline double default_impulse_velocity(const TrapConfig& config) {
    const EquilibriumChain chain = equilibrium_chain(config);
    const double spacing = config.n_ions < 2 ? 1.0 : chain.min_spacing();
    return 0.01 * chain.length_scale * spacing * config.omega0();
}

/// Amplitudes b^(p)_n v0 / omega_p of Q_p(t) = amplitude * sin(omega_p t).
inline std::vector<double> collision_mode_amplitudes(const ImpulseEvent& event, const ModeBasis& basis,
                                                     const TrapConfig& config) {
    detail::check_event(event, basis.size());
    const std::vector<double> w = mode_frequencies(basis, config);
    const auto n = static_cast<std::size_t>(event.ion - 1);
    std::vector<double> amp(w.size());
    for (std::size_t p = 0; p < w.size(); ++p) amp[p] = basis.eigenvectors(n, p) * event.velocity / w[p];
    return amp;
}

/// beta^(p)_m = v0 sqrt(M / (kappa mu_p)) b^(p)_n b^(p)_m: the amplitude of
/// sin(omega_p t) in the motion of ion `observe_ion` (1-based).
inline std::vector<double> beta_amplitudes(const ImpulseEvent& event, int observe_ion, const ModeBasis& basis,
                                           const TrapConfig& config) {
    detail::check_event(event, basis.size());
    detail::check_event({observe_ion, 0.0}, basis.size());
    const auto n = static_cast<std::size_t>(event.ion - 1);
    const auto m = static_cast<std::size_t>(observe_ion - 1);
    const double scale = event.velocity * std::sqrt(config.ion_mass / config.kappa);
    std::vector<double> beta(basis.eigenvalues.size());
    for (std::size_t p = 0; p < beta.size(); ++p)
        beta[p] = scale / std::sqrt(basis.eigenvalues[p]) * basis.eigenvectors(n, p) * basis.eigenvectors(m, p);
    return beta;
}

/// Closed-form response q_m(t) = sum_p beta^(p)_m sin(omega_p t) on a uniform grid.
/// Throws ConfigError below the Nyquist rate or when the motion leaves the
/// harmonic regime (peak above harmonic_displacement_limit()).
inline Trajectory synthesize_trajectory(const ImpulseEvent& event, const ModeBasis& basis, const TrapConfig& config,
                                        double sample_rate, double duration) {
    detail::check_event(event, basis.size());
    const std::vector<double> w = mode_frequencies(basis, config);
    detail::check_sampling(sample_rate, duration, w.back());

    const std::size_t n = w.size();
    const auto site = static_cast<std::size_t>(event.ion - 1);
    std::vector<double> modal(n);
    for (std::size_t p = 0; p < n; ++p) modal[p] = basis.eigenvectors(site, p) * event.velocity / w[p];

    Trajectory traj{detail::sample_times(sample_rate, duration), Matrix(), sample_rate};
    traj.displacements = Matrix(traj.times.size(), n);
    std::vector<double> s(n);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        for (std::size_t p = 0; p < n; ++p) s[p] = modal[p] * std::sin(w[p] * traj.times[k]);
        for (std::size_t m = 0; m < n; ++m) {
            double q = 0.0;
            for (std::size_t p = 0; p < n; ++p) q += basis.eigenvectors(m, p) * s[p];
            traj.displacements(k, m) = q;
        }
    }

    const double limit = harmonic_displacement_limit(config);
    if (!(traj.peak_displacement() < limit))
        throw ConfigError("impulse too strong for the harmonic approximation: peak displacement " +
                          std::to_string(traj.peak_displacement()) + " m exceeds " + std::to_string(limit) + " m");
    return traj;
}

struct IntegratorOptions {
    int steps_per_fastest_period = 200;
    double energy_tolerance = 1e-8;  // relative drift of the total energy
    int max_refinements = 8;         // step halvings before giving up
};

struct IntegratedTrajectory {
    Trajectory trajectory;
    double relative_energy_drift = 0.0;    // max |E(t) - E(0)| / |E(0)|, total energy
    double excitation_energy_drift = 0.0;  // same, relative to the energy above equilibrium
    double time_step = 0.0;                // s
};

/// Velocity-Verlet integration of the full Coulomb + harmonic equations of
/// motion, sampled on the same grid as synthesize_trajectory(). Serves as an
/// independent check of the normal-mode solution.
///
/// Works in units of l and 1/omega0, where the equations read
///   u_m'' = -u_m + sum_{k != m} sign(u_m - u_k) / (u_m - u_k)^2.
/// The step is halved until the total-energy drift meets the tolerance.
/// Throws NumericalError if ions cross or the drift never meets tolerance.
inline IntegratedTrajectory integrate_full_dynamics(const ImpulseEvent& event, const EquilibriumChain& chain,
                                                    const TrapConfig& config, double sample_rate, double duration,
                                                    const IntegratorOptions& opts = {}) {
    const std::size_t n = chain.positions.size();
    detail::check_event(event, static_cast<int>(n));
    if (static_cast<int>(n) != config.n_ions) throw ConfigError("integrate_full_dynamics: chain/config size mismatch");

    const ModeBasis basis = eigendecompose(build_coupling_matrix(chain));
    const double w0 = config.omega0();
    const double w_max = w0 * std::sqrt(basis.eigenvalues.back());
    detail::check_sampling(sample_rate, duration, w_max);

    const std::vector<double>& u0 = chain.positions;
    const std::vector<double> bias = potential_gradient(u0);  // solver residual, ~1e-15
    const double ell = chain.length_scale;

    // Forces and energy of the displacement field q relative to u0. The
    // constant bias term makes q = 0 an exact fixed point.
    std::vector<double> x(n);
    auto acceleration = [&](const std::vector<double>& q, std::vector<double>& a) {
        for (std::size_t m = 0; m < n; ++m) x[m] = u0[m] + q[m];
        const std::vector<double> g = potential_gradient(x);
        for (std::size_t m = 0; m < n; ++m) a[m] = -(g[m] - bias[m]);
    };
    const double v_eq = dimensionless_potential(u0);
    auto energy = [&](const std::vector<double>& q, const std::vector<double>& v) {
        for (std::size_t m = 0; m < n; ++m) x[m] = u0[m] + q[m];
        double e = dimensionless_potential(x);
        for (std::size_t m = 0; m < n; ++m) e += 0.5 * v[m] * v[m] - bias[m] * q[m];
        return e;
    };

    const std::vector<double> times = detail::sample_times(sample_rate, duration);
    const double sample_dt = w0 / sample_rate;  // dimensionless sampling interval
    const double max_step = 2.0 * constants::pi / std::sqrt(basis.eigenvalues.back()) / opts.steps_per_fastest_period;
    auto substeps = static_cast<long>(std::ceil(sample_dt / max_step));

    for (int attempt = 0; attempt <= opts.max_refinements; ++attempt, substeps *= 2) {
        const double h = sample_dt / static_cast<double>(substeps);
        std::vector<double> q(n, 0.0), v(n, 0.0), a(n);
        v[static_cast<std::size_t>(event.ion - 1)] = event.velocity / (ell * w0);
        acceleration(q, a);

        const double e0 = energy(q, v);
        const double excitation = e0 - v_eq;
        double max_dev = 0.0;

        IntegratedTrajectory out;
        out.trajectory = {times, Matrix(times.size(), n), sample_rate};
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (k > 0) {
                for (long s = 0; s < substeps; ++s) {
                    for (std::size_t m = 0; m < n; ++m) {
                        v[m] += 0.5 * h * a[m];
                        q[m] += h * v[m];
                    }
                    for (std::size_t m = 1; m < n; ++m)
                        if (!(u0[m] + q[m] > u0[m - 1] + q[m - 1]))
                            throw NumericalError("integrate_full_dynamics: ions " + std::to_string(m) + " and " +
                                                 std::to_string(m + 1) + " crossed; impulse too large");
                    acceleration(q, a);
                    for (std::size_t m = 0; m < n; ++m) v[m] += 0.5 * h * a[m];
                }
                max_dev = std::max(max_dev, std::abs(energy(q, v) - e0));
            }
            for (std::size_t m = 0; m < n; ++m) out.trajectory.displacements(k, m) = q[m] * ell;
        }

        out.relative_energy_drift = max_dev / std::abs(e0);
        out.excitation_energy_drift = excitation > 0.0 ? max_dev / excitation : 0.0;
        out.time_step = h / w0;
        if (out.relative_energy_drift <= opts.energy_tolerance) return out;
    }
    throw NumericalError("integrate_full_dynamics: energy drift exceeds tolerance after step refinement");
}

/// Adds white Gaussian noise of standard deviation `sigma` (m) to every sample.
inline Trajectory with_measurement_noise(Trajectory traj, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    if (sigma == 0.0) return traj;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t k = 0; k < traj.displacements.rows(); ++k)
        for (double& q : traj.displacements.row(k)) q += noise(rng);
    return traj;
}

}  // namespace iontrap
