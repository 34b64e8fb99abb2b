#pragma once

// CSV and JSON export. CSV files carry the unit of every column in the
// header row; all values are SI. Doubles are printed in shortest round-trip
// form so identical inputs give byte-identical files.

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/dynamics.hpp"
#include "iontrap/equilibrium.hpp"
#include "iontrap/impurity.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/spectral.hpp"
#include "iontrap/trap.hpp"

namespace iontrap::io {

using nlohmann::json;

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

inline double hertz(double omega) { return omega / (2.0 * constants::pi); }

// ---------------------------------------------------------------- trajectory

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t_s";
    for (int m = 1; m <= traj.n_ions(); ++m) os << ",q" << m << "_m";
    os << '\n';
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        os << format_number(traj.times[k]);
        for (double q : traj.displacements.row(k)) os << ',' << format_number(q);
        os << '\n';
    }
}

inline json to_json(const Trajectory& traj) {
    json rows = json::array();
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        auto r = traj.displacements.row(k);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"units", {{"time", "s"}, {"displacement", "m"}, {"sample_rate", "Hz"}}},
            {"sample_rate", traj.sample_rate},
            {"n_ions", traj.n_ions()},
            {"times", traj.times},
            {"displacements", std::move(rows)}};
}

// ------------------------------------------------------------------ spectrum

/// Columns frequency_Hz, amplitude_m, phase_rad: one row per line.
inline void write_spectrum_csv(std::ostream& os, const MotionSpectrum& spectrum) {
    os << "frequency_Hz,amplitude_m,phase_rad\n";
    for (const auto& p : spectrum.peaks)
        os << format_number(hertz(p.frequency)) << ',' << format_number(p.amplitude) << ','
           << format_number(p.phase) << '\n';
}

inline json to_json(const MotionSpectrum& spectrum) {
    json peaks = json::array();
    for (const auto& p : spectrum.peaks)
        peaks.push_back({{"frequency_Hz", hertz(p.frequency)},
                         {"angular_frequency_rad_s", p.frequency},
                         {"amplitude_m", p.amplitude},
                         {"signed_amplitude_m", p.signed_amplitude},
                         {"phase_rad", p.phase}});
    return {{"observe_ion", spectrum.observe_ion},
            {"signs_known", spectrum.signs_known},
            {"noise_floor_m", spectrum.noise_floor},
            {"peaks", std::move(peaks)}};
}

inline json to_json(const CollisionReport& report) {
    json recovered = json::array();
    for (double b : report.recovered_components) recovered.push_back(std::isnan(b) ? json(nullptr) : json(b));
    return {{"inferred_site", report.inferred_site},
            {"residuals", report.residuals},
            {"confidence", report.confidence},
            {"recovered_eigenvector_components", std::move(recovered)},
            {"tied_sites", report.tied_sites},
            {"ambiguous", report.ambiguous}};
}

// --------------------------------------------------------------------- modes

inline json modes_to_json(const TrapConfig& config, const EquilibriumChain& chain, const ModeBasis& basis) {
    json modes = json::array();
    const auto n = basis.eigenvalues.size();
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<double> b = basis.eigenvectors.column(p);
        modes.push_back({{"mode", p + 1},
                         {"eigenvalue", basis.eigenvalues[p]},
                         {"angular_frequency_rad_s", basis.frequencies.at(p)},
                         {"frequency_Hz", hertz(basis.frequencies.at(p))},
                         {"eigenvector", std::move(b)}});
    }
    std::vector<double> metres(chain.positions.size());
    for (std::size_t m = 0; m < metres.size(); ++m) metres[m] = chain.positions[m] * chain.length_scale;
    return {{"n_ions", config.n_ions},
            {"ion_mass_kg", config.ion_mass},
            {"kappa_N_per_m", config.kappa},
            {"omega0_rad_s", config.omega0()},
            {"length_scale_m", chain.length_scale},
            {"equilibrium_positions_dimensionless", chain.positions},
            {"equilibrium_positions_m", std::move(metres)},
            {"modes", std::move(modes)}};
}

/// One row per mode: p, mu, omega, f, then b^(p)_1..b^(p)_N.
inline void write_modes_csv(std::ostream& os, const ModeBasis& basis) {
    const auto n = basis.eigenvalues.size();
    os << "mode,eigenvalue_1,omega_rad_per_s,frequency_Hz";
    for (std::size_t m = 1; m <= n; ++m) os << ",b" << m << "_1";
    os << '\n';
    for (std::size_t p = 0; p < n; ++p) {
        os << p + 1 << ',' << format_number(basis.eigenvalues[p]) << ',' << format_number(basis.frequencies.at(p)) << ','
           << format_number(hertz(basis.frequencies.at(p)));
        for (std::size_t m = 0; m < n; ++m) os << ',' << format_number(basis.eigenvectors(m, p));
        os << '\n';
    }
}

inline void write_equilibrium_csv(std::ostream& os, const EquilibriumChain& chain) {
    os << "ion,position_m,position_1\n";
    for (std::size_t m = 0; m < chain.positions.size(); ++m)
        os << m + 1 << ',' << format_number(chain.positions[m] * chain.length_scale) << ','
           << format_number(chain.positions[m]) << '\n';
}

// ------------------------------------------------------------------ impurity

inline json to_json(const MassEstimate& est) {
    auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
    json per_mode = json::array();
    for (const auto& e : est.per_mode_estimates)
        per_mode.push_back({{"mode", e.mode},
                            {"mass_kg", num(e.mass)},
                            {"mass_amu", num(e.mass / constants::atomic_mass_unit)},
                            {"residual", num(e.residual)},
                            {"used", e.used},
                            {"note", e.note}});
    auto candidate_list = [](const std::vector<MassCandidate>& list) {
        json out = json::array();
        for (const auto& c : list)
            out.push_back({{"site", c.site},
                           {"mass_kg", c.mass},
                           {"mass_amu", c.mass / constants::atomic_mass_unit},
                           {"residual", c.residual}});
        return out;
    };
    return {{"method", to_string(est.method)},
            {"impurity_index", est.impurity_index},
            {"estimated_mass_kg", est.estimated_mass},
            {"estimated_mass_amu", est.estimated_mass / constants::atomic_mass_unit},
            {"residual", est.residual},
            {"uncertainty_kg", est.uncertainty},
            {"per_mode_estimates", std::move(per_mode)},
            {"candidates", candidate_list(est.candidates)},
            {"tied_candidates", candidate_list(est.tied_candidates)},
            {"tied_sites", est.tied_sites},
            {"ambiguous", est.ambiguous},
            {"degenerate", est.degenerate}};
}

}  // namespace iontrap::io
