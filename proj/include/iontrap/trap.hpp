#pragma once

#include <cmath>
#include <string>

#include "iontrap/constants.hpp"
#include "iontrap/error.hpp"

namespace iontrap {

/// Physical parameters of a linear trap holding singly charged ions.
/// The axial stiffness `kappa` is stored; the single-ion frequency is derived
/// from it so the two can never disagree.
struct TrapConfig {
    int n_ions = 1;
    double ion_mass = 0.0;  // kg
    double kappa = 0.0;     // N/m

    /// Builds a trap from the single-ion axial frequency (rad/s).
    static TrapConfig from_omega0(int n_ions, double ion_mass, double omega0) {
        TrapConfig c{n_ions, ion_mass, ion_mass * omega0 * omega0};
        c.validate();
        return c;
    }

    /// Convenience for lab units: mass in u, frequency in Hz.
    static TrapConfig from_lab_units(int n_ions, double mass_amu, double omega0_hz) {
        return from_omega0(n_ions, mass_amu * constants::atomic_mass_unit,
                           2.0 * constants::pi * omega0_hz);
    }

    double omega0() const { return std::sqrt(kappa / ion_mass); }

    void validate() const {
        if (n_ions < 1) throw ConfigError("TrapConfig: n_ions must be >= 1, got " + std::to_string(n_ions));
        if (!(ion_mass > 0.0) || !std::isfinite(ion_mass))
            throw ConfigError("TrapConfig: ion_mass must be positive and finite");
        if (!(kappa > 0.0) || !std::isfinite(kappa))
            throw ConfigError("TrapConfig: kappa must be positive and finite");
    }
};

/// Length scale l with l^3 = e^2 / (4 pi eps0 kappa), in metres.
inline double characteristic_length(const TrapConfig& config) {
    config.validate();
    return std::cbrt(constants::coulomb_coupling / config.kappa);
}

}  // namespace iontrap
