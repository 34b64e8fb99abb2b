#pragma once

// CODATA 2018 values, SI units.
namespace iontrap::constants {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double elementary_charge = 1.602176634e-19;     // C (exact)
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg

/// e^2 / (4 pi eps0), the Coulomb coupling of two singly charged ions (J m).
inline constexpr double coulomb_coupling =
    elementary_charge * elementary_charge / (4.0 * pi * vacuum_permittivity);

}  // namespace iontrap::constants
