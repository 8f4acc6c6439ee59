#pragma once

// Physical constants in the unit system used throughout: eV, nm, V, K, A.

namespace greenflow::constants {

inline constexpr double pi = 3.14159265358979323846;

/// hbar^2 / (2 m_e) in eV nm^2.
inline constexpr double hbar2_over_2me = 0.0380998212;
/// Boltzmann constant in eV/K.
inline constexpr double k_boltzmann = 8.617333262e-5;
/// Elementary charge over vacuum permittivity, V nm.
inline constexpr double q_over_eps0 = 18.09512739;
/// 2 q^2 / h, the spin-degenerate conductance quantum in A/V.
inline constexpr double conductance_quantum = 7.748091729e-5;

inline constexpr double eps_silicon = 11.7;
inline constexpr double eps_oxide = 3.9;

/// cm^-3 -> nm^-3.
inline constexpr double per_cm3_to_per_nm3 = 1e-21;

}  // namespace greenflow::constants
