#pragma once

#include <cmath>

// Program units: lengths in micrometers (characteristic length a = 1 um),
// c = eps0 = mu0 = 1.  Angular frequencies are in rad * c / um, so a vacuum
// wavelength lambda (um) corresponds to omega = 2*pi / lambda.
// Public APIs accept nm and eV and convert at the boundary.

namespace plasmo::units {

inline constexpr double pi = 3.14159265358979323846;

// hc in eV*um (photon energy E = hc_ev_um / lambda_um)
inline constexpr double hc_ev_um = 1.239841984;

// vacuum impedance in ohms, used to convert S/m conductivities
inline constexpr double vacuum_impedance_ohm = 376.730313668;

inline constexpr double nm_to_um(double nm) { return nm * 1e-3; }
inline constexpr double um_to_nm(double um) { return um * 1e3; }

inline double omega_from_wavelength_nm(double lambda_nm) {
  return 2.0 * pi / nm_to_um(lambda_nm);
}

inline double omega_from_ev(double energy_ev) {
  return 2.0 * pi * energy_ev / hc_ev_um;
}

inline double ev_from_wavelength_nm(double lambda_nm) {
  return hc_ev_um / nm_to_um(lambda_nm);
}

inline double wavelength_nm_from_ev(double energy_ev) {
  return um_to_nm(hc_ev_um / energy_ev);
}

// sigma [S/m] -> program units (a = 1 um): sigma/(eps0*omega_SI) must equal
// sigma_prog/omega_prog, giving sigma_prog = sigma_SI * Z0 * a.
inline double conductivity_from_si(double sigma_si) {
  return sigma_si * vacuum_impedance_ohm * 1e-6;
}

}  // namespace plasmo::units
