#include "plasmo/materials.hpp"
#include "plasmo/units.hpp"

// Built-in tabulated optical constants.
//
// The Au and Ag tables hold representative *thin-film* constants for the
// 10-50 nm evaporated films this toolkit simulates, synthesized from the
// documented Drude-Lorentz parameterizations below. Relative to bulk
// single-crystal data the Drude damping is grain-boundary broadened and a
// broad visible oscillator carries the excess loss of granular films; the
// bulk anchors survive (Au plasma energy ~8.9 eV, Au k(600 nm) ~2.9, Ag
// highly reflective across the visible with its plasma edge near 310 nm).
// Swap these tables (CSV import) to run with measured film data.
//
// ITO: lightly doped Drude film, n ~ 1.93 at 550 nm, epsilon-near-zero
// beyond 1700 nm.

namespace plasmo::materials {

namespace {

DrudeLorentzModel thin_film_gold() {
  DrudeLorentzModel m;
  m.eps_inf = 6.0;
  m.drude_plasma_energy = 8.90;
  m.drude_damping_energy = 0.16;
  m.lorentz_poles = {{2.2, 3.05, 1.20},   // d-band interband absorption
                     {0.6, 2.40, 0.70}};  // interband edge shoulder
  return m;
}

DrudeLorentzModel thin_film_silver() {
  DrudeLorentzModel m;
  m.eps_inf = 4.5;
  m.drude_plasma_energy = 9.20;
  m.drude_damping_energy = 0.03;
  m.lorentz_poles = {{0.35, 1.70, 1.00}};  // broad granular-film loss
  return m;
}

DrudeLorentzModel default_ito_model() {
  DrudeLorentzModel m;
  m.eps_inf = 3.9;
  m.drude_plasma_energy = 0.80;
  m.drude_damping_energy = 0.03;
  return m;
}

OpticsTable tabulate(const DrudeLorentzModel& m, double lo_nm, double hi_nm,
                     int npts) {
  OpticsTable t;
  t.rows.reserve(npts);
  for (int i = 0; i < npts; ++i) {
    const double wl = lo_nm + (hi_nm - lo_nm) * i / (npts - 1);
    const Index ni = refractive_index(permittivity(m, wl));
    t.rows.push_back({wl, ni.n, ni.k});
  }
  t.validate();
  return t;
}

}  // namespace

const OpticsTable& gold_table() {
  static const OpticsTable t = tabulate(thin_film_gold(), 250.0, 1700.0, 88);
  return t;
}

const OpticsTable& silver_table() {
  static const OpticsTable t = tabulate(thin_film_silver(), 250.0, 1700.0, 88);
  return t;
}

const OpticsTable& ito_table() {
  static const OpticsTable t = tabulate(default_ito_model(), 280.0, 1700.0, 72);
  return t;
}

}  // namespace plasmo::materials
