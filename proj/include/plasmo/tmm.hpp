#pragma once

#include <iosfwd>
#include <vector>

#include "plasmo/materials.hpp"
#include "plasmo/types.hpp"

namespace plasmo::tmm {

// Normal-incidence reflectance/transmittance/absorptance of a planar stack,
// with the absorbed fraction resolved per layer from interface flux
// differences (so R + T + sum(per_layer_A) telescopes to 1 exactly).
struct RtaPoint {
  double wavelength_nm = 0.0;
  double R = 0.0;
  double T = 0.0;
  double A = 0.0;
  std::vector<double> per_layer_A;
};

// Characteristic matrix of one layer at normal incidence,
// [[cos d, -i sin d / N], [-i N sin d, cos d]] with d = 2 pi N t / lambda
// (exp(-i w t) convention, N = n + ik).
Eigen::Matrix2cd layer_matrix(const materials::MaterialModel& model,
                              double thickness_nm, double wavelength_nm);

RtaPoint rta(const materials::StackSpec& stack, const materials::MaterialSet& mats,
             double wavelength_nm);

std::vector<RtaPoint> spectrum(const materials::StackSpec& stack,
                               const materials::MaterialSet& mats,
                               const std::vector<double>& wavelengths_nm);

// k_eff = (-ln T / d) * lambda / (4 pi); T in (0, 1], d in nm.
double extinction_from_transmittance(double T, double thickness_nm,
                                     double wavelength_nm);

// `wavelength_nm,R,T,A,A_layer_1,...` with %.9e numerics, LF endings.
void write_spectrum_csv(std::ostream& out, const std::vector<RtaPoint>& pts);
std::vector<RtaPoint> read_spectrum_csv(std::istream& in);

// peak location of A(lambda) by quadratic interpolation around the max sample
struct Peak {
  double wavelength_nm;
  double value;
};
Peak absorptance_peak(const std::vector<RtaPoint>& pts);

// linearly interpolated full width at half maximum of A(lambda); returns 0
// when the half level is never crossed on either side.
double absorptance_fwhm(const std::vector<RtaPoint>& pts);

std::vector<double> linspace_nm(double lo_nm, double hi_nm, int count);

}  // namespace plasmo::tmm
