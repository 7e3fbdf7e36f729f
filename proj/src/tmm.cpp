#include "plasmo/tmm.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "plasmo/units.hpp"

namespace plasmo::tmm {

using materials::MaterialModel;
using materials::MaterialSet;
using materials::StackSpec;

namespace {

Complex complex_index(const MaterialModel& m, double wavelength_nm) {
  const materials::Index ni =
      materials::refractive_index(materials::permittivity(m, wavelength_nm));
  return {ni.n, ni.k};
}

}  // namespace

Eigen::Matrix2cd layer_matrix(const MaterialModel& model, double thickness_nm,
                              double wavelength_nm) {
  if (thickness_nm < 0.0)
    throw std::invalid_argument("layer_matrix: thickness must be >= 0");
  if (wavelength_nm <= 0.0)
    throw std::invalid_argument("layer_matrix: wavelength must be > 0");
  const Complex N = complex_index(model, wavelength_nm);
  const Complex delta = 2.0 * units::pi * N * thickness_nm / wavelength_nm;
  const Complex c = std::cos(delta);
  const Complex s = std::sin(delta);
  // back-to-front field map under exp(-i w t) with N = n + ik
  const Complex mi(0.0, -1.0);
  Eigen::Matrix2cd M;
  M << c, mi * s / N, mi * N * s, c;
  return M;
}

RtaPoint rta(const StackSpec& stack, const MaterialSet& mats,
             double wavelength_nm) {
  stack.validate();
  const size_t L = stack.layers.size();

  const Complex Na = complex_index(mats.get(stack.ambient), wavelength_nm);
  const Complex Ns = complex_index(mats.get(stack.substrate), wavelength_nm);

  std::vector<Eigen::Matrix2cd> layer_mats(L);
  Eigen::Matrix2cd M = Eigen::Matrix2cd::Identity();
  for (size_t j = 0; j < L; ++j) {
    layer_mats[j] = layer_matrix(mats.get(stack.layers[j].material),
                                 stack.layers[j].thickness_nm, wavelength_nm);
    M *= layer_mats[j];
  }

  const Complex B = M(0, 0) + M(0, 1) * Ns;
  const Complex C = M(1, 0) + M(1, 1) * Ns;
  const Complex denom = Na * B + C;
  const Complex r = (Na * B - C) / denom;
  const Complex t = 2.0 * Na / denom;

  RtaPoint out;
  out.wavelength_nm = wavelength_nm;
  out.R = std::norm(r);
  out.T = Ns.real() * std::norm(t) / Na.real();

  // fields at each interface by back-propagation from the substrate side;
  // per-layer absorption is the net flux lost across the layer
  const double p_inc = Na.real();  // 2x the incident flux; ratios only
  Eigen::Vector2cd field;
  field << t, Ns * t;
  std::vector<double> flux(L + 1);
  flux[L] = (field[0] * std::conj(field[1])).real();
  for (size_t j = L; j-- > 0;) {
    field = layer_mats[j] * field;
    flux[j] = (field[0] * std::conj(field[1])).real();
  }
  out.per_layer_A.resize(L);
  for (size_t j = 0; j < L; ++j)
    out.per_layer_A[j] = (flux[j] - flux[j + 1]) / p_inc;
  out.A = (flux[0] - flux[L]) / p_inc;
  return out;
}

std::vector<RtaPoint> spectrum(const StackSpec& stack, const MaterialSet& mats,
                               const std::vector<double>& wavelengths_nm) {
  if (wavelengths_nm.empty()) throw Error("spectrum: empty wavelength list");
  std::vector<RtaPoint> out;
  out.reserve(wavelengths_nm.size());
  for (double wl : wavelengths_nm) {
    try {
      out.push_back(rta(stack, mats, wl));
    } catch (const std::exception& e) {
      throw Error("spectrum: wavelength " + std::to_string(wl) +
                  " nm: " + e.what());
    }
  }
  return out;
}

double extinction_from_transmittance(double T, double thickness_nm,
                                     double wavelength_nm) {
  if (!(T > 0.0) || T > 1.0 + 1e-12)
    throw std::invalid_argument("extinction: T must be in (0, 1]");
  if (thickness_nm <= 0.0)
    throw std::invalid_argument("extinction: thickness must be > 0");
  if (wavelength_nm <= 0.0)
    throw std::invalid_argument("extinction: wavelength must be > 0");
  const double alpha = -std::log(std::min(T, 1.0)) / thickness_nm;  // 1/nm
  return alpha * wavelength_nm / (4.0 * units::pi);
}

void write_spectrum_csv(std::ostream& out, const std::vector<RtaPoint>& pts) {
  out << "wavelength_nm,R,T,A";
  const size_t L = pts.empty() ? 0 : pts.front().per_layer_A.size();
  for (size_t j = 0; j < L; ++j) out << ",A_layer_" << (j + 1);
  out << "\n";
  char buf[64];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.9e", p.wavelength_nm);
    out << buf;
    for (double v : {p.R, p.T, p.A}) {
      std::snprintf(buf, sizeof buf, ",%.9e", v);
      out << buf;
    }
    for (double v : p.per_layer_A) {
      std::snprintf(buf, sizeof buf, ",%.9e", v);
      out << buf;
    }
    out << "\n";
  }
}

std::vector<RtaPoint> read_spectrum_csv(std::istream& in) {
  std::vector<RtaPoint> pts;
  std::string line;
  if (!std::getline(in, line)) throw Error("spectrum csv: empty stream");
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    RtaPoint p;
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (...) {
        throw Error("spectrum csv: bad value at line " + std::to_string(lineno));
      }
    }
    if (vals.size() < 4)
      throw Error("spectrum csv: too few columns at line " +
                  std::to_string(lineno));
    p.wavelength_nm = vals[0];
    p.R = vals[1];
    p.T = vals[2];
    p.A = vals[3];
    p.per_layer_A.assign(vals.begin() + 4, vals.end());
    pts.push_back(p);
  }
  return pts;
}

Peak absorptance_peak(const std::vector<RtaPoint>& pts) {
  if (pts.empty()) throw Error("absorptance_peak: empty spectrum");
  size_t imax = 0;
  for (size_t i = 1; i < pts.size(); ++i)
    if (pts[i].A > pts[imax].A) imax = i;
  if (imax == 0 || imax + 1 == pts.size())
    return {pts[imax].wavelength_nm, pts[imax].A};
  // parabola through the three samples around the max
  const double x0 = pts[imax - 1].wavelength_nm, y0 = pts[imax - 1].A;
  const double x1 = pts[imax].wavelength_nm, y1 = pts[imax].A;
  const double x2 = pts[imax + 1].wavelength_nm, y2 = pts[imax + 1].A;
  const double d1 = (y1 - y0) / (x1 - x0);
  const double d2 = (y2 - y1) / (x2 - x1);
  const double curv = (d2 - d1) / (x2 - x0);  // f[x0,x1,x2]
  if (curv >= 0.0) return {x1, y1};
  const double xp = 0.5 * (x0 + x1) - 0.5 * d1 / curv;
  const double xpk = std::min(std::max(xp, x0), x2);
  const double ypk = y0 + d1 * (xpk - x0) + curv * (xpk - x0) * (xpk - x1);
  return {xpk, std::max(y1, ypk)};
}

double absorptance_fwhm(const std::vector<RtaPoint>& pts) {
  if (pts.size() < 3) return 0.0;
  size_t imax = 0;
  for (size_t i = 1; i < pts.size(); ++i)
    if (pts[i].A > pts[imax].A) imax = i;
  const double half = 0.5 * pts[imax].A;
  double left = pts.front().wavelength_nm;
  for (size_t i = imax; i-- > 0;) {
    if (pts[i].A <= half) {
      const double t = (half - pts[i].A) / (pts[i + 1].A - pts[i].A);
      left = pts[i].wavelength_nm +
             t * (pts[i + 1].wavelength_nm - pts[i].wavelength_nm);
      break;
    }
  }
  double right = pts.back().wavelength_nm;
  for (size_t i = imax + 1; i < pts.size(); ++i) {
    if (pts[i].A <= half) {
      const double t = (pts[i - 1].A - half) / (pts[i - 1].A - pts[i].A);
      right = pts[i - 1].wavelength_nm +
              t * (pts[i].wavelength_nm - pts[i - 1].wavelength_nm);
      break;
    }
  }
  return right - left;
}

std::vector<double> linspace_nm(double lo_nm, double hi_nm, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) {
    out.push_back(0.5 * (lo_nm + hi_nm));
    return out;
  }
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(lo_nm + (hi_nm - lo_nm) * i / (count - 1));
  return out;
}

}  // namespace plasmo::tmm
