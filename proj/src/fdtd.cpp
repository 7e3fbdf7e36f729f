#include "plasmo/fdtd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "plasmo/units.hpp"

namespace plasmo::fdtd {

using materials::MaterialModel;
using materials::MaterialSet;
using materials::StackSpec;

// ---- config ----

void SimConfig::validate() const {
  if (resolution <= 0.0) throw Error("SimConfig: resolution must be > 0");
  if (cell_size_x_um <= 0.0 || cell_size_y_um <= 0.0)
    throw Error("SimConfig: cell size must be positive");
  if (courant <= 0.0 || courant > 1.0 / std::sqrt(2.0) + 1e-12)
    throw Error("SimConfig: courant must be in (0, 1/sqrt(2)] for 2D");
  // the PML bound applies to each axis that actually carries PML strips
  if (pml_thickness_um >= 0.5 * cell_size_x_um ||
      (transverse_pml && pml_thickness_um >= 0.5 * cell_size_y_um))
    throw Error("SimConfig: pml_thickness must be < min(cell_size)/2");
  if (source_band_min_nm <= 0.0 || source_band_max_nm <= source_band_min_nm)
    throw Error("SimConfig: bad source band");
  if (decay_threshold <= 0.0 || decay_threshold >= 1.0)
    throw Error("SimConfig: decay threshold must be in (0,1)");
  if (max_steps <= 0) throw Error("SimConfig: max_steps must be positive");
  for (double wl : monitor_wavelengths_nm)
    if (wl <= 0.0) throw Error("SimConfig: monitor wavelengths must be > 0");
}

std::vector<double> SimConfig::monitors_or_default() const {
  if (!monitor_wavelengths_nm.empty()) return monitor_wavelengths_nm;
  std::vector<double> wl;
  const int n = 25;
  for (int i = 0; i < n; ++i)
    wl.push_back(source_band_min_nm +
                 (source_band_max_nm - source_band_min_nm) * i / (n - 1));
  return wl;
}

std::string SimConfig::signature() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "fdtd:%.9g:%.9g:%.9g:%.9g:%.9g:%.9g:%.9g:%.9g:%ld:%d:%.9g",
                cell_size_x_um, cell_size_y_um, resolution, pml_thickness_um,
                courant, source_band_min_nm, source_band_max_nm,
                decay_threshold, max_steps, transverse_pml ? 1 : 0,
                source_amplitude);
  std::string s(buf);
  for (double wl : monitors_or_default()) {
    std::snprintf(buf, sizeof buf, ":%.9g", wl);
    s += buf;
  }
  return s;
}

SimConfig desk_config() {
  SimConfig c;
  c.resolution = 60.0;
  c.source_band_min_nm = 400.0;
  c.source_band_max_nm = 1200.0;
  return c;
}

SimConfig paper_config() {
  SimConfig c;
  c.resolution = 150.0;
  c.source_band_min_nm = 300.0;
  c.source_band_max_nm = 1500.0;
  return c;
}

// ---- normalization cache ----

std::shared_ptr<const NormalizationCache::Data> NormalizationCache::find(
    const std::string& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : it->second;
}

void NormalizationCache::store(const std::string& key,
                               std::shared_ptr<const Data> data) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_[key] = std::move(data);
}

// ---- build ----

namespace {

// overlap of [a,b) with [c,d), for filling-fraction rasterization
double interval_overlap(double a, double b, double c, double d) {
  return std::max(0.0, std::min(b, d) - std::max(a, c));
}

struct CpmlProfile {
  ColXd b, c;  // per node; zero outside the strips
};

// kappa = 1, cubic sigma grading, linear alpha grading toward the interface
CpmlProfile cpml_profile(int n_nodes, int npml, double dx, double dt,
                         double offset) {
  const double m = 3.0;
  const double sigma_max = 0.8 * (m + 1.0) / dx;
  const double alpha_max = 0.05;
  CpmlProfile p;
  p.b = ColXd::Zero(n_nodes);
  p.c = ColXd::Zero(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    const double x = i + offset;  // node position in cells
    double depth = -1.0;
    if (x < npml)
      depth = (npml - x) / npml;
    else if (x > n_nodes - 1 + 2 * offset - npml)
      depth = (x - (n_nodes - 1 + 2 * offset - npml)) / npml;
    if (depth <= 0.0) continue;
    depth = std::min(depth, 1.0);
    const double sigma = sigma_max * std::pow(depth, m);
    const double alpha = alpha_max * (1.0 - depth);
    const double b = std::exp(-(sigma + alpha) * dt);
    p.b[i] = b;
    p.c[i] = sigma + alpha > 0.0 ? sigma * (b - 1.0) / (sigma + alpha) : 0.0;
  }
  return p;
}

}  // namespace

Simulation build_simulation(const StackSpec& stack, const MaterialSet& mats,
                            const SimConfig& config) {
  config.validate();
  stack.validate();

  Simulation sim;
  sim.config_ = config;
  sim.materials_json_ = mats.to_json();
  {
    std::ostringstream d;
    d << stack.ambient;
    for (const auto& l : stack.layers)
      d << " | " << l.material << " " << l.thickness_nm << " nm";
    d << " | " << stack.substrate;
    sim.stack_desc_ = d.str();
  }

  sim.cells_x_ = static_cast<int>(
      std::ceil(config.cell_size_x_um * config.resolution - 1e-9));
  sim.cells_y_ = static_cast<int>(
      std::ceil(config.cell_size_y_um * config.resolution - 1e-9));
  sim.dx_ = 1.0 / config.resolution;
  sim.dt_ = config.courant * sim.dx_;
  sim.nx_ = sim.cells_x_ + 1;
  sim.ny_ = config.transverse_pml ? sim.cells_y_ + 1 : sim.cells_y_;
  sim.npml_ = static_cast<int>(std::round(config.pml_thickness_um *
                                          config.resolution));
  sim.npml_y_ = config.transverse_pml ? sim.npml_ : 0;

  const int nx = sim.nx_, ny = sim.ny_;
  const double dx = sim.dx_;
  const double lx = sim.cells_x_ * dx;
  const double pml = sim.npml_ * dx;
  const double l_int = lx - 2.0 * pml;
  if (l_int <= 0.4)
    throw GeometryError("domain interior too small for source and monitors");

  // monitor geometry along the propagation axis
  const double x_src = pml + 0.10 * l_int;
  const double x_refl = pml + 0.20 * l_int;
  const double x_trans = lx - pml - 0.15 * l_int;
  sim.i_src_ = static_cast<int>(std::round(x_src / dx));
  sim.refl_.i = static_cast<int>(std::round(x_refl / dx));
  sim.trans_.i = static_cast<int>(std::round(x_trans / dx));
  sim.i_probe_ = sim.trans_.i;

  // stack rasterization, centered between the monitor lines
  double total_nm = 0.0;
  for (const auto& l : stack.layers) total_nm += l.thickness_nm;
  const double total_um = units::nm_to_um(total_nm);
  const double x_center = 0.5 * (x_refl + x_trans);
  const double margin = 0.05 * l_int;
  sim.stack_x0_ = x_center - 0.5 * total_um;
  sim.stack_x1_ = x_center + 0.5 * total_um;
  if (!stack.layers.empty() &&
      (sim.stack_x0_ < x_refl + margin || sim.stack_x1_ > x_trans - margin))
    throw GeometryError("stack too thick for the simulation cell");

  sim.eps_inf_ = ColXd::Ones(nx);
  sim.sigma_ = ColXd::Zero(nx);

  const Complex eps_amb =
      materials::permittivity(mats.get(stack.ambient), 1000.0);
  const Complex eps_sub =
      materials::permittivity(mats.get(stack.substrate), 1000.0);
  if (std::abs(eps_amb - 1.0) > 1e-12 || std::abs(eps_sub - 1.0) > 1e-12)
    throw GeometryError("fdtd requires air ambient and substrate half-spaces");

  // per-cell filling fractions; Ez node i owns [x_i - dx/2, x_i + dx/2)
  double cursor = sim.stack_x0_;
  for (const auto& layer : stack.layers) {
    const double a = cursor;
    const double b = cursor + units::nm_to_um(layer.thickness_nm);
    cursor = b;
    const MaterialModel& model = mats.get(layer.material);

    const int i_lo = std::max(
        1, static_cast<int>(std::floor(a / dx - 0.5)));
    const int i_hi = std::min(
        nx - 1, static_cast<int>(std::ceil(b / dx + 0.5)));
    ColXd fill = ColXd::Zero(nx);
    bool any = false;
    for (int i = i_lo; i < i_hi; ++i) {
      const double f =
          interval_overlap(i * dx - 0.5 * dx, i * dx + 0.5 * dx, a, b) / dx;
      if (f > 0.0) {
        fill[i] = f;
        any = true;
      }
    }
    if (!any) continue;
    int band_i0 = i_lo, band_i1 = i_hi;
    while (band_i0 < i_hi && fill[band_i0] == 0.0) ++band_i0;
    while (band_i1 > band_i0 && fill[band_i1 - 1] == 0.0) --band_i1;

    if (const auto* c = std::get_if<materials::ConstantIndexModel>(&model)) {
      const double eps = c->refractive_index * c->refractive_index;
      for (int i = band_i0; i < band_i1; ++i)
        sim.eps_inf_[i] += fill[i] * (eps - 1.0);
      continue;
    }

    const auto& dl = std::get<materials::DrudeLorentzModel>(model);
    const bool is_metal = dl.drude_plasma_energy > 3.0;  // plasmonic layer
    if (is_metal) {
      if (sim.metal_i0_ < 0) {
        sim.metal_i0_ = band_i0;
        sim.metal_i1_ = band_i1;
      } else {
        sim.metal_i0_ = std::min(sim.metal_i0_, band_i0);
        sim.metal_i1_ = std::max(sim.metal_i1_, band_i1);
      }
      if (units::nm_to_um(layer.thickness_nm) < dx) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "metal layer '%s' (%.3g nm) thinner than one cell "
                      "(%.3g nm); filling-fraction averaged",
                      layer.material.c_str(), layer.thickness_nm,
                      units::um_to_nm(dx));
        sim.warnings_.push_back(buf);
      }
    }

    for (int i = band_i0; i < band_i1; ++i)
      sim.eps_inf_[i] += fill[i] * (dl.eps_inf - 1.0);
    if (dl.static_conductivity > 0.0) {
      const double sig = units::conductivity_from_si(dl.static_conductivity);
      for (int i = band_i0; i < band_i1; ++i) sim.sigma_[i] += fill[i] * sig;
    }

    const int bn = band_i1 - band_i0;
    if (dl.drude_plasma_energy > 0.0) {
      Simulation::PoleBand band;
      band.i0 = band_i0;
      band.i1 = band_i1;
      band.drude = true;
      const double wp = units::omega_from_ev(dl.drude_plasma_energy);
      const double g = units::omega_from_ev(dl.drude_damping_energy);
      band.a = std::exp(-g * sim.dt_);
      band.b = sim.dt_ * std::exp(-0.5 * g * sim.dt_);
      band.damping = g;
      band.strength = ColXd::Zero(bn);
      for (int i = 0; i < bn; ++i)
        band.strength[i] = fill[band_i0 + i] * wp * wp;
      band.j = GridXd::Zero(bn, ny);
      sim.poles_.push_back(std::move(band));
    }
    for (const auto& pole : dl.lorentz_poles) {
      if (pole.strength <= 0.0) continue;
      Simulation::PoleBand band;
      band.i0 = band_i0;
      band.i1 = band_i1;
      band.drude = false;
      const double w0 = units::omega_from_ev(pole.resonance_energy);
      const double gl = units::omega_from_ev(pole.damping_energy);
      const double denom = 1.0 + 0.5 * gl * sim.dt_;
      band.c1 = (2.0 - w0 * w0 * sim.dt_ * sim.dt_) / denom;
      band.c2 = -(1.0 - 0.5 * gl * sim.dt_) / denom;
      band.c3 = sim.dt_ * sim.dt_ * w0 * w0 / denom;
      band.omega0 = w0;
      band.damping = gl;
      band.strength = ColXd::Zero(bn);
      for (int i = 0; i < bn; ++i)
        band.strength[i] = fill[band_i0 + i] * pole.strength;
      band.p = GridXd::Zero(bn, ny);
      band.p_prev = GridXd::Zero(bn, ny);
      band.j = GridXd::Zero(bn, ny);
      sim.poles_.push_back(std::move(band));
    }
  }

  // E-update coefficients
  sim.ce1_ = ColXd::Zero(nx);
  sim.ce2_ = ColXd::Zero(nx);
  for (int i = 0; i < nx; ++i) {
    const double d = sim.eps_inf_[i] / sim.dt_ + 0.5 * sim.sigma_[i];
    sim.ce1_[i] = (sim.eps_inf_[i] / sim.dt_ - 0.5 * sim.sigma_[i]) / d;
    sim.ce2_[i] = 1.0 / d;
  }

  // fields
  sim.ez_ = GridXd::Zero(nx, ny);
  sim.hx_ = GridXd::Zero(nx, ny);
  sim.hy_ = GridXd::Zero(nx - 1, ny);

  // CPML x
  const CpmlProfile pe = cpml_profile(nx, sim.npml_, dx, sim.dt_, 0.0);
  const CpmlProfile ph = cpml_profile(nx - 1, sim.npml_, dx, sim.dt_, 0.5);
  sim.be_x_ = pe.b;
  sim.ce_x_ = pe.c;
  sim.bh_x_ = ph.b;
  sim.ch_x_ = ph.c;
  sim.psi_ez_lo_ = GridXd::Zero(sim.npml_ + 1, ny);
  sim.psi_ez_hi_ = GridXd::Zero(sim.npml_ + 1, ny);
  sim.psi_hy_lo_ = GridXd::Zero(sim.npml_ + 1, ny);
  sim.psi_hy_hi_ = GridXd::Zero(sim.npml_ + 1, ny);
  if (config.transverse_pml) {
    const CpmlProfile pey = cpml_profile(ny, sim.npml_y_, dx, sim.dt_, 0.0);
    const CpmlProfile phy =
        cpml_profile(ny - 1, sim.npml_y_, dx, sim.dt_, 0.5);
    sim.be_y_ = pey.b;
    sim.ce_y_ = pey.c;
    sim.bh_y_ = phy.b;
    sim.ch_y_ = phy.c;
    sim.psi_ez_ylo_ = GridXd::Zero(nx, sim.npml_y_ + 1);
    sim.psi_ez_yhi_ = GridXd::Zero(nx, sim.npml_y_ + 1);
    sim.psi_hx_ylo_ = GridXd::Zero(nx, sim.npml_y_ + 1);
    sim.psi_hx_yhi_ = GridXd::Zero(nx, sim.npml_y_ + 1);
  }

  // source pulse: center frequency at the band midpoint in frequency,
  // 1/e^2 spectral edges at the band limits
  const double f_min = 1.0 / units::nm_to_um(config.source_band_max_nm);
  const double f_max = 1.0 / units::nm_to_um(config.source_band_min_nm);
  const double f_c = 0.5 * (f_min + f_max);
  const double df_edge = 0.5 * (f_max - f_min);
  sim.src_omega_ = 2.0 * units::pi * f_c;
  sim.src_width_ = 1.0 / (units::pi * df_edge);
  sim.src_t0_ = 6.0 * sim.src_width_;
  sim.src_end_ = 2.0 * sim.src_t0_;

  // monitors
  sim.monitor_wl_ = config.monitors_or_default();
  const int nw = static_cast<int>(sim.monitor_wl_.size());
  for (double wl : sim.monitor_wl_)
    sim.omega_.push_back(units::omega_from_wavelength_nm(wl));
  sim.refl_.ez = Eigen::MatrixXcd::Zero(ny, nw);
  sim.refl_.hy = Eigen::MatrixXcd::Zero(ny, nw);
  sim.trans_.ez = Eigen::MatrixXcd::Zero(ny, nw);
  sim.trans_.hy = Eigen::MatrixXcd::Zero(ny, nw);

  // W_abs DFT strip
  double strip_x0, strip_x1;
  if (stack.layers.empty()) {
    strip_x0 = x_center - 0.2;
    strip_x1 = x_center + 0.2;
  } else {
    strip_x0 = sim.stack_x0_ - 0.1;
    strip_x1 = sim.stack_x1_ + 0.1;
  }
  sim.map_i0_ = std::max(sim.npml_ + 1,
                         static_cast<int>(std::floor(strip_x0 / dx)));
  sim.map_i1_ = std::min(nx - sim.npml_ - 1,
                         static_cast<int>(std::ceil(strip_x1 / dx)) + 1);
  if (sim.map_i1_ < sim.map_i0_) sim.map_i1_ = sim.map_i0_;
  sim.ez_map_ = Eigen::MatrixXcd::Zero(
      static_cast<long>(sim.map_i1_ - sim.map_i0_) * ny, nw);

  // metal flux box (or whole-stack box when no metal layer exists)
  FluxBox box;
  if (sim.metal_i0_ >= 0) {
    box.x0_um = (sim.metal_i0_ - 2) * dx;
    box.x1_um = (sim.metal_i1_ + 1) * dx;
  } else {
    box.x0_um = strip_x0;
    box.x1_um = strip_x1;
  }
  sim.metal_box_id_ = add_flux_box(sim, box);

  return sim;
}

bool Simulation::source_active() const {
  return config_.source_amplitude != 0.0 && time() <= src_end_;
}

void Simulation::track_energy(bool on) {
  track_energy_ = on;
  if (on) {
    ez_prev_ = ez_;
    hx_prev_ = hx_;
    hy_prev_ = hy_;
  }
}

// staggered invariant of the leapfrog: 1/2 eps (E^n)^2 paired with
// H^(n-1/2) H^(n+1/2); exactly conserved in the lossless interior
double Simulation::interior_energy() const {
  if (!track_energy_) throw Error("interior_energy: enable track_energy first");
  double u = 0.0;
  const int j1 = config_.transverse_pml ? ny_ - npml_y_ : ny_;
  const int j0 = config_.transverse_pml ? npml_y_ : 0;
  for (int j = j0; j < j1; ++j) {
    for (int i = npml_ + 1; i < nx_ - npml_ - 1; ++i) {
      u += 0.5 * eps_inf_[i] * ez_prev_(i, j) * ez_prev_(i, j);
      u += 0.5 * hx_(i, j) * hx_prev_(i, j);
      if (i < nx_ - 1) u += 0.5 * hy_(i, j) * hy_prev_(i, j);
    }
  }
  return u * dx_ * dx_;
}

// ---- stepping ----

void Simulation::accumulate_dft_h() {
  const double t = (step_count_ + 0.5) * dt_;
  const int nw = static_cast<int>(omega_.size());
  for (int w = 0; w < nw; ++w) {
    const Complex ph = std::polar(dt_, omega_[w] * t);
    for (auto* line : {&refl_, &trans_}) {
      const int i = line->i;
      for (int j = 0; j < ny_; ++j)
        line->hy(j, w) += 0.5 * (hy_(i - 1, j) + hy_(i, j)) * ph;
    }
    for (auto& box : boxes_) {
      for (auto* line : {&box.left, &box.right}) {
        const int i = line->i;
        for (int j = 0; j < ny_; ++j)
          line->hy(j, w) += 0.5 * (hy_(i - 1, j) + hy_(i, j)) * ph;
      }
      if (!box.full_width) {
        const int jb = box.j0, jt = box.j1;
        const int jbm = (jb - 1 + ny_) % ny_;
        const int jtm = (jt - 1 + ny_) % ny_;
        for (int i = box.i0; i <= box.i1; ++i) {
          box.hx_bottom(i - box.i0, w) +=
              0.5 * (hx_(i, jbm) + hx_(i, jb)) * ph;
          box.hx_top(i - box.i0, w) += 0.5 * (hx_(i, jtm) + hx_(i, jt)) * ph;
        }
      }
    }
  }
}

void Simulation::accumulate_dft_e() {
  const double t = step_count_ * dt_;
  const int nw = static_cast<int>(omega_.size());
  const int mrows = map_i1_ - map_i0_;
  for (int w = 0; w < nw; ++w) {
    const Complex ph = std::polar(dt_, omega_[w] * t);
    for (auto* line : {&refl_, &trans_}) {
      const int i = line->i;
      for (int j = 0; j < ny_; ++j) line->ez(j, w) += ez_(i, j) * ph;
    }
    for (auto& box : boxes_) {
      for (auto* line : {&box.left, &box.right}) {
        const int i = line->i;
        for (int j = 0; j < ny_; ++j) line->ez(j, w) += ez_(i, j) * ph;
      }
      if (!box.full_width) {
        for (int i = box.i0; i <= box.i1; ++i) {
          box.ez_bottom(i - box.i0, w) += ez_(i, box.j0) * ph;
          box.ez_top(i - box.i0, w) += ez_(i, box.j1) * ph;
        }
      }
    }
    if (mrows > 0) {
      Complex* acc = ez_map_.col(w).data();
      for (int j = 0; j < ny_; ++j) {
        const double* col = ez_.col(j).data() + map_i0_;
        Complex* out = acc + static_cast<long>(j) * mrows;
        for (int i = 0; i < mrows; ++i) out[i] += col[i] * ph;
      }
    }
  }
}

double Simulation::probe_max_abs() const {
  double m = 0.0;
  for (int j = 0; j < ny_; ++j)
    m = std::max(m, std::abs(ez_(i_probe_, j)));
  return m;
}

void step(Simulation& sim) {
  const int nx = sim.nx_, ny = sim.ny_, npml = sim.npml_;
  const double dt = sim.dt_, dx = sim.dx_;
  const double dtdx = dt / dx;
  const bool wrap = !sim.config_.transverse_pml;

  if (sim.track_energy_) {
    sim.ez_prev_ = sim.ez_;
    sim.hx_prev_ = sim.hx_;
    sim.hy_prev_ = sim.hy_;
  }

  // H update from Ez^n
  for (int j = 0; j < ny; ++j) {
    const double* ez = sim.ez_.col(j).data();
    double* hy = sim.hy_.col(j).data();
    for (int i = 0; i < nx - 1; ++i) hy[i] += dtdx * (ez[i + 1] - ez[i]);
    // CPML x strips for Hy
    for (int i = 0; i < npml; ++i) {
      const double de = (ez[i + 1] - ez[i]) / dx;
      double& psi = sim.psi_hy_lo_(i, j);
      psi = sim.bh_x_[i] * psi + sim.ch_x_[i] * de;
      hy[i] += dt * psi;
    }
    for (int i = nx - 1 - npml; i < nx - 1; ++i) {
      const double de = (ez[i + 1] - ez[i]) / dx;
      double& psi = sim.psi_hy_hi_(i - (nx - 1 - npml), j);
      psi = sim.bh_x_[i] * psi + sim.ch_x_[i] * de;
      hy[i] += dt * psi;
    }
  }
  if (wrap) {
    for (int j = 0; j < ny; ++j) {
      const int jp = (j + 1) % ny;
      double* hx = sim.hx_.col(j).data();
      const double* ez0 = sim.ez_.col(j).data();
      const double* ez1 = sim.ez_.col(jp).data();
      for (int i = 0; i < nx; ++i) hx[i] -= dtdx * (ez1[i] - ez0[i]);
    }
  } else {
    const int npy = sim.npml_y_;
    for (int j = 0; j < ny - 1; ++j) {
      double* hx = sim.hx_.col(j).data();
      const double* ez0 = sim.ez_.col(j).data();
      const double* ez1 = sim.ez_.col(j + 1).data();
      for (int i = 0; i < nx; ++i) hx[i] -= dtdx * (ez1[i] - ez0[i]);
      double bh = 0.0, chc = 0.0;
      int slot = -1;
      bool lo = false;
      if (j < npy) {
        bh = sim.bh_y_[j];
        chc = sim.ch_y_[j];
        slot = j;
        lo = true;
      } else if (j >= ny - 1 - npy) {
        bh = sim.bh_y_[j];
        chc = sim.ch_y_[j];
        slot = j - (ny - 1 - npy);
      }
      if (slot >= 0 && (bh != 0.0 || chc != 0.0)) {
        GridXd& psi_g = lo ? sim.psi_hx_ylo_ : sim.psi_hx_yhi_;
        for (int i = 0; i < nx; ++i) {
          const double de = (ez1[i] - ez0[i]) / dx;
          double& psi = psi_g(i, slot);
          psi = bh * psi + chc * de;
          hx[i] -= dt * psi;
        }
      }
    }
  }

  sim.accumulate_dft_h();

  // polarization currents driven by Ez^n
  for (auto& band : sim.poles_) {
    const int bn = band.i1 - band.i0;
    if (band.drude) {
      for (int j = 0; j < ny; ++j) {
        const double* ez = sim.ez_.col(j).data() + band.i0;
        double* jc = band.j.col(j).data();
        for (int i = 0; i < bn; ++i)
          jc[i] = band.a * jc[i] + band.b * band.strength[i] * ez[i];
      }
    } else {
      for (int j = 0; j < ny; ++j) {
        const double* ez = sim.ez_.col(j).data() + band.i0;
        double* p = band.p.col(j).data();
        double* pp = band.p_prev.col(j).data();
        double* jc = band.j.col(j).data();
        for (int i = 0; i < bn; ++i) {
          const double pn =
              band.c1 * p[i] + band.c2 * pp[i] +
              band.c3 * band.strength[i] * ez[i];
          jc[i] = (pn - p[i]) / dt;
          pp[i] = p[i];
          p[i] = pn;
        }
      }
    }
  }

  // E update from H^(n+1/2) and currents
  for (int j = 0; j < ny; ++j) {
    const int jm = wrap ? (j - 1 + ny) % ny : j - 1;
    double* ez = sim.ez_.col(j).data();
    const double* hy = sim.hy_.col(j).data();
    const double* hxj = sim.hx_.col(j).data();
    const double* hxm = jm >= 0 ? sim.hx_.col(jm).data() : nullptr;
    const int i_end = nx - 1;
    for (int i = 1; i < i_end; ++i) {
      double curl = (hy[i] - hy[i - 1]) / dx;
      curl -= (hxj[i] - (hxm ? hxm[i] : 0.0)) / dx;
      ez[i] = sim.ce1_[i] * ez[i] + sim.ce2_[i] * curl;
    }
    // polarization currents
    for (const auto& band : sim.poles_) {
      const double* jc = band.j.col(j).data();
      for (int i = band.i0; i < band.i1; ++i)
        ez[i] -= sim.ce2_[i] * jc[i - band.i0];
    }
    // CPML x strips for Ez (applied to the dHy/dx part)
    for (int i = 1; i <= npml; ++i) {
      const double dh = (hy[i] - hy[i - 1]) / dx;
      double& psi = sim.psi_ez_lo_(i - 1, j);
      psi = sim.be_x_[i] * psi + sim.ce_x_[i] * dh;
      ez[i] += sim.ce2_[i] * psi;
    }
    for (int i = nx - 1 - npml; i < nx - 1; ++i) {
      const double dh = (hy[i] - hy[i - 1]) / dx;
      double& psi = sim.psi_ez_hi_(i - (nx - 1 - npml), j);
      psi = sim.be_x_[i] * psi + sim.ce_x_[i] * dh;
      ez[i] += sim.ce2_[i] * psi;
    }
  }
  if (!wrap) {
    // CPML y strips for Ez plus PEC walls
    const int npy = sim.npml_y_;
    for (int j = 1; j < ny - 1; ++j) {
      double be = 0.0, cec = 0.0;
      int slot = -1;
      bool lo = false;
      if (j <= npy) {
        be = sim.be_y_[j];
        cec = sim.ce_y_[j];
        slot = j - 1;
        lo = true;
      } else if (j >= ny - 1 - npy) {
        be = sim.be_y_[j];
        cec = sim.ce_y_[j];
        slot = j - (ny - 1 - npy);
      }
      if (slot < 0 || (be == 0.0 && cec == 0.0)) continue;
      double* ez = sim.ez_.col(j).data();
      const double* hxj = sim.hx_.col(j).data();
      const double* hxm = sim.hx_.col(j - 1).data();
      GridXd& psi_g = lo ? sim.psi_ez_ylo_ : sim.psi_ez_yhi_;
      for (int i = 1; i < nx - 1; ++i) {
        const double dh = -(hxj[i] - hxm[i]) / dx;
        double& psi = psi_g(i, slot);
        psi = be * psi + cec * dh;
        ez[i] += sim.ce2_[i] * psi;
      }
    }
    sim.ez_.col(0).setZero();
    sim.ez_.col(ny - 1).setZero();
  }

  // soft line-current source at t^(n+1/2)
  if (sim.config_.source_amplitude != 0.0) {
    const double t_mid = (sim.step_count_ + 0.5) * dt;
    if (t_mid <= sim.src_end_) {
      const double u = t_mid - sim.src_t0_;
      const double g = sim.config_.source_amplitude *
                       std::exp(-0.5 * u * u / (sim.src_width_ * sim.src_width_)) *
                       std::cos(sim.src_omega_ * u);
      const int j0 = sim.config_.transverse_pml ? 1 : 0;
      const int j1 = sim.config_.transverse_pml ? ny - 1 : ny;
      for (int j = j0; j < j1; ++j)
        sim.ez_(sim.i_src_, j) += sim.ce2_[sim.i_src_] * g;
    }
  }

  sim.step_count_ += 1;
  sim.accumulate_dft_e();
}

// ---- monitors / boxes ----

int add_flux_box(Simulation& sim, const FluxBox& box) {
  if (sim.finalized_) throw Error("add_flux_box: simulation already run");
  const double dx = sim.dx_;
  Simulation::BoxMonitor m;
  m.i0 = static_cast<int>(std::round(box.x0_um / dx));
  m.i1 = static_cast<int>(std::round(box.x1_um / dx));
  if (m.i1 <= m.i0) throw GeometryError("flux box: empty x extent");
  if (m.i0 <= sim.npml_ || m.i1 >= sim.nx_ - sim.npml_ - 1)
    throw GeometryError("flux box overlaps the PML region");
  m.full_width = box.y0_um >= box.y1_um;
  if (!m.full_width) {
    m.j0 = static_cast<int>(std::round(box.y0_um / dx));
    m.j1 = static_cast<int>(std::round(box.y1_um / dx));
    if (m.j1 <= m.j0 || m.j0 < 0 || m.j1 >= sim.ny_)
      throw GeometryError("flux box: bad transverse extent");
    if (sim.config_.transverse_pml &&
        (m.j0 <= sim.npml_y_ || m.j1 >= sim.ny_ - sim.npml_y_ - 1))
      throw GeometryError("flux box overlaps the PML region");
  } else {
    m.j0 = 0;
    m.j1 = sim.ny_;
  }
  const int nw = static_cast<int>(sim.monitor_wl_.size());
  m.left.i = m.i0;
  m.right.i = m.i1;
  m.left.ez = Eigen::MatrixXcd::Zero(sim.ny_, nw);
  m.left.hy = Eigen::MatrixXcd::Zero(sim.ny_, nw);
  m.right.ez = Eigen::MatrixXcd::Zero(sim.ny_, nw);
  m.right.hy = Eigen::MatrixXcd::Zero(sim.ny_, nw);
  if (!m.full_width) {
    m.ez_bottom = Eigen::MatrixXcd::Zero(m.i1 - m.i0 + 1, nw);
    m.hx_bottom = Eigen::MatrixXcd::Zero(m.i1 - m.i0 + 1, nw);
    m.ez_top = Eigen::MatrixXcd::Zero(m.i1 - m.i0 + 1, nw);
    m.hx_top = Eigen::MatrixXcd::Zero(m.i1 - m.i0 + 1, nw);
  }
  sim.boxes_.push_back(std::move(m));
  return static_cast<int>(sim.boxes_.size()) - 1;
}

FluxBox metal_flux_box(const Simulation& sim) {
  const auto& m = sim.boxes_.at(sim.metal_box_id_);
  FluxBox box;
  box.x0_um = m.i0 * sim.dx_;
  box.x1_um = m.i1 * sim.dx_;
  if (!m.full_width) {
    box.y0_um = m.j0 * sim.dx_;
    box.y1_um = m.j1 * sim.dx_;
  }
  return box;
}

double Simulation::line_flux(const LineMonitor& line, int w) const {
  double f = 0.0;
  for (int j = 0; j < ny_; ++j)
    f += -0.5 * (line.ez(j, w) * std::conj(line.hy(j, w))).real();
  return f * dx_;
}

std::vector<double> Simulation::box_flux(const BoxMonitor& box) const {
  const int nw = static_cast<int>(monitor_wl_.size());
  std::vector<double> net(nw, 0.0);
  for (int w = 0; w < nw; ++w) {
    double f = line_flux(box.left, w) - line_flux(box.right, w);
    if (!box.full_width) {
      double fb = 0.0, ft = 0.0;
      for (int i = 0; i <= box.i1 - box.i0; ++i) {
        fb += 0.5 * (box.ez_bottom(i, w) * std::conj(box.hx_bottom(i, w)))
                        .real();
        ft += 0.5 * (box.ez_top(i, w) * std::conj(box.hx_top(i, w))).real();
      }
      f += (fb - ft) * dx_;
    }
    net[w] = f;
  }
  return net;
}

std::vector<double> flux_spectrum(const Simulation& sim, const FluxBox& box) {
  if (!sim.finalized_) throw Error("flux_spectrum: run the simulation first");
  const int i0 = static_cast<int>(std::round(box.x0_um / sim.dx_));
  const int i1 = static_cast<int>(std::round(box.x1_um / sim.dx_));
  if (i0 <= sim.npml_ || i1 >= sim.nx_ - sim.npml_ - 1)
    throw GeometryError("flux box overlaps the PML region");
  for (const auto& m : sim.boxes_) {
    if (m.i0 != i0 || m.i1 != i1) continue;
    const bool full = box.y0_um >= box.y1_um;
    if (full != m.full_width) continue;
    if (!full) {
      const int j0 = static_cast<int>(std::round(box.y0_um / sim.dx_));
      const int j1 = static_cast<int>(std::round(box.y1_um / sim.dx_));
      if (j0 != m.j0 || j1 != m.j1) continue;
    }
    std::vector<double> net = sim.box_flux(m);
    for (size_t w = 0; w < net.size(); ++w) {
      const double inc = sim.inc_flux_.empty() ? 1.0 : sim.inc_flux_[w];
      net[w] /= inc;
    }
    return net;
  }
  throw Error("flux_spectrum: box was not registered before run()");
}

// ---- run ----

// analytic eps''(omega) of the averaged cell material at one Ez node
double Simulation::eps_imag_at(int node, double omega) const {
  double eps2 = sigma_[node] / omega;
  for (const auto& band : poles_) {
    if (node < band.i0 || node >= band.i1) continue;
    const double s = band.strength[node - band.i0];
    if (s <= 0.0) continue;
    if (band.drude) {
      const double g = band.damping;
      eps2 += s * g / (omega * (omega * omega + g * g));
    } else {
      const double w02 = band.omega0 * band.omega0;
      eps2 += (s * w02 /
               Complex(w02 - omega * omega, -band.damping * omega))
                  .imag();
    }
  }
  return eps2;
}

SpectralResult run(Simulation& sim, NormalizationCache* cache) {
  if (sim.finalized_) return sim.result_;

  if (!sim.is_normalization_) {
    const std::string key = sim.config_.signature();
    std::shared_ptr<const NormalizationCache::Data> norm;
    if (cache) norm = cache->find(key);
    if (!norm) {
      StackSpec empty;
      empty.ambient = "air";
      empty.substrate = "air";
      MaterialSet airset;
      airset.add("air", materials::ConstantIndexModel{1.0});
      Simulation nsim = build_simulation(empty, airset, sim.config_);
      nsim.is_normalization_ = true;
      run(nsim, nullptr);
      auto data = std::make_shared<NormalizationCache::Data>();
      const int nw = static_cast<int>(nsim.monitor_wl_.size());
      data->incident_flux.resize(nw);
      for (int w = 0; w < nw; ++w)
        data->incident_flux[w] = nsim.line_flux(nsim.trans_, w);
      data->ez_refl = nsim.refl_.ez;
      data->hy_refl = nsim.refl_.hy;
      if (cache) cache->store(key, data);
      norm = data;
    }
    sim.inc_flux_ = norm->incident_flux;
    sim.inc_ez_refl_ = norm->ez_refl;
    sim.inc_hy_refl_ = norm->hy_refl;
  }

  double probe_peak = 0.0;
  bool decayed = false;
  while (sim.step_count_ < sim.config_.max_steps) {
    step(sim);
    if (sim.step_count_ % 100 == 0) {
      const double m = sim.probe_max_abs();
      if (!std::isfinite(m))
        throw DivergenceError("field divergence detected", sim.step_count_);
      if (!sim.source_active()) {
        probe_peak = std::max(probe_peak, m);
        if (probe_peak > 0.0 && m <= sim.config_.decay_threshold * probe_peak) {
          decayed = true;
          break;
        }
      }
    }
  }
  if (!sim.ez_.allFinite())
    throw DivergenceError("field divergence detected", sim.step_count_);
  if (!decayed && sim.config_.source_amplitude != 0.0)
    sim.warnings_.push_back(
        "incomplete decay: max_steps reached before the probe line dropped "
        "below threshold");

  // assemble result
  const int nw = static_cast<int>(sim.monitor_wl_.size());
  SpectralResult res;
  res.wavelengths_nm = sim.monitor_wl_;
  res.steps = sim.step_count_;
  res.warnings = sim.warnings_;
  res.absorbed_power.assign(nw, 0.0);
  res.absorbed_flux.assign(nw, 0.0);
  res.reflectance.assign(nw, 0.0);
  res.transmittance.assign(nw, 0.0);

  if (!sim.is_normalization_) {
    const int mrows = sim.map_i1_ - sim.map_i0_;
    std::vector<double> metal_net =
        sim.box_flux(sim.boxes_.at(sim.metal_box_id_));
    for (int w = 0; w < nw; ++w) {
      const double inc = sim.inc_flux_[w];
      res.transmittance[w] = sim.line_flux(sim.trans_, w) / inc;
      // reflected = total minus incident at the R line
      double scat = 0.0;
      for (int j = 0; j < sim.ny_; ++j) {
        const Complex ez = sim.refl_.ez(j, w) - sim.inc_ez_refl_(j, w);
        const Complex hy = sim.refl_.hy(j, w) - sim.inc_hy_refl_(j, w);
        scat += -0.5 * (ez * std::conj(hy)).real();
      }
      res.reflectance[w] = -scat * sim.dx_ / inc;
      res.absorbed_flux[w] = metal_net[w] / inc;

      // volume integral of W_abs = 1/2 w eps'' |E|^2
      double pw = 0.0;
      const double omega = sim.omega_[w];
      for (int i = 0; i < mrows; ++i) {
        const double eps2 = sim.eps_imag_at(sim.map_i0_ + i, omega);
        if (eps2 <= 0.0) continue;
        double col_sum = 0.0;
        for (int j = 0; j < sim.ny_; ++j) {
          const Complex ez =
              sim.ez_map_(static_cast<long>(j) * mrows + i, w);
          col_sum += std::norm(ez);
        }
        pw += 0.5 * omega * eps2 * col_sum;
      }
      res.absorbed_power[w] = pw * sim.dx_ * sim.dx_ / inc;
    }
  }

  sim.result_ = res;
  sim.finalized_ = true;
  return res;
}

AbsorptionMap absorbed_power_map(const Simulation& sim, double wavelength_nm) {
  if (!sim.finalized_)
    throw Error("absorbed_power_map: run the simulation first");
  int w = -1;
  for (size_t k = 0; k < sim.monitor_wl_.size(); ++k)
    if (std::abs(sim.monitor_wl_[k] - wavelength_nm) < 1e-9) {
      w = static_cast<int>(k);
      break;
    }
  if (w < 0) {
    std::ostringstream msg;
    msg << "absorbed_power_map: wavelength " << wavelength_nm
        << " nm is not monitored; available:";
    for (double wl : sim.monitor_wl_) msg << " " << wl;
    throw Error(msg.str());
  }

  const int mrows = sim.map_i1_ - sim.map_i0_;
  AbsorptionMap map;
  map.wavelength_nm = wavelength_nm;
  map.spacing_um = sim.dx_;
  map.origin_x_um = sim.map_i0_ * sim.dx_;
  map.w_abs = GridXd::Zero(mrows, sim.ny_);
  const double omega = sim.omega_[w];
  const double inc = sim.inc_flux_.empty() ? 1.0 : sim.inc_flux_[w];

  for (int i = 0; i < mrows; ++i) {
    const double eps2 = sim.eps_imag_at(sim.map_i0_ + i, omega);
    if (eps2 <= 0.0) continue;
    for (int j = 0; j < sim.ny_; ++j) {
      const Complex ez = sim.ez_map_(static_cast<long>(j) * mrows + i, w);
      map.w_abs(i, j) = 0.5 * omega * eps2 * std::norm(ez) / inc;
    }
  }
  return map;
}

std::string Simulation::run_metadata_json() const {
  nlohmann::json j;
  j["grid"] = {{"cells_x", cells_x_},
               {"cells_y", cells_y_},
               {"dx_um", dx_},
               {"dt", dt_},
               {"pml_cells", npml_}};
  j["config"] = {{"resolution", config_.resolution},
                 {"cell_size_um", {config_.cell_size_x_um, config_.cell_size_y_um}},
                 {"pml_thickness_um", config_.pml_thickness_um},
                 {"courant", config_.courant},
                 {"source_band_nm",
                  {config_.source_band_min_nm, config_.source_band_max_nm}},
                 {"decay_threshold", config_.decay_threshold},
                 {"max_steps", config_.max_steps},
                 {"transverse_boundary",
                  config_.transverse_pml ? "cpml" : "periodic"}};
  j["stack"] = stack_desc_;
  j["monitor_wavelengths_nm"] = monitor_wl_;
  j["warnings"] = warnings_;
  j["steps_run"] = step_count_;
  std::hash<std::string> h;
  j["materials_hash"] = h(materials_json_);
  return j.dump(2);
}

}  // namespace plasmo::fdtd
