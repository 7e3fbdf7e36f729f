#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "plasmo/materials.hpp"
#include "plasmo/types.hpp"

namespace plasmo::fdtd {

struct GeometryError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  DivergenceError(const std::string& msg, long step_) : Error(msg), step(step_) {}
  long step;
};

struct SimConfig {
  double cell_size_x_um = 4.0;
  double cell_size_y_um = 2.75;
  double resolution = 150.0;  // cells per um
  double pml_thickness_um = 1.0;
  double courant = 0.5;       // dt = courant * dx (c = 1)
  double source_band_min_nm = 300.0;
  double source_band_max_nm = 1500.0;
  std::vector<double> monitor_wavelengths_nm;  // empty -> 25 evenly spaced
  double decay_threshold = 1e-6;
  long max_steps = 200000;
  // transverse boundary: periodic wrap by default, which realizes the
  // normally incident plane wave exactly; optional CPML strips instead
  bool transverse_pml = false;
  double source_amplitude = 1.0;  // 0 disables the source (test hook)

  void validate() const;
  std::vector<double> monitors_or_default() const;
  std::string signature() const;  // normalization-cache key
};

// 60 cells/um over the reduced 400-1200 nm band
SimConfig desk_config();
// 150 cells/um over the full 300-1500 nm band
SimConfig paper_config();

// axis-aligned monitor rectangle in um; y0 >= y1 means full transverse width
struct FluxBox {
  double x0_um = 0.0;
  double x1_um = 0.0;
  double y0_um = 0.0;
  double y1_um = -1.0;
};

struct AbsorptionMap {
  double wavelength_nm = 0.0;
  GridXd w_abs;           // (map rows along x, ny) absorbed power density,
                          // fraction of incident power per um^2
  double spacing_um = 0.0;
  double origin_x_um = 0.0;
};

struct SpectralResult {
  std::vector<double> wavelengths_nm;
  std::vector<double> absorbed_power;  // volume integral of W_abs / incident
  std::vector<double> absorbed_flux;   // metal-box net inward flux / incident
  std::vector<double> reflectance;
  std::vector<double> transmittance;
  std::vector<std::string> warnings;
  long steps = 0;
};

class Simulation;

// per-config incident-run data shared between stack runs
class NormalizationCache {
 public:
  struct Data {
    std::vector<double> incident_flux;       // per monitor wavelength
    Eigen::MatrixXcd ez_refl;                // (ny, nw) incident DFT at R line
    Eigen::MatrixXcd hy_refl;
  };

  std::shared_ptr<const Data> find(const std::string& key) const;
  void store(const std::string& key, std::shared_ptr<const Data> data);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Data>> entries_;
};

Simulation build_simulation(const materials::StackSpec& stack,
                            const materials::MaterialSet& mats,
                            const SimConfig& config);

// one leapfrog cycle: H half-step, polarization currents, E update with
// CPML and source injection, DFT accumulation
void step(Simulation& sim);

// steps until the probe line has decayed below decay_threshold x running
// peak (or max_steps), then assembles the normalized spectra. A missing
// normalization run is executed automatically and cached.
SpectralResult run(Simulation& sim, NormalizationCache* cache = nullptr);

AbsorptionMap absorbed_power_map(const Simulation& sim, double wavelength_nm);

// register a monitor box before run(); returns its id
int add_flux_box(Simulation& sim, const FluxBox& box);
// per-wavelength net inward flux through a registered box, / incident
std::vector<double> flux_spectrum(const Simulation& sim, const FluxBox& box);

// the auto-registered box tightly bounding the metal layer(s)
FluxBox metal_flux_box(const Simulation& sim);

class Simulation {
 public:
  // geometry / grid accessors
  int cells_x() const { return cells_x_; }
  int cells_y() const { return cells_y_; }
  double dx() const { return dx_; }
  double dt() const { return dt_; }
  double time() const { return step_count_ * dt_; }
  long step_count() const { return step_count_; }
  bool source_active() const;

  const ColXd& eps_inf_profile() const { return eps_inf_; }
  const ColXd& sigma_profile() const { return sigma_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::vector<double>& monitor_wavelengths() const { return monitor_wl_; }

  const GridXd& ez() const { return ez_; }
  const GridXd& hx() const { return hx_; }
  const GridXd& hy() const { return hy_; }

  double stack_x0_um() const { return stack_x0_; }
  double stack_x1_um() const { return stack_x1_; }
  bool has_metal() const { return metal_i0_ >= 0; }

  // staggered-product electromagnetic energy over the interior; requires
  // track_energy(true) before stepping
  void track_energy(bool on);
  double interior_energy() const;

  std::string run_metadata_json() const;

 private:
  friend Simulation build_simulation(const materials::StackSpec&,
                                     const materials::MaterialSet&,
                                     const SimConfig&);
  friend void step(Simulation&);
  friend SpectralResult run(Simulation&, NormalizationCache*);
  friend AbsorptionMap absorbed_power_map(const Simulation&, double);
  friend int add_flux_box(Simulation&, const FluxBox&);
  friend std::vector<double> flux_spectrum(const Simulation&, const FluxBox&);
  friend FluxBox metal_flux_box(const Simulation&);

  struct PoleBand {
    int i0 = 0, i1 = 0;  // active Ez-node x range
    bool drude = false;
    double c1 = 0, c2 = 0, c3 = 0;  // lorentz recurrence
    double a = 0, b = 0;            // drude exponential update
    double omega0 = 0, damping = 0; // program-unit pole parameters
    ColXd strength;                 // per node: fill * deps or fill * wp^2
    GridXd p, p_prev;               // lorentz polarization
    GridXd j;                       // current at half steps
  };

  double eps_imag_at(int node, double omega) const;

  struct LineMonitor {
    int i = 0;  // Ez column index
    Eigen::MatrixXcd ez, hy;  // (ny, nw)
  };

  struct BoxMonitor {
    int i0 = 0, i1 = 0;  // flux planes (Ez node indices)
    int j0 = 0, j1 = 0;  // transverse span; full width if j0==0 && j1==ny
    bool full_width = true;
    LineMonitor left, right;
    // y-edge monitors for partial-width boxes
    Eigen::MatrixXcd ez_bottom, hx_bottom, ez_top, hx_top;  // (i1-i0+1, nw)
  };

  // grid
  int cells_x_ = 0, cells_y_ = 0;
  int nx_ = 0, ny_ = 0;
  double dx_ = 0, dt_ = 0;
  int npml_ = 0, npml_y_ = 0;
  SimConfig config_;
  std::string stack_desc_;
  std::string materials_json_;

  // fields
  GridXd ez_, hx_, hy_;
  GridXd ez_prev_, hx_prev_, hy_prev_;
  bool track_energy_ = false;

  // material profiles (x only; stack is transversely uniform)
  ColXd eps_inf_, sigma_;
  ColXd ce1_, ce2_;  // E-update coefficients
  std::vector<PoleBand> poles_;

  // CPML x strips
  ColXd be_x_, ce_x_, bh_x_, ch_x_;  // per-column coefficients (0 outside PML)
  GridXd psi_ez_lo_, psi_ez_hi_;     // d(Hy)/dx accumulators
  GridXd psi_hy_lo_, psi_hy_hi_;     // d(Ez)/dx accumulators
  // CPML y strips (transverse_pml mode)
  ColXd be_y_, ce_y_, bh_y_, ch_y_;
  GridXd psi_ez_ylo_, psi_ez_yhi_, psi_hx_ylo_, psi_hx_yhi_;

  // source
  int i_src_ = 0;
  double src_t0_ = 0, src_width_ = 0, src_omega_ = 0, src_end_ = 0;

  // monitors
  std::vector<double> monitor_wl_;
  std::vector<double> omega_;  // program units per monitor wavelength
  LineMonitor refl_, trans_;
  std::vector<BoxMonitor> boxes_;
  int metal_box_id_ = -1;
  int map_i0_ = 0, map_i1_ = 0;  // W_abs DFT strip
  Eigen::MatrixXcd ez_map_;      // ((map_i1-map_i0)*ny, nw)

  int i_probe_ = 0;
  int metal_i0_ = -1, metal_i1_ = -1;
  double stack_x0_ = 0, stack_x1_ = 0;

  // run state
  long step_count_ = 0;
  std::vector<std::string> warnings_;
  bool finalized_ = false;
  bool is_normalization_ = false;
  std::vector<double> inc_flux_;  // from normalization
  Eigen::MatrixXcd inc_ez_refl_, inc_hy_refl_;
  SpectralResult result_;

  // helpers
  void accumulate_dft_e();
  void accumulate_dft_h();
  double probe_max_abs() const;
  std::vector<double> box_flux(const BoxMonitor& box) const;
  double line_flux(const LineMonitor& line, int w) const;
};

}  // namespace plasmo::fdtd
