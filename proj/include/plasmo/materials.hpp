#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "plasmo/types.hpp"

namespace plasmo::materials {

// One bound-electron oscillator. Energies are in eV (public convention);
// strength is the dimensionless permittivity contribution at omega -> 0.
struct LorentzPole {
  double strength = 0.0;          // delta-epsilon, >= 0
  double resonance_energy = 1.0;  // eV, > 0
  double damping_energy = 0.1;    // eV, > 0
};

// eps(w) = eps_inf - wp^2/(w(w+i*gamma)) + sum dEps*w0^2/(w0^2 - w^2 - i*gL*w)
//          + i*sigma/(eps0*w), time convention exp(-i w t) so Im eps >= 0 is loss.
struct DrudeLorentzModel {
  double eps_inf = 1.0;
  double drude_plasma_energy = 0.0;  // eV (hbar*omega_p)
  double drude_damping_energy = 0.1; // eV (hbar*gamma), > 0
  double static_conductivity = 0.0;  // S/m
  std::vector<LorentzPole> lorentz_poles;

  // throws Error if any passivity constraint is broken
  void validate() const;
};

// Lossless dielectric: eps = n^2 at every wavelength.
struct ConstantIndexModel {
  double refractive_index = 1.0;  // real n >= 1

  void validate() const;
};

using MaterialModel = std::variant<ConstantIndexModel, DrudeLorentzModel>;

bool is_lossless(const MaterialModel& model);

// Tabulated optical constants, wavelengths strictly increasing.
struct OpticsTable {
  struct Row {
    double wavelength_nm;
    double n;
    double k;
  };
  std::vector<Row> rows;

  void validate() const;
  double min_wavelength_nm() const;
  double max_wavelength_nm() const;
  // linear interpolation in wavelength; throws outside the table range
  Complex permittivity_at(double wavelength_nm) const;
};

OpticsTable read_optics_csv(std::istream& in);
OpticsTable read_optics_csv_file(const std::string& path);
void write_optics_csv(std::ostream& out, const OpticsTable& table);

struct Layer {
  std::string material;  // name resolved against a MaterialSet
  double thickness_nm = 0.0;
};

enum class Illumination { from_ambient };

// Planar stack with semi-infinite ambient and substrate half spaces.
// layers[0] is adjacent to the ambient (the illuminated side).
struct StackSpec {
  std::string ambient = "air";
  std::vector<Layer> layers;
  std::string substrate = "air";
  Illumination illumination = Illumination::from_ambient;

  void validate() const;
};

// Named material models plus provenance of the fitted ones.
class MaterialSet {
 public:
  void add(const std::string& name, MaterialModel model);
  const MaterialModel& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::map<std::string, MaterialModel>& models() const { return models_; }

  std::string to_json() const;
  static MaterialSet from_json(const std::string& text);

 private:
  std::map<std::string, MaterialModel> models_;
};

// ---- operations ----

Complex permittivity(const DrudeLorentzModel& model, double wavelength_nm);
Complex permittivity(const ConstantIndexModel& model, double wavelength_nm);
Complex permittivity(const MaterialModel& model, double wavelength_nm);

// principal branch with k >= 0; (n+ik)^2 == eps
struct Index {
  double n;
  double k;
};
Index refractive_index(Complex eps);

struct FitOptions {
  int n_lorentz = 2;                   // in [0, 4]
  double band_min_nm = 400.0;
  double band_max_nm = 1000.0;
  double residual_threshold = 0.25;    // RMS over (n,k); above this -> error
  int max_iterations = 400;
};

struct FitQualityError : Error {
  FitQualityError(const std::string& msg, double residual_)
      : Error(msg), residual(residual_) {}
  double residual;
};

struct FitResult {
  DrudeLorentzModel model;
  double rms_residual = 0.0;  // RMS over stacked (n, k) deviations in the band
};

// Damped least squares against the tabulated (n,k); deterministic init:
// plasma energy from the eps' zero crossing, gamma = 0.1 eV, poles seeded
// evenly over the band.
FitResult fit_drude_lorentz(const OpticsTable& table, const FitOptions& opts);

// ---- built-in data ----

// Embedded noble-metal tables (Johnson-Christy style) and the ITO table the
// default manifest is fitted from.
const OpticsTable& gold_table();
const OpticsTable& silver_table();
const OpticsTable& ito_table();

// Default material manifest: air, SiO2 (n = 1.45), fitted Au, Ag, ITO.
// Fits run once per process and are cached.
const MaterialSet& builtin_materials();

// The reference multilayer: air / SiO2 500 nm / metal / ITO 200 nm / air,
// illuminated through the SiO2 cap. metal is "Au" or "Ag".
StackSpec paper_stack(const std::string& metal, double metal_thickness_nm);

// Dielectric-tuning variant: the SiO2 cap replaced by a constant-index
// spacer, so its index sweeps the cavity resonance. The spacer material must
// be registered with the MaterialSet by the caller.
StackSpec tuning_stack(const std::string& metal, double metal_thickness_nm,
                       const std::string& spacer_material);

}  // namespace plasmo::materials
