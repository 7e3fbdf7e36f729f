#include "plasmo/materials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "plasmo/units.hpp"

namespace plasmo::materials {

void DrudeLorentzModel::validate() const {
  if (eps_inf < 1.0) throw Error("DrudeLorentzModel: eps_inf must be >= 1");
  if (drude_plasma_energy < 0.0)
    throw Error("DrudeLorentzModel: plasma energy must be >= 0");
  if (drude_damping_energy <= 0.0)
    throw Error("DrudeLorentzModel: damping energy must be > 0");
  if (static_conductivity < 0.0)
    throw Error("DrudeLorentzModel: static conductivity must be >= 0");
  for (const auto& p : lorentz_poles) {
    if (p.strength < 0.0) throw Error("LorentzPole: strength must be >= 0");
    if (p.resonance_energy <= 0.0)
      throw Error("LorentzPole: resonance energy must be > 0");
    if (p.damping_energy <= 0.0)
      throw Error("LorentzPole: damping energy must be > 0");
  }
}

void ConstantIndexModel::validate() const {
  if (refractive_index < 1.0)
    throw Error("ConstantIndexModel: refractive index must be >= 1");
}

bool is_lossless(const MaterialModel& model) {
  return std::holds_alternative<ConstantIndexModel>(model);
}

void OpticsTable::validate() const {
  if (rows.size() < 2) throw Error("OpticsTable: needs at least 2 rows");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].k < 0.0) throw Error("OpticsTable: k must be >= 0");
    if (rows[i].wavelength_nm <= 0.0)
      throw Error("OpticsTable: wavelengths must be positive");
    if (i > 0 && rows[i].wavelength_nm <= rows[i - 1].wavelength_nm)
      throw Error("OpticsTable: wavelengths must be strictly increasing");
  }
}

double OpticsTable::min_wavelength_nm() const { return rows.front().wavelength_nm; }
double OpticsTable::max_wavelength_nm() const { return rows.back().wavelength_nm; }

Complex OpticsTable::permittivity_at(double wavelength_nm) const {
  if (rows.size() < 2) throw Error("OpticsTable: empty table");
  if (wavelength_nm < min_wavelength_nm() || wavelength_nm > max_wavelength_nm())
    throw Error("OpticsTable: wavelength outside table range");
  auto it = std::lower_bound(
      rows.begin(), rows.end(), wavelength_nm,
      [](const Row& r, double wl) { return r.wavelength_nm < wl; });
  if (it == rows.begin()) ++it;
  const Row& hi = *it;
  const Row& lo = *(it - 1);
  const double t =
      (wavelength_nm - lo.wavelength_nm) / (hi.wavelength_nm - lo.wavelength_nm);
  const double n = lo.n + t * (hi.n - lo.n);
  const double k = lo.k + t * (hi.k - lo.k);
  return Complex(n, k) * Complex(n, k);
}

void StackSpec::validate() const {
  for (const auto& l : layers) {
    if (l.thickness_nm <= 0.0)
      throw Error("StackSpec: layer thickness must be > 0 (layer '" +
                  l.material + "')");
    if (l.material.empty()) throw Error("StackSpec: unnamed layer material");
  }
  if (ambient.empty() || substrate.empty())
    throw Error("StackSpec: ambient/substrate must be named");
}

// ---- permittivity ----

Complex permittivity(const DrudeLorentzModel& m, double wavelength_nm) {
  if (wavelength_nm <= 0.0)
    throw std::invalid_argument("permittivity: wavelength must be > 0");
  const double w = units::omega_from_wavelength_nm(wavelength_nm);
  const double wp = units::omega_from_ev(m.drude_plasma_energy);
  const double g = units::omega_from_ev(m.drude_damping_energy);
  Complex eps(m.eps_inf, 0.0);
  eps -= wp * wp / (w * Complex(w, g));
  for (const auto& p : m.lorentz_poles) {
    const double w0 = units::omega_from_ev(p.resonance_energy);
    const double gl = units::omega_from_ev(p.damping_energy);
    eps += p.strength * w0 * w0 / Complex(w0 * w0 - w * w, -gl * w);
  }
  if (m.static_conductivity > 0.0)
    eps += Complex(0.0, units::conductivity_from_si(m.static_conductivity) / w);
  return eps;
}

Complex permittivity(const ConstantIndexModel& m, double wavelength_nm) {
  if (wavelength_nm <= 0.0)
    throw std::invalid_argument("permittivity: wavelength must be > 0");
  return Complex(m.refractive_index * m.refractive_index, 0.0);
}

Complex permittivity(const MaterialModel& model, double wavelength_nm) {
  return std::visit(
      [&](const auto& m) { return permittivity(m, wavelength_nm); }, model);
}

Index refractive_index(Complex eps) {
  if (eps.imag() < 0.0)
    throw Error("refractive_index: passive media require Im(eps) >= 0");
  if (eps == Complex(0.0, 0.0)) return {0.0, 0.0};
  const Complex root = std::sqrt(eps);  // principal branch, Re >= 0
  // with Im(eps) >= 0 the principal root already has Im >= 0
  return {root.real(), root.imag()};
}

// ---- optics table CSV ----

OpticsTable read_optics_csv(std::istream& in) {
  OpticsTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("optics csv: empty stream");
  // header: wavelength_nm,n,k
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    OpticsTable::Row row{};
    char c1 = 0, c2 = 0;
    if (!(ls >> row.wavelength_nm >> c1 >> row.n >> c2 >> row.k) || c1 != ',' ||
        c2 != ',')
      throw Error("optics csv: bad row at line " + std::to_string(lineno));
    t.rows.push_back(row);
  }
  t.validate();
  return t;
}

OpticsTable read_optics_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("optics csv: cannot open " + path);
  return read_optics_csv(f);
}

void write_optics_csv(std::ostream& out, const OpticsTable& table) {
  out << "wavelength_nm,n,k\n";
  char buf[128];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", r.wavelength_nm, r.n,
                  r.k);
    out << buf;
  }
}

// ---- fitting ----

namespace {

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

// parameter packing: [eps_inf, wp_ev, gamma_ev, (strength, w0_ev, gl_ev)*];
// clamps keep every candidate passive and away from degenerate corners
struct FitSpace {
  int n_lorentz;

  int size() const { return 3 + 3 * n_lorentz; }

  DrudeLorentzModel unpack(const VecXd& q) const {
    DrudeLorentzModel m;
    m.eps_inf = clamp(q[0], 1.0, 100.0);
    m.drude_plasma_energy = clamp(q[1], 0.0, 50.0);
    m.drude_damping_energy = clamp(q[2], 1e-4, 20.0);
    for (int k = 0; k < n_lorentz; ++k) {
      LorentzPole p;
      p.strength = clamp(q[3 + 3 * k], 0.0, 1e4);
      p.resonance_energy = clamp(q[4 + 3 * k], 0.02, 50.0);
      p.damping_energy = clamp(q[5 + 3 * k], 1e-3, 50.0);
      m.lorentz_poles.push_back(p);
    }
    return m;
  }
};

// objective residuals: the fit minimizes sum |eps_model - eps_table|^2
VecXd residuals(const FitSpace& space, const VecXd& q,
                const std::vector<OpticsTable::Row>& pts) {
  const DrudeLorentzModel m = space.unpack(q);
  VecXd r(2 * pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    const Complex eps = permittivity(m, pts[i].wavelength_nm);
    const Complex nk(pts[i].n, pts[i].k);
    const Complex eps_tab = nk * nk;
    r[2 * i] = eps.real() - eps_tab.real();
    r[2 * i + 1] = eps.imag() - eps_tab.imag();
  }
  return r;
}

// reported residual: RMS over stacked (n, k) deviations
double nk_rms(const DrudeLorentzModel& m,
              const std::vector<OpticsTable::Row>& pts) {
  double acc = 0.0;
  for (const auto& p : pts) {
    const Index ni = refractive_index(permittivity(m, p.wavelength_nm));
    acc += (ni.n - p.n) * (ni.n - p.n) + (ni.k - p.k) * (ni.k - p.k);
  }
  return std::sqrt(acc / (2.0 * pts.size()));
}

// Drude-style seed (eps_inf, wp) from the band: the eps' zero crossing when
// the data changes sign, otherwise a two-point solve of
// eps'(E) ~ eps_inf - wp^2/E^2 on the band endpoints.
struct DrudeSeed {
  double eps_inf;
  double wp_ev;
};

DrudeSeed drude_seed(const std::vector<OpticsTable::Row>& pts) {
  auto eps_re = [](const OpticsTable::Row& r) { return r.n * r.n - r.k * r.k; };
  auto energy = [](const OpticsTable::Row& r) {
    return units::ev_from_wavelength_nm(r.wavelength_nm);
  };

  const double e_hi = energy(pts.front());
  const double e_lo = energy(pts.back());
  const double re_hi = eps_re(pts.front());
  const double re_lo = eps_re(pts.back());

  double prev_eps = eps_re(pts.back());
  double prev_ev = e_lo;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    const double ev = energy(pts[i]);
    const double eps = eps_re(pts[i]);
    if (prev_eps <= 0.0 && eps > 0.0) {
      const double t = -prev_eps / (eps - prev_eps);
      const double cross = prev_ev + t * (ev - prev_ev);
      const double eps_inf = std::max(1.0, re_hi);
      return {eps_inf, cross * std::sqrt(eps_inf)};
    }
    prev_eps = eps;
    prev_ev = ev;
  }
  // no crossing: two-point estimate
  const double denom = 1.0 / (e_lo * e_lo) - 1.0 / (e_hi * e_hi);
  double wp2 = denom > 0.0 ? (re_hi - re_lo) / denom : 0.0;
  wp2 = std::max(wp2, 0.0);
  const double eps_inf = std::max(1.0, re_hi + wp2 / (e_hi * e_hi));
  return {eps_inf, std::sqrt(wp2)};
}

}  // namespace

FitResult fit_drude_lorentz(const OpticsTable& table, const FitOptions& opts) {
  table.validate();
  if (opts.n_lorentz < 0 || opts.n_lorentz > 4)
    throw Error("fit_drude_lorentz: n_lorentz must be in [0, 4]");
  if (opts.band_min_nm < table.min_wavelength_nm() - 1e-9 ||
      opts.band_max_nm > table.max_wavelength_nm() + 1e-9 ||
      opts.band_min_nm >= opts.band_max_nm)
    throw Error("fit_drude_lorentz: band outside table range");

  std::vector<OpticsTable::Row> pts;
  for (const auto& r : table.rows)
    if (r.wavelength_nm >= opts.band_min_nm - 1e-9 &&
        r.wavelength_nm <= opts.band_max_nm + 1e-9)
      pts.push_back(r);
  if (pts.size() < 3) throw Error("fit_drude_lorentz: too few rows in band");

  const FitSpace space{opts.n_lorentz};
  const int np = space.size();
  const int nr = static_cast<int>(2 * pts.size());

  auto run_lm = [&](VecXd q, double* chi2_out) {
    VecXd r = residuals(space, q, pts);
    double chi2 = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
      MatXd J(nr, np);
      for (int j = 0; j < np; ++j) {
        const double h = std::max(1e-7, 1e-6 * std::abs(q[j]));
        VecXd qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        J.col(j) = (residuals(space, qp, pts) - residuals(space, qm, pts)) /
                   (2.0 * h);
      }
      const MatXd JtJ = J.transpose() * J;
      const VecXd g = J.transpose() * r;

      bool stepped = false;
      bool converged = false;
      for (int tries = 0; tries < 16; ++tries) {
        MatXd A = JtJ;
        for (int j = 0; j < np; ++j)
          A(j, j) += lambda * std::max(JtJ(j, j), 1e-12);
        const VecXd dq = A.ldlt().solve(-g);
        const VecXd qn = q + dq;
        const VecXd rn = residuals(space, qn, pts);
        const double chin = rn.squaredNorm();
        if (chin < chi2) {
          const double improvement = (chi2 - chin) / std::max(chi2, 1e-300);
          q = qn;
          r = rn;
          chi2 = chin;
          lambda = std::max(lambda / 3.0, 1e-14);
          stepped = true;
          converged = improvement < 1e-15;
          break;
        }
        lambda *= 4.0;
        if (lambda > 1e14) break;
      }
      if (!stepped || converged || chi2 < 1e-26) break;
    }
    *chi2_out = chi2;
    return q;
  };

  // deterministic multi-start: the data-driven Drude seed plus a fixed
  // ladder of eps_inf / pole-strength combinations, tried in listed order
  const DrudeSeed seed = drude_seed(pts);
  const double ev_lo = units::ev_from_wavelength_nm(pts.back().wavelength_nm);
  const double ev_hi = units::ev_from_wavelength_nm(pts.front().wavelength_nm);

  std::vector<std::pair<double, double>> starts;  // (eps_inf, pole strength)
  starts.emplace_back(seed.eps_inf, 0.5);
  starts.emplace_back(1.0, 0.5);
  starts.emplace_back(3.0, 0.5);
  starts.emplace_back(6.0, 0.5);
  if (opts.n_lorentz > 0) {
    starts.emplace_back(seed.eps_inf, 2.0);
    starts.emplace_back(1.0, 2.0);
    starts.emplace_back(6.0, 2.0);
  }

  VecXd best_q;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (const auto& [eps0, s0] : starts) {
    VecXd q(np);
    q[0] = eps0;
    q[1] = seed.wp_ev;
    q[2] = 0.1;
    for (int k = 0; k < opts.n_lorentz; ++k) {
      q[3 + 3 * k] = s0;
      q[4 + 3 * k] = ev_lo + (ev_hi - ev_lo) * (k + 1) / (opts.n_lorentz + 1);
      q[5 + 3 * k] =
          std::max(0.05, (ev_hi - ev_lo) / (4.0 * (opts.n_lorentz + 1)));
    }
    double chi2 = 0.0;
    const VecXd qf = run_lm(q, &chi2);
    if (chi2 < best_chi2) {
      best_chi2 = chi2;
      best_q = qf;
    }
  }

  FitResult out;
  out.model = space.unpack(best_q);
  out.model.validate();
  out.rms_residual = nk_rms(out.model, pts);
  if (out.rms_residual > opts.residual_threshold)
    throw FitQualityError(
        "fit_drude_lorentz: residual " + std::to_string(out.rms_residual) +
            " exceeds threshold " + std::to_string(opts.residual_threshold),
        out.rms_residual);
  return out;
}

// ---- material set / manifest ----

void MaterialSet::add(const std::string& name, MaterialModel model) {
  std::visit([](const auto& m) { m.validate(); }, model);
  models_[name] = std::move(model);
}

const MaterialModel& MaterialSet::get(const std::string& name) const {
  auto it = models_.find(name);
  if (it == models_.end()) throw Error("unknown material '" + name + "'");
  return it->second;
}

bool MaterialSet::contains(const std::string& name) const {
  return models_.count(name) > 0;
}

std::string MaterialSet::to_json() const {
  nlohmann::json root;
  for (const auto& [name, model] : models_) {
    nlohmann::json j;
    if (const auto* c = std::get_if<ConstantIndexModel>(&model)) {
      j["type"] = "constant_index";
      j["refractive_index"] = c->refractive_index;
    } else {
      const auto& d = std::get<DrudeLorentzModel>(model);
      j["type"] = "drude_lorentz";
      j["eps_inf"] = d.eps_inf;
      j["drude_plasma_energy_ev"] = d.drude_plasma_energy;
      j["drude_damping_energy_ev"] = d.drude_damping_energy;
      j["static_conductivity_s_per_m"] = d.static_conductivity;
      nlohmann::json poles = nlohmann::json::array();
      for (const auto& p : d.lorentz_poles)
        poles.push_back({{"strength", p.strength},
                         {"resonance_energy_ev", p.resonance_energy},
                         {"damping_energy_ev", p.damping_energy}});
      j["lorentz_poles"] = poles;
    }
    root["models"][name] = j;
  }
  return root.dump(2);
}

MaterialSet MaterialSet::from_json(const std::string& text) {
  MaterialSet set;
  const nlohmann::json root = nlohmann::json::parse(text);
  if (!root.contains("models")) throw Error("materials manifest: no models");
  for (const auto& [name, j] : root.at("models").items()) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant_index") {
      ConstantIndexModel c;
      c.refractive_index = j.at("refractive_index").get<double>();
      set.add(name, c);
    } else if (type == "drude_lorentz") {
      DrudeLorentzModel d;
      d.eps_inf = j.at("eps_inf").get<double>();
      d.drude_plasma_energy = j.at("drude_plasma_energy_ev").get<double>();
      d.drude_damping_energy = j.at("drude_damping_energy_ev").get<double>();
      d.static_conductivity =
          j.value("static_conductivity_s_per_m", 0.0);
      for (const auto& pj : j.value("lorentz_poles", nlohmann::json::array())) {
        LorentzPole p;
        p.strength = pj.at("strength").get<double>();
        p.resonance_energy = pj.at("resonance_energy_ev").get<double>();
        p.damping_energy = pj.at("damping_energy_ev").get<double>();
        d.lorentz_poles.push_back(p);
      }
      set.add(name, d);
    } else {
      throw Error("materials manifest: unknown model type '" + type + "'");
    }
  }
  return set;
}

const MaterialSet& builtin_materials() {
  static const MaterialSet set = [] {
    MaterialSet s;
    s.add("air", ConstantIndexModel{1.0});
    s.add("SiO2", ConstantIndexModel{1.45});

    FitOptions au_opts;
    au_opts.n_lorentz = 2;
    au_opts.band_min_nm = 380.0;
    au_opts.band_max_nm = 1500.0;
    s.add("Au", fit_drude_lorentz(gold_table(), au_opts).model);

    FitOptions ag_opts;
    ag_opts.n_lorentz = 2;
    ag_opts.band_min_nm = 315.0;
    ag_opts.band_max_nm = 1500.0;
    s.add("Ag", fit_drude_lorentz(silver_table(), ag_opts).model);

    FitOptions ito_opts;
    ito_opts.n_lorentz = 0;
    ito_opts.band_min_nm = 300.0;
    ito_opts.band_max_nm = 1700.0;
    s.add("ITO", fit_drude_lorentz(ito_table(), ito_opts).model);
    return s;
  }();
  return set;
}

StackSpec paper_stack(const std::string& metal, double metal_thickness_nm) {
  StackSpec s;
  s.ambient = "air";
  s.layers = {{"SiO2", 500.0}, {metal, metal_thickness_nm}, {"ITO", 200.0}};
  s.substrate = "air";
  s.validate();
  return s;
}

StackSpec tuning_stack(const std::string& metal, double metal_thickness_nm,
                       const std::string& spacer_material) {
  StackSpec s;
  s.ambient = "air";
  s.layers = {{spacer_material, 500.0},
              {metal, metal_thickness_nm},
              {"ITO", 200.0}};
  s.substrate = "air";
  s.validate();
  return s;
}

}  // namespace plasmo::materials
