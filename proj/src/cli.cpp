#include "plasmo/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "plasmo/attribution.hpp"
#include "plasmo/dataset.hpp"
#include "plasmo/fdtd.hpp"
#include "plasmo/io.hpp"
#include "plasmo/materials.hpp"
#include "plasmo/plot.hpp"
#include "plasmo/surrogate.hpp"
#include "plasmo/tmm.hpp"

namespace plasmo::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out = "plasmo_out";
  std::uint64_t seed = 1;
  int workers = 0;  // 0 -> env/hardware
  std::string profile = "desk";
  std::string config_path;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "output directory")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "seed for all randomness")
      ->capture_default_str();
  cmd->add_option("--workers", c.workers,
                  "worker threads (default: PLASMO_WORKERS or core count)");
  cmd->add_option("--profile", c.profile, "desk or paper profile")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  cmd->add_option("--config", c.config_path,
                  "JSON file overriding simulation-config fields");
}

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("PLASMO_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::string normalize_material(std::string m) {
  for (auto& c : m) c = static_cast<char>(std::tolower(c));
  if (m == "au") return "Au";
  if (m == "ag") return "Ag";
  throw Error("unknown material '" + m + "' (expected au or ag)");
}

fdtd::SimConfig config_for(const Common& c) {
  fdtd::SimConfig cfg =
      c.profile == "paper" ? fdtd::paper_config() : fdtd::desk_config();
  if (!c.config_path.empty()) {
    const auto j = nlohmann::json::parse(io::read_file(c.config_path));
    if (j.contains("cell_size_um")) {
      cfg.cell_size_x_um = j["cell_size_um"][0].get<double>();
      cfg.cell_size_y_um = j["cell_size_um"][1].get<double>();
    }
    cfg.resolution = j.value("resolution", cfg.resolution);
    cfg.pml_thickness_um = j.value("pml_thickness_um", cfg.pml_thickness_um);
    cfg.courant = j.value("courant", cfg.courant);
    if (j.contains("source_band_nm")) {
      cfg.source_band_min_nm = j["source_band_nm"][0].get<double>();
      cfg.source_band_max_nm = j["source_band_nm"][1].get<double>();
    }
    if (j.contains("monitor_wavelengths_nm"))
      cfg.monitor_wavelengths_nm =
          j["monitor_wavelengths_nm"].get<std::vector<double>>();
    cfg.decay_threshold = j.value("decay_threshold", cfg.decay_threshold);
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    cfg.transverse_pml = j.value("transverse_pml", cfg.transverse_pml);
  }
  return cfg;
}

// deterministic run metadata (no timestamps): inputs with content hashes,
// outputs, versions, seed
void write_metadata(const fs::path& dir, const std::string& command,
                    const Common& c,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const nlohmann::json& extra = {}) {
  nlohmann::json j;
  j["tool"] = "plasmo";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = c.seed;
  j["profile"] = c.profile;
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [name, path] : inputs) {
    if (fs::exists(path))
      in[name] = {{"path", path},
                  {"fnv1a64", io::hex64(io::fnv1a64(io::read_file(path)))}};
    else
      in[name] = {{"path", path}};
  }
  j["inputs"] = in;
  j["outputs"] = outputs;
  j["materials_manifest_hash"] =
      io::hex64(io::fnv1a64(materials::builtin_materials().to_json()));
  if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
  io::write_file(dir / "run_meta.json", j.dump(2));
}

// ---- subcommand bodies ----

int cmd_simulate(const Common& c, const std::string& material_raw,
                 double thickness_nm) {
  const std::string material = normalize_material(material_raw);
  const auto& mats = materials::builtin_materials();
  const auto stack = materials::paper_stack(material, thickness_nm);
  fdtd::SimConfig cfg = config_for(c);

  fdtd::NormalizationCache cache;
  auto sim = fdtd::build_simulation(stack, mats, cfg);
  auto res = fdtd::run(sim, &cache);

  const fs::path out(c.out);
  fs::create_directories(out);
  std::ostringstream csv;
  csv << "wavelength_nm,absorbed_power,absorbed_flux,R,T\n";
  for (size_t i = 0; i < res.wavelengths_nm.size(); ++i)
    csv << io::format_full(res.wavelengths_nm[i]) << ','
        << io::format_full(res.absorbed_power[i]) << ','
        << io::format_full(res.absorbed_flux[i]) << ','
        << io::format_full(res.reflectance[i]) << ','
        << io::format_full(res.transmittance[i]) << "\n";
  io::write_file(out / "spectrum.csv", csv.str());

  std::vector<std::string> outputs = {"spectrum.csv"};
  for (double wl : res.wavelengths_nm) {
    auto map = fdtd::absorbed_power_map(sim, wl);
    char name[64];
    std::snprintf(name, sizeof name, "maps/map_%gnm.csv", wl);
    io::write_grid_csv_file(out / name, map.w_abs);
    outputs.push_back(name);
  }

  nlohmann::json extra = nlohmann::json::parse(sim.run_metadata_json());
  extra["material"] = material;
  extra["thickness_nm"] = thickness_nm;
  extra["spectral_warnings"] = res.warnings;
  write_metadata(out, "simulate", c, {}, outputs, extra);
  std::cout << "simulate: " << material << " " << thickness_nm << " nm -> "
            << (out / "spectrum.csv").string() << " (" << res.steps
            << " steps)\n";
  return 0;
}

int cmd_tmm(const Common& c, const std::string& material_raw,
            double thickness_nm, double lo_nm, double hi_nm, int points) {
  const std::string material = normalize_material(material_raw);
  const auto& mats = materials::builtin_materials();
  const auto stack = materials::paper_stack(material, thickness_nm);
  const auto spectrum =
      tmm::spectrum(stack, mats, tmm::linspace_nm(lo_nm, hi_nm, points));

  const fs::path out(c.out);
  fs::create_directories(out);
  std::ostringstream csv;
  tmm::write_spectrum_csv(csv, spectrum);
  io::write_file(out / "tmm_spectrum.csv", csv.str());
  write_metadata(out, "tmm", c, {}, {"tmm_spectrum.csv"},
                 {{"material", material}, {"thickness_nm", thickness_nm}});
  const auto peak = tmm::absorptance_peak(spectrum);
  std::cout << "tmm: " << material << " " << thickness_nm
            << " nm, absorptance peak " << peak.wavelength_nm << " nm (A="
            << peak.value << ")\n";
  return 0;
}

int cmd_sweep(const Common& c, const std::string& engine,
              std::vector<std::string> mats_list,
              std::vector<double> thicknesses, std::vector<double> wavelengths) {
  dataset::SweepPlan plan;
  if (!mats_list.empty()) {
    plan.materials.clear();
    for (auto& m : mats_list) plan.materials.push_back(normalize_material(m));
  }
  if (!thicknesses.empty()) plan.thicknesses_nm = thicknesses;
  if (!wavelengths.empty()) plan.wavelengths_nm = wavelengths;
  plan.engine = engine == "fdtd" ? dataset::Engine::fdtd : dataset::Engine::tmm;
  plan.profile = c.profile == "paper" ? dataset::Profile::paper
                                      : dataset::Profile::desk;

  fdtd::NormalizationCache cache;
  const auto manifest =
      dataset::run_sweep(plan, c.out, resolve_workers(c.workers),
                         materials::builtin_materials(), &cache, c.seed);
  write_metadata(c.out, "sweep", c, {}, {"records.csv", "manifest.json"},
                 {{"engine", engine},
                  {"cases", manifest.cases.size()},
                  {"engine_invocations", manifest.engine_invocations}});
  std::cout << "sweep: " << manifest.cases.size() << " cases, "
            << manifest.engine_invocations << " engine invocations, records -> "
            << (fs::path(c.out) / "records.csv").string() << "\n";
  return 0;
}

surrogate::ModelBundle make_bundle(const std::string& kind,
                                   const std::vector<dataset::SampleRecord>& train,
                                   std::uint64_t seed) {
  surrogate::ModelBundle bundle;
  bundle.kind = kind;
  bundle.seed = seed;
  bundle.one_hot_order = dataset::one_hot_order();
  VecXd th(train.size()), wl(train.size());
  for (size_t i = 0; i < train.size(); ++i) {
    th[static_cast<Eigen::Index>(i)] = train[i].thickness_nm;
    wl[static_cast<Eigen::Index>(i)] = train[i].wavelength_nm;
  }
  bundle.thickness_scaler = dataset::standardize_fit(th).second;
  bundle.wavelength_scaler = dataset::standardize_fit(wl).second;
  bundle.net = kind == "mlp" ? surrogate::make_mlp(seed)
                             : surrogate::make_cnn(seed);
  return bundle;
}

int cmd_train_mlp(const Common& c, const std::string& records_path) {
  auto records = dataset::read_records_csv_file(records_path);
  std::vector<dataset::SampleRecord> valid;
  for (auto& r : records)
    if (r.valid) valid.push_back(r);
  if (valid.size() < 10) throw Error("train-mlp: too few valid records");

  const auto parts = dataset::split(static_cast<int>(valid.size()), {0.8, 0.2},
                                    c.seed);
  std::vector<dataset::SampleRecord> train_recs, test_recs;
  for (int i : parts[0]) train_recs.push_back(valid[i]);
  for (int i : parts[1]) test_recs.push_back(valid[i]);

  auto bundle = make_bundle("mlp", train_recs, c.seed);
  auto targets = [](const std::vector<dataset::SampleRecord>& recs) {
    MatXd y(2, recs.size());
    for (size_t i = 0; i < recs.size(); ++i) {
      y(0, i) = recs[i].absorbed_power;
      y(1, i) = recs[i].absorbed_flux;
    }
    return y;
  };
  const MatXd x_train = bundle.features(train_recs);
  const MatXd y_train = targets(train_recs);
  const MatXd x_test = bundle.features(test_recs);
  const MatXd y_test = targets(test_recs);

  auto cfg = surrogate::mlp_train_config();
  cfg.seed = c.seed;
  // the 20% holdout doubles as the early-stopping validation split,
  // mirroring the 80/20 protocol
  const auto report =
      surrogate::train(bundle.net, x_train, y_train, x_test, y_test, cfg);
  const auto metrics = surrogate::evaluate(bundle.net, x_test, y_test);

  const fs::path out(c.out);
  fs::create_directories(out);
  surrogate::save_model(out / "mlp.plsm", bundle);
  std::ostringstream rep;
  surrogate::write_report_csv(rep, report);
  io::write_file(out / "train_report.csv", rep.str());

  nlohmann::json mj;
  mj["test_mae"] = metrics.mae;
  mj["test_mse"] = metrics.mse;
  mj["test_mae_mean"] = metrics.mae_mean;
  mj["best_epoch"] = report.best_epoch;
  mj["stopped_epoch"] = report.stopped_epoch;
  io::write_file(out / "metrics.json", mj.dump(2));
  write_metadata(out, "train-mlp", c, {{"records", records_path}},
                 {"mlp.plsm", "train_report.csv", "metrics.json"});
  std::cout << "train-mlp: stopped at epoch " << report.stopped_epoch
            << " (best " << report.best_epoch << "), test MAE power="
            << metrics.mae[0] << " flux=" << metrics.mae[1] << "\n";
  return 0;
}

int cmd_train_cnn(const Common& c, const std::string& records_path,
                  std::string maps_root) {
  auto records = dataset::read_records_csv_file(records_path);
  if (maps_root.empty())
    maps_root = fs::path(records_path).parent_path().string();

  std::vector<dataset::SampleRecord> with_maps;
  for (auto& r : records)
    if (r.valid && !r.map_path.empty()) with_maps.push_back(r);
  if (with_maps.size() < 10) throw Error("train-cnn: too few map records");

  MatXd y(surrogate::kMapRows * surrogate::kMapCols, with_maps.size());
  for (size_t i = 0; i < with_maps.size(); ++i) {
    const GridXd full =
        io::read_grid_csv_file(fs::path(maps_root) / with_maps[i].map_path);
    const GridXd small = surrogate::downsample_area(full, surrogate::kMapRows,
                                                    surrogate::kMapCols);
    y.col(i) = surrogate::flatten_map(small);
  }

  const auto parts = dataset::split(static_cast<int>(with_maps.size()),
                                    {0.7, 0.15, 0.15}, c.seed);
  auto take = [&](const std::vector<int>& idx, const MatXd& src) {
    MatXd out(src.rows(), idx.size());
    for (size_t k = 0; k < idx.size(); ++k) out.col(k) = src.col(idx[k]);
    return out;
  };
  std::vector<dataset::SampleRecord> train_recs;
  for (int i : parts[0]) train_recs.push_back(with_maps[i]);

  auto bundle = make_bundle("cnn", train_recs, c.seed);
  const MatXd x_all = bundle.features(with_maps);
  const MatXd x_train = take(parts[0], x_all), y_train = take(parts[0], y);
  const MatXd x_val = take(parts[1], x_all), y_val = take(parts[1], y);
  const MatXd x_test = take(parts[2], x_all), y_test = take(parts[2], y);

  auto cfg = surrogate::cnn_train_config();
  cfg.seed = c.seed;
  const auto report =
      surrogate::train(bundle.net, x_train, y_train, x_val, y_val, cfg);
  const auto metrics = surrogate::evaluate(bundle.net, x_test, y_test);
  const double map_max = y.maxCoeff();

  const fs::path out(c.out);
  fs::create_directories(out);
  surrogate::save_model(out / "cnn.plsm", bundle);
  std::ostringstream rep;
  surrogate::write_report_csv(rep, report);
  io::write_file(out / "train_report.csv", rep.str());
  nlohmann::json mj;
  mj["test_mae_mean"] = metrics.mae_mean;
  mj["test_mse_mean"] = metrics.mse_mean;
  mj["map_max"] = map_max;
  mj["test_mae_relative_to_map_max"] =
      map_max > 0 ? metrics.mae_mean / map_max : 0.0;
  mj["best_epoch"] = report.best_epoch;
  mj["stopped_epoch"] = report.stopped_epoch;
  io::write_file(out / "metrics.json", mj.dump(2));
  write_metadata(out, "train-cnn", c, {{"records", records_path}},
                 {"cnn.plsm", "train_report.csv", "metrics.json"});
  std::cout << "train-cnn: stopped at epoch " << report.stopped_epoch
            << ", test MAE " << metrics.mae_mean << " ("
            << (map_max > 0 ? metrics.mae_mean / map_max * 100.0 : 0.0)
            << "% of map max)\n";
  return 0;
}

int cmd_predict(const Common& c, const std::string& model_path,
                const std::string& material_raw, double thickness_nm,
                double wavelength_nm) {
  auto bundle = surrogate::load_model(model_path);
  const std::string material = normalize_material(material_raw);
  const VecXd pred = bundle.predict(material, thickness_nm, wavelength_nm);

  const fs::path out(c.out);
  fs::create_directories(out);
  if (bundle.kind == "mlp") {
    nlohmann::json j;
    j["material"] = material;
    j["thickness_nm"] = thickness_nm;
    j["wavelength_nm"] = wavelength_nm;
    j["absorbed_power"] = pred[0];
    j["absorbed_flux"] = pred[1];
    io::write_file(out / "prediction.json", j.dump(2));
    std::cout << "predict: absorbed_power=" << pred[0]
              << " absorbed_flux=" << pred[1] << "\n";
    write_metadata(out, "predict", c, {{"model", model_path}},
                   {"prediction.json"});
  } else {
    const GridXd map = surrogate::unflatten_map(pred);
    io::write_grid_csv_file(out / "predicted_map.csv", map);
    std::cout << "predict: map (" << map.rows() << "x" << map.cols()
              << ") -> " << (out / "predicted_map.csv").string() << "\n";
    write_metadata(out, "predict", c, {{"model", model_path}},
                   {"predicted_map.csv"});
  }
  return 0;
}

int cmd_explain(const Common& c, const std::string& model_path,
                const std::string& records_path, int background_cap) {
  auto bundle = surrogate::load_model(model_path);
  if (bundle.kind != "mlp")
    throw Error("explain: attribution runs on the mlp surrogate");
  auto records = dataset::read_records_csv_file(records_path);
  std::vector<dataset::SampleRecord> valid;
  for (auto& r : records)
    if (r.valid) valid.push_back(r);
  if (valid.size() < 10) throw Error("explain: too few valid records");

  const MatXd features = bundle.features(valid);
  const MatXd background =
      attribution::subsample_background(features, background_cap, c.seed);
  auto model = [&bundle](const MatXd& x) -> VecXd {
    return bundle.net.forward(x, surrogate::Mode::infer).row(0).transpose();
  };
  const auto groups = attribution::surrogate_groups();
  const auto imp =
      attribution::global_importance(model, features, background, groups);

  const fs::path out(c.out);
  fs::create_directories(out);
  std::ostringstream ex_csv, sum_csv;
  attribution::write_explanations_csv(ex_csv, groups, imp.per_instance);
  attribution::write_summary_csv(sum_csv, imp);
  io::write_file(out / "explanations.csv", ex_csv.str());
  io::write_file(out / "summary.csv", sum_csv.str());
  write_metadata(out, "explain", c,
                 {{"model", model_path}, {"records", records_path}},
                 {"explanations.csv", "summary.csv"});
  std::cout << "explain: ranking";
  for (size_t i = 0; i < imp.names.size(); ++i)
    std::cout << " " << (i + 1) << "." << imp.names[i] << " ("
              << imp.mean_abs_phi[i] << ")";
  std::cout << "\n";
  return 0;
}

int cmd_plot(const Common&, const std::string& kind,
             const std::string& in_path, const std::string& out_path) {
  if (!fs::exists(in_path)) throw Error("plot: input does not exist: " + in_path);
  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());

  if (kind == "map") {
    const GridXd grid = io::read_grid_csv_file(in_path);
    std::string sidecar;
    const std::string pgm = plot::pgm_heatmap(grid, &sidecar);
    io::write_file(out, pgm);
    io::write_file(out_path + ".txt", sidecar);
    std::cout << "plot: map -> " << out_path << "\n";
    return 0;
  }

  std::vector<plot::Series> series;
  std::string xlab = "wavelength (nm)", ylab, title;
  std::ifstream f(in_path);
  if (!f) throw Error("plot: cannot open " + in_path);
  std::string header;
  std::getline(f, header);
  f.seekg(0);

  if (kind == "spectrum") {
    title = "spectrum";
    ylab = "fraction of incident power";
    if (header.rfind("material,", 0) == 0) {
      auto records = dataset::read_records_csv(f);
      if (records.empty()) throw Error("plot: empty record list");
      std::map<std::pair<std::string, double>, plot::Series> by_case;
      for (const auto& r : records) {
        if (!r.valid) continue;
        auto& s = by_case[{r.material, r.thickness_nm}];
        if (s.label.empty()) {
          std::ostringstream lab;
          lab << r.material << " " << r.thickness_nm << " nm";
          s.label = lab.str();
        }
        s.x.push_back(r.wavelength_nm);
        s.y.push_back(r.absorbed_power);
      }
      for (auto& [key, s] : by_case) series.push_back(std::move(s));
      ylab = "absorbed power";
    } else if (header.rfind("wavelength_nm,R,T,A", 0) == 0) {
      auto pts = tmm::read_spectrum_csv(f);
      if (pts.empty()) throw Error("plot: empty spectrum");
      plot::Series r{"R", {}, {}}, t{"T", {}, {}}, a{"A", {}, {}};
      for (const auto& p : pts) {
        r.x.push_back(p.wavelength_nm);
        r.y.push_back(p.R);
        t.x.push_back(p.wavelength_nm);
        t.y.push_back(p.T);
        a.x.push_back(p.wavelength_nm);
        a.y.push_back(p.A);
      }
      series = {r, t, a};
    } else if (header.rfind("wavelength_nm,absorbed_power", 0) == 0) {
      std::string line;
      std::getline(f, line);  // header
      plot::Series p{"absorbed power", {}, {}}, fl{"absorbed flux", {}, {}},
          r{"R", {}, {}}, t{"T", {}, {}};
      size_t lineno = 1;
      while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) {
          try {
            vals.push_back(std::stod(cell));
          } catch (...) {
            throw Error("plot: bad value at line " + std::to_string(lineno));
          }
        }
        if (vals.size() < 5)
          throw Error("plot: too few columns at line " + std::to_string(lineno));
        p.x.push_back(vals[0]);
        p.y.push_back(vals[1]);
        fl.x.push_back(vals[0]);
        fl.y.push_back(vals[2]);
        r.x.push_back(vals[0]);
        r.y.push_back(vals[3]);
        t.x.push_back(vals[0]);
        t.y.push_back(vals[4]);
      }
      if (p.x.empty()) throw Error("plot: empty spectrum");
      series = {p, fl, r, t};
    } else {
      throw Error("plot: unrecognized spectrum header at line 1");
    }
  } else if (kind == "losscurve") {
    title = "training curve";
    xlab = "epoch";
    ylab = "loss";
    std::string line;
    std::getline(f, line);
    if (line.rfind("epoch,", 0) != 0)
      throw Error("plot: not a training report at line 1");
    plot::Series tr{"train", {}, {}}, va{"validation", {}, {}};
    size_t lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(ls, cell, ',')) {
        try {
          vals.push_back(std::stod(cell));
        } catch (...) {
          throw Error("plot: bad value at line " + std::to_string(lineno));
        }
      }
      if (vals.size() < 3)
        throw Error("plot: too few columns at line " + std::to_string(lineno));
      tr.x.push_back(vals[0]);
      tr.y.push_back(vals[1]);
      va.x.push_back(vals[0]);
      va.y.push_back(vals[2]);
    }
    if (tr.x.empty()) throw Error("plot: empty report");
    series = {tr, va};
  } else if (kind == "shap-summary") {
    std::string line;
    std::getline(f, line);
    if (line.rfind("rank,group,", 0) != 0)
      throw Error("plot: not an attribution summary at line 1");
    std::vector<std::string> labels;
    std::vector<double> values;
    size_t lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string rank, group, value;
      if (!std::getline(ls, rank, ',') || !std::getline(ls, group, ',') ||
          !std::getline(ls, value))
        throw Error("plot: bad row at line " + std::to_string(lineno));
      labels.push_back(group);
      try {
        values.push_back(std::stod(value));
      } catch (...) {
        throw Error("plot: bad value at line " + std::to_string(lineno));
      }
    }
    if (labels.empty()) throw Error("plot: empty summary");
    io::write_file(out, plot::svg_bar_chart(labels, values,
                                            "mean |phi| by feature group"));
    std::cout << "plot: shap-summary -> " << out_path << "\n";
    return 0;
  } else {
    throw Error("plot: unknown kind '" + kind + "'");
  }

  io::write_file(out, plot::svg_line_plot(series, xlab, ylab, title));
  std::cout << "plot: " << kind << " -> " << out_path << "\n";
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"plasmonic multilayer absorption toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common c_sim, c_tmm, c_sweep, c_mlp, c_cnn, c_pred, c_exp, c_plot;

  // simulate
  auto* sim = app.add_subcommand("simulate", "run one dispersive FDTD case");
  std::string sim_material;
  double sim_thickness = 20.0;
  sim->add_option("--material", sim_material, "au or ag")->required();
  sim->add_option("--thickness-nm", sim_thickness, "metal thickness in nm")
      ->required()
      ->check(CLI::Range(1.0, 200.0));
  add_common(sim, c_sim);

  // tmm
  auto* tm = app.add_subcommand("tmm", "analytic transfer-matrix spectrum");
  std::string tmm_material;
  double tmm_thickness = 20.0, tmm_lo = 300.0, tmm_hi = 1500.0;
  int tmm_points = 601;
  tm->add_option("--material", tmm_material, "au or ag")->required();
  tm->add_option("--thickness-nm", tmm_thickness, "metal thickness in nm")
      ->required()
      ->check(CLI::Range(1.0, 200.0));
  tm->add_option("--lambda-min-nm", tmm_lo, "scan start")->capture_default_str();
  tm->add_option("--lambda-max-nm", tmm_hi, "scan end")->capture_default_str();
  tm->add_option("--points", tmm_points, "scan points")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  add_common(tm, c_tmm);

  // sweep
  auto* sw = app.add_subcommand("sweep", "run the dataset parameter sweep");
  std::string sweep_engine = "tmm";
  std::vector<std::string> sweep_materials;
  std::vector<double> sweep_thicknesses, sweep_wavelengths;
  sw->add_option("--engine", sweep_engine, "tmm or fdtd")
      ->check(CLI::IsMember({"tmm", "fdtd"}))
      ->capture_default_str();
  sw->add_option("--materials", sweep_materials, "subset of au,ag");
  sw->add_option("--thicknesses-nm", sweep_thicknesses, "thickness list");
  sw->add_option("--wavelengths-nm", sweep_wavelengths, "wavelength list");
  add_common(sw, c_sweep);

  // train-mlp / train-cnn
  auto* tmlp = app.add_subcommand("train-mlp",
                                  "train the power/flux surrogate");
  std::string mlp_records;
  tmlp->add_option("--records", mlp_records, "records.csv from a sweep")
      ->required();
  add_common(tmlp, c_mlp);

  auto* tcnn = app.add_subcommand("train-cnn", "train the map surrogate");
  std::string cnn_records, cnn_maps_root;
  tcnn->add_option("--records", cnn_records, "records.csv from an fdtd sweep")
      ->required();
  tcnn->add_option("--maps-root", cnn_maps_root,
                   "directory containing the maps/ tree (default: records dir)");
  add_common(tcnn, c_cnn);

  // predict
  auto* pred = app.add_subcommand("predict", "evaluate a trained surrogate");
  std::string pred_model, pred_material;
  double pred_thickness = 20.0, pred_wavelength = 600.0;
  pred->add_option("--model", pred_model, "model file (.plsm)")->required();
  pred->add_option("--material", pred_material, "au or ag")->required();
  pred->add_option("--thickness-nm", pred_thickness, "metal thickness")
      ->required()
      ->check(CLI::Range(1.0, 200.0));
  pred->add_option("--wavelength-nm", pred_wavelength, "vacuum wavelength")
      ->required()
      ->check(CLI::Range(100.0, 10000.0));
  add_common(pred, c_pred);

  // explain
  auto* exp = app.add_subcommand("explain", "exact Shapley attribution");
  std::string exp_model, exp_records;
  int exp_cap = 256;
  exp->add_option("--model", exp_model, "mlp model file")->required();
  exp->add_option("--records", exp_records, "records.csv")->required();
  exp->add_option("--background-cap", exp_cap, "background row cap")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  add_common(exp, c_exp);

  // plot
  auto* pl = app.add_subcommand("plot", "emit SVG/PGM figures");
  std::string plot_kind, plot_in, plot_out;
  pl->add_option("--kind", plot_kind, "spectrum|map|losscurve|shap-summary")
      ->required()
      ->check(CLI::IsMember({"spectrum", "map", "losscurve", "shap-summary"}));
  pl->add_option("--in", plot_in, "input file")->required();
  pl->add_option("--out-file", plot_out, "output figure path")->required();
  add_common(pl, c_plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help / --version
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(c_sim, sim_material, sim_thickness);
    if (tm->parsed())
      return cmd_tmm(c_tmm, tmm_material, tmm_thickness, tmm_lo, tmm_hi,
                     tmm_points);
    if (sw->parsed())
      return cmd_sweep(c_sweep, sweep_engine, sweep_materials,
                       sweep_thicknesses, sweep_wavelengths);
    if (tmlp->parsed()) return cmd_train_mlp(c_mlp, mlp_records);
    if (tcnn->parsed()) return cmd_train_cnn(c_cnn, cnn_records, cnn_maps_root);
    if (pred->parsed())
      return cmd_predict(c_pred, pred_model, pred_material, pred_thickness,
                         pred_wavelength);
    if (exp->parsed()) return cmd_explain(c_exp, exp_model, exp_records, exp_cap);
    if (pl->parsed()) return cmd_plot(c_plot, plot_kind, plot_in, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 2;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("plasmo");
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace plasmo::cli
