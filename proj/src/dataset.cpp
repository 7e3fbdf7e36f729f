#include "plasmo/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "plasmo/io.hpp"
#include "plasmo/tmm.hpp"

namespace plasmo::dataset {

namespace fs = std::filesystem;

void SweepPlan::validate() const {
  if (materials.empty()) throw Error("SweepPlan: no materials");
  for (const auto& m : materials)
    if (m != "Au" && m != "Ag")
      throw Error("SweepPlan: material must be Au or Ag, got '" + m + "'");
  if (thicknesses_nm.empty()) throw Error("SweepPlan: no thicknesses");
  for (double t : thicknesses_nm)
    if (t < 5.0 || t > 60.0)
      throw Error("SweepPlan: thickness " + std::to_string(t) +
                  " nm outside [5, 60]");
  for (double wl : wavelengths_or_default())
    if (wl <= 0.0) throw Error("SweepPlan: non-positive wavelength");
}

std::vector<double> SweepPlan::wavelengths_or_default() const {
  if (!wavelengths_nm.empty()) return wavelengths_nm;
  std::vector<double> wl;
  for (int i = 0; i < 25; ++i) wl.push_back(300.0 + 1200.0 * i / 24.0);
  return wl;
}

// ---- preprocessing ----

std::pair<VecXd, ScalerParams> standardize_fit(const VecXd& values) {
  if (values.size() < 2)
    throw Error("standardize: need at least 2 values to fit");
  ScalerParams p;
  p.mean = values.mean();
  p.std = std::sqrt((values.array() - p.mean).square().mean());
  if (p.std <= 0.0)
    throw Error("standardize: degenerate feature (zero variance)");
  return {(values.array() - p.mean) / p.std, p};
}

VecXd standardize_apply(const VecXd& values, const ScalerParams& params) {
  if (params.std <= 0.0) throw Error("standardize: bad scaler params");
  return (values.array() - params.mean) / params.std;
}

VecXd unstandardize(const VecXd& scaled, const ScalerParams& params) {
  return scaled.array() * params.std + params.mean;
}

std::vector<double> one_hot(const std::string& material) {
  const auto& order = one_hot_order();
  std::vector<double> v(order.size(), 0.0);
  for (size_t i = 0; i < order.size(); ++i)
    if (order[i] == material) {
      v[i] = 1.0;
      return v;
    }
  throw Error("one_hot: unknown material '" + material + "'");
}

namespace {

std::vector<SampleRecord> impute_impl(std::vector<SampleRecord> records,
                                      bool strict) {
  std::map<std::pair<std::string, double>, std::vector<size_t>> series;
  for (size_t i = 0; i < records.size(); ++i)
    series[{records[i].material, records[i].thickness_nm}].push_back(i);

  // neighbors are the originally valid records, never freshly imputed ones
  std::vector<char> was_valid(records.size());
  for (size_t i = 0; i < records.size(); ++i) was_valid[i] = records[i].valid;

  for (auto& [key, idx] : series) {
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return records[a].wavelength_nm < records[b].wavelength_nm;
    });
    int n_valid = 0;
    for (size_t i : idx)
      if (was_valid[i]) ++n_valid;
    if (n_valid == static_cast<int>(idx.size())) continue;
    if (n_valid < 2) {
      if (!strict) continue;  // leave the series invalid
      std::ostringstream msg;
      msg << "impute: series " << key.first << "/" << key.second
          << " nm has fewer than 2 valid records";
      throw Error(msg.str());
    }
    for (size_t k = 0; k < idx.size(); ++k) {
      SampleRecord& r = records[idx[k]];
      if (was_valid[idx[k]]) continue;
      const SampleRecord* below = nullptr;
      const SampleRecord* above = nullptr;
      for (size_t b = k; b-- > 0;)
        if (was_valid[idx[b]]) {
          below = &records[idx[b]];
          break;
        }
      for (size_t a = k + 1; a < idx.size(); ++a)
        if (was_valid[idx[a]]) {
          above = &records[idx[a]];
          break;
        }
      auto mean2 = [](double x, double y) { return 0.5 * (x + y); };
      if (below && above) {
        r.absorbed_power = mean2(below->absorbed_power, above->absorbed_power);
        r.absorbed_flux = mean2(below->absorbed_flux, above->absorbed_flux);
      } else if (below) {
        r.absorbed_power = below->absorbed_power;
        r.absorbed_flux = below->absorbed_flux;
      } else {
        r.absorbed_power = above->absorbed_power;
        r.absorbed_flux = above->absorbed_flux;
      }
      r.valid = true;
      r.imputed = true;
    }
  }
  return records;
}

}  // namespace

std::vector<SampleRecord> impute_local_average(std::vector<SampleRecord> records) {
  return impute_impl(std::move(records), true);
}

std::vector<std::vector<int>> split(int n_records,
                                    const std::vector<double>& ratios,
                                    std::uint64_t seed) {
  if (n_records <= 0) throw Error("split: no records");
  double sum = 0.0;
  for (double r : ratios) sum += r;
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split: ratios must sum to 1");

  std::vector<int> order(n_records);
  for (int i = 0; i < n_records; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const size_t k = ratios.size();
  std::vector<int> sizes(k);
  std::vector<std::pair<double, size_t>> frac;
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double exact = ratios[i] * n_records;
    sizes[i] = static_cast<int>(std::floor(exact + 1e-9));
    assigned += sizes[i];
    frac.push_back({exact - sizes[i], i});
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (int r = 0; r < n_records - assigned; ++r) sizes[frac[r % k].second] += 1;

  std::vector<std::vector<int>> parts(k);
  int cursor = 0;
  for (size_t i = 0; i < k; ++i) {
    if (sizes[i] <= 0) throw Error("split: empty partition");
    parts[i].assign(order.begin() + cursor, order.begin() + cursor + sizes[i]);
    cursor += sizes[i];
  }
  return parts;
}

// ---- records csv ----

void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& recs) {
  out << "material,thickness_nm,wavelength_nm,absorbed_power,absorbed_flux,"
         "map_path,valid,imputed\n";
  for (const auto& r : recs) {
    out << r.material << ',' << io::format_full(r.thickness_nm) << ','
        << io::format_full(r.wavelength_nm) << ','
        << io::format_full(r.absorbed_power) << ','
        << io::format_full(r.absorbed_flux) << ',' << r.map_path << ','
        << (r.valid ? 1 : 0) << ',' << (r.imputed ? 1 : 0) << "\n";
  }
}

std::vector<SampleRecord> read_records_csv(std::istream& in) {
  std::vector<SampleRecord> recs;
  std::string line;
  if (!std::getline(in, line)) throw Error("records csv: empty stream");
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (cells.size() != 8)
      throw Error("records csv: expected 8 columns at line " +
                  std::to_string(lineno));
    SampleRecord r;
    try {
      r.material = cells[0];
      r.thickness_nm = std::stod(cells[1]);
      r.wavelength_nm = std::stod(cells[2]);
      r.absorbed_power = std::stod(cells[3]);
      r.absorbed_flux = std::stod(cells[4]);
      r.map_path = cells[5];
      r.valid = std::stoi(cells[6]) != 0;
      r.imputed = std::stoi(cells[7]) != 0;
    } catch (const Error&) {
      throw;
    } catch (...) {
      throw Error("records csv: bad value at line " + std::to_string(lineno));
    }
    recs.push_back(std::move(r));
  }
  return recs;
}

void write_records_csv_file(const fs::path& path,
                            const std::vector<SampleRecord>& recs) {
  std::ostringstream ss;
  write_records_csv(ss, recs);
  io::write_file(path, ss.str());
}

std::vector<SampleRecord> read_records_csv_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  return read_records_csv(f);
}

// ---- sweep ----

namespace {

std::string engine_name(Engine e) { return e == Engine::tmm ? "tmm" : "fdtd"; }
std::string profile_name(Profile p) {
  return p == Profile::desk ? "desk" : "paper";
}

std::string case_key(const SweepPlan& plan, const std::string& material,
                     double thickness, const std::string& materials_json) {
  std::ostringstream ss;
  ss << material << '|' << io::format_full(thickness) << '|'
     << engine_name(plan.engine) << '|' << profile_name(plan.profile);
  for (double wl : plan.wavelengths_or_default())
    ss << '|' << io::format_full(wl);
  ss << '|' << io::hex64(io::fnv1a64(materials_json));
  return io::hex64(io::fnv1a64(ss.str()));
}

struct CaseResult {
  std::vector<SampleRecord> records;
  CaseInfo info;
};

CaseResult run_case(const SweepPlan& plan, const std::string& material,
                    double thickness, const fs::path& out_dir,
                    const materials::MaterialSet& mats,
                    fdtd::NormalizationCache* cache) {
  CaseResult out;
  out.info.material = material;
  out.info.thickness_nm = thickness;
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<double> wavelengths = plan.wavelengths_or_default();
  const auto stack = materials::paper_stack(material, thickness);

  try {
    if (plan.engine == Engine::tmm) {
      auto spectrum = tmm::spectrum(stack, mats, wavelengths);
      for (const auto& p : spectrum) {
        SampleRecord r;
        r.material = material;
        r.thickness_nm = thickness;
        r.wavelength_nm = p.wavelength_nm;
        r.absorbed_power = p.A;
        r.absorbed_flux = p.per_layer_A.size() > 1 ? p.per_layer_A[1] : 0.0;
        out.records.push_back(std::move(r));
      }
    } else {
      fdtd::SimConfig cfg = plan.profile == Profile::desk ? fdtd::desk_config()
                                                          : fdtd::paper_config();
      std::vector<double> in_band;
      for (double wl : wavelengths)
        if (wl >= cfg.source_band_min_nm - 1e-9 &&
            wl <= cfg.source_band_max_nm + 1e-9)
          in_band.push_back(wl);
      if (in_band.empty())
        throw Error("no plan wavelength falls inside the engine band");
      cfg.monitor_wavelengths_nm = in_band;
      auto sim = fdtd::build_simulation(stack, mats, cfg);
      auto res = fdtd::run(sim, cache);
      out.info.warnings = res.warnings;

      std::map<double, size_t> by_wl;
      for (size_t i = 0; i < res.wavelengths_nm.size(); ++i)
        by_wl[res.wavelengths_nm[i]] = i;

      for (double wl : wavelengths) {
        SampleRecord r;
        r.material = material;
        r.thickness_nm = thickness;
        r.wavelength_nm = wl;
        auto it = by_wl.find(wl);
        if (it == by_wl.end()) {
          r.valid = false;  // outside the engine band; imputed downstream
        } else {
          const size_t w = it->second;
          r.absorbed_power = res.absorbed_power[w];
          r.absorbed_flux = res.absorbed_flux[w];
          auto map = fdtd::absorbed_power_map(sim, wl);
          char name[128];
          std::snprintf(name, sizeof name, "maps/%s_%gnm_%gnm.csv",
                        material.c_str(), thickness, wl);
          io::write_grid_csv_file(out_dir / name, map.w_abs);
          r.map_path = name;
        }
        out.records.push_back(std::move(r));
      }
    }
    out.info.ok = true;
  } catch (const std::exception& e) {
    out.info.ok = false;
    out.info.warnings.push_back(std::string("case failed: ") + e.what());
    out.records.clear();
    for (double wl : wavelengths) {
      SampleRecord r;
      r.material = material;
      r.thickness_nm = thickness;
      r.wavelength_nm = wl;
      r.valid = false;
      out.records.push_back(std::move(r));
    }
  }
  out.info.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

nlohmann::json manifest_to_json(const Manifest& m,
                                const std::string& materials_json) {
  nlohmann::json j;
  j["plan"] = {{"materials", m.plan.materials},
               {"thicknesses_nm", m.plan.thicknesses_nm},
               {"wavelengths_nm", m.plan.wavelengths_or_default()},
               {"engine", engine_name(m.plan.engine)},
               {"profile", profile_name(m.plan.profile)}};
  j["one_hot_order"] = m.one_hot_order;
  j["seed"] = m.seed;
  j["records"] = m.records_path;
  j["wall_seconds"] = m.wall_seconds;
  j["engine_invocations"] = m.engine_invocations;
  j["scalers"] = {{"thickness_nm",
                   {{"mean", m.thickness_scaler.mean},
                    {"std", m.thickness_scaler.std}}},
                  {"wavelength_nm",
                   {{"mean", m.wavelength_scaler.mean},
                    {"std", m.wavelength_scaler.std}}}};
  j["materials_hash"] = io::hex64(io::fnv1a64(materials_json));
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : m.cases)
    cases.push_back({{"material", c.material},
                     {"thickness_nm", c.thickness_nm},
                     {"key", c.key},
                     {"ok", c.ok},
                     {"skipped", c.skipped},
                     {"wall_seconds", c.wall_seconds},
                     {"warnings", c.warnings}});
  j["cases"] = cases;
  return j;
}

}  // namespace

Manifest run_sweep(const SweepPlan& plan, const fs::path& out_dir, int workers,
                   const materials::MaterialSet& mats,
                   fdtd::NormalizationCache* cache, std::uint64_t seed) {
  plan.validate();
  fs::create_directories(out_dir);
  const auto t_start = std::chrono::steady_clock::now();
  const std::string materials_json = mats.to_json();

  // previously completed case keys (for idempotent reruns)
  std::map<std::string, bool> done;
  std::vector<SampleRecord> old_records;
  const fs::path manifest_path = out_dir / "manifest.json";
  if (fs::exists(manifest_path) && fs::exists(out_dir / "records.csv")) {
    try {
      const auto j = nlohmann::json::parse(io::read_file(manifest_path));
      for (const auto& c : j.value("cases", nlohmann::json::array()))
        if (c.value("ok", false)) done[c.value("key", "")] = true;
      old_records = read_records_csv_file(out_dir / "records.csv");
    } catch (...) {
      done.clear();  // unreadable previous state; redo everything
    }
  }

  struct Job {
    std::string material;
    double thickness;
    std::string key;
    bool skip;
  };
  std::vector<Job> jobs;
  for (const auto& m : plan.materials)
    for (double t : plan.thicknesses_nm) {
      Job job{m, t, case_key(plan, m, t, materials_json), false};
      job.skip = done.count(job.key) > 0;
      jobs.push_back(std::move(job));
    }

  Manifest manifest;
  manifest.plan = plan;
  manifest.one_hot_order = one_hot_order();
  manifest.seed = seed;
  manifest.records_path = "records.csv";
  manifest.cases.resize(jobs.size());

  std::vector<std::vector<SampleRecord>> case_records(jobs.size());
  std::mutex mu;
  size_t next = 0;
  long invocations = 0;

  auto worker = [&]() {
    for (;;) {
      size_t k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= jobs.size()) return;
        k = next++;
      }
      const Job& job = jobs[k];
      if (job.skip) {
        CaseInfo info;
        info.material = job.material;
        info.thickness_nm = job.thickness;
        info.key = job.key;
        info.ok = true;
        info.skipped = true;
        std::vector<SampleRecord> recs;
        for (const auto& r : old_records)
          if (r.material == job.material &&
              r.thickness_nm == job.thickness)
            recs.push_back(r);
        {
          std::lock_guard<std::mutex> lock(mu);
          manifest.cases[k] = info;
          case_records[k] = std::move(recs);
        }
        continue;
      }
      CaseResult res =
          run_case(plan, job.material, job.thickness, out_dir, mats, cache);
      res.info.key = job.key;
      {
        std::lock_guard<std::mutex> lock(mu);
        manifest.cases[k] = res.info;
        case_records[k] = std::move(res.records);
        invocations += 1;
      }
    }
  };

  const int n_workers = std::max(1, workers);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  bool any_ok = false;
  for (const auto& c : manifest.cases) any_ok = any_ok || c.ok;
  if (!any_ok) throw Error("run_sweep: every case failed");

  std::vector<SampleRecord> records;
  for (auto& recs : case_records)
    records.insert(records.end(), recs.begin(), recs.end());
  std::sort(records.begin(), records.end(),
            [](const SampleRecord& a, const SampleRecord& b) {
              if (a.material != b.material) return a.material < b.material;
              if (a.thickness_nm != b.thickness_nm)
                return a.thickness_nm < b.thickness_nm;
              return a.wavelength_nm < b.wavelength_nm;
            });
  records = impute_impl(std::move(records), false);

  // data-property scalers over the records; degenerate single-value columns
  // fall back to an identity scale
  auto lenient_fit = [](const VecXd& v) {
    ScalerParams p;
    p.mean = v.mean();
    p.std = std::sqrt((v.array() - p.mean).square().mean());
    if (p.std <= 0.0) p.std = 1.0;
    return p;
  };
  VecXd th(records.size()), wl(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    th[static_cast<Eigen::Index>(i)] = records[i].thickness_nm;
    wl[static_cast<Eigen::Index>(i)] = records[i].wavelength_nm;
  }
  manifest.thickness_scaler = lenient_fit(th);
  manifest.wavelength_scaler = lenient_fit(wl);

  manifest.engine_invocations = invocations;
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  write_records_csv_file(out_dir / "records.csv", records);
  io::write_file(manifest_path, manifest_to_json(manifest, materials_json).dump(2));
  return manifest;
}

}  // namespace plasmo::dataset
