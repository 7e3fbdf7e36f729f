#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plasmo/fdtd.hpp"
#include "plasmo/materials.hpp"
#include "plasmo/types.hpp"

namespace plasmo::dataset {

enum class Engine { tmm, fdtd };
enum class Profile { desk, paper };

struct SweepPlan {
  std::vector<std::string> materials = {"Au", "Ag"};
  std::vector<double> thicknesses_nm = {10, 20, 30, 40, 50};
  std::vector<double> wavelengths_nm;  // empty -> 25 points over 300-1500
  Engine engine = Engine::tmm;
  Profile profile = Profile::desk;

  void validate() const;
  std::vector<double> wavelengths_or_default() const;
};

struct SampleRecord {
  std::string material;
  double thickness_nm = 0.0;
  double wavelength_nm = 0.0;
  double absorbed_power = 0.0;
  double absorbed_flux = 0.0;
  std::string map_path;  // empty when the engine emits no map
  bool valid = true;
  bool imputed = false;
};

struct ScalerParams {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation
};

struct CaseInfo {
  std::string material;
  double thickness_nm = 0.0;
  std::string key;  // content hash of (case, plan, materials)
  bool ok = false;
  bool skipped = false;  // already complete on rerun
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct Manifest {
  SweepPlan plan;
  std::vector<CaseInfo> cases;
  std::vector<std::string> one_hot_order;  // fixed [Au, Ag]
  ScalerParams thickness_scaler, wavelength_scaler;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  long engine_invocations = 0;
  std::string records_path;
};

// executes |materials| x |thicknesses| cases, writes records.csv, maps/ and
// manifest.json under out_dir; completed cases are skipped on rerun
Manifest run_sweep(const SweepPlan& plan, const std::filesystem::path& out_dir,
                   int workers, const materials::MaterialSet& mats,
                   fdtd::NormalizationCache* cache = nullptr,
                   std::uint64_t seed = 0);

// z = (x - mean)/std; fit mode computes population statistics
std::pair<VecXd, ScalerParams> standardize_fit(const VecXd& values);
VecXd standardize_apply(const VecXd& values, const ScalerParams& params);
VecXd unstandardize(const VecXd& scaled, const ScalerParams& params);

inline const std::vector<std::string>& one_hot_order() {
  static const std::vector<std::string> order = {"Au", "Ag"};
  return order;
}
// Au -> [1,0], Ag -> [0,1]
std::vector<double> one_hot(const std::string& material);

// replaces invalid targets by the mean of the nearest valid neighbors in
// wavelength within each (material, thickness) series; single-sided at edges
std::vector<SampleRecord> impute_local_average(std::vector<SampleRecord> records);

// deterministic shuffle + contiguous partition; floor sizes, remainder
// distributed by largest fractional part (ties to the earlier partition)
std::vector<std::vector<int>> split(int n_records,
                                    const std::vector<double>& ratios,
                                    std::uint64_t seed);

void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& recs);
std::vector<SampleRecord> read_records_csv(std::istream& in);
void write_records_csv_file(const std::filesystem::path& path,
                            const std::vector<SampleRecord>& recs);
std::vector<SampleRecord> read_records_csv_file(const std::filesystem::path& path);

}  // namespace plasmo::dataset
