#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "plasmo/dataset.hpp"
#include "plasmo/io.hpp"
#include "plasmo/materials.hpp"

using namespace plasmo;
using namespace plasmo::dataset;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("plasmo_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SampleRecord rec(const std::string& m, double t, double wl, double power,
                 bool valid = true) {
  SampleRecord r;
  r.material = m;
  r.thickness_nm = t;
  r.wavelength_nm = wl;
  r.absorbed_power = power;
  r.absorbed_flux = power * 0.5;
  r.valid = valid;
  return r;
}

}  // namespace

TEST_CASE("standardize matches hand arithmetic") {
  VecXd v(3);
  v << 1.0, 2.0, 3.0;
  auto [z, p] = standardize_fit(v);
  CHECK(p.mean == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  CHECK(z[0] == doctest::Approx(-1.224744871).epsilon(1e-9));
  CHECK(z[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(z[2] == doctest::Approx(1.224744871).epsilon(1e-9));

  VecXd mu(1);
  mu << 2.0;
  CHECK(standardize_apply(mu, p)[0] == doctest::Approx(0.0).epsilon(1e-15));

  const VecXd back = unstandardize(z, p);
  for (int i = 0; i < 3; ++i)
    CHECK(back[i] == doctest::Approx(v[i]).epsilon(1e-12));
}

TEST_CASE("standardize rejects degenerate columns") {
  VecXd v(3);
  v << 5.0, 5.0, 5.0;
  CHECK_THROWS_AS(standardize_fit(v), Error);
  VecXd one(1);
  one << 1.0;
  CHECK_THROWS_AS(standardize_fit(one), Error);
}

TEST_CASE("one-hot encoding is fixed to [Au, Ag]") {
  CHECK(one_hot("Au") == std::vector<double>{1.0, 0.0});
  CHECK(one_hot("Ag") == std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(one_hot("Cu"), Error);
  for (const auto& m : {"Au", "Ag"}) {
    double sum = 0.0;
    for (double v : one_hot(m)) sum += v;
    CHECK(sum == 1.0);
  }
}

TEST_CASE("imputation fills gaps from wavelength neighbors") {
  std::vector<SampleRecord> recs = {
      rec("Au", 20, 400, 1.0),
      rec("Au", 20, 500, 0.0, false),
      rec("Au", 20, 600, 3.0),
  };
  auto out = impute_local_average(recs);
  CHECK(out[1].absorbed_power == doctest::Approx(2.0));
  CHECK(out[1].absorbed_flux == doctest::Approx(1.0));
  CHECK(out[1].imputed);
  CHECK(out[1].valid);
  CHECK_FALSE(out[0].imputed);
  CHECK(out[0].absorbed_power == 1.0);
}

TEST_CASE("imputation is single-sided at the edges") {
  std::vector<SampleRecord> recs = {
      rec("Ag", 30, 400, 0.0, false),
      rec("Ag", 30, 500, 4.0),
      rec("Ag", 30, 600, 6.0),
  };
  auto out = impute_local_average(recs);
  CHECK(out[0].absorbed_power == doctest::Approx(4.0));
  CHECK(out[0].imputed);
}

TEST_CASE("imputation with no gaps is the identity") {
  std::vector<SampleRecord> recs = {rec("Au", 20, 400, 1.0),
                                    rec("Au", 20, 500, 2.0)};
  auto out = impute_local_average(recs);
  REQUIRE(out.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(out[i].absorbed_power == recs[i].absorbed_power);
    CHECK_FALSE(out[i].imputed);
  }
}

TEST_CASE("imputation needs two valid records per series") {
  std::vector<SampleRecord> recs = {rec("Au", 20, 400, 1.0),
                                    rec("Au", 20, 500, 0.0, false),
                                    rec("Au", 20, 600, 0.0, false)};
  CHECK_THROWS_AS(impute_local_average(recs), Error);
}

TEST_CASE("split sizes, determinism and exhaustiveness") {
  auto parts = split(100, {0.8, 0.2}, 1);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 80);
  CHECK(parts[1].size() == 20);
  std::set<int> all;
  for (const auto& p : parts) all.insert(p.begin(), p.end());
  CHECK(all.size() == 100);

  auto again = split(100, {0.8, 0.2}, 1);
  CHECK(parts == again);
  auto other = split(100, {0.8, 0.2}, 2);
  CHECK(parts != other);

  auto three = split(20, {0.7, 0.15, 0.15}, 5);
  CHECK(three[0].size() == 14);
  CHECK(three[1].size() == 3);
  CHECK(three[2].size() == 3);
}

TEST_CASE("split validates ratios and emptiness") {
  CHECK_THROWS_AS(split(10, {0.5, 0.4}, 1), Error);
  CHECK_THROWS_AS(split(0, {1.0}, 1), Error);
  CHECK_THROWS_AS(split(3, {0.5, 0.5, 0.0}, 1), Error);  // empty partition
}

TEST_CASE("records csv round trip and format") {
  std::vector<SampleRecord> recs = {rec("Au", 20, 400, 0.25),
                                    rec("Ag", 30, 500, 0.5)};
  recs[1].map_path = "maps/Ag_30nm_500nm.csv";
  recs[1].imputed = true;
  std::ostringstream out;
  write_records_csv(out, recs);
  const std::string text = out.str();
  CHECK(text.rfind("material,thickness_nm,wavelength_nm,absorbed_power,"
                   "absorbed_flux,map_path,valid,imputed\n",
                   0) == 0);
  std::istringstream in(text);
  auto back = read_records_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].material == "Au");
  CHECK(back[1].map_path == "maps/Ag_30nm_500nm.csv");
  CHECK(back[1].imputed);
  CHECK(back[0].absorbed_power == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("plan validation") {
  SweepPlan p;
  p.materials = {"Cu"};
  CHECK_THROWS_AS(p.validate(), Error);
  p = SweepPlan{};
  p.thicknesses_nm = {2.0};
  CHECK_THROWS_AS(p.validate(), Error);
  p = SweepPlan{};
  CHECK(p.wavelengths_or_default().size() == 25);
  CHECK(p.wavelengths_or_default().front() == 300.0);
  CHECK(p.wavelengths_or_default().back() == 1500.0);
}

TEST_CASE("tmm sweep: counts, idempotence, manifest") {
  const fs::path dir = temp_dir("sweep");
  SweepPlan plan;  // defaults: Au+Ag x 5 thicknesses x 25 wavelengths
  const auto& mats = materials::builtin_materials();

  const auto manifest = run_sweep(plan, dir, 2, mats, nullptr, 7);
  CHECK(manifest.cases.size() == 10);
  CHECK(manifest.engine_invocations == 10);
  auto records = read_records_csv_file(dir / "records.csv");
  CHECK(records.size() == 250);
  for (const auto& r : records) {
    CHECK(r.valid);
    CHECK(r.map_path.empty());  // tmm emits no maps
  }

  // rerun: all cases skipped, zero engine invocations
  const auto manifest2 = run_sweep(plan, dir, 2, mats, nullptr, 7);
  CHECK(manifest2.engine_invocations == 0);
  for (const auto& c : manifest2.cases) CHECK(c.skipped);
  auto records2 = read_records_csv_file(dir / "records.csv");
  CHECK(records2.size() == 250);

  // single-case plan: 25 records
  const fs::path dir2 = temp_dir("sweep1");
  SweepPlan small;
  small.materials = {"Au"};
  small.thicknesses_nm = {20.0};
  const auto m3 = run_sweep(small, dir2, 1, mats);
  auto recs3 = read_records_csv_file(dir2 / "records.csv");
  CHECK(recs3.size() == 25);
  CHECK_FALSE(fs::exists(dir2 / "maps"));

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("sweep records are sorted and scalers recorded") {
  const fs::path dir = temp_dir("sweep_sorted");
  SweepPlan plan;
  plan.materials = {"Au"};
  plan.thicknesses_nm = {30.0, 10.0};
  const auto manifest = run_sweep(plan, dir, 1, materials::builtin_materials());
  auto records = read_records_csv_file(dir / "records.csv");
  REQUIRE(records.size() == 50);
  CHECK(records[0].thickness_nm == 10.0);
  CHECK(records[25].thickness_nm == 30.0);
  for (int i = 1; i < 25; ++i)
    CHECK(records[i].wavelength_nm > records[i - 1].wavelength_nm);
  CHECK(manifest.thickness_scaler.std > 0.0);
  CHECK(manifest.wavelength_scaler.std > 0.0);
  CHECK(manifest.one_hot_order == std::vector<std::string>{"Au", "Ag"});
  fs::remove_all(dir);
}
