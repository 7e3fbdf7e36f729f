#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plasmo/cli.hpp"
#include "plasmo/dataset.hpp"
#include "plasmo/io.hpp"

using namespace plasmo;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("plasmo_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(std::initializer_list<std::string> args) {
  return cli::dispatch(std::vector<std::string>(args));
}

size_t count_substr(const std::string& text, const std::string& needle) {
  size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++n;
    ++pos;
  }
  return n;
}

// a small synthetic records file with a smooth target surface
fs::path synth_records(const fs::path& dir, int n_wavelengths = 16) {
  std::vector<dataset::SampleRecord> recs;
  for (const auto& m : {"Au", "Ag"}) {
    for (double t : {10.0, 20.0, 30.0, 40.0}) {
      for (int i = 0; i < n_wavelengths; ++i) {
        const double wl = 400.0 + 800.0 * i / (n_wavelengths - 1);
        dataset::SampleRecord r;
        r.material = m;
        r.thickness_nm = t;
        r.wavelength_nm = wl;
        const double u = (wl - 600.0 - 2.0 * t) / 150.0;
        r.absorbed_power =
            (m[1] == 'u' ? 0.5 : 0.35) * std::exp(-u * u) + 0.01 * t / 50.0;
        r.absorbed_flux = 0.8 * r.absorbed_power;
        recs.push_back(r);
      }
    }
  }
  const fs::path path = dir / "records.csv";
  dataset::write_records_csv_file(path, recs);
  return path;
}

}  // namespace

TEST_CASE("argument errors exit with code 2 and name the problem") {
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"simulate", "--material", "au", "--thickness-nm", "-5"}) == 2);
  CHECK(run({"tmm", "--material", "au", "--thickness-nm", "20",
             "--unknown-flag"}) == 2);
  CHECK(run({}) == 2);
}

TEST_CASE("tmm subcommand writes the spectrum and metadata deterministically") {
  const fs::path a = temp_dir("tmm_a"), b = temp_dir("tmm_b");
  CHECK(run({"tmm", "--material", "au", "--thickness-nm", "20", "--out",
             a.string()}) == 0);
  CHECK(run({"tmm", "--material", "au", "--thickness-nm", "20", "--out",
             b.string()}) == 0);
  REQUIRE(fs::exists(a / "tmm_spectrum.csv"));
  REQUIRE(fs::exists(a / "run_meta.json"));
  CHECK(io::read_file(a / "tmm_spectrum.csv") ==
        io::read_file(b / "tmm_spectrum.csv"));
  CHECK(io::read_file(a / "run_meta.json") == io::read_file(b / "run_meta.json"));
  const std::string csv = io::read_file(a / "tmm_spectrum.csv");
  CHECK(csv.rfind("wavelength_nm,R,T,A,", 0) == 0);
  CHECK(count_substr(csv, "\n") == 602);  // header + 601 points
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("simulate runs a small configured cell end to end") {
  const fs::path dir = temp_dir("simulate");
  const fs::path cfg = dir / "config.json";
  io::write_file(cfg,
                 "{\"cell_size_um\":[3.0,0.2],\"resolution\":40,"
                 "\"source_band_nm\":[500,900],"
                 "\"monitor_wavelengths_nm\":[550,700,850]}");
  CHECK(run({"simulate", "--material", "au", "--thickness-nm", "20", "--out",
             (dir / "out").string(), "--config", cfg.string()}) == 0);
  CHECK(fs::exists(dir / "out" / "spectrum.csv"));
  CHECK(fs::exists(dir / "out" / "maps/map_700nm.csv"));
  CHECK(fs::exists(dir / "out" / "run_meta.json"));
  const std::string csv = io::read_file(dir / "out" / "spectrum.csv");
  CHECK(csv.rfind("wavelength_nm,absorbed_power,absorbed_flux,R,T\n", 0) == 0);
  CHECK(count_substr(csv, "\n") == 4);
  fs::remove_all(dir);
}

TEST_CASE("sweep with the default plan yields 250 records") {
  const fs::path dir = temp_dir("sweep");
  CHECK(run({"sweep", "--engine", "tmm", "--out", dir.string()}) == 0);
  const std::string csv = io::read_file(dir / "records.csv");
  CHECK(count_substr(csv, "\n") == 251);  // header + 2 x 5 x 25
  CHECK(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("training, prediction, and attribution round trip via the cli") {
  const fs::path dir = temp_dir("pipeline");
  const fs::path records = synth_records(dir);

  CHECK(run({"train-mlp", "--records", records.string(), "--out",
             (dir / "mlp").string(), "--seed", "3"}) == 0);
  REQUIRE(fs::exists(dir / "mlp" / "mlp.plsm"));
  REQUIRE(fs::exists(dir / "mlp" / "train_report.csv"));
  REQUIRE(fs::exists(dir / "mlp" / "metrics.json"));

  CHECK(run({"predict", "--model", (dir / "mlp" / "mlp.plsm").string(),
             "--material", "au", "--thickness-nm", "25", "--wavelength-nm",
             "640", "--out", (dir / "pred").string()}) == 0);
  REQUIRE(fs::exists(dir / "pred" / "prediction.json"));

  CHECK(run({"explain", "--model", (dir / "mlp" / "mlp.plsm").string(),
             "--records", records.string(), "--out",
             (dir / "shap").string(), "--seed", "3"}) == 0);
  REQUIRE(fs::exists(dir / "shap" / "explanations.csv"));
  REQUIRE(fs::exists(dir / "shap" / "summary.csv"));
  const std::string summary = io::read_file(dir / "shap" / "summary.csv");
  CHECK(count_substr(summary, "\n") == 4);  // header + 3 groups

  // figures from the pipeline artifacts
  CHECK(run({"plot", "--kind", "spectrum", "--in", records.string(),
             "--out-file", (dir / "spectrum.svg").string()}) == 0);
  CHECK(run({"plot", "--kind", "losscurve", "--in",
             (dir / "mlp" / "train_report.csv").string(), "--out-file",
             (dir / "loss.svg").string()}) == 0);
  CHECK(run({"plot", "--kind", "shap-summary", "--in",
             (dir / "shap" / "summary.csv").string(), "--out-file",
             (dir / "shap.svg").string()}) == 0);
  CHECK(fs::exists(dir / "spectrum.svg"));
  CHECK(fs::exists(dir / "loss.svg"));
  CHECK(fs::exists(dir / "shap.svg"));
  fs::remove_all(dir);
}

TEST_CASE("plot: one-point spectrum yields exactly one marker") {
  const fs::path dir = temp_dir("plot1");
  std::vector<dataset::SampleRecord> recs;
  dataset::SampleRecord r;
  r.material = "Au";
  r.thickness_nm = 20;
  r.wavelength_nm = 600;
  r.absorbed_power = 0.4;
  recs.push_back(r);
  dataset::write_records_csv_file(dir / "one.csv", recs);
  CHECK(run({"plot", "--kind", "spectrum", "--in", (dir / "one.csv").string(),
             "--out-file", (dir / "one.svg").string()}) == 0);
  const std::string svg = io::read_file(dir / "one.svg");
  CHECK(count_substr(svg, "<circle") == 1);
  fs::remove_all(dir);
}

TEST_CASE("plot: empty record list is an error and writes nothing") {
  const fs::path dir = temp_dir("plot_empty");
  dataset::write_records_csv_file(dir / "empty.csv", {});
  CHECK(run({"plot", "--kind", "spectrum", "--in",
             (dir / "empty.csv").string(), "--out-file",
             (dir / "empty.svg").string()}) == 1);
  CHECK_FALSE(fs::exists(dir / "empty.svg"));
  fs::remove_all(dir);
}

TEST_CASE("plot: constant map renders mid-gray with a sidecar") {
  const fs::path dir = temp_dir("plot_map");
  GridXd grid = GridXd::Constant(10, 8, 3.25);
  io::write_grid_csv_file(dir / "map.csv", grid);
  CHECK(run({"plot", "--kind", "map", "--in", (dir / "map.csv").string(),
             "--out-file", (dir / "map.pgm").string()}) == 0);
  const std::string pgm = io::read_file(dir / "map.pgm");
  CHECK(pgm.rfind("P5\n8 10\n255\n", 0) == 0);
  for (size_t i = pgm.find("255\n") + 4; i < pgm.size(); ++i)
    CHECK(static_cast<unsigned char>(pgm[i]) == 128);
  const std::string sidecar = io::read_file(dir / "map.pgm.txt");
  CHECK(sidecar.find("mid-gray") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("plot output is byte-deterministic") {
  const fs::path dir = temp_dir("plot_det");
  const fs::path records = synth_records(dir, 8);
  CHECK(run({"plot", "--kind", "spectrum", "--in", records.string(),
             "--out-file", (dir / "a.svg").string()}) == 0);
  CHECK(run({"plot", "--kind", "spectrum", "--in", records.string(),
             "--out-file", (dir / "b.svg").string()}) == 0);
  CHECK(io::read_file(dir / "a.svg") == io::read_file(dir / "b.svg"));
  fs::remove_all(dir);
}

TEST_CASE("cnn training works on synthetic map records") {
  const fs::path dir = temp_dir("cnn");
  std::vector<dataset::SampleRecord> recs;
  int idx = 0;
  for (const auto& m : {"Au", "Ag"}) {
    for (double t : {10.0, 20.0, 30.0, 40.0, 50.0}) {
      for (double wl : {500.0, 700.0, 900.0}) {
        dataset::SampleRecord r;
        r.material = m;
        r.thickness_nm = t;
        r.wavelength_nm = wl;
        r.absorbed_power = 0.3;
        r.absorbed_flux = 0.2;
        char name[64];
        std::snprintf(name, sizeof name, "maps/m%d.csv", idx++);
        r.map_path = name;
        GridXd g = GridXd::Zero(20, 12);
        const int row = static_cast<int>(t / 5.0);
        g.row(row).setConstant(wl / 1000.0);
        io::write_grid_csv_file(dir / name, g);
        recs.push_back(r);
      }
    }
  }
  dataset::write_records_csv_file(dir / "records.csv", recs);
  CHECK(run({"train-cnn", "--records", (dir / "records.csv").string(),
             "--out", (dir / "cnn").string(), "--seed", "2"}) == 0);
  REQUIRE(fs::exists(dir / "cnn" / "cnn.plsm"));

  CHECK(run({"predict", "--model", (dir / "cnn" / "cnn.plsm").string(),
             "--material", "ag", "--thickness-nm", "25", "--wavelength-nm",
             "600", "--out", (dir / "map_pred").string()}) == 0);
  REQUIRE(fs::exists(dir / "map_pred" / "predicted_map.csv"));
  const GridXd pred =
      io::read_grid_csv_file(dir / "map_pred" / "predicted_map.csv");
  CHECK(pred.rows() == 64);
  CHECK(pred.cols() == 48);
  fs::remove_all(dir);
}
