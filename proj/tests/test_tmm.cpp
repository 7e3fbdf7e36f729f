#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "plasmo/materials.hpp"
#include "plasmo/tmm.hpp"
#include "plasmo/units.hpp"

using namespace plasmo;
using namespace plasmo::materials;
using namespace plasmo::tmm;

namespace {

MaterialSet test_set() {
  MaterialSet s;
  s.add("air", ConstantIndexModel{1.0});
  s.add("glass", ConstantIndexModel{1.5});
  s.add("n2", ConstantIndexModel{2.0});
  s.add("SiO2", ConstantIndexModel{1.45});
  FitOptions au{2, 380, 1500, 0.5, 400};
  s.add("Au", fit_drude_lorentz(gold_table(), au).model);
  return s;
}

// independent oracle for a single film: Airy multiple-reflection summation
void airy_film(Complex n_film, double d_nm, double wl_nm, double* R,
               double* T) {
  const Complex n0(1.0, 0.0);
  const Complex r01 = (n0 - n_film) / (n0 + n_film);
  const Complex t01 = 2.0 * n0 / (n0 + n_film);
  const Complex r10 = -r01;
  const Complex t10 = 2.0 * n_film / (n0 + n_film);
  const Complex delta = 2.0 * units::pi * n_film * d_nm / wl_nm;
  const Complex ph = std::exp(Complex(0, 1) * delta);
  const Complex denom = 1.0 - r10 * r10 * ph * ph;
  const Complex r = r01 + t01 * t10 * r10 * ph * ph / denom;
  const Complex t = t01 * t10 * ph / denom;
  *R = std::norm(r);
  *T = std::norm(t);
}

// random mix of lossless and lossy stacks with bounded optical depth
StackSpec random_stack(MaterialSet& mats, std::mt19937_64& rng, bool lossless) {
  std::uniform_int_distribution<int> n_layers(1, 6);
  std::uniform_real_distribution<double> idx(1.0, 3.0);
  std::uniform_real_distribution<double> thick(5.0, 900.0);
  std::uniform_real_distribution<double> metal_thick(5.0, 120.0);
  std::uniform_real_distribution<double> pick(0.0, 1.0);

  StackSpec s;
  s.ambient = "air";
  s.substrate = pick(rng) < 0.5 ? "air" : "glass";
  const int n = n_layers(rng);
  for (int k = 0; k < n; ++k) {
    if (lossless || pick(rng) < 0.6) {
      const double nv = idx(rng);
      std::string name = "nx" + std::to_string(rng() % 100000);
      mats.add(name, ConstantIndexModel{nv});
      s.layers.push_back({name, thick(rng)});
    } else {
      s.layers.push_back({"Au", metal_thick(rng)});
    }
  }
  return s;
}

}  // namespace

TEST_CASE("zero-thickness layer matrix is the identity") {
  const auto& mats = test_set();
  const Eigen::Matrix2cd M = layer_matrix(mats.get("n2"), 0.0, 600.0);
  CHECK((M - Eigen::Matrix2cd::Identity()).norm() < 1e-15);
}

TEST_CASE("layer matrices are unimodular") {
  // det = cos^2 + sin^2 = 1 exactly; in floating point the cancellation
  // degrades as exp(2 Im delta), so keep the optical depth moderate
  const auto& mats = test_set();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> thick(1.0, 900.0);
  std::uniform_real_distribution<double> metal_thick(1.0, 60.0);
  std::uniform_real_distribution<double> wl(300.0, 1500.0);
  for (int k = 0; k < 50; ++k) {
    for (const char* m : {"n2", "glass"}) {
      const Eigen::Matrix2cd M = layer_matrix(mats.get(m), thick(rng), wl(rng));
      CHECK(std::abs(M.determinant() - Complex(1, 0)) < 1e-12);
    }
    const Eigen::Matrix2cd M =
        layer_matrix(mats.get("Au"), metal_thick(rng), wl(rng));
    const double growth = std::norm(M(0, 0)) + std::norm(M(0, 1) * M(1, 0));
    CHECK(std::abs(M.determinant() - Complex(1, 0)) <
          1e-13 * std::max(1.0, growth));
  }
}

TEST_CASE("quarter-wave layer matrix") {
  const auto& mats = test_set();
  const double wl = 800.0;
  const Eigen::Matrix2cd M = layer_matrix(mats.get("n2"), wl / 8.0, wl);
  CHECK(std::abs(M(0, 0)) < 1e-12);
  CHECK(std::abs(M(1, 1)) < 1e-12);
  CHECK(std::abs(M(0, 1)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(M(1, 0)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("empty stack in air transmits everything") {
  const auto& mats = test_set();
  StackSpec s;
  s.ambient = "air";
  s.substrate = "air";
  const RtaPoint p = rta(s, mats, 550.0);
  CHECK(p.R == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(p.T == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(p.A) < 1e-14);
}

TEST_CASE("fresnel reflection off a glass half-space") {
  const auto& mats = test_set();
  StackSpec s;
  s.ambient = "air";
  s.substrate = "glass";
  const RtaPoint p = rta(s, mats, 550.0);
  CHECK(p.R == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(p.T == doctest::Approx(0.96).epsilon(1e-12));
  CHECK(std::abs(p.A) < 1e-12);
}

TEST_CASE("single gold film matches the Airy summation") {
  const auto& mats = test_set();
  for (double d : {10.0, 25.0, 60.0}) {
    for (double wl : {400.0, 633.0, 1000.0}) {
      const Index ni = refractive_index(permittivity(mats.get("Au"), wl));
      double R0, T0;
      airy_film(Complex(ni.n, ni.k), d, wl, &R0, &T0);
      StackSpec s;
      s.ambient = "air";
      s.substrate = "air";
      s.layers = {{"Au", d}};
      const RtaPoint p = rta(s, mats, wl);
      CHECK(std::abs(p.R - R0) < 1e-9);
      CHECK(std::abs(p.T - T0) < 1e-9);
    }
  }
}

TEST_CASE("energy conservation over random stacks") {
  MaterialSet mats = test_set();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wl(300.0, 1500.0);
  for (int k = 0; k < 100; ++k) {
    const StackSpec s = random_stack(mats, rng, false);
    for (int j = 0; j < 10; ++j) {
      const RtaPoint p = rta(s, mats, wl(rng));
      CHECK(std::abs(p.R + p.T + p.A - 1.0) < 1e-10);
      double layer_sum = 0.0;
      for (double a : p.per_layer_A) {
        layer_sum += a;
        CHECK(a >= -1e-12);
      }
      CHECK(std::abs(layer_sum - p.A) < 1e-10);
      CHECK(p.R >= -1e-12);
      CHECK(p.T >= -1e-12);
    }
  }
}

TEST_CASE("lossless stacks do not absorb") {
  MaterialSet mats = test_set();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> wl(300.0, 1500.0);
  for (int k = 0; k < 50; ++k) {
    const StackSpec s = random_stack(mats, rng, true);
    const RtaPoint p = rta(s, mats, wl(rng));
    CHECK(std::abs(p.A) < 1e-12);
  }
}

TEST_CASE("transmittance is reciprocal") {
  MaterialSet mats = test_set();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> wl(300.0, 1500.0);
  for (int k = 0; k < 30; ++k) {
    const StackSpec s = random_stack(mats, rng, false);
    StackSpec rev = s;
    std::reverse(rev.layers.begin(), rev.layers.end());
    std::swap(rev.ambient, rev.substrate);
    const double w = wl(rng);
    CHECK(std::abs(rta(s, mats, w).T - rta(rev, mats, w).T) < 1e-10);
  }
}

TEST_CASE("splitting a layer in half changes nothing") {
  const auto& mats = builtin_materials();
  StackSpec one = paper_stack("Au", 30.0);
  StackSpec two = one;
  two.layers[1].thickness_nm = 15.0;
  two.layers.insert(two.layers.begin() + 1, {"Au", 15.0});
  for (double wl : {350.0, 600.0, 900.0, 1400.0}) {
    const RtaPoint a = rta(one, mats, wl);
    const RtaPoint b = rta(two, mats, wl);
    CHECK(std::abs(a.R - b.R) < 1e-12);
    CHECK(std::abs(a.T - b.T) < 1e-12);
    CHECK(std::abs(a.A - b.A) < 1e-12);
  }
}

TEST_CASE("extinction coefficient arithmetic") {
  CHECK(extinction_from_transmittance(1.0, 40.0, 600.0) == 0.0);
  const double wl = 600.0;
  const double d = wl / (4.0 * units::pi);
  CHECK(extinction_from_transmittance(std::exp(-1.0), d, wl) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(extinction_from_transmittance(0.0, 40.0, 600.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(extinction_from_transmittance(-0.5, 40.0, 600.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(extinction_from_transmittance(0.5, 0.0, 600.0),
                  std::invalid_argument);
}

TEST_CASE("metal-relative extinction of the 40 nm stack brackets the trend") {
  // T relative to the metal-free reference stack; the paper-scale value is
  // about 1.5 with a bulk reference near 1.8
  const auto& mats = builtin_materials();
  StackSpec bare;
  bare.ambient = "air";
  bare.substrate = "air";
  bare.layers = {{"SiO2", 500.0}, {"ITO", 200.0}};
  const double t_bare = rta(bare, mats, 600.0).T;
  const double t_stack = rta(paper_stack("Au", 40.0), mats, 600.0).T;
  const double k_eff =
      extinction_from_transmittance(t_stack / t_bare, 40.0, 600.0);
  CHECK(k_eff > 1.1);
  CHECK(k_eff < 1.9);
}

TEST_CASE("spectrum of one wavelength equals rta") {
  const auto& mats = test_set();
  const auto s = paper_stack("Au", 20.0);
  const auto sp = spectrum(s, builtin_materials(), {600.0});
  REQUIRE(sp.size() == 1);
  const RtaPoint p = rta(s, builtin_materials(), 600.0);
  CHECK(sp[0].R == doctest::Approx(p.R).epsilon(1e-15));
  CHECK(sp[0].T == doctest::Approx(p.T).epsilon(1e-15));
}

TEST_CASE("spectrum preserves order and validates input") {
  const auto& mats = builtin_materials();
  const auto s = paper_stack("Au", 20.0);
  const auto wl = linspace_nm(300, 1500, 601);
  const auto sp = spectrum(s, mats, wl);
  REQUIRE(sp.size() == 601);
  for (size_t i = 0; i < sp.size(); ++i)
    CHECK(sp[i].wavelength_nm == doctest::Approx(wl[i]));
  CHECK_THROWS_AS(spectrum(s, mats, {}), Error);
  CHECK_THROWS_AS(spectrum(s, mats, {600.0, -1.0}), Error);
}

TEST_CASE("raising the spacer index red-shifts the resonance") {
  MaterialSet mats = builtin_materials();
  mats.add("spacer_n10", ConstantIndexModel{1.0});
  mats.add("spacer_n15", ConstantIndexModel{1.5});
  const auto wl = linspace_nm(300, 1500, 601);
  const auto p1 = absorptance_peak(
      spectrum(tuning_stack("Au", 20, "spacer_n10"), mats, wl));
  const auto p2 = absorptance_peak(
      spectrum(tuning_stack("Au", 20, "spacer_n15"), mats, wl));
  CHECK(p2.wavelength_nm - p1.wavelength_nm > 0.0);
}

TEST_CASE("peak and fwhm extraction on a known shape") {
  std::vector<RtaPoint> pts;
  for (int i = 0; i <= 200; ++i) {
    const double wl = 400.0 + 4.0 * i;
    RtaPoint p;
    p.wavelength_nm = wl;
    const double u = (wl - 763.0) / 120.0;
    p.A = 0.8 * std::exp(-u * u);
    pts.push_back(p);
  }
  const Peak pk = absorptance_peak(pts);
  CHECK(pk.wavelength_nm == doctest::Approx(763.0).epsilon(1e-3));
  CHECK(pk.value == doctest::Approx(0.8).epsilon(1e-3));
  // gaussian fwhm = 2 sqrt(ln 2) * 120
  CHECK(absorptance_fwhm(pts) ==
        doctest::Approx(2.0 * std::sqrt(std::log(2.0)) * 120.0).epsilon(0.02));
}

TEST_CASE("spectrum csv format and round trip") {
  const auto& mats = builtin_materials();
  const auto sp = spectrum(paper_stack("Ag", 30.0), mats,
                           linspace_nm(400, 1200, 5));
  std::ostringstream out;
  write_spectrum_csv(out, sp);
  const std::string text = out.str();
  CHECK(text.rfind("wavelength_nm,R,T,A,A_layer_1,A_layer_2,A_layer_3\n", 0) ==
        0);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.find('e') != std::string::npos);  // scientific formatting

  std::istringstream in(text);
  const auto back = read_spectrum_csv(in);
  REQUIRE(back.size() == sp.size());
  for (size_t i = 0; i < sp.size(); ++i) {
    CHECK(back[i].A == doctest::Approx(sp[i].A).epsilon(1e-8));
    REQUIRE(back[i].per_layer_A.size() == 3);
  }
}
