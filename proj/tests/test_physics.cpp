#include "becfocus/errors.hpp"
#include "becfocus/physics.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace becfocus;

namespace {

constexpr double kHbar = 1.054571817e-34;
constexpr double kMassRb85 = 84.911789738 * 1.66053906660e-27;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string temp_ini(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/becfocus_test_" + name + ".ini";
  std::ofstream(path) << body;
  return path;
}

} // namespace

TEST_CASE("interaction strength") {
  const SpeciesParams rb = rb85();
  CHECK(interaction_strength(0.0, rb) == 0.0);
  const double a = 100 * 5.29e-11;
  const double hand = 4.0 * 3.14159265358979323846 * kHbar * kHbar * a / kMassRb85;
  CHECK(rel(interaction_strength(a, rb), hand) < 1e-12);
  CHECK(interaction_strength(-5.29e-11, rb) == doctest::Approx(-interaction_strength(5.29e-11, rb)).epsilon(1e-15));
}

TEST_CASE("kick velocity") {
  const SpeciesParams rb = rb85();
  CHECK(kick_velocity(0.0, rb) == 0.0);
  const double recoil = kHbar * 2.0 * 3.14159265358979323846 / 780.24e-9 / kMassRb85;
  CHECK(rel(kick_velocity(1.0, rb), recoil) < 1e-12);
  CHECK(rel(kick_velocity(32.0, rb), 32.0 * kick_velocity(1.0, rb)) < 1e-14);
}

TEST_CASE("fall velocity") {
  CHECK(fall_velocity_at(0.0, 0.0, 9.81) == 0.0);
  CHECK(fall_velocity_at(500e-6, 0.0, 9.81) == doctest::Approx(0.099).epsilon(0.01));
  CHECK(rel(fall_velocity_at(500e-6, 0.1, 9.81), std::sqrt(0.01 + 2 * 9.81 * 5e-4)) < 1e-14);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> z(1e-7, 1e-2);
  for (int i = 0; i < 100; ++i) {
    const double z0 = z(rng);
    const double v = fall_velocity_at(z0, 0.0, 9.81);
    CHECK(rel(v * v, 2 * 9.81 * z0) < 1e-12);
  }
}

TEST_CASE("unit scaling round trips") {
  const UnitScaling u(kMassRb85, 2 * 3.14159265358979323846 * 70.0);
  CHECK(rel(u.energy_unit(), kHbar / u.time_unit()) < 1e-12);
  CHECK(rel(u.length_unit(), std::sqrt(kHbar / (kMassRb85 * 2 * 3.14159265358979323846 * 70.0))) < 1e-12);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> e(-12, 3);
  for (int i = 0; i < 200; ++i) {
    const double q = std::pow(10.0, e(rng));
    CHECK(rel(u.length_from_si(u.length_to_si(q)), q) < 1e-12);
    CHECK(rel(u.time_from_si(u.time_to_si(q)), q) < 1e-12);
    CHECK(rel(u.energy_from_si(u.energy_to_si(q)), q) < 1e-12);
    CHECK(rel(u.velocity_from_si(u.velocity_to_si(q)), q) < 1e-12);
  }
}

TEST_CASE("species preset and validation") {
  const SpeciesParams rb = rb85();
  CHECK(rb.linewidth == 3.8e7);
  CHECK(rb.saturation_intensity == 16.7);
  CHECK(rb.three_body_K == 4e-41);
  CHECK(rb.bohr_radius == 5.29e-11);
  CHECK_NOTHROW(rb.validate());
  SpeciesParams bad = rb;
  bad.mass = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = rb;
  bad.saturation_intensity = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("species file") {
  const auto path = temp_ini("species", "[species]\nlinewidth = 6.07e6\nlinewidth_convention = linear\nmass_amu = 87\n");
  const SpeciesParams s = load_species(path);
  CHECK(rel(s.linewidth, 2 * 3.14159265358979323846 * 6.07e6) < 1e-14);
  CHECK(rel(s.mass, 87 * 1.66053906660e-27) < 1e-14);
  CHECK(s.three_body_K == 4e-41);
  CHECK_THROWS_AS(load_species(temp_ini("preset", "[species]\npreset = cs133\n")), ConfigError);
  CHECK_THROWS_AS(load_species(temp_ini("negative", "[species]\nthree_body_K = -1\n")), ConfigError);
}
