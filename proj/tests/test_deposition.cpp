#include "becfocus/deposition.hpp"
#include "becfocus/errors.hpp"

#include "doctest.h"

#include <cmath>

using namespace becfocus;

namespace {

constexpr double kPi = 3.14159265358979323846;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

VariationalConfig default_config(double a_s_a0, double kick = 0.0) {
  VariationalConfig c;
  c.scattering_length = a_s_a0 * c.species.bohr_radius;
  c.kin.v0 = kick_velocity(kick, c.species);
  c.beam.power = optimal_power(kinetic_energy_at_plane(c.kin, c.species), 5.37, c.beam, c.species);
  return c;
}

Eigen::ArrayXd linspace(int n, double half) { return Eigen::ArrayXd::LinSpaced(n, -half, half); }

} // namespace

TEST_CASE("constant slice") {
  PlaneGrid g;
  g.n = {5, 4};
  Eigen::ArrayXXd s = Eigen::ArrayXXd::Random(5, 4).abs();
  const DepositMap m = accumulate_deposit(g, {{0.0, s}, {0.5, s}, {1.25, s}}, 0.1, "test");
  CHECK((m.raw - 1.25 * s).abs().maxCoeff() <= 1e-15 * s.maxCoeff());
  CHECK((m.density() - 0.125 * s).abs().maxCoeff() <= 1e-15 * s.maxCoeff());
  CHECK(m.t_end == 1.25);

  CHECK_THROWS_AS(accumulate_deposit(g, {{0.0, s}, {0.0, s}}, 1.0, "test"), DomainError);
  CHECK_THROWS_AS(accumulate_deposit(g, {{0.0, s}, {1.0, Eigen::ArrayXXd::Ones(4, 4)}}, 1.0, "test"), DomainError);
  CHECK_THROWS_AS(accumulate_deposit(g, {}, 1.0, "test"), DomainError);
}

TEST_CASE("deposit grows with time") {
  PlaneGrid g;
  g.n = {8, 8};
  std::vector<DensitySlice> slices;
  for (int i = 0; i < 10; ++i) slices.push_back({0.1 * i, Eigen::ArrayXXd::Random(8, 8).abs()});
  Eigen::ArrayXXd prev = Eigen::ArrayXXd::Zero(8, 8);
  for (std::size_t k = 2; k <= slices.size(); ++k) {
    const DepositMap m = accumulate_deposit(g, {slices.begin(), slices.begin() + k}, 1.0, "test");
    CHECK((m.raw >= prev).all());
    prev = m.raw;
  }
}

TEST_CASE("fwhm") {
  const double w = 1.3e-7;
  const Eigen::ArrayXd x = linspace(4001, 8 * w);
  const Eigen::ArrayXd g = (-(x / w).square()).exp();
  CHECK(rel(fwhm(x, g), 2 * w * std::sqrt(std::log(2.0))) < 1e-3);
  const Eigen::ArrayXd coarse = linspace(2001, 8 * w);
  CHECK(rel(fwhm(coarse, (-(coarse / w).square()).exp()), fwhm(x, g)) < 1e-2);

  const Eigen::ArrayXd shifted = (-((x - 7.5 * w) / w).square()).exp();
  CHECK_THROWS_AS(fwhm(x, shifted), NoHalfCrossing);
  CHECK_THROWS_AS(fwhm(x, Eigen::ArrayXd::Zero(x.size())), DomainError);

  Eigen::ArrayXd tri(5);
  tri << 0.0, 0.5, 1.0, 0.5, 0.0;
  CHECK(fwhm(Eigen::ArrayXd::LinSpaced(5, 0.0, 4.0), tri) == doctest::Approx(2.0));
}

TEST_CASE("profile statistics") {
  PlaneGrid g;
  g.n = {401, 301};
  g.extent = Eigen::Vector2d(2e-6, 1e-6);
  const double wx = 1.5e-7, wy = 0.8e-7, n = 4e12;
  const Eigen::ArrayXd xs = g.axis(0), ys = g.axis(1);
  const Eigen::ArrayXXd d = n * ((-(xs / wx).square()).exp().matrix() * (-(ys / wy).square()).exp().matrix().transpose()).array();
  const ProfileStats s = profile_stats(d, g, 1e5, 8e4);
  CHECK(rel(s.fwhm_x, 2 * wx * std::sqrt(std::log(2.0))) < 2e-3);
  CHECK(rel(s.fwhm_y, 2 * wy * std::sqrt(std::log(2.0))) < 2e-3);
  CHECK(rel(s.peak, n) < 1e-4);
  CHECK(rel(s.integrated_atoms, n * kPi * wx * wy) < 1e-6);
  CHECK(s.loss_fraction == doctest::Approx(0.2));
  CHECK_THROWS_AS(profile_stats(Eigen::ArrayXXd::Zero(401, 301), g, 1e5, 1e5), DomainError);
}

TEST_CASE("deposit of a lossless pulse") {
  VariationalConfig c = default_config(50.0);
  c.loss_multiplier = 0.0;
  c.beam.power = 0.0;
  const double t_star = c.kin.plane_crossing_time();
  const auto tr = integrate(c, t_star + 2e-3, SamplingPlan::uniform(t_star + 2e-3, 4000));
  std::vector<VariationalState> window;
  for (const auto& s : tr) {
    if (std::abs(c.kin.height(s.t)) < 8 * s.width(2)) window.push_back(s);
  }
  REQUIRE(window.size() > 100);
  Eigen::Vector2d wmax = Eigen::Vector2d::Zero();
  for (const auto& s : window) wmax = wmax.cwiseMax(s.width.head<2>());
  PlaneGrid g;
  g.n = {301, 301};
  g.extent = 16.0 * wmax;
  const DepositMap m = deposit_from_states(window, c.kin, g);
  double quad = 0.0;
  for (std::size_t i = 1; i < window.size(); ++i) {
    auto f = [&](const VariationalState& s) {
      const double z = c.kin.height(s.t);
      return s.atoms * std::exp(-z * z / (s.width(2) * s.width(2))) / (std::sqrt(kPi) * s.width(2));
    };
    quad += 0.5 * (window[i].t - window[i - 1].t) * (f(window[i]) + f(window[i - 1]));
  }
  const double integral = m.raw.sum() * g.spacing(0) * g.spacing(1);
  CHECK(rel(integral, quad) < 1e-3);
  CHECK(rel(integral * c.kin.plane_speed(), c.atoms0) < 1e-2);
}

TEST_CASE("variational deposit") {
  const VariationalConfig c = default_config(-1.0);
  const VariationalDeposit d = deposit_variational(c);
  CHECK(d.map.source == "variational");
  CHECK((d.map.raw >= 0.0).all());
  const double atoms_end = d.trajectory.back().atoms;
  CHECK(d.stats.integrated_atoms <= c.atoms0);
  CHECK(rel(d.stats.integrated_atoms, atoms_end) < 0.02);
  CHECK(d.stats.loss_fraction == doctest::Approx(1.0 - atoms_end / c.atoms0));
  CHECK(d.stats.fwhm_x > 0.0);
  CHECK(rel(d.t_cross, c.kin.plane_crossing_time()) < 1e-12);

  VariationalConfig k0 = default_config(50.0);
  k0.loss_multiplier = 0.0;
  const VariationalDeposit closure = deposit_variational(k0);
  CHECK(rel(closure.stats.integrated_atoms, k0.atoms0) < 0.01);

  DepositOptions bad;
  bad.plane_height = c.kin.z0;
  CHECK_THROWS_AS(deposit_variational(c, bad), DomainError);
}

TEST_CASE("deposit FWHM is grid independent") {
  const VariationalConfig c = default_config(10.0);
  DepositOptions coarse;
  coarse.cut_points = 1001;
  DepositOptions fine;
  fine.cut_points = 2001;
  CHECK(rel(deposit_variational(c, coarse).stats.fwhm_x, deposit_variational(c, fine).stats.fwhm_x) < 0.01);
}

TEST_CASE("instantaneous profile") {
  const VariationalConfig c = default_config(-1.0, 32.0);
  const double t_star = c.kin.plane_crossing_time();
  const auto tr = integrate(c, t_star * 1.001, SamplingPlan::uniform(t_star * 1.001, 500));
  const InstantProfile p = instantaneous_profile(tr, c.kin, c.atoms0, t_star);
  CHECK(rel(p.state.t, t_star) < 1e-12);
  CHECK((p.column - p.column.colwise().reverse()).abs().maxCoeff() <= 1e-12 * p.column.maxCoeff());
  const VariationalState& s = p.state;
  CHECK(rel(p.stats.peak, s.atoms / (kPi * s.width(0) * s.width(1))) < 1e-3);
  CHECK(rel(p.slice.maxCoeff(), ansatz_peak_density(s)) < 1e-3);
  CHECK(p.stats.loss_fraction == doctest::Approx(1.0 - s.atoms / c.atoms0));
  CHECK_THROWS_AS(instantaneous_profile(tr, c.kin, c.atoms0, 2 * t_star), DomainError);

  const VariationalConfig hard = default_config(-1.0, 128.0);
  const double t_hard = hard.kin.plane_crossing_time();
  const auto trh = integrate(hard, t_hard * 1.001, SamplingPlan::uniform(t_hard * 1.001, 500));
  CHECK(p.stats.loss_fraction > instantaneous_profile(trh, hard.kin, hard.atoms0, t_hard).stats.loss_fraction);
}

TEST_CASE("resampling") {
  const Eigen::ArrayXd fx = linspace(11, 1.0), fy = linspace(21, 2.0);
  Eigen::ArrayXXd d(11, 21);
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 21; ++j) d(i, j) = 3.0 + 2.0 * fx(i) - fy(j);
  PlaneGrid to;
  to.n = {7, 9};
  to.extent = Eigen::Vector2d(1.5, 3.0);
  const Eigen::ArrayXXd r = resample(d, fx, fy, to);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 9; ++j) CHECK(r(i, j) == doctest::Approx(3.0 + 2.0 * to.coordinate(0, i) - to.coordinate(1, j)));
  PlaneGrid outside = to;
  outside.offset = Eigen::Vector2d(10.0, 0.0);
  CHECK(resample(d, fx, fy, outside).abs().maxCoeff() == 0.0);
}

TEST_CASE("slice collector") {
  const GridSpec g{{16, 16, 32}, Vec3(8e-6, 8e-6, 16e-6), Vec3::Zero()};
  const ComplexField3D f = gaussian_field(g, Vec3::Constant(1.5e-6), 1000.0);
  Kinematics kin;
  kin.z0 = 50e-6;
  GpeSliceCollector col(kin, PlaneGrid::from(g));
  const FrameSample frame;
  GpeObservation obs{};
  obs.t = kin.plane_crossing_time();
  col(GpeSnapshot{f, frame, obs});
  REQUIRE(col.slices().size() == 1);
  CHECK((col.slices()[0].density - plane_density(f, 0.0)).abs().maxCoeff() <= 1e-12 * plane_density(f, 0.0).maxCoeff());
  obs.t = 0.0;
  col(GpeSnapshot{f, frame, obs});
  CHECK(col.slices()[1].density.maxCoeff() == 0.0);
}
