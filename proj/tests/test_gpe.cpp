#include "becfocus/errors.hpp"
#include "becfocus/fft.hpp"
#include "becfocus/gpe.hpp"

#include "doctest.h"

#include <cmath>

using namespace becfocus;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHbar = 1.054571817e-34;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

GridSpec cube(int n, double extent) { return GridSpec{{n, n, n}, Vec3::Constant(extent), Vec3::Zero()}; }

double max_rel_diff(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) { return (a - b).abs().maxCoeff() / b.abs().maxCoeff(); }

Vec3 momentum(const ComplexField3D& f) {
  Fft3D fft(f.grid.n[0], f.grid.n[1], f.grid.n[2]);
  Eigen::ArrayXcd k = f.data;
  fft.forward(k.data());
  const Eigen::ArrayXd p = k.abs2();
  Vec3 out = Vec3::Zero();
  std::array<Eigen::ArrayXd, 3> kv{f.grid.wavenumbers(0), f.grid.wavenumbers(1), f.grid.wavenumbers(2)};
  for (int i = 0; i < f.grid.n[0]; ++i)
    for (int j = 0; j < f.grid.n[1]; ++j)
      for (int l = 0; l < f.grid.n[2]; ++l) {
        const double w = p(f.grid.index(i, j, l));
        out += w * Vec3(kv[0](i), kv[1](j), kv[2](l));
      }
  return out * kHbar / p.sum();
}

} // namespace

TEST_CASE("grid validation") {
  CHECK_NOTHROW(cube(32, 1e-5).validate());
  CHECK_THROWS_AS(cube(48, 1e-5).validate(), ConfigError);
  CHECK_THROWS_AS(cube(8, 1e-5).validate(), ConfigError);
  CHECK_THROWS_AS(cube(32, -1e-5).validate(), ConfigError);
  const GridSpec g = cube(32, 32e-6);
  CHECK_NOTHROW(g.validate_resolution(Vec3::Constant(4e-6)));
  CHECK_THROWS_AS(g.validate_resolution(Vec3(4e-6, 3.9e-6, 4e-6)), ConfigError);
}

TEST_CASE("observables of an analytic Gaussian") {
  const GridSpec g{{32, 32, 64}, Vec3(24e-6, 16e-6, 24e-6), Vec3::Zero()};
  const Vec3 w(2e-6, 1.5e-6, 1e-6);
  const ComplexField3D f = gaussian_field(g, w, 5000.0);
  const Observables o = observables(f);
  CHECK(rel(o.norm, 5000.0) < 1e-6);
  for (int r = 0; r < 3; ++r) CHECK(rel(o.rms(r), w(r) / std::sqrt(2.0)) < 1e-6);
  // no node at the origin: the densest nodes sit half a cell off centre on each axis
  double offset = 0.0;
  for (int r = 0; r < 3; ++r) offset += std::pow(0.5 * g.spacing(r) / w(r), 2);
  CHECK(rel(o.peak_density, 5000.0 / (std::pow(kPi, 1.5) * w.prod()) * std::exp(-offset)) < 1e-6);
  CHECK(o.com.norm() < 1e-15 * w.norm() * 1e3);

  ComplexField3D shifted(g);
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) shifted((i + 1) % g.n[0], j, k) = f(i, j, k);
  const Observables s = observables(shifted);
  CHECK(std::abs(s.com(0) - o.com(0) - g.spacing(0)) < 1e-12 * g.spacing(0));
  CHECK(std::abs(s.com(1) - o.com(1)) < 1e-20);
}

TEST_CASE("outer fraction and plane density") {
  const GridSpec g = cube(32, 24e-6);
  const ComplexField3D centred = gaussian_field(g, Vec3::Constant(1.5e-6), 1000.0);
  CHECK(outer_fraction(centred) < 1e-12);
  const ComplexField3D edge = gaussian_field(g, Vec3::Constant(1.5e-6), 1000.0, Vec3(11e-6, 0, 0));
  CHECK(outer_fraction(edge) > 0.1);

  const double z0 = g.coordinate(2, 17), z1 = g.coordinate(2, 18);
  const Eigen::ArrayXXd at = plane_density(centred, z0);
  CHECK(at(5, 7) == std::norm(centred(5, 7, 17)));
  const Eigen::ArrayXXd mid = plane_density(centred, 0.25 * z0 + 0.75 * z1);
  CHECK(rel(mid(5, 7), 0.25 * std::norm(centred(5, 7, 17)) + 0.75 * std::norm(centred(5, 7, 18))) < 1e-12);
  CHECK(plane_density(centred, 20e-6).maxCoeff() == 0.0);
}

TEST_CASE("harmonic ground state without interactions") {
  GroundStateOptions o;
  o.scattering_length = 0.0;
  o.atoms = 1e4;
  const Vec3 l(std::sqrt(kHbar / (o.species.mass * o.trap.x)), std::sqrt(kHbar / (o.species.mass * o.trap.y)),
               std::sqrt(kHbar / (o.species.mass * o.trap.z)));
  o.grid = GridSpec{{32, 32, 32}, 24.0 * l, Vec3::Zero()};
  std::vector<double> energy;
  o.energy_history = &energy;
  const GroundState gs = ground_state_imaginary_time(o);
  const Observables ob = observables(gs.field);
  for (int r = 0; r < 3; ++r) CHECK(rel(ob.rms(r) * std::sqrt(2.0), l(r)) < 1e-4);
  CHECK(rel(ob.norm, 1e4) < 1e-10);
  REQUIRE(energy.size() >= 2);
  for (std::size_t i = 1; i < energy.size(); ++i) CHECK(energy[i] <= energy[i - 1] * (1 + 1e-12));
  const double mu = 0.5 * kHbar * (o.trap.x + o.trap.y + o.trap.z);
  CHECK(rel(gs.chemical_potential, mu) < 1e-4);

  o.scattering_length = -5.29e-11;
  CHECK_THROWS_AS(ground_state_imaginary_time(o), DomainError);
}

TEST_CASE("repulsive ground state against the Thomas-Fermi radius") {
  GroundStateOptions o;
  o.atoms = 1e5;
  o.scattering_length = 100 * 5.29e-11;
  o.grid = GridSpec{{64, 32, 32}, Vec3(90e-6, 16e-6, 16e-6), Vec3::Zero()};
  const GroundState gs = ground_state_imaginary_time(o);
  const Observables ob = observables(gs.field);
  const double m = o.species.mass;
  const double w0 = o.trap.geometric_mean();
  const double l = std::sqrt(kHbar / (m * w0));
  const double radius = std::pow(15.0 * o.atoms * o.scattering_length / l, 0.2) * l;
  const Vec3 w = o.trap.as_vector();
  for (int r = 0; r < 3; ++r) CHECK(rel(ob.rms(r), radius * w0 / w(r) / std::sqrt(7.0)) < 0.05);
}

TEST_CASE("free Gaussian dispersion") {
  const GridSpec g = cube(32, 40e-6);
  const Vec3 w0(2e-6, 2.5e-6, 3e-6);
  const ComplexField3D f = gaussian_field(g, w0, 1000.0);
  GpeProblem p;
  p.loss_multiplier = 0.0;
  GpeSolver solver(g, p);
  EvolveOptions o;
  o.t_end = 2e-3;
  o.controller.rel_tol = 1e-8;
  const EvolveResult r = solver.evolve(f, o);
  const Observables ob = observables(r.field);
  const double m = p.species.mass;
  for (int i = 0; i < 3; ++i) {
    CHECK(rel(ob.rms(i) * std::sqrt(2.0), std::hypot(w0(i), kHbar * o.t_end / (m * w0(i)))) < 1e-5);
  }
  CHECK(rel(ob.norm, 1000.0) < 1e-6);
}

TEST_CASE("free symmetries") {
  const GridSpec g = cube(32, 40e-6);
  ComplexField3D f = gaussian_field(g, Vec3::Constant(3e-6), 1000.0);
  const double k0 = 2 * kPi / 20e-6;
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) f(i, j, k) *= std::polar(1.0, k0 * g.coordinate(0, i));
  GpeProblem p;
  p.scattering_length = 20 * 5.29e-11;
  p.loss_multiplier = 0.0;
  GpeSolver solver(g, p);
  EvolveOptions o;
  o.t_end = 1e-3;
  const EvolveResult r = solver.evolve(f, o);
  CHECK(rel(observables(r.field).norm, 1000.0) < 1e-6);
  const Vec3 p0 = momentum(f), p1 = momentum(r.field);
  CHECK(rel(p1(0), p0(0)) < 1e-6);
  CHECK(std::abs(p1(1)) < 1e-6 * std::abs(p0(0)));
}

TEST_CASE("stationary ground state in a static trap") {
  GroundStateOptions go;
  const double w = 2 * kPi * 70.0;
  go.trap = TrapFrequencies{w, w, w};
  go.scattering_length = 0.0;
  go.atoms = 1e4;
  go.tol = 1e-12;
  const double l = std::sqrt(kHbar / (go.species.mass * w));
  go.grid = cube(32, 20 * l);
  const GroundState gs = ground_state_imaginary_time(go);
  GpeProblem p;
  p.loss_multiplier = 0.0;
  p.omega_sq = static_trap(go.trap);
  GpeSolver solver(gs.field.grid, p);
  EvolveOptions o;
  o.t_end = 2 * kPi / w;
  o.controller.rel_tol = 1e-8;
  const EvolveResult r = solver.evolve(gs.field, o);
  CHECK(max_rel_diff(r.field.density(), gs.field.density()) < 1e-6);
}

TEST_CASE("energy conservation in a static trap") {
  const TrapFrequencies trap{2 * kPi * 70.0, 2 * kPi * 70.0, 2 * kPi * 70.0};
  const GridSpec g = cube(32, 24e-6);
  const ComplexField3D f = gaussian_field(g, Vec3(1.0e-6, 1.3e-6, 1.6e-6), 1000.0, Vec3(1e-6, 0, 0));
  GpeProblem p;
  p.loss_multiplier = 0.0;
  p.omega_sq = static_trap(trap);
  GpeSolver solver(g, p);
  EvolveOptions o;
  o.t_end = 5e-3;
  o.controller.rel_tol = 1e-8;
  const EvolveResult r = solver.evolve(f, o);
  const double e0 = gpe_energy(f, trap, 0.0, p.species);
  CHECK(rel(gpe_energy(r.field, trap, 0.0, p.species), e0) < 1e-5);
}

TEST_CASE("three-body loss rate of a frozen Gaussian") {
  const GridSpec g = cube(32, 12e-6);
  const ComplexField3D f = gaussian_field(g, Vec3(1.0e-6, 0.8e-6, 0.8e-6), 1e5);
  GpeProblem p;
  p.scattering_length = 100 * 5.29e-11;
  GpeSolver solver(g, p);
  const double quad = 2.0 * p.species.three_body_K * f.density().cube().sum() * g.cell_volume();
  const double rate = solver.norm_rate(f);
  CHECK(rate < 0.0);
  CHECK(rel(-rate, quad) < 1e-4);
  const double vol = 1.0e-6 * 0.8e-6 * 0.8e-6;
  const double gauss = 2.0 * p.species.three_body_K * std::pow(1e5, 3) / (std::pow(kPi, 3) * vol * vol * std::pow(3.0, 1.5));
  CHECK(rel(-rate, gauss) < 1e-4);
}

TEST_CASE("time-dependent focusing conserves the norm without loss") {
  const GridSpec g{{32, 16, 16}, Vec3(40e-6, 16e-6, 16e-6), Vec3::Zero()};
  const ComplexField3D f0 = gaussian_field(g, Vec3(4e-6, 1.5e-6, 1.5e-6), 1e4);
  FocusingBeam beam;
  beam.sigma_z = 20e-6;
  Kinematics kin;
  kin.z0 = 50e-6;
  beam.power = 4e-3;
  GpeProblem p;
  p.scattering_length = 10 * 5.29e-11;
  p.loss_multiplier = 0.0;
  p.omega_sq = focusing_schedule(beam, kin, p.species);
  GpeSolver solver(g, p);
  EvolveOptions o;
  o.t_end = kin.plane_crossing_time() * 0.9;
  o.controller.rel_tol = 1e-6;
  for (int i = 1; i <= 20; ++i) o.observe_at.push_back(o.t_end * i / 20);
  const EvolveResult r = solver.evolve(f0, o);
  for (const auto& s : r.series) {
    CHECK(rel(s.lab.norm, 1e4) < 1e-6);
  }
}

TEST_CASE("y and z marginals stay equal") {
  const GridSpec g{{32, 32, 32}, Vec3(40e-6, 16e-6, 16e-6), Vec3::Zero()};
  const ComplexField3D f0 = gaussian_field(g, Vec3(4e-6, 1.5e-6, 1.5e-6), 1e4);
  FocusingBeam beam;
  beam.sigma_z = 20e-6;
  beam.power = 4e-3;
  Kinematics kin;
  kin.z0 = 50e-6;
  GpeProblem p;
  p.scattering_length = 10 * 5.29e-11;
  p.omega_sq = focusing_schedule(beam, kin, p.species);
  GpeSolver solver(g, p);
  EvolveOptions o;
  o.t_end = kin.plane_crossing_time() * 0.5;
  for (int i = 1; i <= 5; ++i) o.observe_at.push_back(o.t_end * i / 5);
  int checked = 0;
  o.observer = [&](const GpeSnapshot& s) {
    CHECK(max_rel_diff(marginal(s.field, 1), marginal(s.field, 2)) < 1e-6);
    ++checked;
  };
  solver.evolve(f0, o);
  CHECK(checked == 5);
}

TEST_CASE("halving the tolerance") {
  const GridSpec g = cube(32, 24e-6);
  const ComplexField3D f0 = gaussian_field(g, Vec3(1.5e-6, 1.2e-6, 1.0e-6), 1e4);
  GpeProblem p;
  p.scattering_length = 50 * 5.29e-11;
  p.omega_sq = static_trap({2 * kPi * 70.0, 2 * kPi * 70.0, 2 * kPi * 70.0});
  GpeSolver solver(g, p);
  EvolveOptions o;
  o.t_end = 3e-3;
  o.controller.rel_tol = 1e-6;
  const Vec3 coarse = observables(solver.evolve(f0, o).field).rms;
  o.controller.rel_tol = 5e-7;
  const Vec3 fine = observables(solver.evolve(f0, o).field).rms;
  for (int r = 0; r < 3; ++r) CHECK(rel(coarse(r), fine(r)) < 1e-6);
}

TEST_CASE("step control") {
  StepController c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.propose(1e-6, 0.0) == doctest::Approx(2e-6));
  CHECK(c.propose(1e-6, std::nan("")) == doctest::Approx(2e-7));
  CHECK(c.propose(1e-6, c.rel_tol) == doctest::Approx(0.9 * std::pow(c.target, 0.25) * 1e-6));
  CHECK(c.propose(1e-6, c.target * c.rel_tol) == doctest::Approx(0.9e-6));
  CHECK(c.propose(1.0, 0.0) == c.max_dt);
  StepController bad = c;
  bad.dt = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.rel_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const GridSpec g = cube(32, 24e-6);
  const ComplexField3D f = gaussian_field(g, Vec3::Constant(1.5e-6), 1e4);
  GpeProblem p;
  p.scattering_length = 100 * 5.29e-11;
  StepController big;
  big.dt = 5e-4;
  big.rel_tol = 1e-10;
  CHECK_THROWS_AS(step_real_time(f, p, big), StepRejected);
  StepController small;
  small.dt = 1e-8;
  small.rel_tol = 1e-6;
  const StepOutcome out = step_real_time(f, p, small);
  CHECK(out.error <= small.rel_tol);
  CHECK(out.field.t == doctest::Approx(1e-8));
}

TEST_CASE("scaling frame follows the lossless ansatz") {
  FocusingBeam beam;
  beam.sigma_z = 20e-6;
  beam.power = 4e-3;
  Kinematics kin;
  kin.z0 = 50e-6;
  const SpeciesParams rb = rb85();
  const Vec3 w0(5e-6, 1.4e-6, 1.4e-6);
  const double a = 10 * rb.bohr_radius;
  const double t_end = kin.plane_crossing_time();
  const ScalingFrame frame = ScalingFrame::gaussian(w0, 1e4, a, rb, focusing_schedule(beam, kin, rb), t_end);
  CHECK_FALSE(frame.identity());
  VariationalConfig vc;
  vc.scattering_length = a;
  vc.initial_width = w0;
  vc.atoms0 = 1e4;
  vc.loss_multiplier = 0.0;
  vc.beam = beam;
  vc.kin = kin;
  const auto tr = integrate(vc, t_end, SamplingPlan::uniform(t_end, 10));
  for (const auto& s : tr) {
    const FrameSample fs = frame.at(s.t);
    for (int r = 0; r < 3; ++r) CHECK(rel(fs.lambda(r) * w0(r), s.width(r)) < 1e-6);
  }
  CHECK_THROWS_AS(frame.at(2 * t_end), DomainError);
  const ScalingFrame id;
  CHECK(id.identity());
  CHECK(id.at(1.0).lambda == Vec3::Ones());
}

TEST_CASE("lab frame of the identity frame") {
  const GridSpec g = cube(16, 20e-6);
  const ComplexField3D f = gaussian_field(g, Vec3::Constant(2e-6), 100.0);
  const ComplexField3D lab = to_lab_frame(f, FrameSample{}, rb85());
  CHECK(lab.grid == g);
  CHECK((lab.data - f.data).abs().maxCoeff() < 1e-15 * f.data.abs().maxCoeff());
}
