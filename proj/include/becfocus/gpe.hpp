#pragma once

#include "becfocus/physics.hpp"
#include "becfocus/variational.hpp"

#include <Eigen/Core>

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace becfocus {

/// Rectangular periodic grid with cell-centred nodes, symmetric about `offset`.
/// Linear index (i * ny + j) * nz + k, z fastest.
struct GridSpec {
  std::array<int, 3> n{64, 64, 64};
  Vec3 extent = Vec3::Constant(20e-6);  // m
  Vec3 offset = Vec3::Zero();           // box centre (m)

  void validate() const;
  /// Also checks that the spacing resolves `min_width` with at least four points.
  void validate_resolution(const Vec3& min_width) const;
  long size() const { return long(n[0]) * n[1] * n[2]; }
  double spacing(int r) const { return extent(r) / n[r]; }
  double cell_volume() const { return spacing(0) * spacing(1) * spacing(2); }
  long index(int i, int j, int k) const { return (long(i) * n[1] + j) * n[2] + k; }
  double coordinate(int r, int i) const { return offset(r) + (i + 0.5 - 0.5 * n[r]) * spacing(r); }
  Eigen::ArrayXd axis(int r) const;
  /// Angular wavenumbers in FFT order.
  Eigen::ArrayXd wavenumbers(int r) const;

  bool operator==(const GridSpec& o) const { return n == o.n && extent == o.extent && offset == o.offset; }
};

struct ComplexField3D {
  GridSpec grid;
  Eigen::ArrayXcd data;  // 1/m^(3/2)
  double t = 0.0;

  ComplexField3D() = default;
  explicit ComplexField3D(const GridSpec& g) : grid(g), data(Eigen::ArrayXcd::Zero(g.size())) {}

  std::complex<double>& operator()(int i, int j, int k) { return data(grid.index(i, j, k)); }
  std::complex<double> operator()(int i, int j, int k) const { return data(grid.index(i, j, k)); }
  Eigen::ArrayXd density() const { return data.abs2(); }
};

/// Gaussian with density N / (pi^(3/2) Wx Wy Wz) exp(-sum (r - c)^2 / W^2).
ComplexField3D gaussian_field(const GridSpec& grid, const Vec3& width, double atoms, const Vec3& centre = Vec3::Zero());

struct Observables {
  double norm = 0.0;
  Vec3 com = Vec3::Zero();
  Vec3 rms = Vec3::Zero();
  double peak_density = 0.0;
};

/// Trapezoidal (equivalently, periodic rectangle) moments on the grid.
Observables observables(const ComplexField3D& field);

/// Fraction of the norm within the outer `shell` fraction of the box along any axis.
double outer_fraction(const ComplexField3D& field, double shell = 0.1);

/// |psi|^2 on the (x, y) grid at height z (in the field's coordinates), linearly
/// interpolated between adjacent planes. Zero outside the box.
Eigen::ArrayXXd plane_density(const ComplexField3D& field, double z);

/// Marginal density along one axis (integrated over the other two).
Eigen::ArrayXd marginal(const ComplexField3D& field, int axis);

/// Squared harmonic frequencies (rad^2/s^2) acting along x, y, z at time t.
using FrequencySchedule = std::function<Vec3(double)>;

FrequencySchedule static_trap(const TrapFrequencies& trap);
FrequencySchedule focusing_schedule(const FocusingBeam& beam, const Kinematics& kin, const SpeciesParams& species);

struct GpeProblem {
  SpeciesParams species;
  double scattering_length = 0.0;
  double loss_multiplier = 1.0;  // scales K in the -i hbar K |psi|^4 term
  FrequencySchedule omega_sq;    // empty means no potential
  /// Reference frequency of the internal oscillator units.
  double unit_omega = TrapFrequencies{}.geometric_mean();

  void validate() const;
};

/// Time-dependent dilation psi(r) = Lambda^(-1/2) exp(i m sum lambda'_r r^2 / (2 hbar lambda_r)) phi(r / lambda).
///
/// The identity frame has lambda = 1 for all time.
struct FrameSample {
  Vec3 lambda = Vec3::Ones();
  Vec3 rate = Vec3::Zero();    // d lambda / dt
  Vec3 accel = Vec3::Zero();   // d^2 lambda / dt^2
  Vec3 theta = Vec3::Zero();   // integral of dt / lambda^2
  double volume() const { return lambda.prod(); }
};

class ScalingFrame {
public:
  /// lambda = 1 at all times.
  ScalingFrame();
  /// lambda'' = -omega^2(t) lambda + c / lambda^3 + d / (lambda Lambda), integrated over [0, t_end].
  ScalingFrame(const Vec3& c, const Vec3& d, FrequencySchedule omega_sq, double t_end, double rel_tol = 1e-12);

  /// Coefficients matching a Gaussian of widths W0 with N atoms (the variational
  /// equations without loss).
  static ScalingFrame gaussian(const Vec3& width0, double atoms, double scattering_length,
                               const SpeciesParams& species, FrequencySchedule omega_sq, double t_end);

  bool identity() const { return identity_; }
  FrameSample at(double t) const;
  double t_end() const { return t_end_; }

private:
  struct Node {
    double t;
    Eigen::Matrix<double, 9, 1> x;
    Eigen::Matrix<double, 9, 1> dx;
  };
  bool identity_ = true;
  Vec3 c_ = Vec3::Zero();
  Vec3 d_ = Vec3::Zero();
  FrequencySchedule omega_sq_;
  double t_end_ = 0.0;
  std::vector<Node> nodes_;
};

/// Adaptive step-size control for the embedded 4(3) pair.
struct StepController {
  double dt = 1e-6;         // s
  double rel_tol = 1e-8;
  double safety = 0.9;
  /// Proposed steps aim at an error of target * rel_tol so that the error
  /// accumulated over a run stays below rel_tol.
  double target = 0.1;
  double min_dt = 1e-14;    // s
  double max_dt = 1e-3;     // s

  void validate() const;
  /// Next step size after an attempt with the given error estimate.
  double propose(double dt_used, double error) const;
};

struct StepOutcome {
  ComplexField3D field;
  double error;
};

struct GpeObservation {
  double t;
  Observables lab;  // lab-frame (moving with the centre of mass) moments
  FrameSample frame;
  double outer_fraction;
  bool escape_warning;
};

struct GpeSnapshot {
  const ComplexField3D& field;  // in frame coordinates
  const FrameSample& frame;
  const GpeObservation& observation;
};

using GpeObserver = std::function<void(const GpeSnapshot&)>;

struct EvolveOptions {
  double t_end = 0.0;
  std::vector<double> observe_at;  // ascending, within (t0, t_end]
  StepController controller;
  const ScalingFrame* frame = nullptr;  // null means identity
  /// Width fraction of an absorbing edge mask; 0 disables.
  double absorbing_width = 0.0;
  GpeObserver observer;
};

struct EvolveResult {
  ComplexField3D field;  // frame coordinates at t_end
  FrameSample frame;
  std::vector<GpeObservation> series;
  long accepted_steps = 0;
  long rejected_steps = 0;
  std::vector<std::string> warnings;
};

struct GroundStateOptions {
  TrapFrequencies trap;
  double scattering_length = 0.0;
  double atoms = 1e5;
  GridSpec grid;
  double tol = 1e-10;  // relative chemical-potential change per unit imaginary time
  long max_iterations = 200000;
  SpeciesParams species;
  /// Energy after each convergence check (for monotonicity audits).
  std::vector<double>* energy_history = nullptr;
};

struct GroundState {
  ComplexField3D field;
  double chemical_potential;  // J
  double energy;              // J
  long iterations;
};

/// Split-step normalised gradient flow with a decreasing imaginary time step;
/// the last two steps are Richardson-extrapolated to remove the splitting offset.
GroundState ground_state_imaginary_time(const GroundStateOptions& opts);

/// GPE energy functional (J) in a static trap.
double gpe_energy(const ComplexField3D& field, const TrapFrequencies& trap, double scattering_length,
                  const SpeciesParams& species);

/// Interaction-picture Runge-Kutta 4(3) solver for
/// i hbar psi_t = [-hbar^2 lap / 2m + V + u |psi|^2 - i hbar K |psi|^4] psi.
class GpeSolver {
public:
  GpeSolver(const GridSpec& grid, GpeProblem problem);
  ~GpeSolver();

  /// One step of length dt from field.t in the given frame; the field is not modified.
  StepOutcome try_step(const ComplexField3D& field, double dt, const ScalingFrame& frame) const;

  EvolveResult evolve(const ComplexField3D& initial, const EvolveOptions& opts) const;

  /// d(norm)/dt (atoms/s) from the non-Hermitian term at the field's time.
  double norm_rate(const ComplexField3D& field) const;

  const GpeProblem& problem() const { return problem_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  GpeProblem problem_;
};

/// Single step; throws StepRejected when the error estimate exceeds the controller tolerance.
StepOutcome step_real_time(const ComplexField3D& field, const GpeProblem& problem, const StepController& ctl);

/// Lab-frame field corresponding to a frame field.
ComplexField3D to_lab_frame(const ComplexField3D& phi, const FrameSample& frame, const SpeciesParams& species);

} // namespace becfocus
