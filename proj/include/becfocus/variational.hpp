#pragma once

#include "becfocus/optics.hpp"
#include "becfocus/physics.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

namespace becfocus {

using Vec3 = Eigen::Vector3d;

struct TrapFrequencies {
  double x = 2.0 * constants::pi * 10.0;  // rad/s
  double y = 2.0 * constants::pi * 70.0;
  double z = 2.0 * constants::pi * 70.0;

  double geometric_mean() const { return std::cbrt(x * y * z); }
  Vec3 as_vector() const { return {x, y, z}; }
};

/// Gaussian-ansatz widths, their rates and the (real-valued) atom number.
struct VariationalState {
  double t = 0.0;
  Vec3 width = Vec3::Ones();
  Vec3 width_rate = Vec3::Zero();
  double atoms = 0.0;
};

/// First-order form: widths, quadratic phases beta_r (1/m^2) and atom number.
struct BetaState {
  double t = 0.0;
  Vec3 width = Vec3::Ones();
  Vec3 beta = Vec3::Zero();
  double atoms = 0.0;
};

struct VariationalConfig {
  SpeciesParams species;
  double scattering_length = 100 * 5.29e-11;          // after release (m)
  double initial_scattering_length = 100 * 5.29e-11;  // in the trap, sets W0
  TrapFrequencies trap;
  double atoms0 = 1e5;
  FocusingBeam beam;
  Kinematics kin;
  /// Overrides Eq.-25-style initial widths when all entries are positive.
  Vec3 initial_width = Vec3::Constant(-1.0);
  Vec3 initial_width_rate = Vec3::Zero();
  double rel_tol = 1e-10;
  double abs_tol = 1e-13;  // in oscillator units
  double collapse_floor = 1e-9;
  /// Scales K in the ansatz equations (loss-convention studies).
  double loss_multiplier = 1.0;

  double effective_K() const { return loss_multiplier * species.three_body_K; }
  void validate() const;
};

/// Constants entering the ansatz equations. The same formulas are evaluated
/// in SI and in oscillator units by swapping the constants.
template <typename Scalar>
struct GaussianModel {
  Scalar hbar;
  Scalar mass;
  Scalar interaction;  // u = 4 pi hbar^2 a_s / m
  Scalar three_body;   // K, enters as hbar*K
};

template <typename Scalar>
struct WidthDerivatives {
  Eigen::Matrix<Scalar, 3, 1> accel;
  Scalar atoms_rate;
};

/// Width accelerations and loss rate of the Gaussian ansatz.
///
/// omega2 is the transverse focusing frequency squared acting on x only.
template <typename Scalar>
WidthDerivatives<Scalar> second_order_terms(const Eigen::Matrix<Scalar, 3, 1>& W, Scalar N, Scalar omega2,
                                            const GaussianModel<Scalar>& m) {
  using std::pow;
  using std::sqrt;
  const Scalar pi = Scalar(constants::pi);
  const Scalar vol = W.prod();
  const Scalar kin = m.hbar * m.hbar / (m.mass * m.mass);
  const Scalar mf = m.interaction * N / (m.mass * pow(2 * pi, Scalar(1.5)));
  const Scalar KE = m.hbar * m.three_body;
  const Scalar N2 = N * N;
  const Scalar sq = 7 * KE * KE * N2 * N2 / (3 * pow(3 * pi, 6) * m.hbar * m.hbar);
  WidthDerivatives<Scalar> d;
  for (int r = 0; r < 3; ++r) {
    const Scalar w = W(r);
    const Scalar others = vol / w;
    d.accel(r) = kin / (w * w * w) + mf / (w * vol) - sq / (w * w * w * pow(others, 4));
  }
  d.accel(0) -= omega2 * W(0);
  d.atoms_rate = -KE * N2 * N / (9 * sqrt(Scalar(3)) * pi * pi * pi * m.hbar * vol * vol);
  return d;
}

/// Widths' rate in the first-order formulation (beta_r and the K term).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> first_order_width_rate(const Eigen::Matrix<Scalar, 3, 1>& W,
                                                   const Eigen::Matrix<Scalar, 3, 1>& beta, Scalar N,
                                                   const GaussianModel<Scalar>& m) {
  using std::pow;
  using std::sqrt;
  const Scalar pi = Scalar(constants::pi);
  const Scalar vol = W.prod();
  const Scalar KE = m.hbar * m.three_body;
  Eigen::Matrix<Scalar, 3, 1> rate;
  for (int r = 0; r < 3; ++r) {
    const Scalar others = vol / W(r);
    rate(r) = 2 * m.hbar / m.mass * beta(r) * W(r) +
              KE * N * N / (sqrt(Scalar(3)) * pow(3 * pi, 3) * m.hbar * W(r) * others * others);
  }
  return rate;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> first_order_beta_rate(const Eigen::Matrix<Scalar, 3, 1>& W,
                                                  const Eigen::Matrix<Scalar, 3, 1>& beta, Scalar N,
                                                  Scalar omega2, const GaussianModel<Scalar>& m) {
  using std::pow;
  const Scalar pi = Scalar(constants::pi);
  const Scalar vol = W.prod();
  Eigen::Matrix<Scalar, 3, 1> rate;
  for (int r = 0; r < 3; ++r) {
    const Scalar w2 = W(r) * W(r);
    rate(r) = m.hbar / (2 * m.mass * w2 * w2) - 2 * m.hbar / m.mass * beta(r) * beta(r) +
              m.interaction * N / (2 * pow(2 * pi, Scalar(1.5)) * m.hbar * w2 * vol);
  }
  rate(0) -= m.mass / (2 * m.hbar) * omega2;
  return rate;
}

/// Thomas-Fermi-limit Gaussian estimate of the trapped widths.
Vec3 initial_widths(const TrapFrequencies& trap, double atoms0, double scattering_length,
                    const SpeciesParams& species);

/// Stationary widths of the ansatz in the static trap (no loss): the
/// variational ground state. Valid for any a_s above the collapse threshold;
/// throws NonConvergence when no stationary state exists.
Vec3 equilibrium_widths(const TrapFrequencies& trap, double atoms0, double scattering_length,
                        const SpeciesParams& species);

GaussianModel<double> si_model(const VariationalConfig& cfg);

struct SecondOrderDerivative {
  Vec3 width_rate;
  Vec3 width_accel;
  double atoms_rate;
};

struct FirstOrderDerivative {
  Vec3 width_rate;
  Vec3 beta_rate;
  double atoms_rate;
};

SecondOrderDerivative rhs_second_order(const VariationalState& s, const VariationalConfig& cfg);
FirstOrderDerivative rhs_first_order(const BetaState& s, const VariationalConfig& cfg);

/// beta_r that makes the first-order width rate equal to `width_rate`.
Vec3 beta_for_width_rate(const Vec3& width, const Vec3& width_rate, double atoms, const VariationalConfig& cfg);
Vec3 width_rate_of(const BetaState& s, const VariationalConfig& cfg);

VariationalState initial_state(const VariationalConfig& cfg);

/// Which times the integrator reports.
struct SamplingPlan {
  std::vector<double> times;  // ascending, within (0, t_end]
  /// Every accepted step inside [dense_begin, dense_end] is subdivided into
  /// `substeps` samples; 0 disables.
  double dense_begin = 0.0;
  double dense_end = -1.0;
  int substeps = 0;

  static SamplingPlan uniform(double t_end, int n);
};

struct IntegrationResult {
  std::vector<VariationalState> states;
  bool collapsed = false;
  double collapse_time = 0.0;
  double collapse_width = 0.0;
};

/// Adaptive integration of the ansatz equations from the configured initial state.
/// Stops at the first sample or step with a width below cfg.collapse_floor and
/// keeps the samples taken before it.
IntegrationResult integrate_partial(const VariationalConfig& cfg, double t_end, const SamplingPlan& plan);

/// As integrate_partial, but throws CollapseDetected on collapse.
std::vector<VariationalState> integrate(const VariationalConfig& cfg, double t_end, const SamplingPlan& plan);

/// Same dynamics in the first-order (width, beta) form.
std::vector<BetaState> integrate_first_order(const VariationalConfig& cfg, double t_end,
                                             const std::vector<double>& times);

/// |psi_0|^2 at (x, y, z) relative to the centre of mass (atoms/m^3).
template <typename Scalar>
Scalar ansatz_density(const VariationalState& s, Scalar x, Scalar y, Scalar z) {
  using std::exp;
  const double peak = s.atoms / (std::pow(constants::pi, 1.5) * s.width.prod());
  return peak * exp(-(x * x / (s.width(0) * s.width(0)) + y * y / (s.width(1) * s.width(1)) +
                      z * z / (s.width(2) * s.width(2))));
}

inline double ansatz_peak_density(const VariationalState& s) {
  return s.atoms / (std::pow(constants::pi, 1.5) * s.width.prod());
}

/// Ansatz density on an (x, y) grid in the plane a distance `dz` from the
/// centre of mass (plane minus CoM). Rows index x, columns y.
Eigen::ArrayXXd slice_density_at_plane(const VariationalState& s, double dz, const Eigen::ArrayXd& xs,
                                       const Eigen::ArrayXd& ys);

/// Column density (integrated along z) on an (x, y) grid (atoms/m^2).
Eigen::ArrayXXd column_density(const VariationalState& s, const Eigen::ArrayXd& xs, const Eigen::ArrayXd& ys);

struct WidthMinimum {
  double height;  // above the plane (m)
  double width;
  double t;
};

struct WidthCurve {
  std::vector<double> height;  // z0 - z(t)
  std::vector<double> width_x;
  std::vector<double> t;
  std::vector<WidthMinimum> minima;  // interior local minima, by descending height
  bool has_focus = false;
  WidthMinimum focus{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN()};
};

/// W_x against the lab height of the centre of mass; the focal plane is the
/// lowest interior minimum.
WidthCurve width_vs_z(const std::vector<VariationalState>& trajectory, const Kinematics& kin);

} // namespace becfocus
