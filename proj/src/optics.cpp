#include "becfocus/optics.hpp"

#include "becfocus/errors.hpp"
#include "becfocus/ode.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace becfocus {

using constants::hbar;
using constants::pi;

FocusingBeam FocusingBeam::from_peak_intensity(double I0, double sigma_z, double k, double detuning) {
  FocusingBeam b;
  b.sigma_z = sigma_z;
  b.harmonic_k = k;
  b.detuning = detuning;
  b.power = I0 * pi * sigma_z * sigma_z / 8.0;
  return b;
}

void FocusingBeam::validate() const {
  if (!(sigma_z > 0.0)) throw ConfigError("beam: sigma_z must be > 0");
  if (!(harmonic_k > 0.0)) throw ConfigError("beam: harmonic_k must be > 0");
  if (!(power >= 0.0) || !std::isfinite(power)) throw ConfigError("beam: power must be >= 0");
  // Red detuning with an intensity node on axis is anti-confining.
  if (!(detuning > 0.0)) throw ConfigError("beam: detuning must be > 0 (blue) for a confining node");
}

double Kinematics::time_to_fall(double d) const {
  if (g == 0.0) return d / v0;
  return (-v0 + std::sqrt(v0 * v0 + 2.0 * g * d)) / g;
}

double Kinematics::plane_speed() const { return fall_velocity_at(z0, v0, g); }

void Kinematics::validate() const {
  if (!(g > 0.0)) throw ConfigError("kinematics: g must be > 0");
  if (!(z0 > 0.0)) throw ConfigError("kinematics: z0 must be > 0");
  if (!(v0 >= 0.0)) throw ConfigError("kinematics: v0 must be >= 0");
}

double beam_intensity(double x, double z, const FocusingBeam& beam) {
  const double kx = beam.harmonic_k * x;
  return beam.peak_intensity() * std::exp(-2.0 * z * z / (beam.sigma_z * beam.sigma_z)) * kx * kx;
}

double saturation_parameter(double intensity, const FocusingBeam& beam, const SpeciesParams& species) {
  const double g2 = species.linewidth * species.linewidth;
  return g2 / (g2 + 4.0 * beam.detuning * beam.detuning) * intensity / species.saturation_intensity;
}

double envelope_f(double t, const Kinematics& kin, double sigma_z) {
  const double h = kin.height(t);
  return std::exp(-2.0 * h * h / (sigma_z * sigma_z));
}

double dipole_potential_exact(double x, double t, const FocusingBeam& beam, const Kinematics& kin,
                              const SpeciesParams& species) {
  const double kx = beam.harmonic_k * x;
  const double s = saturation_parameter(beam.peak_intensity() * kx * kx * envelope_f(t, kin, beam.sigma_z),
                                        beam, species);
  return 0.5 * hbar * beam.detuning * std::log1p(s);
}

double harmonic_frequency_sq_peak(const FocusingBeam& beam, const SpeciesParams& species) {
  const double g2 = species.linewidth * species.linewidth;
  const double d = beam.detuning;
  return hbar * d * g2 * beam.harmonic_k * beam.harmonic_k / (species.mass * (g2 + 4.0 * d * d)) *
         beam.peak_intensity() / species.saturation_intensity;
}

double harmonic_frequency_sq(double t, const FocusingBeam& beam, const Kinematics& kin,
                             const SpeciesParams& species) {
  return harmonic_frequency_sq_peak(beam, species) * envelope_f(t, kin, beam.sigma_z);
}

double kinetic_energy_at_plane(const Kinematics& kin, const SpeciesParams& species) {
  const double v = kin.plane_speed();
  return 0.5 * species.mass * v * v;
}

double optimal_power(double E0, double xi, const FocusingBeam& beam, const SpeciesParams& species) {
  if (!(E0 > 0.0) || !(xi > 0.0)) throw DomainError("optimal_power: E0 and xi must be > 0");
  const double g2 = species.linewidth * species.linewidth;
  const double d = beam.detuning;
  return xi * pi / 4.0 * E0 / (hbar * d) * (g2 + 4.0 * d * d) / g2 * species.saturation_intensity /
         (beam.harmonic_k * beam.harmonic_k);
}

namespace {

// Ray integration in scaled units: x / length, t / duration.
struct RaySetup {
  double duration;
  double length;
  double omega2_peak;
  double speed;  // uniform model
};

double fallen_distance(double t, const Kinematics& kin, LongitudinalModel model, double speed) {
  return model == LongitudinalModel::Ballistic ? kin.fallen(t) : speed * t;
}

double end_time(const Kinematics& kin, LongitudinalModel model, double depth, double speed) {
  const double d = kin.z0 + depth;
  return model == LongitudinalModel::Ballistic ? kin.time_to_fall(d) : d / speed;
}

} // namespace

std::vector<TrajectoryPoint> classical_trajectory(double x0, double vx0, const FocusingBeam& beam,
                                                  const Kinematics& kin, const SpeciesParams& species,
                                                  const TrajectoryOptions& opts) {
  if (!std::isfinite(x0) || !std::isfinite(vx0)) throw DomainError("classical_trajectory: non-finite input");
  beam.validate();
  kin.validate();
  const double speed = kin.plane_speed();
  const double T = opts.frozen_envelope && opts.duration > 0.0
                       ? opts.duration
                       : end_time(kin, opts.model, opts.depth_past_plane, speed);
  const double w2 = harmonic_frequency_sq_peak(beam, species);
  const double L = std::abs(x0) + std::abs(vx0) * T + 1e-12;
  const double sigma2 = beam.sigma_z * beam.sigma_z;

  using V = ode::Vector<2>;
  auto rhs = [&](double s, const V& y) -> V {
    const double t = s * T;
    double f = 1.0;
    if (!opts.frozen_envelope) {
      const double h = kin.z0 - fallen_distance(t, kin, opts.model, speed);
      f = std::exp(-2.0 * h * h / sigma2);
    }
    V d;
    d << y(1), -w2 * f * T * T * y(0);
    return d;
  };

  ode::DenseIntegrator<2> integ(opts.rel_tol * 1e-3, opts.rel_tol);
  V y0;
  y0 << x0 / L, vx0 * T / L;
  integ.initialize(y0, 0.0, 1e-4);

  const int n = std::max(opts.samples, 2);
  std::vector<TrajectoryPoint> path;
  path.reserve(n);
  auto record = [&](double s, const V& y) {
    const double t = s * T;
    path.push_back({t, y(0) * L, y(1) * L / T, kin.z0 - fallen_distance(t, kin, opts.model, speed)});
  };
  record(0.0, y0);
  int next = 1;
  while (next < n) {
    const double target = static_cast<double>(next) / (n - 1);
    if (integ.time() < target) {
      integ.step(rhs);
      continue;
    }
    record(target, integ.state_at(target));
    ++next;
  }
  return path;
}

double ray_offset_at_plane(double x0, const FocusingBeam& beam, const Kinematics& kin,
                           const SpeciesParams& species, LongitudinalModel model) {
  TrajectoryOptions o;
  o.model = model;
  o.samples = 2;
  return classical_trajectory(x0, 0.0, beam, kin, species, o).back().x;
}

double axis_crossing_height(double x0, const FocusingBeam& beam, const Kinematics& kin,
                            const SpeciesParams& species, LongitudinalModel model, double search_depth) {
  TrajectoryOptions o;
  o.model = model;
  o.depth_past_plane = search_depth;
  o.samples = 4001;
  const auto path = classical_trajectory(x0, 0.0, beam, kin, species, o);
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i - 1].x * path[i].x <= 0.0 && path[i - 1].x != 0.0) {
      const double w = path[i - 1].x / (path[i - 1].x - path[i].x);
      return path[i - 1].z + w * (path[i].z - path[i - 1].z);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

std::vector<double> ensemble_offsets(const XiCalibrationOptions& opts) {
  if (!opts.offsets.empty()) return opts.offsets;
  std::vector<double> xs(21);
  for (int i = 0; i < 21; ++i) xs[i] = opts.half_width * (-1.0 + 2.0 * i / 20.0);
  return xs;
}

} // namespace

double focus_objective(double xi, const Kinematics& kin, const FocusingBeam& beam_template,
                       const SpeciesParams& species, const XiCalibrationOptions& opts) {
  const double P = optimal_power(kinetic_energy_at_plane(kin, species), xi, beam_template, species);
  const FocusingBeam beam = beam_template.with_power(P);
  double sum = 0.0;
  const auto xs = ensemble_offsets(opts);
  for (double x0 : xs) {
    const double x = ray_offset_at_plane(x0, beam, kin, species, opts.model);
    sum += x * x;
  }
  return std::sqrt(sum / static_cast<double>(xs.size()));
}

XiCalibration calibrate_xi(const Kinematics& kin, const FocusingBeam& beam_template,
                           const SpeciesParams& species, const XiCalibrationOptions& opts) {
  const auto xs = ensemble_offsets(opts);
  if (std::all_of(xs.begin(), xs.end(), [](double x) { return x == 0.0; })) {
    throw DomainError("calibrate_xi: degenerate ensemble, objective is identically zero");
  }
  int evaluations = 0;
  auto objective = [&](double xi) {
    ++evaluations;
    return focus_objective(xi, kin, beam_template, species, opts);
  };

  // Coarse scan; the first interior local minimum is the single-pass focus.
  constexpr int scan = 80;
  std::vector<double> grid(scan), values(scan);
  for (int i = 0; i < scan; ++i) {
    grid[i] = opts.xi_min + (opts.xi_max - opts.xi_min) * i / (scan - 1);
    values[i] = objective(grid[i]);
  }
  int best = -1;
  for (int i = 1; i + 1 < scan; ++i) {
    if (values[i] <= values[i - 1] && values[i] <= values[i + 1]) {
      best = i;
      break;
    }
  }
  if (best < 0) {
    throw NonConvergence("calibrate_xi: no bracketed minimum in [" + std::to_string(opts.xi_min) + ", " +
                         std::to_string(opts.xi_max) + "]");
  }
  std::uintmax_t max_iter = 200;
  const int bits = std::max(8, static_cast<int>(-std::log2(opts.tolerance * 1e-2)));
  const auto [xi, value] =
      boost::math::tools::brent_find_minima(objective, grid[best - 1], grid[best + 1], bits, max_iter);
  return {xi, value, evaluations};
}

} // namespace becfocus
