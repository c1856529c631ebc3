#pragma once

#include "becfocus/physics.hpp"

#include <vector>

namespace becfocus {

/// Laser focusing potential: a harmonic transverse profile (node at x = 0)
/// with a Gaussian envelope of 1/e^2 radius sigma_z along the fall axis.
///
/// The beam stores power; peak intensity is derived (I0 = 8P / (pi sigma_z^2)).
struct FocusingBeam {
  double power = 0.0;            // W
  double sigma_z = 100e-6;       // m
  double harmonic_k = 2.01384e4; // 1/m
  double detuning = 2.0 * constants::pi * 200e9;  // s^-1 (angular), > 0 is blue

  double peak_intensity() const { return 8.0 * power / (constants::pi * sigma_z * sigma_z); }
  static FocusingBeam from_peak_intensity(double I0, double sigma_z, double k, double detuning);
  FocusingBeam with_power(double p) const {
    FocusingBeam b = *this;
    b.power = p;
    return b;
  }
  void validate() const;
};

/// Centre-of-mass kinematics of the falling cloud, z(t) = g t^2 / 2 + v0 t.
struct Kinematics {
  double v0 = 0.0;  // m/s, downward
  double g = constants::standard_gravity;
  double z0 = 500e-6;  // m, drop height above the beam centre / surface

  double fallen(double t) const { return 0.5 * g * t * t + v0 * t; }
  double velocity(double t) const { return v0 + g * t; }
  /// Height of the centre of mass above the surface plane.
  double height(double t) const { return z0 - fallen(t); }
  /// Time at which the centre of mass has fallen distance d.
  double time_to_fall(double d) const;
  double plane_crossing_time() const { return time_to_fall(z0); }
  double plane_speed() const;
  void validate() const;
};

double beam_intensity(double x, double z, const FocusingBeam& beam);

/// s = gamma^2/(gamma^2 + 4 Delta^2) * I / I_s.
double saturation_parameter(double intensity, const FocusingBeam& beam, const SpeciesParams& species);

double envelope_f(double t, const Kinematics& kin, double sigma_z);

/// Logarithmic dipole potential in the falling frame.
double dipole_potential_exact(double x, double t, const FocusingBeam& beam, const Kinematics& kin,
                              const SpeciesParams& species);

/// Peak (f = 1) squared transverse trap frequency of the harmonic approximation.
double harmonic_frequency_sq_peak(const FocusingBeam& beam, const SpeciesParams& species);

/// omega_x^2(t) of the harmonic approximation, including the envelope f(t).
double harmonic_frequency_sq(double t, const FocusingBeam& beam, const Kinematics& kin,
                             const SpeciesParams& species);

/// Kinetic energy of an atom crossing the beam centre (m v^2 / 2).
double kinetic_energy_at_plane(const Kinematics& kin, const SpeciesParams& species);

/// Power that focuses classical rays of kinetic energy E0 for coefficient xi.
double optimal_power(double E0, double xi, const FocusingBeam& beam, const SpeciesParams& species);

/// How the longitudinal coordinate advances in classical ray tracing.
enum class LongitudinalModel {
  /// z(t) = g t^2/2 + v0 t, the actual free fall.
  Ballistic,
  /// Constant speed equal to the speed at the beam centre (fixed E0 lens).
  Uniform,
};

struct TrajectoryPoint {
  double t;
  double x;
  double vx;
  double z;  // height above the plane (positive before crossing)
};

struct TrajectoryOptions {
  LongitudinalModel model = LongitudinalModel::Ballistic;
  double rel_tol = 1e-10;
  /// Continue this far below the plane (m); 0 stops at the plane.
  double depth_past_plane = 0.0;
  /// Freeze the envelope at f = 1 (energy audit).
  bool frozen_envelope = false;
  /// Override for the integration length (s); used with frozen_envelope.
  double duration = 0.0;
  int samples = 201;
};

/// Classical transverse ray through the harmonic focusing potential.
std::vector<TrajectoryPoint> classical_trajectory(double x0, double vx0, const FocusingBeam& beam,
                                                  const Kinematics& kin, const SpeciesParams& species,
                                                  const TrajectoryOptions& opts = {});

/// Final transverse offset when the particle reaches the plane.
double ray_offset_at_plane(double x0, const FocusingBeam& beam, const Kinematics& kin,
                           const SpeciesParams& species, LongitudinalModel model);

/// Height (above the plane; negative = below) where a ray from x0 first crosses x = 0.
/// Returns NaN when no crossing happens within `search_depth` below the plane.
double axis_crossing_height(double x0, const FocusingBeam& beam, const Kinematics& kin,
                            const SpeciesParams& species, LongitudinalModel model, double search_depth);

struct XiCalibrationOptions {
  LongitudinalModel model = LongitudinalModel::Uniform;
  /// Initial transverse offsets; empty means 21 points uniform in [-half_width, half_width].
  std::vector<double> offsets;
  double half_width = 19.6e-6;
  double xi_min = 0.5;
  double xi_max = 20.0;
  double tolerance = 1e-3;
};

struct XiCalibration {
  double xi;
  double rms_offset;  // objective at the optimum (m)
  int evaluations;
};

/// RMS |x| at the plane over the ensemble when the beam carries optimal_power(E0, xi).
double focus_objective(double xi, const Kinematics& kin, const FocusingBeam& beam_template,
                       const SpeciesParams& species, const XiCalibrationOptions& opts);

/// Scalar minimisation of the ensemble RMS spot over xi in [xi_min, xi_max].
/// Throws DomainError for degenerate ensembles and NonConvergence when no
/// interior minimum is bracketed.
XiCalibration calibrate_xi(const Kinematics& kin, const FocusingBeam& beam_template,
                           const SpeciesParams& species, const XiCalibrationOptions& opts = {});

} // namespace becfocus
