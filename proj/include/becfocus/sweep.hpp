#pragma once

#include "becfocus/config.hpp"
#include "becfocus/deposition.hpp"
#include "becfocus/gpe.hpp"
#include "becfocus/variational.hpp"

#include <optional>
#include <string>
#include <vector>

namespace becfocus {

/// One point of the sweep grid; `power` is in the config's power unit.
struct SweepPoint {
  double scattering_a0 = 100.0;
  double power = 1.0;
  double kick = 0.0;  // hbar k_L
  ModelSelect model = ModelSelect::Variational;  // Variational or Gpe

  bool operator==(const SweepPoint& o) const = default;
};

/// Optics calibration shared by every model at one kick.
struct PowerCalibration {
  double kick = 0.0;
  double xi = 0.0;
  std::string xi_source;  // "ballistic", "uniform" or "config"
  double power_opt = 0.0;       // W
  double kinetic_energy = 0.0;  // J, at the beam centre
  double kick_velocity = 0.0;   // m/s
  double plane_speed = 0.0;     // m/s
};

PowerCalibration calibrate_power(const RunConfig& cfg, double kick);

/// One results-table row. Lengths in m, densities in atoms/m^2, power in W.
/// Undefined quantities (no focus, collapse) are NaN.
struct ResultRow {
  std::string run_id;
  std::string model;
  double scattering_a0 = 0.0;
  double kick = 0.0;
  double power = 0.0;
  double power_rel = 0.0;  // P / P_opt
  double xi = 0.0;
  double z_f = 0.0;
  double fwhm_x = 0.0;
  double fwhm_y = 0.0;
  double peak = 0.0;
  double inst_fwhm_x = 0.0;
  double inst_peak = 0.0;
  double loss_fraction = 0.0;
  double atoms_end = 0.0;
  /// "ok", "no_focus", "collapse" or "error"; details follow after ':'.
  std::string status = "ok";
  double wall_time = 0.0;  // s; kept out of the results table

  bool failed() const { return status.rfind("error", 0) == 0; }
};

/// Fixed column order of results.csv.
const std::vector<std::string>& result_columns();

/// Everything computed for one point, for recipes and artifact writers.
struct PointResult {
  SweepPoint point;
  PowerCalibration calibration;
  ResultRow row;
  VariationalConfig model_config;
  std::vector<VariationalState> trajectory;  // variational: through the focal region
  WidthCurve curve;
  std::optional<DepositMap> deposit;
  Eigen::ArrayXd cut_xpos, cut_x;  // deposit cut through the peak along x
  std::optional<InstantProfile> instant;  // variational only
  std::vector<GpeObservation> gpe_series;
  std::optional<ComplexField3D> gpe_final;
  std::vector<std::string> warnings;
};

std::string make_run_id(const SweepPoint& p);

/// Evaluates one point; physics failures are recorded in row.status.
PointResult evaluate_point(const RunConfig& cfg, const SweepPoint& point, const PowerCalibration& cal);

/// Cartesian product of the sweep axes, one point per model, in table order.
std::vector<SweepPoint> sweep_points(const RunConfig& cfg);

/// Calibrates, evaluates and writes the point's artifacts and manifest to cfg.output_dir.
ResultRow run_single(const RunConfig& cfg, const SweepPoint& point);

struct SweepResult {
  std::vector<PointResult> points;  // sorted by (a_s, P, kick, model)
  std::vector<ResultRow> rows() const;
  bool partial_failure() const;
};

/// Runs every point on a bounded worker pool. When `write` is set, results,
/// manifest and per-point artifacts go to cfg.output_dir.
SweepResult run_sweep(const RunConfig& cfg, bool write = true);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_results_json(const std::string& path, const std::vector<ResultRow>& rows);
void write_timings_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

/// (t, z, W_x, W_y, W_z, N) with z the height of the centre of mass above the plane.
void write_trajectory_csv(const std::string& path, const std::vector<VariationalState>& states, const Kinematics& kin);
void write_observer_csv(const std::string& path, const std::vector<GpeObservation>& series, const Kinematics& kin);

/// Resolved config, derived constants per point and library versions.
void write_manifest(const std::string& path, const RunConfig& cfg, const std::vector<PointResult>& points);

} // namespace becfocus
