#include "becfocus/sweep.hpp"

#include "becfocus/errors.hpp"
#include "becfocus/grid_io.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace becfocus {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string full(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string short_model(ModelSelect m) { return m == ModelSelect::Gpe ? "gpe" : "var"; }

int model_rank(ModelSelect m) { return m == ModelSelect::Gpe ? 1 : 0; }

double point_power(const RunConfig& cfg, const SweepPoint& p, const PowerCalibration& cal) {
  return cfg.power_unit == PowerUnit::Relative ? p.power * cal.power_opt : p.power;
}

Kinematics point_kinematics(const RunConfig& cfg, double kick) {
  Kinematics k = cfg.kin;
  k.v0 = kick_velocity(kick, cfg.species);
  return k;
}

VariationalConfig model_config(const RunConfig& cfg, const SweepPoint& p, const PowerCalibration& cal) {
  VariationalConfig v;
  v.species = cfg.species;
  v.scattering_length = p.scattering_a0 * cfg.species.bohr_radius;
  v.initial_scattering_length = (cfg.quench ? cfg.initial_scattering_a0 : p.scattering_a0) * cfg.species.bohr_radius;
  v.trap = cfg.trap;
  v.atoms0 = cfg.atoms0;
  v.beam = cfg.beam.with_power(point_power(cfg, p, cal));
  v.kin = point_kinematics(cfg, p.kick);
  v.rel_tol = cfg.rel_tol;
  v.collapse_floor = cfg.collapse_floor;
  v.loss_multiplier = cfg.loss_multiplier;
  if (cfg.initial_widths == InitialWidths::Equilibrium) {
    v.initial_width = equilibrium_widths(v.trap, v.atoms0, v.initial_scattering_length, v.species);
  }
  return v;
}

/// Integration window for the width curve: until the centre of mass is
/// 1.5 sigma_z below the plane, densely sampled while inside the beam.
IntegrationResult width_curve_run(const VariationalConfig& vc) {
  const Kinematics& kin = vc.kin;
  const double reach = 1.5 * vc.beam.sigma_z;
  const double t_end = kin.time_to_fall(kin.z0 + reach);
  SamplingPlan plan = SamplingPlan::uniform(t_end, 4000);
  plan.times.push_back(kin.plane_crossing_time());
  std::sort(plan.times.begin(), plan.times.end());
  plan.dense_begin = kin.z0 > reach ? kin.time_to_fall(kin.z0 - reach) : 0.0;
  plan.dense_end = t_end;
  plan.substeps = 4;
  return integrate_partial(vc, t_end, plan);
}

std::string collapse_status(double t, double w) {
  return "collapse: width " + num(w) + " m at t=" + num(t) + " s";
}

void run_variational(const RunConfig& cfg, PointResult& out) {
  const VariationalConfig& vc = out.model_config;
  const Kinematics& kin = vc.kin;
  ResultRow& row = out.row;
  const double t_star = kin.plane_crossing_time();

  IntegrationResult curve_run = width_curve_run(vc);
  out.trajectory = std::move(curve_run.states);
  out.curve = width_vs_z(out.trajectory, kin);
  row.z_f = out.curve.has_focus ? out.curve.focus.height : nan;
  if (!out.trajectory.empty() && out.trajectory.back().t >= t_star) {
    out.instant = instantaneous_profile(out.trajectory, kin, cfg.atoms0, t_star);
    row.inst_fwhm_x = out.instant->stats.fwhm_x;
    row.inst_peak = out.instant->stats.peak;
  }

  DepositOptions dopts;
  if (cfg.deposit_plane == DepositPlane::Focus && out.curve.has_focus) dopts.plane_height = out.curve.focus.height;
  try {
    VariationalDeposit dep = deposit_variational(vc, dopts);
    row.fwhm_x = dep.stats.fwhm_x;
    row.fwhm_y = dep.stats.fwhm_y;
    row.peak = dep.stats.peak;
    row.loss_fraction = dep.stats.loss_fraction;
    row.atoms_end = dep.trajectory.back().atoms;
    out.cut_xpos = dep.cut_xpos;
    out.cut_x = dep.cut_x;
    out.deposit = std::move(dep.map);
  } catch (const CollapseDetected& e) {
    row.status = collapse_status(e.time, e.min_width);
    row.atoms_end = out.trajectory.empty() ? nan : out.trajectory.back().atoms;
    row.loss_fraction = 1.0 - row.atoms_end / cfg.atoms0;
    return;
  }
  if (curve_run.collapsed) {
    row.status = collapse_status(curve_run.collapse_time, curve_run.collapse_width);
  } else if (!out.curve.has_focus) {
    row.status = "no_focus";
  }
}

void run_gpe(const RunConfig& cfg, PointResult& out) {
  const SpeciesParams& sp = cfg.species;
  ResultRow& row = out.row;
  VariationalConfig vc = out.model_config;
  const Kinematics& kin = vc.kin;
  const double t_star = kin.plane_crossing_time();

  GroundStateOptions go;
  go.trap = cfg.trap;
  go.scattering_length = vc.initial_scattering_length;
  go.atoms = cfg.atoms0;
  go.grid = cfg.gpe.grid;
  go.tol = cfg.gpe.ground_state_tol;
  go.species = sp;
  const GroundState gs = ground_state_imaginary_time(go);
  const Vec3 w0 = observables(gs.field).rms * std::sqrt(2.0);
  cfg.gpe.grid.validate_resolution(w0);

  // Variational guide started from the same widths: sets the run length,
  // the observation windows and the lab-frame deposit grid.
  vc.initial_width = w0;
  IntegrationResult guide_curve = width_curve_run(vc);
  const WidthCurve gc = width_vs_z(guide_curve.states, kin);
  DepositOptions dopts;
  if (cfg.deposit_plane == DepositPlane::Focus && gc.has_focus) dopts.plane_height = gc.focus.height;
  Kinematics plane_kin = kin;
  plane_kin.z0 -= dopts.plane_height;
  const VariationalDeposit guide = deposit_variational(vc, dopts);
  const InstantProfile guide_inst = instantaneous_profile(guide_curve.states, kin, cfg.atoms0, t_star);

  double t_end = guide.map.t_end;
  std::vector<double> times;
  const int n_uniform = cfg.gpe.observations;
  for (int i = 1; i <= n_uniform; ++i) times.push_back(t_end * i / n_uniform);
  const int n_focus = cfg.gpe.focus_observations;
  if (gc.has_focus && n_focus > 0) {
    // Sample across many Rayleigh-like times m W^2 / hbar around the guide's focus.
    const double tau = sp.mass * gc.focus.width * gc.focus.width / (2.0 * constants::hbar);
    const double half = 30.0 * tau;
    t_end = std::max(t_end, gc.focus.t + half);
    for (int i = 0; i < n_focus; ++i) times.push_back(gc.focus.t - half + 2.0 * half * (i + 0.5) / n_focus);
  }
  const double t_cross_begin = guide.trajectory.front().t;
  for (int i = 0; i < n_focus; ++i) {
    times.push_back(t_cross_begin + (guide.map.t_end - t_cross_begin) * (i + 0.5) / n_focus);
  }
  times.push_back(t_star);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  times.erase(std::remove_if(times.begin(), times.end(), [&](double t) { return !(t > 0.0 && t <= t_end); }),
              times.end());

  GpeProblem prob;
  prob.species = sp;
  prob.scattering_length = vc.scattering_length;
  prob.loss_multiplier = cfg.loss_multiplier;
  prob.omega_sq = vc.beam.power > 0.0 ? focusing_schedule(vc.beam, kin, sp) : FrequencySchedule{};
  const ScalingFrame frame = cfg.gpe.scaling_frame
                                 ? ScalingFrame::gaussian(w0, cfg.atoms0, vc.scattering_length, sp,
                                                          prob.omega_sq ? prob.omega_sq : static_trap({0, 0, 0}), t_end)
                                 : ScalingFrame();

  GpeSliceCollector collector(plane_kin, guide.map.grid);
  InstantProfile inst;
  inst.grid = guide_inst.grid;
  bool have_inst = false;
  EvolveOptions eo;
  eo.t_end = t_end;
  eo.observe_at = times;
  eo.controller.dt = 1e-6;
  eo.controller.max_dt = 1e-4;
  eo.controller.rel_tol = cfg.gpe.rel_tol;
  eo.frame = &frame;
  eo.absorbing_width = cfg.gpe.absorbing_width;
  eo.observer = [&](const GpeSnapshot& snap) {
    collector(snap);
    if (!have_inst && std::abs(snap.observation.t - t_star) <= 1e-12 * t_star) {
      const GridSpec& g = snap.field.grid;
      Eigen::ArrayXXd col = Eigen::ArrayXXd::Zero(g.n[0], g.n[1]);
      for (int i = 0; i < g.n[0]; ++i) {
        for (int j = 0; j < g.n[1]; ++j) {
          double s = 0.0;
          for (int k = 0; k < g.n[2]; ++k) s += std::norm(snap.field(i, j, k));
          col(i, j) = s * g.spacing(2);
        }
      }
      const FrameSample& f = snap.frame;
      col /= f.lambda(0) * f.lambda(1);
      inst.column = resample(col, g.axis(0) * f.lambda(0), g.axis(1) * f.lambda(1), inst.grid);
      inst.state.t = t_star;
      inst.state.atoms = snap.observation.lab.norm;
      have_inst = true;
    }
  };

  GpeSolver solver(gs.field.grid, prob);
  EvolveResult res = solver.evolve(gs.field, eo);
  out.gpe_series = res.series;
  out.warnings = res.warnings;

  std::size_t best = 0;
  for (std::size_t i = 1; i < res.series.size(); ++i) {
    if (res.series[i].lab.rms(0) < res.series[best].lab.rms(0)) best = i;
  }
  const bool interior = best > 0 && best + 1 < res.series.size();
  row.z_f = interior ? kin.height(res.series[best].t) : nan;

  // Deposit over the same window as the variational model.
  std::vector<DensitySlice> slices;
  for (const auto& s : collector.slices()) {
    if (s.t <= guide.map.t_end) slices.push_back(s);
  }
  double atoms_at_end = cfg.atoms0;
  for (const auto& o : res.series) {
    if (o.t <= guide.map.t_end) atoms_at_end = o.lab.norm;
  }
  out.deposit = accumulate_deposit(collector.grid(), slices, plane_kin.plane_speed(), "gpe");
  row.atoms_end = atoms_at_end;
  row.loss_fraction = 1.0 - atoms_at_end / cfg.atoms0;
  std::vector<std::string> problems;
  try {
    const ProfileStats st = profile_stats(*out.deposit, cfg.atoms0, atoms_at_end);
    row.fwhm_x = st.fwhm_x;
    row.fwhm_y = st.fwhm_y;
    row.peak = st.peak;
    const Eigen::ArrayXXd d = out.deposit->density();
    Eigen::Index pi, pj;
    d.maxCoeff(&pi, &pj);
    out.cut_xpos = out.deposit->grid.axis(0);
    out.cut_x = d.col(pj);
  } catch (const std::exception& e) {
    row.fwhm_x = row.fwhm_y = row.peak = nan;
    problems.push_back(std::string("deposit: ") + e.what());
  }
  if (have_inst) {
    try {
      inst.stats = profile_stats(inst.column, inst.grid, cfg.atoms0, inst.state.atoms);
      row.inst_fwhm_x = inst.stats.fwhm_x;
      row.inst_peak = inst.stats.peak;
    } catch (const std::exception& e) {
      problems.push_back(std::string("instantaneous: ") + e.what());
    }
    out.instant = std::move(inst);
  }
  out.gpe_final = std::move(res.field);
  if (!problems.empty()) {
    row.status = "error: " + problems.front();
  } else if (!interior) {
    row.status = "no_focus";
  }
  if (!out.warnings.empty()) row.status += (row.status.find(':') == std::string::npos ? ": " : "; ") + out.warnings.front();
}

void write_point_artifacts(const RunConfig& cfg, const PointResult& p) {
  const fs::path dir = fs::path(cfg.output_dir) / "points" / p.row.run_id;
  fs::create_directories(dir);
  if (cfg.write_trajectory && !p.trajectory.empty()) {
    write_trajectory_csv((dir / "trajectory.csv").string(), p.trajectory, p.model_config.kin);
  }
  if (!p.gpe_series.empty()) {
    write_observer_csv((dir / "observer.csv").string(), p.gpe_series, p.model_config.kin);
  }
  if (cfg.write_trajectory && p.gpe_final) write_field((dir / "checkpoint.bin").string(), *p.gpe_final);
  if (cfg.write_deposit && p.deposit) {
    write_deposit_csv((dir / "deposit.csv").string(), *p.deposit);
    write_deposit((dir / "deposit.bin").string(), *p.deposit);
  }
}

void write_all(const RunConfig& cfg, const std::vector<PointResult>& points) {
  fs::create_directories(cfg.output_dir);
  std::vector<ResultRow> rows;
  for (const auto& p : points) {
    rows.push_back(p.row);
    write_point_artifacts(cfg, p);
  }
  const fs::path dir(cfg.output_dir);
  write_results_csv((dir / "results.csv").string(), rows);
  write_results_json((dir / "results.json").string(), rows);
  write_timings_csv((dir / "timings.csv").string(), rows);
  write_manifest((dir / "manifest.json").string(), cfg, points);
}

json config_json(const RunConfig& c) {
  const double two_pi = 2.0 * constants::pi;
  json j;
  j["species"] = {{"mass", c.species.mass},
                  {"bohr_radius", c.species.bohr_radius},
                  {"linewidth", c.species.linewidth},
                  {"saturation_intensity", c.species.saturation_intensity},
                  {"three_body_K", c.species.three_body_K}};
  j["trap"] = {{"frequency_x", c.trap.x / two_pi},
               {"frequency_y", c.trap.y / two_pi},
               {"frequency_z", c.trap.z / two_pi},
               {"atoms", c.atoms0},
               {"scattering_length_a0", c.initial_scattering_a0},
               {"quench", c.quench},
               {"initial_widths", to_string(c.initial_widths)}};
  j["beam"] = {{"sigma_z", c.beam.sigma_z},
               {"harmonic_k", c.beam.harmonic_k},
               {"detuning", c.beam.detuning},
               {"power_reference", to_string(c.power_reference)},
               {"xi", c.xi}};
  j["kinematics"] = {{"z0", c.kin.z0}, {"g", c.kin.g}};
  j["model"] = {{"select", to_string(c.model)},
                {"rel_tol", c.rel_tol},
                {"collapse_floor", c.collapse_floor},
                {"loss_multiplier", c.loss_multiplier},
                {"deposit_plane", to_string(c.deposit_plane)}};
  j["sweep"] = {{"scattering_length_a0", c.scattering_a0},
                {"power", c.powers},
                {"power_unit", c.power_unit == PowerUnit::Relative ? "relative" : "watt"},
                {"kick", c.kicks}};
  j["gpe"] = {{"nx", c.gpe.grid.n[0]},
              {"ny", c.gpe.grid.n[1]},
              {"nz", c.gpe.grid.n[2]},
              {"extent_x", c.gpe.grid.extent(0)},
              {"extent_y", c.gpe.grid.extent(1)},
              {"extent_z", c.gpe.grid.extent(2)},
              {"rel_tol", c.gpe.rel_tol},
              {"ground_state_tol", c.gpe.ground_state_tol},
              {"frame", c.gpe.scaling_frame ? "scaling" : "plain"},
              {"observations", c.gpe.observations},
              {"focus_observations", c.gpe.focus_observations},
              {"absorbing_width", c.gpe.absorbing_width}};
  j["output"] = {{"directory", c.output_dir},
                 {"workers", c.workers},
                 {"trajectory", c.write_trajectory},
                 {"deposit", c.write_deposit}};
  return j;
}

} // namespace

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols{
      "run_id",  "model",         "a_s_a0",   "kick_hbark",   "power_W",  "power_rel",
      "xi",      "z_f_m",         "fwhm_x_m", "fwhm_y_m",     "peak_atoms_per_m2",
      "inst_fwhm_x_m", "inst_peak_atoms_per_m2", "loss_fraction", "N_end", "status"};
  return cols;
}

PowerCalibration calibrate_power(const RunConfig& cfg, double kick) {
  PowerCalibration c;
  c.kick = kick;
  const Kinematics kin = point_kinematics(cfg, kick);
  c.kick_velocity = kin.v0;
  c.plane_speed = kin.plane_speed();
  c.kinetic_energy = kinetic_energy_at_plane(kin, cfg.species);
  if (cfg.power_reference == PowerReference::Ballistic) {
    XiCalibrationOptions opts;
    opts.model = LongitudinalModel::Ballistic;
    c.xi = calibrate_xi(kin, cfg.beam, cfg.species, opts).xi;
    c.xi_source = "ballistic";
  } else if (cfg.xi > 0.0) {
    c.xi = cfg.xi;
    c.xi_source = "config";
  } else {
    c.xi = calibrate_xi(kin, cfg.beam, cfg.species).xi;
    c.xi_source = "uniform";
  }
  c.power_opt = optimal_power(c.kinetic_energy, c.xi, cfg.beam, cfg.species);
  return c;
}

std::string make_run_id(const SweepPoint& p) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s_as%g_p%g_k%g", short_model(p.model).c_str(), p.scattering_a0, p.power, p.kick);
  return buf;
}

std::vector<SweepPoint> sweep_points(const RunConfig& cfg) {
  std::vector<ModelSelect> models;
  if (cfg.model != ModelSelect::Gpe) models.push_back(ModelSelect::Variational);
  if (cfg.model != ModelSelect::Variational) models.push_back(ModelSelect::Gpe);
  std::vector<SweepPoint> pts;
  for (double a : cfg.scattering_a0) {
    for (double p : cfg.powers) {
      for (double k : cfg.kicks) {
        for (ModelSelect m : models) pts.push_back({a, p, k, m});
      }
    }
  }
  std::sort(pts.begin(), pts.end(), [](const SweepPoint& x, const SweepPoint& y) {
    return std::make_tuple(x.scattering_a0, x.power, x.kick, model_rank(x.model)) <
           std::make_tuple(y.scattering_a0, y.power, y.kick, model_rank(y.model));
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

PointResult evaluate_point(const RunConfig& cfg, const SweepPoint& point, const PowerCalibration& cal) {
  const auto start = std::chrono::steady_clock::now();
  PointResult out;
  out.point = point;
  out.calibration = cal;
  ResultRow& row = out.row;
  row.run_id = make_run_id(point);
  row.model = point.model == ModelSelect::Gpe ? "gpe" : "variational";
  row.scattering_a0 = point.scattering_a0;
  row.kick = point.kick;
  row.power = point_power(cfg, point, cal);
  row.power_rel = row.power / cal.power_opt;
  row.xi = cal.xi;
  row.z_f = row.fwhm_x = row.fwhm_y = row.peak = row.inst_fwhm_x = row.inst_peak = nan;
  row.loss_fraction = row.atoms_end = nan;
  try {
    out.model_config = model_config(cfg, point, cal);
    if (point.model == ModelSelect::Gpe) {
      run_gpe(cfg, out);
    } else {
      run_variational(cfg, out);
    }
  } catch (const CollapseDetected& e) {
    row.status = collapse_status(e.time, e.min_width);
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ResultRow run_single(const RunConfig& cfg, const SweepPoint& point) {
  cfg.validate();
  const PowerCalibration cal = calibrate_power(cfg, point.kick);
  std::vector<PointResult> pts{evaluate_point(cfg, point, cal)};
  write_all(cfg, pts);
  return pts.front().row;
}

std::vector<ResultRow> SweepResult::rows() const {
  std::vector<ResultRow> r;
  for (const auto& p : points) r.push_back(p.row);
  return r;
}

bool SweepResult::partial_failure() const {
  return std::any_of(points.begin(), points.end(), [](const PointResult& p) { return p.row.failed(); });
}

SweepResult run_sweep(const RunConfig& cfg, bool write) {
  cfg.validate();
  const std::vector<SweepPoint> pts = sweep_points(cfg);

  std::vector<double> kicks = cfg.kicks;
  std::sort(kicks.begin(), kicks.end());
  kicks.erase(std::unique(kicks.begin(), kicks.end()), kicks.end());
  std::map<double, PowerCalibration> cals;
  std::map<double, std::string> cal_errors;
  for (double k : kicks) {
    try {
      cals.emplace(k, calibrate_power(cfg, k));
    } catch (const std::exception& e) {
      cal_errors.emplace(k, e.what());
    }
  }

  SweepResult result;
  result.points.resize(pts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pts.size(); i = next++) {
      const SweepPoint& p = pts[i];
      if (auto it = cal_errors.find(p.kick); it != cal_errors.end()) {
        PointResult r;
        r.point = p;
        r.row.run_id = make_run_id(p);
        r.row.model = p.model == ModelSelect::Gpe ? "gpe" : "variational";
        r.row.scattering_a0 = p.scattering_a0;
        r.row.kick = p.kick;
        r.row.power = r.row.power_rel = r.row.xi = r.row.z_f = r.row.fwhm_x = r.row.fwhm_y = nan;
        r.row.peak = r.row.inst_fwhm_x = r.row.inst_peak = r.row.loss_fraction = r.row.atoms_end = nan;
        r.row.status = "error: calibration: " + it->second;
        result.points[i] = std::move(r);
      } else {
        result.points[i] = evaluate_point(cfg, p, cals.at(p.kick));
      }
    }
  };
  unsigned n = cfg.workers > 0 ? unsigned(cfg.workers) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, unsigned(pts.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (write) write_all(cfg, result.points);
  return result;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  auto out = open_out(path);
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.run_id << ',' << r.model << ',' << num(r.scattering_a0) << ',' << num(r.kick) << ',' << num(r.power)
        << ',' << num(r.power_rel) << ',' << num(r.xi) << ',' << num(r.z_f) << ',' << num(r.fwhm_x) << ','
        << num(r.fwhm_y) << ',' << num(r.peak) << ',' << num(r.inst_fwhm_x) << ',' << num(r.inst_peak) << ','
        << num(r.loss_fraction) << ',' << num(r.atoms_end) << ',' << status << '\n';
  }
}

void write_results_json(const std::string& path, const std::vector<ResultRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"run_id", r.run_id},
                   {"model", r.model},
                   {"a_s_a0", jnum(r.scattering_a0)},
                   {"kick_hbark", jnum(r.kick)},
                   {"power_W", jnum(r.power)},
                   {"power_rel", jnum(r.power_rel)},
                   {"xi", jnum(r.xi)},
                   {"z_f_m", jnum(r.z_f)},
                   {"fwhm_x_m", jnum(r.fwhm_x)},
                   {"fwhm_y_m", jnum(r.fwhm_y)},
                   {"peak_atoms_per_m2", jnum(r.peak)},
                   {"inst_fwhm_x_m", jnum(r.inst_fwhm_x)},
                   {"inst_peak_atoms_per_m2", jnum(r.inst_peak)},
                   {"loss_fraction", jnum(r.loss_fraction)},
                   {"N_end", jnum(r.atoms_end)},
                   {"status", r.status}});
  }
  json doc = {{"columns", result_columns()}, {"rows", arr}};
  open_out(path) << doc.dump(2) << '\n';
}

void write_timings_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  auto out = open_out(path);
  out << "run_id,wall_time_s\n";
  for (const auto& r : rows) out << r.run_id << ',' << num(r.wall_time) << '\n';
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(in, line);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != result_columns().size()) throw std::runtime_error("malformed results row: " + line);
    auto d = [](const std::string& s) { return s == "nan" ? nan : std::stod(s); };
    ResultRow r;
    r.run_id = f[0];
    r.model = f[1];
    r.scattering_a0 = d(f[2]);
    r.kick = d(f[3]);
    r.power = d(f[4]);
    r.power_rel = d(f[5]);
    r.xi = d(f[6]);
    r.z_f = d(f[7]);
    r.fwhm_x = d(f[8]);
    r.fwhm_y = d(f[9]);
    r.peak = d(f[10]);
    r.inst_fwhm_x = d(f[11]);
    r.inst_peak = d(f[12]);
    r.loss_fraction = d(f[13]);
    r.atoms_end = d(f[14]);
    r.status = f[15];
    rows.push_back(r);
  }
  return rows;
}

void write_trajectory_csv(const std::string& path, const std::vector<VariationalState>& states,
                          const Kinematics& kin) {
  auto out = open_out(path);
  out << "t,z,W_x,W_y,W_z,N\n";
  for (const auto& s : states) {
    out << full(s.t) << ',' << full(kin.height(s.t)) << ',' << full(s.width(0)) << ',' << full(s.width(1)) << ','
        << full(s.width(2)) << ',' << full(s.atoms) << '\n';
  }
}

void write_observer_csv(const std::string& path, const std::vector<GpeObservation>& series, const Kinematics& kin) {
  auto out = open_out(path);
  out << "t,z,norm,rms_x,rms_y,rms_z,com_x,com_y,com_z,peak_density,lambda_x,lambda_y,lambda_z,outer_fraction\n";
  for (const auto& o : series) {
    out << full(o.t) << ',' << full(kin.height(o.t)) << ',' << full(o.lab.norm);
    for (int r = 0; r < 3; ++r) out << ',' << full(o.lab.rms(r));
    for (int r = 0; r < 3; ++r) out << ',' << full(o.lab.com(r));
    out << ',' << full(o.lab.peak_density);
    for (int r = 0; r < 3; ++r) out << ',' << full(o.frame.lambda(r));
    out << ',' << full(o.outer_fraction) << '\n';
  }
}

void write_manifest(const std::string& path, const RunConfig& cfg, const std::vector<PointResult>& points) {
  json pts = json::array();
  for (const auto& p : points) {
    const VariationalConfig& vc = p.model_config;
    json d = {{"run_id", p.row.run_id},
              {"xi", jnum(p.calibration.xi)},
              {"xi_source", p.calibration.xi_source},
              {"P_opt_W", jnum(p.calibration.power_opt)},
              {"P_W", jnum(p.row.power)},
              {"E0_J", jnum(p.calibration.kinetic_energy)},
              {"kick_velocity_m_s", jnum(p.calibration.kick_velocity)},
              {"v_at_plane_m_s", jnum(p.calibration.plane_speed)},
              {"t_plane_s", jnum(vc.kin.z0 > 0.0 ? vc.kin.plane_crossing_time() : nan)},
              {"status", p.row.status},
              {"warnings", p.warnings}};
    if (vc.beam.sigma_z > 0.0) {
      d["I0_W_m2"] = jnum(vc.beam.peak_intensity());
      d["omega_x_peak_sq"] = jnum(vc.beam.power > 0.0 ? harmonic_frequency_sq_peak(vc.beam, vc.species) : 0.0);
    }
    if (!p.trajectory.empty()) {
      const Vec3 w = p.trajectory.front().width;
      d["W0_m"] = {w(0), w(1), w(2)};
    } else if (p.row.status.rfind("error", 0) != 0 && p.point.model == ModelSelect::Variational) {
      const Vec3 w = initial_state(vc).width;
      d["W0_m"] = {w(0), w(1), w(2)};
    }
    if (!p.gpe_series.empty()) {
      const Vec3 w = p.gpe_series.front().lab.rms * std::sqrt(2.0);
      d["W0_m"] = {w(0), w(1), w(2)};
    }
    if (p.curve.has_focus) {
      json minima = json::array();
      for (const auto& m : p.curve.minima) minima.push_back({{"z_m", m.height}, {"W_x_m", m.width}, {"t_s", m.t}});
      d["width_minima"] = minima;
    }
    pts.push_back(d);
  }
  char fftw[64];
  std::snprintf(fftw, sizeof fftw, "%s", fftw_version);
  json doc = {{"config", config_json(cfg)},
              {"points", pts},
              {"versions",
               {{"becfocus", "1.0.0"},
                {"compiler", __VERSION__},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"boost", BOOST_LIB_VERSION},
                {"fftw", fftw},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  open_out(path) << doc.dump(2) << '\n';
}

} // namespace becfocus
