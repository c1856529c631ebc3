#include "becfocus/variational.hpp"

#include "becfocus/errors.hpp"
#include "becfocus/ode.hpp"

#include <algorithm>
#include <string>

namespace becfocus {

namespace {

using State7 = ode::Vector<7>;

struct Scaled {
  UnitScaling units;
  GaussianModel<double> model;
  double omega0;
};

Scaled scaled_model(const VariationalConfig& cfg) {
  const double w0 = cfg.trap.geometric_mean();
  UnitScaling units(cfg.species.mass, w0);
  const double l = units.length_unit();
  const double u = interaction_strength(cfg.scattering_length, cfg.species);
  GaussianModel<double> m{1.0, 1.0, u / (constants::hbar * w0 * l * l * l),
                          cfg.effective_K() / (w0 * std::pow(l, 6))};
  return {units, m, w0};
}

double omega2_scaled(double t_scaled, const VariationalConfig& cfg, const Scaled& sc) {
  if (cfg.beam.power == 0.0) return 0.0;
  const double t = sc.units.time_to_si(t_scaled);
  return harmonic_frequency_sq(t, cfg.beam, cfg.kin, cfg.species) / (sc.omega0 * sc.omega0);
}

void check_collapse(const Vec3& w_scaled, double t_scaled, const VariationalConfig& cfg, const Scaled& sc) {
  const double wmin = sc.units.length_to_si(w_scaled.minCoeff());
  if (wmin < cfg.collapse_floor) {
    const double t = sc.units.time_to_si(t_scaled);
    throw CollapseDetected(t, wmin,
                           "width " + std::to_string(wmin) + " m below collapse floor at t=" + std::to_string(t));
  }
}

} // namespace

void VariationalConfig::validate() const {
  species.validate();
  beam.validate();
  kin.validate();
  if (!(atoms0 > 0.0)) throw ConfigError("atom number must be positive");
  if (!(trap.x > 0.0 && trap.y > 0.0 && trap.z > 0.0)) throw ConfigError("trap frequencies must be positive");
  if (!(rel_tol > 0.0 && rel_tol <= 1e-8)) throw ConfigError("variational rel_tol must be in (0, 1e-8]");
  if (!(collapse_floor > 0.0)) throw ConfigError("collapse floor must be positive");
  if (!(loss_multiplier >= 0.0)) throw ConfigError("loss multiplier must be non-negative");
  if (!(initial_width.minCoeff() > 0.0) && !(initial_scattering_length > 0.0)) {
    throw DomainError("initial widths require a positive in-trap scattering length");
  }
}

Vec3 initial_widths(const TrapFrequencies& trap, double atoms0, double scattering_length,
                    const SpeciesParams& species) {
  if (!(scattering_length > 0.0)) {
    throw DomainError("Thomas-Fermi initial widths need a positive scattering length");
  }
  if (!(atoms0 > 0.0)) throw DomainError("atom number must be positive");
  const double w0 = trap.geometric_mean();
  const double l = std::sqrt(constants::hbar / (species.mass * w0));
  const double common = std::pow(2.0 / constants::pi, 0.1) * std::pow(atoms0 * scattering_length / l, 0.2) * l;
  const Vec3 omega = trap.as_vector();
  return (common * w0 * omega.cwiseInverse()).eval();
}

Vec3 equilibrium_widths(const TrapFrequencies& trap, double atoms0, double scattering_length,
                        const SpeciesParams& species) {
  if (!(atoms0 > 0.0)) throw DomainError("atom number must be positive");
  const double hm = constants::hbar / species.mass;
  const double c = interaction_strength(scattering_length, species) * atoms0 /
                   (species.mass * std::pow(2.0 * constants::pi, 1.5));
  const Vec3 omega = trap.as_vector();
  Vec3 w = (hm * omega.cwiseInverse()).cwiseSqrt();
  for (int it = 0; it < 10000; ++it) {
    Vec3 next;
    for (int r = 0; r < 3; ++r) {
      const double w4 = (hm * hm + c * w(r) * w(r) / w.prod()) / (omega(r) * omega(r));
      if (!(w4 > 0.0)) throw NonConvergence("no stationary Gaussian state (attraction too strong)");
      next(r) = 0.5 * (w(r) + std::pow(w4, 0.25));
    }
    const double change = ((next - w).array().abs() / w.array()).maxCoeff();
    w = next;
    if (change < 1e-14) return w;
  }
  throw NonConvergence("equilibrium widths did not converge");
}

GaussianModel<double> si_model(const VariationalConfig& cfg) {
  return {constants::hbar, cfg.species.mass, interaction_strength(cfg.scattering_length, cfg.species),
          cfg.effective_K()};
}

SecondOrderDerivative rhs_second_order(const VariationalState& s, const VariationalConfig& cfg) {
  if (!(s.width.allFinite() && s.width_rate.allFinite() && std::isfinite(s.atoms) && std::isfinite(s.t))) {
    throw DomainError("non-finite variational state");
  }
  const double omega2 = cfg.beam.power == 0.0 ? 0.0 : harmonic_frequency_sq(s.t, cfg.beam, cfg.kin, cfg.species);
  const auto d = second_order_terms<double>(s.width, s.atoms, omega2, si_model(cfg));
  return {s.width_rate, d.accel, d.atoms_rate};
}

FirstOrderDerivative rhs_first_order(const BetaState& s, const VariationalConfig& cfg) {
  if (!(s.width.allFinite() && s.beta.allFinite() && std::isfinite(s.atoms) && std::isfinite(s.t))) {
    throw DomainError("non-finite variational state");
  }
  const auto m = si_model(cfg);
  const double omega2 = cfg.beam.power == 0.0 ? 0.0 : harmonic_frequency_sq(s.t, cfg.beam, cfg.kin, cfg.species);
  const auto d = second_order_terms<double>(s.width, s.atoms, omega2, m);
  return {first_order_width_rate<double>(s.width, s.beta, s.atoms, m),
          first_order_beta_rate<double>(s.width, s.beta, s.atoms, omega2, m), d.atoms_rate};
}

Vec3 beta_for_width_rate(const Vec3& width, const Vec3& width_rate, double atoms, const VariationalConfig& cfg) {
  const auto m = si_model(cfg);
  const Vec3 loss_part = first_order_width_rate<double>(width, Vec3::Zero(), atoms, m);
  return ((width_rate - loss_part).array() * m.mass / (2.0 * m.hbar * width.array())).matrix();
}

Vec3 width_rate_of(const BetaState& s, const VariationalConfig& cfg) {
  return first_order_width_rate<double>(s.width, s.beta, s.atoms, si_model(cfg));
}

VariationalState initial_state(const VariationalConfig& cfg) {
  VariationalState s;
  s.t = 0.0;
  s.width = cfg.initial_width.minCoeff() > 0.0
                ? cfg.initial_width
                : initial_widths(cfg.trap, cfg.atoms0, cfg.initial_scattering_length, cfg.species);
  s.width_rate = cfg.initial_width_rate;
  s.atoms = cfg.atoms0;
  return s;
}

SamplingPlan SamplingPlan::uniform(double t_end, int n) {
  SamplingPlan p;
  for (int i = 1; i <= n; ++i) p.times.push_back(t_end * i / n);
  return p;
}

std::vector<VariationalState> integrate(const VariationalConfig& cfg, double t_end, const SamplingPlan& plan) {
  IntegrationResult r = integrate_partial(cfg, t_end, plan);
  if (r.collapsed) {
    throw CollapseDetected(r.collapse_time, r.collapse_width,
                           "width " + std::to_string(r.collapse_width) + " m below collapse floor at t=" +
                               std::to_string(r.collapse_time));
  }
  return std::move(r.states);
}

IntegrationResult integrate_partial(const VariationalConfig& cfg, double t_end, const SamplingPlan& plan) {
  cfg.validate();
  if (!(t_end > 0.0)) throw DomainError("integration end time must be positive");
  const Scaled sc = scaled_model(cfg);
  const VariationalState s0 = initial_state(cfg);
  const double n0 = cfg.atoms0;
  const double vs = sc.units.velocity_to_si(1.0);

  State7 x0;
  x0.segment<3>(0) = s0.width / sc.units.length_unit();
  x0.segment<3>(3) = s0.width_rate / vs;
  x0(6) = s0.atoms / n0;

  auto rhs = [&](double t, const State7& x) {
    const Vec3 w = x.segment<3>(0);
    const auto d = second_order_terms<double>(w, n0 * x(6), omega2_scaled(t, cfg, sc), sc.model);
    State7 dx;
    dx.segment<3>(0) = x.segment<3>(3);
    dx.segment<3>(3) = d.accel;
    dx(6) = d.atoms_rate / n0;
    return dx;
  };
  auto to_state = [&](double t, const State7& x) {
    VariationalState s;
    s.t = sc.units.time_to_si(t);
    s.width = x.segment<3>(0) * sc.units.length_unit();
    s.width_rate = x.segment<3>(3) * vs;
    s.atoms = x(6) * n0;
    return s;
  };

  const double T = sc.units.time_from_si(t_end);
  const double dense_a = sc.units.time_from_si(plan.dense_begin);
  const double dense_b = sc.units.time_from_si(plan.dense_end);
  ode::DenseIntegrator<7> integ(cfg.abs_tol, cfg.rel_tol, 1e-14 * T);
  integ.initialize(x0, 0.0, 1e-4 * std::min(T, 1.0));

  IntegrationResult res;
  std::vector<VariationalState>& out = res.states;
  out.push_back(s0);
  std::vector<double> targets;
  for (double t : plan.times) {
    if (t > 0.0 && t <= t_end) targets.push_back(sc.units.time_from_si(t));
  }
  std::sort(targets.begin(), targets.end());
  std::size_t next = 0;
  auto collapsed = [&](const Vec3& w, double t) {
    const double wmin = sc.units.length_to_si(w.minCoeff());
    if (wmin >= cfg.collapse_floor) return false;
    res.collapsed = true;
    res.collapse_time = sc.units.time_to_si(t);
    res.collapse_width = wmin;
    return true;
  };

  while (integ.time() < T) {
    integ.step(rhs);
    const double ta = integ.previous_time();
    const double tb = std::min(integ.time(), T);
    std::vector<double> here;
    while (next < targets.size() && targets[next] <= tb) here.push_back(targets[next++]);
    if (plan.substeps > 0 && tb >= dense_a && ta <= dense_b) {
      for (int j = 1; j <= plan.substeps; ++j) {
        const double t = ta + (tb - ta) * j / plan.substeps;
        if (t >= dense_a && t <= dense_b) here.push_back(t);
      }
    }
    std::sort(here.begin(), here.end());
    for (double t : here) {
      const State7 x = integ.state_at(t);
      if (collapsed(x.segment<3>(0), t)) return res;
      if (sc.units.time_from_si(out.back().t) < t) out.push_back(to_state(t, x));
    }
    if (collapsed(integ.state().segment<3>(0), integ.time())) return res;
  }
  if (out.back().t < t_end * (1.0 - 1e-14)) out.push_back(to_state(T, integ.state_at(T)));
  return res;
}

std::vector<BetaState> integrate_first_order(const VariationalConfig& cfg, double t_end,
                                             const std::vector<double>& times) {
  cfg.validate();
  if (!(t_end > 0.0)) throw DomainError("integration end time must be positive");
  const Scaled sc = scaled_model(cfg);
  const double l = sc.units.length_unit();
  const double n0 = cfg.atoms0;
  const VariationalState s0 = initial_state(cfg);
  const Vec3 beta0 = beta_for_width_rate(s0.width, s0.width_rate, s0.atoms, cfg);

  State7 x0;
  x0.segment<3>(0) = s0.width / l;
  x0.segment<3>(3) = beta0 * l * l;
  x0(6) = 1.0;

  auto rhs = [&](double t, const State7& x) {
    const Vec3 w = x.segment<3>(0);
    const Vec3 b = x.segment<3>(3);
    const double N = n0 * x(6);
    const double om2 = omega2_scaled(t, cfg, sc);
    const auto d = second_order_terms<double>(w, N, om2, sc.model);
    State7 dx;
    dx.segment<3>(0) = first_order_width_rate<double>(w, b, N, sc.model);
    dx.segment<3>(3) = first_order_beta_rate<double>(w, b, N, om2, sc.model);
    dx(6) = d.atoms_rate / n0;
    return dx;
  };
  auto to_state = [&](double t, const State7& x) {
    BetaState s;
    s.t = sc.units.time_to_si(t);
    s.width = x.segment<3>(0) * l;
    s.beta = x.segment<3>(3) / (l * l);
    s.atoms = x(6) * n0;
    return s;
  };

  const double T = sc.units.time_from_si(t_end);
  ode::DenseIntegrator<7> integ(cfg.abs_tol, cfg.rel_tol, 1e-14 * T);
  integ.initialize(x0, 0.0, 1e-4 * std::min(T, 1.0));
  std::vector<double> targets;
  for (double t : times) {
    if (t > 0.0 && t <= t_end) targets.push_back(sc.units.time_from_si(t));
  }
  std::sort(targets.begin(), targets.end());
  std::vector<BetaState> out;
  BetaState b0{0.0, s0.width, beta0, s0.atoms};
  out.push_back(b0);
  std::size_t next = 0;
  while (integ.time() < T) {
    integ.step(rhs);
    const double tb = std::min(integ.time(), T);
    while (next < targets.size() && targets[next] <= tb) {
      const double t = targets[next++];
      const State7 x = integ.state_at(t);
      check_collapse(x.segment<3>(0), t, cfg, sc);
      out.push_back(to_state(t, x));
    }
    check_collapse(integ.state().segment<3>(0), integ.time(), cfg, sc);
  }
  if (out.back().t < t_end * (1.0 - 1e-14)) out.push_back(to_state(T, integ.state_at(T)));
  return out;
}

Eigen::ArrayXXd slice_density_at_plane(const VariationalState& s, double dz, const Eigen::ArrayXd& xs,
                                       const Eigen::ArrayXd& ys) {
  const double peak = ansatz_peak_density(s) * std::exp(-dz * dz / (s.width(2) * s.width(2)));
  const Eigen::ArrayXd gx = (-(xs / s.width(0)).square()).exp();
  const Eigen::ArrayXd gy = (-(ys / s.width(1)).square()).exp();
  return peak * (gx.matrix() * gy.matrix().transpose()).array();
}

Eigen::ArrayXXd column_density(const VariationalState& s, const Eigen::ArrayXd& xs, const Eigen::ArrayXd& ys) {
  const double peak = s.atoms / (constants::pi * s.width(0) * s.width(1));
  const Eigen::ArrayXd gx = (-(xs / s.width(0)).square()).exp();
  const Eigen::ArrayXd gy = (-(ys / s.width(1)).square()).exp();
  return peak * (gx.matrix() * gy.matrix().transpose()).array();
}

WidthCurve width_vs_z(const std::vector<VariationalState>& trajectory, const Kinematics& kin) {
  WidthCurve c;
  const std::size_t n = trajectory.size();
  c.t.reserve(n);
  c.height.reserve(n);
  c.width_x.reserve(n);
  for (const auto& s : trajectory) {
    c.t.push_back(s.t);
    c.height.push_back(kin.height(s.t));
    c.width_x.push_back(s.width(0));
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double w0 = c.width_x[i - 1], w1 = c.width_x[i], w2 = c.width_x[i + 1];
    if (!(w1 < w0 && w1 <= w2)) continue;
    // Parabola through three (possibly unevenly spaced) samples.
    const double t0 = c.t[i - 1], t1 = c.t[i], t2 = c.t[i + 1];
    const double d01 = (w1 - w0) / (t1 - t0);
    const double d12 = (w2 - w1) / (t2 - t1);
    const double a = (d12 - d01) / (t2 - t0);
    WidthMinimum m{c.height[i], w1, t1};
    if (a > 0.0) {
      const double b = d01 - a * (t0 + t1);
      const double tm = std::clamp(-b / (2.0 * a), t0, t2);
      m.t = tm;
      m.width = w0 + d01 * (tm - t0) + a * (tm - t0) * (tm - t1);
      m.height = kin.height(tm);
    }
    c.minima.push_back(m);
  }
  if (!c.minima.empty()) {
    c.has_focus = true;
    c.focus = *std::min_element(c.minima.begin(), c.minima.end(),
                                [](const WidthMinimum& a, const WidthMinimum& b) { return a.width < b.width; });
  }
  return c;
}

} // namespace becfocus
