#include "becfocus/gpe.hpp"

#include "becfocus/errors.hpp"
#include "becfocus/fft.hpp"
#include "becfocus/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace becfocus {

using cplx = std::complex<double>;

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Per-axis arrays in oscillator units.
struct ScaledGrid {
  std::array<Eigen::ArrayXd, 3> x;   // coordinates
  std::array<Eigen::ArrayXd, 3> x2;  // squared coordinates
  std::array<Eigen::ArrayXd, 3> k2;  // squared wavenumbers
  double cell_volume;
  std::array<int, 3> n;

  ScaledGrid(const GridSpec& g, double length_unit) : n(g.n) {
    cell_volume = 1.0;
    for (int r = 0; r < 3; ++r) {
      x[r] = g.axis(r) / length_unit;
      x2[r] = x[r].square();
      k2[r] = (g.wavenumbers(r) * length_unit).square();
      cell_volume *= g.spacing(r) / length_unit;
    }
  }
  long size() const { return long(n[0]) * n[1] * n[2]; }
};

/// Multiply by a separable real-or-complex factor f0(i) f1(j) f2(k).
template <typename A, typename B, typename C>
void apply_separable(Eigen::ArrayXcd& data, const std::array<int, 3>& n, const A& f0, const B& f1, const C& f2) {
  long idx = 0;
  for (int i = 0; i < n[0]; ++i) {
    for (int j = 0; j < n[1]; ++j) {
      const auto fij = f0(i) * f1(j);
      for (int k = 0; k < n[2]; ++k, ++idx) data(idx) *= fij * f2(k);
    }
  }
}

FrameSample scale_sample(const FrameSample& s, double time_unit) {
  FrameSample o = s;
  o.rate = s.rate * time_unit;
  o.accel = s.accel * time_unit * time_unit;
  o.theta = s.theta / time_unit;
  return o;
}

} // namespace

// ---------------------------------------------------------------- GridSpec

void GridSpec::validate() const {
  for (int r = 0; r < 3; ++r) {
    if (!is_power_of_two(n[r]) || n[r] < 16) {
      throw ConfigError("grid points per axis must be a power of two >= 16 (got " + std::to_string(n[r]) + ")");
    }
    if (!(extent(r) > 0.0) || !std::isfinite(extent(r))) throw ConfigError("grid extents must be positive");
    if (!std::isfinite(offset(r))) throw ConfigError("grid offset must be finite");
  }
}

void GridSpec::validate_resolution(const Vec3& min_width) const {
  validate();
  for (int r = 0; r < 3; ++r) {
    if (spacing(r) > min_width(r) / 4.0) {
      std::ostringstream os;
      os << "grid spacing " << spacing(r) << " m along axis " << r << " does not resolve width " << min_width(r)
         << " m (need spacing <= width/4)";
      throw ConfigError(os.str());
    }
  }
}

Eigen::ArrayXd GridSpec::axis(int r) const {
  Eigen::ArrayXd a(n[r]);
  for (int i = 0; i < n[r]; ++i) a(i) = coordinate(r, i);
  return a;
}

Eigen::ArrayXd GridSpec::wavenumbers(int r) const {
  Eigen::ArrayXd k(n[r]);
  const double dk = 2.0 * constants::pi / extent(r);
  for (int i = 0; i < n[r]; ++i) k(i) = dk * (i < n[r] / 2 ? i : i - n[r]);
  return k;
}

// ---------------------------------------------------------------- fields

ComplexField3D gaussian_field(const GridSpec& grid, const Vec3& width, double atoms, const Vec3& centre) {
  grid.validate();
  ComplexField3D f(grid);
  const double amp = std::sqrt(atoms / (std::pow(constants::pi, 1.5) * width.prod()));
  std::array<Eigen::ArrayXd, 3> g;
  for (int r = 0; r < 3; ++r) g[r] = (-0.5 * ((grid.axis(r) - centre(r)) / width(r)).square()).exp();
  f.data.setConstant(amp);
  apply_separable(f.data, grid.n, g[0], g[1], g[2]);
  return f;
}

Observables observables(const ComplexField3D& field) {
  const GridSpec& g = field.grid;
  std::array<Eigen::ArrayXd, 3> ax{g.axis(0), g.axis(1), g.axis(2)};
  double sum = 0.0, peak = 0.0;
  Vec3 s1 = Vec3::Zero(), s2 = Vec3::Zero();
  long idx = 0;
  for (int i = 0; i < g.n[0]; ++i) {
    for (int j = 0; j < g.n[1]; ++j) {
      double row = 0.0, rowz = 0.0, rowz2 = 0.0;
      for (int k = 0; k < g.n[2]; ++k, ++idx) {
        const double rho = std::norm(field.data(idx));
        peak = std::max(peak, rho);
        row += rho;
        rowz += rho * ax[2](k);
        rowz2 += rho * ax[2](k) * ax[2](k);
      }
      sum += row;
      s1(0) += row * ax[0](i);
      s2(0) += row * ax[0](i) * ax[0](i);
      s1(1) += row * ax[1](j);
      s2(1) += row * ax[1](j) * ax[1](j);
      s1(2) += rowz;
      s2(2) += rowz2;
    }
  }
  Observables o;
  o.norm = sum * g.cell_volume();
  o.peak_density = peak;
  if (sum > 0.0) {
    o.com = s1 / sum;
    o.rms = (s2 / sum - o.com.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  }
  return o;
}

double outer_fraction(const ComplexField3D& field, double shell) {
  const GridSpec& g = field.grid;
  std::array<std::vector<char>, 3> outer;
  for (int r = 0; r < 3; ++r) {
    outer[r].resize(g.n[r]);
    const int m = std::max(1, int(std::lround(shell * g.n[r] * 0.5)));
    for (int i = 0; i < g.n[r]; ++i) outer[r][i] = (i < m || i >= g.n[r] - m);
  }
  double total = 0.0, edge = 0.0;
  long idx = 0;
  for (int i = 0; i < g.n[0]; ++i) {
    for (int j = 0; j < g.n[1]; ++j) {
      const bool oij = outer[0][i] || outer[1][j];
      for (int k = 0; k < g.n[2]; ++k, ++idx) {
        const double rho = std::norm(field.data(idx));
        total += rho;
        if (oij || outer[2][k]) edge += rho;
      }
    }
  }
  return total > 0.0 ? edge / total : 0.0;
}

Eigen::ArrayXXd plane_density(const ComplexField3D& field, double z) {
  const GridSpec& g = field.grid;
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(g.n[0], g.n[1]);
  const double dz = g.spacing(2);
  const double s = (z - g.coordinate(2, 0)) / dz;
  if (s < 0.0 || s > g.n[2] - 1) return out;
  const int k0 = std::min(int(std::floor(s)), g.n[2] - 2);
  const double w = s - k0;
  for (int i = 0; i < g.n[0]; ++i) {
    for (int j = 0; j < g.n[1]; ++j) {
      out(i, j) = (1.0 - w) * std::norm(field(i, j, k0)) + w * std::norm(field(i, j, k0 + 1));
    }
  }
  return out;
}

Eigen::ArrayXd marginal(const ComplexField3D& field, int axis) {
  const GridSpec& g = field.grid;
  Eigen::ArrayXd m = Eigen::ArrayXd::Zero(g.n[axis]);
  long idx = 0;
  for (int i = 0; i < g.n[0]; ++i) {
    for (int j = 0; j < g.n[1]; ++j) {
      for (int k = 0; k < g.n[2]; ++k, ++idx) {
        const int a = axis == 0 ? i : (axis == 1 ? j : k);
        m(a) += std::norm(field.data(idx));
      }
    }
  }
  return m * (g.cell_volume() / g.spacing(axis));
}

// ---------------------------------------------------------------- potentials

FrequencySchedule static_trap(const TrapFrequencies& trap) {
  const Vec3 w2 = trap.as_vector().cwiseAbs2();
  return [w2](double) { return w2; };
}

FrequencySchedule focusing_schedule(const FocusingBeam& beam, const Kinematics& kin, const SpeciesParams& species) {
  return [beam, kin, species](double t) {
    return Vec3(harmonic_frequency_sq(t, beam, kin, species), 0.0, 0.0);
  };
}

void GpeProblem::validate() const {
  species.validate();
  if (!(loss_multiplier >= 0.0)) throw ConfigError("loss multiplier must be non-negative");
  if (!(unit_omega > 0.0)) throw ConfigError("unit frequency must be positive");
  if (!std::isfinite(scattering_length)) throw ConfigError("scattering length must be finite");
}

// ---------------------------------------------------------------- scaling frame

ScalingFrame::ScalingFrame() = default;

ScalingFrame::ScalingFrame(const Vec3& c, const Vec3& d, FrequencySchedule omega_sq, double t_end, double rel_tol)
    : identity_(false), c_(c), d_(d), omega_sq_(std::move(omega_sq)), t_end_(t_end) {
  if (!(t_end > 0.0)) throw DomainError("scaling frame needs a positive duration");
  using State = Eigen::Matrix<double, 9, 1>;
  // Integrate in units of t_end so all components are of order one.
  const double T = t_end;
  auto rhs = [this, T](double s, const State& x) {
    const Vec3 lam = x.segment<3>(0);
    const double vol = lam.prod();
    const Vec3 w2 = omega_sq_ ? omega_sq_(s * T) : Vec3::Zero();
    State dx;
    dx.segment<3>(0) = x.segment<3>(3);
    for (int r = 0; r < 3; ++r) {
      const double l = lam(r);
      dx(3 + r) = T * T * (-w2(r) * l + c_(r) / (l * l * l) + d_(r) / (l * vol));
      dx(6 + r) = 1.0 / (l * l);
    }
    return dx;
  };
  State x0;
  x0 << 1, 1, 1, 0, 0, 0, 0, 0, 0;
  ode::DenseIntegrator<9> integ(1e-14, rel_tol, 1e-16);
  integ.initialize(x0, 0.0, 1e-6);
  nodes_.push_back({0.0, x0, rhs(0.0, x0)});
  while (integ.time() < 1.0) {
    integ.step(rhs);
    const State& x = integ.state();
    if (x.segment<3>(0).minCoeff() <= 0.0) throw CollapseDetected(integ.time() * T, 0.0, "scaling frame collapsed");
    nodes_.push_back({integ.time(), x, rhs(integ.time(), x)});
  }
  // Store in SI time.
  for (auto& nd : nodes_) {
    nd.t *= T;
    nd.x.segment<3>(3) /= T;
    nd.x.segment<3>(6) *= T;
    nd.dx.segment<3>(0) /= T;
    nd.dx.segment<3>(3) /= T * T;
  }
}

ScalingFrame ScalingFrame::gaussian(const Vec3& width0, double atoms, double scattering_length,
                                    const SpeciesParams& species, FrequencySchedule omega_sq, double t_end) {
  const double m = species.mass;
  const double u = interaction_strength(scattering_length, species);
  const double vol = width0.prod();
  Vec3 c, d;
  for (int r = 0; r < 3; ++r) {
    const double w2 = width0(r) * width0(r);
    c(r) = constants::hbar * constants::hbar / (m * m * w2 * w2);
    d(r) = u * atoms / (m * std::pow(2.0 * constants::pi, 1.5) * w2 * vol);
  }
  return ScalingFrame(c, d, std::move(omega_sq), t_end);
}

FrameSample ScalingFrame::at(double t) const {
  FrameSample s;
  if (identity_) {
    s.theta = Vec3::Constant(t);
    return s;
  }
  if (t < -1e-15 * t_end_ || t > t_end_ * (1.0 + 1e-12)) {
    throw DomainError("time " + std::to_string(t) + " outside the scaling frame span");
  }
  t = std::clamp(t, 0.0, nodes_.back().t);
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t, [](double v, const Node& n) { return v < n.t; });
  if (it == nodes_.end()) --it;
  if (it == nodes_.begin()) ++it;
  const Node& a = *(it - 1);
  const Node& b = *it;
  const double h = b.t - a.t;
  const double u = (t - a.t) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  const Eigen::Matrix<double, 9, 1> x = h00 * a.x + h10 * h * a.dx + h01 * b.x + h11 * h * b.dx;
  s.lambda = x.segment<3>(0);
  s.rate = x.segment<3>(3);
  s.theta = x.segment<3>(6);
  const double vol = s.lambda.prod();
  const Vec3 w2 = omega_sq_ ? omega_sq_(t) : Vec3::Zero();
  for (int r = 0; r < 3; ++r) {
    const double l = s.lambda(r);
    s.accel(r) = -w2(r) * l + c_(r) / (l * l * l) + d_(r) / (l * vol);
  }
  return s;
}

// ---------------------------------------------------------------- step control

void StepController::validate() const {
  if (!(rel_tol > 0.0)) throw ConfigError("GPE tolerance must be positive");
  if (!(min_dt > 0.0 && max_dt >= min_dt)) throw ConfigError("GPE step bounds must satisfy 0 < min_dt <= max_dt");
  if (!(dt >= min_dt && dt <= max_dt)) throw ConfigError("initial GPE step outside [min_dt, max_dt]");
  if (!(safety > 0.0 && safety <= 1.0)) throw ConfigError("GPE safety factor must be in (0, 1]");
  if (!(target > 0.0 && target <= 1.0)) throw ConfigError("GPE error target must be in (0, 1]");
}

double StepController::propose(double dt_used, double error) const {
  double factor = 2.0;
  if (!std::isfinite(error)) {
    factor = 0.2;
  } else if (error > 0.0) {
    factor = std::clamp(safety * std::pow(target * rel_tol / error, 0.25), 0.2, 2.0);
  }
  return std::clamp(dt_used * factor, min_dt, max_dt);
}

// ---------------------------------------------------------------- solver

struct GpeSolver::Impl {
  GridSpec grid;
  UnitScaling units;
  ScaledGrid sg;
  Fft3D fft;
  double u;      // scaled interaction
  double K;      // scaled three-body coefficient
  FrequencySchedule omega_sq;

  Impl(const GridSpec& g, const GpeProblem& p)
      : grid(g), units(p.species.mass, p.unit_omega), sg(g, units.length_unit()), fft(g.n[0], g.n[1], g.n[2]),
        omega_sq(p.omega_sq) {
    const double l = units.length_unit();
    const double w0 = p.unit_omega;
    u = interaction_strength(p.scattering_length, p.species) / (constants::hbar * w0 * l * l * l);
    K = p.loss_multiplier * p.species.three_body_K / (w0 * std::pow(l, 6));
  }

  double density_scale() const { return std::pow(units.length_unit(), 1.5); }

  /// Frame sample in oscillator units at scaled time t.
  FrameSample frame_at(const ScalingFrame& frame, double t) const {
    return scale_sample(frame.at(units.time_to_si(t)), units.time_unit());
  }

  Vec3 omega_sq_scaled(double t) const {
    if (!omega_sq) return Vec3::Zero();
    const double w0 = 1.0 / units.time_unit();
    return omega_sq(units.time_to_si(t)) / (w0 * w0);
  }

  /// Pointwise nonlinear operator: -i (V + u|phi|^2 / Lambda) phi - K |phi|^4 phi / Lambda^2.
  void nonlinear(const Eigen::ArrayXcd& phi, double t, const FrameSample& fs, Eigen::ArrayXcd& out) const {
    const Vec3 w2 = omega_sq_scaled(t);
    Vec3 a;
    for (int r = 0; r < 3; ++r) a(r) = 0.5 * (w2(r) * fs.lambda(r) * fs.lambda(r) + fs.accel(r) * fs.lambda(r));
    const double vol = fs.volume();
    const double g = u / vol;
    const double kappa = K / (vol * vol);
    out.resize(phi.size());
    const auto& n = sg.n;
    long idx = 0;
    for (int i = 0; i < n[0]; ++i) {
      const double vx = a(0) * sg.x2[0](i);
      for (int j = 0; j < n[1]; ++j) {
        const double vxy = vx + a(1) * sg.x2[1](j);
        for (int k = 0; k < n[2]; ++k, ++idx) {
          const cplx p = phi(idx);
          const double rho = std::norm(p);
          const double v = vxy + a(2) * sg.x2[2](k) + g * rho;
          out(idx) = cplx(kappa * rho * rho, v) * (-p);
        }
      }
    }
  }

  /// Exact kinetic propagation between frame phases theta_a and theta_b.
  void kinetic(Eigen::ArrayXcd& data, const Vec3& dtheta) const {
    fft.forward(data.data());
    const double norm = 1.0 / double(sg.size());
    std::array<Eigen::ArrayXcd, 3> e;
    for (int r = 0; r < 3; ++r) {
      e[r] = (sg.k2[r] * (-0.5 * dtheta(r))).unaryExpr([](double ph) { return std::polar(1.0, ph); });
    }
    e[0] *= norm;
    apply_separable(data, sg.n, e[0], e[1], e[2]);
    fft.backward(data.data());
  }

  struct Attempt {
    Eigen::ArrayXcd psi;
    Eigen::ArrayXcd n_end;  // N(psi, t + h), reusable as the next first stage
    double error;
  };

  Attempt attempt(const Eigen::ArrayXcd& psi, const Eigen::ArrayXcd& n_psi, double t, double h,
                  const ScalingFrame& frame) const {
    const FrameSample f0 = frame_at(frame, t);
    const FrameSample fm = frame_at(frame, t + 0.5 * h);
    const FrameSample f1 = frame_at(frame, t + h);
    const Vec3 d1 = fm.theta - f0.theta;
    const Vec3 d2 = f1.theta - fm.theta;

    Eigen::ArrayXcd psi_i = psi;
    kinetic(psi_i, d1);
    Eigen::ArrayXcd k1 = n_psi;
    kinetic(k1, d1);
    Eigen::ArrayXcd k2, k3, k4, tmp;
    tmp = psi_i + (0.5 * h) * k1;
    nonlinear(tmp, t + 0.5 * h, fm, k2);
    tmp = psi_i + (0.5 * h) * k2;
    nonlinear(tmp, t + 0.5 * h, fm, k3);
    tmp = psi_i + h * k3;
    kinetic(tmp, d2);
    nonlinear(tmp, t + h, f1, k4);
    Attempt a;
    a.psi = psi_i + h * (k1 / 6.0 + k2 / 3.0 + k3 / 3.0);
    kinetic(a.psi, d2);
    a.psi += (h / 6.0) * k4;
    nonlinear(a.psi, t + h, f1, a.n_end);
    const double scale = std::sqrt(a.psi.abs2().sum());
    a.error = scale > 0.0 ? (h / 10.0) * std::sqrt((k4 - a.n_end).abs2().sum()) / scale : 0.0;
    return a;
  }
};

GpeSolver::GpeSolver(const GridSpec& grid, GpeProblem problem) : problem_(std::move(problem)) {
  grid.validate();
  problem_.validate();
  impl_ = std::make_unique<Impl>(grid, problem_);
}

GpeSolver::~GpeSolver() = default;

StepOutcome GpeSolver::try_step(const ComplexField3D& field, double dt, const ScalingFrame& frame) const {
  if (!(field.grid == impl_->grid)) throw DomainError("field grid differs from the solver grid");
  const double scale = impl_->density_scale();
  const double t = impl_->units.time_from_si(field.t);
  const double h = impl_->units.time_from_si(dt);
  const Eigen::ArrayXcd psi = field.data * scale;
  Eigen::ArrayXcd n_psi;
  impl_->nonlinear(psi, t, impl_->frame_at(frame, t), n_psi);
  auto a = impl_->attempt(psi, n_psi, t, h, frame);
  StepOutcome out{ComplexField3D(field.grid), a.error};
  out.field.data = a.psi / scale;
  out.field.t = field.t + dt;
  return out;
}

double GpeSolver::norm_rate(const ComplexField3D& field) const {
  const double scale = impl_->density_scale();
  const double t = impl_->units.time_from_si(field.t);
  const Eigen::ArrayXcd psi = field.data * scale;
  Eigen::ArrayXcd n_psi;
  impl_->nonlinear(psi, t, FrameSample{Vec3::Ones(), Vec3::Zero(), Vec3::Zero(), Vec3::Constant(t)}, n_psi);
  const double rate = 2.0 * (psi.conjugate() * n_psi).real().sum() * impl_->sg.cell_volume;
  return rate / impl_->units.time_unit();
}

EvolveResult GpeSolver::evolve(const ComplexField3D& initial, const EvolveOptions& opts) const {
  if (!(initial.grid == impl_->grid)) throw DomainError("field grid differs from the solver grid");
  if (!(opts.t_end > initial.t)) throw DomainError("evolution end time must follow the initial time");
  opts.controller.validate();
  static const ScalingFrame identity;
  const ScalingFrame& frame = opts.frame ? *opts.frame : identity;
  if (!frame.identity() && opts.t_end > frame.t_end() * (1.0 + 1e-12)) {
    throw DomainError("scaling frame does not cover the evolution span");
  }
  const Impl& im = *impl_;
  const double scale = im.density_scale();
  const double tu = im.units.time_unit();

  StepController ctl = opts.controller;
  ctl.dt /= tu;
  ctl.min_dt /= tu;
  ctl.max_dt /= tu;

  std::vector<double> targets;
  for (double t : opts.observe_at) {
    if (t >= initial.t && t <= opts.t_end) targets.push_back(im.units.time_from_si(t));
  }
  std::sort(targets.begin(), targets.end());
  const double T_end = im.units.time_from_si(opts.t_end);
  if (targets.empty() || targets.back() < T_end) targets.push_back(T_end);

  Eigen::ArrayXd mask;
  if (opts.absorbing_width > 0.0) {
    std::array<Eigen::ArrayXd, 3> m;
    for (int r = 0; r < 3; ++r) {
      const int nr = im.grid.n[r];
      m[r] = Eigen::ArrayXd::Ones(nr);
      const double w = std::clamp(opts.absorbing_width, 0.0, 0.5) * nr;
      for (int i = 0; i < nr; ++i) {
        const double edge = std::min(i + 0.5, nr - i - 0.5);
        if (edge < w) m[r](i) = std::pow(std::sin(0.5 * constants::pi * edge / w), 0.125);
      }
    }
    Eigen::ArrayXcd ones = Eigen::ArrayXcd::Ones(im.sg.size());
    apply_separable(ones, im.grid.n, m[0], m[1], m[2]);
    mask = ones.real();
  }

  EvolveResult res;
  double t = im.units.time_from_si(initial.t);
  Eigen::ArrayXcd psi = initial.data * scale;
  Eigen::ArrayXcd n_psi;
  im.nonlinear(psi, t, im.frame_at(frame, t), n_psi);
  double dt = ctl.dt;
  bool warned = false;

  auto observe = [&](double ts) {
    const FrameSample fs_si = frame.at(im.units.time_to_si(ts));
    ComplexField3D f(im.grid);
    f.data = psi / scale;
    f.t = im.units.time_to_si(ts);
    const Observables o = observables(f);
    GpeObservation obs;
    obs.t = f.t;
    obs.frame = fs_si;
    obs.lab.norm = o.norm;
    obs.lab.com = o.com.cwiseProduct(fs_si.lambda);
    obs.lab.rms = o.rms.cwiseProduct(fs_si.lambda);
    obs.lab.peak_density = o.peak_density / fs_si.volume();
    obs.outer_fraction = outer_fraction(f, 0.1);
    obs.escape_warning = obs.outer_fraction > 1e-3;
    if (obs.escape_warning && !warned) {
      warned = true;
      res.warnings.push_back("grid escape: " + std::to_string(100.0 * obs.outer_fraction) +
                             "% of the norm in the outer 10% of the box at t=" + std::to_string(f.t));
    }
    res.series.push_back(obs);
    if (opts.observer) opts.observer(GpeSnapshot{f, fs_si, res.series.back()});
  };

  std::size_t next = 0;
  if (targets[next] <= t) observe(targets[next++]);
  while (next < targets.size()) {
    const double target = targets[next];
    const bool clipped = t + dt >= target;
    const double h = clipped ? target - t : dt;
    auto a = im.attempt(psi, n_psi, t, h, frame);
    if (std::isfinite(a.error) && a.error <= ctl.rel_tol) {
      ++res.accepted_steps;
      psi = std::move(a.psi);
      t = clipped ? target : t + h;
      if (mask.size() > 0) {
        psi *= mask;
        im.nonlinear(psi, t, im.frame_at(frame, t), n_psi);
      } else {
        n_psi = std::move(a.n_end);
      }
      const double proposal = ctl.propose(h, a.error);
      dt = clipped ? std::max(dt, proposal) : proposal;
      if (clipped) observe(targets[next++]);
    } else {
      ++res.rejected_steps;
      if (h <= ctl.min_dt) {
        throw StepSizeUnderflow(im.units.time_to_si(t), "GPE step size underflow at t=" +
                                                            std::to_string(im.units.time_to_si(t)));
      }
      dt = ctl.propose(h, a.error);
    }
  }
  res.field = ComplexField3D(im.grid);
  res.field.data = psi / scale;
  res.field.t = opts.t_end;
  res.frame = frame.at(opts.t_end);
  return res;
}

StepOutcome step_real_time(const ComplexField3D& field, const GpeProblem& problem, const StepController& ctl) {
  ctl.validate();
  GpeSolver solver(field.grid, problem);
  static const ScalingFrame identity;
  StepOutcome out = solver.try_step(field, ctl.dt, identity);
  if (!(out.error <= ctl.rel_tol)) {
    throw StepRejected(out.error, ctl.propose(ctl.dt, out.error),
                       "step error " + std::to_string(out.error) + " exceeds tolerance");
  }
  return out;
}

ComplexField3D to_lab_frame(const ComplexField3D& phi, const FrameSample& frame, const SpeciesParams& species) {
  GridSpec g = phi.grid;
  g.extent = g.extent.cwiseProduct(frame.lambda);
  g.offset = g.offset.cwiseProduct(frame.lambda);
  ComplexField3D out(g);
  out.t = phi.t;
  out.data = phi.data / std::sqrt(frame.volume());
  std::array<Eigen::ArrayXcd, 3> ph;
  for (int r = 0; r < 3; ++r) {
    const double c = species.mass * frame.rate(r) / (2.0 * constants::hbar * frame.lambda(r));
    ph[r] = (g.axis(r).square() * c).unaryExpr([](double p) { return std::polar(1.0, p); });
  }
  apply_separable(out.data, g.n, ph[0], ph[1], ph[2]);
  return out;
}

// ---------------------------------------------------------------- ground state

namespace {

struct StaticTrapEnergy {
  double kinetic, potential, interaction;  // scaled, interaction = (u/2) int |psi|^4
};

StaticTrapEnergy energy_parts(const Eigen::ArrayXcd& psi, const ScaledGrid& sg, const Fft3D& fft,
                              const Vec3& w2, double u) {
  Eigen::ArrayXcd hat = psi;
  fft.forward(hat.data());
  double kin = 0.0, pot = 0.0, inter = 0.0;
  long idx = 0;
  for (int i = 0; i < sg.n[0]; ++i) {
    for (int j = 0; j < sg.n[1]; ++j) {
      const double kij = sg.k2[0](i) + sg.k2[1](j);
      const double vij = w2(0) * sg.x2[0](i) + w2(1) * sg.x2[1](j);
      for (int k = 0; k < sg.n[2]; ++k, ++idx) {
        kin += (kij + sg.k2[2](k)) * std::norm(hat(idx));
        const double rho = std::norm(psi(idx));
        pot += (vij + w2(2) * sg.x2[2](k)) * rho;
        inter += rho * rho;
      }
    }
  }
  const double dv = sg.cell_volume;
  return {0.5 * kin * dv / double(sg.size()), 0.5 * pot * dv, 0.5 * u * inter * dv};
}

} // namespace

double gpe_energy(const ComplexField3D& field, const TrapFrequencies& trap, double scattering_length,
                  const SpeciesParams& species) {
  const double w0 = trap.geometric_mean();
  UnitScaling units(species.mass, w0);
  const double l = units.length_unit();
  ScaledGrid sg(field.grid, l);
  Fft3D fft(field.grid.n[0], field.grid.n[1], field.grid.n[2]);
  const Vec3 w2 = trap.as_vector().cwiseAbs2() / (w0 * w0);
  const double u = interaction_strength(scattering_length, species) / (constants::hbar * w0 * l * l * l);
  const Eigen::ArrayXcd psi = field.data * std::pow(l, 1.5);
  const auto e = energy_parts(psi, sg, fft, w2, u);
  return units.energy_to_si(e.kinetic + e.potential + e.interaction);
}

GroundState ground_state_imaginary_time(const GroundStateOptions& opts) {
  opts.grid.validate();
  opts.species.validate();
  if (!(opts.scattering_length >= 0.0)) throw DomainError("ground state needs a non-negative scattering length");
  if (!(opts.atoms > 0.0)) throw DomainError("atom number must be positive");
  if (!(opts.trap.x > 0.0 && opts.trap.y > 0.0 && opts.trap.z > 0.0)) {
    throw DomainError("trap frequencies must be positive");
  }
  const double w0 = opts.trap.geometric_mean();
  UnitScaling units(opts.species.mass, w0);
  const double l = units.length_unit();
  ScaledGrid sg(opts.grid, l);
  Fft3D fft(opts.grid.n[0], opts.grid.n[1], opts.grid.n[2]);
  const Vec3 w2 = opts.trap.as_vector().cwiseAbs2() / (w0 * w0);
  const double u = interaction_strength(opts.scattering_length, opts.species) / (constants::hbar * w0 * l * l * l);
  const double N = opts.atoms;

  Vec3 guess = opts.trap.as_vector().cwiseInverse().cwiseSqrt() * std::sqrt(w0);
  if (opts.scattering_length > 0.0) {
    guess = guess.cwiseMax(initial_widths(opts.trap, N, opts.scattering_length, opts.species) / l);
  }
  Eigen::ArrayXcd psi = gaussian_field(opts.grid, guess * l, N).data * std::pow(l, 1.5);

  auto normalise = [&] {
    const double norm = psi.abs2().sum() * sg.cell_volume;
    psi *= std::sqrt(N / norm);
  };
  auto chemical_potential = [&](StaticTrapEnergy& e) {
    e = energy_parts(psi, sg, fft, w2, u);
    return (e.kinetic + e.potential + 2.0 * e.interaction) / N;
  };

  const double wmax = std::sqrt(w2.maxCoeff());
  const double loose = std::max(opts.tol, 1e-6);
  long iterations = 0;
  StaticTrapEnergy parts{};
  normalise();
  double mu = chemical_potential(parts);
  double energy = parts.kinetic + parts.potential + parts.interaction;

  // Relaxes to the fixed point of the split step at dtau (halved when a batch
  // would raise the energy) and returns the step finally used.
  auto relax = [&](double dtau, double tol) {
    std::array<Eigen::ArrayXd, 3> half_v, kin;
    auto build = [&] {
      for (int r = 0; r < 3; ++r) {
        half_v[r] = (-0.25 * dtau * w2(r) * sg.x2[r]).exp();
        kin[r] = (-0.5 * dtau * sg.k2[r]).exp();
      }
      kin[0] /= double(sg.size());
    };
    build();
    Eigen::ArrayXd half_u;
    while (true) {
      const long check_every = std::max(1L, long(std::lround(0.25 / dtau)));
      const Eigen::ArrayXcd saved = psi;
      for (long it = 0; it < check_every; ++it, ++iterations) {
        if (iterations >= opts.max_iterations) {
          throw NonConvergence("imaginary-time evolution did not converge within " +
                               std::to_string(opts.max_iterations) + " iterations");
        }
        // The mean-field potential is frozen over the step so that the
        // splitting stays symmetric and its fixed point is off by O(dtau^2).
        if (u != 0.0) half_u = (-0.5 * dtau * u * psi.abs2()).exp();
        apply_separable(psi, sg.n, half_v[0], half_v[1], half_v[2]);
        if (u != 0.0) psi *= half_u;
        fft.forward(psi.data());
        apply_separable(psi, sg.n, kin[0], kin[1], kin[2]);
        fft.backward(psi.data());
        if (u != 0.0) psi *= half_u;
        apply_separable(psi, sg.n, half_v[0], half_v[1], half_v[2]);
        normalise();
      }
      const double mu_new = chemical_potential(parts);
      const double energy_new = parts.kinetic + parts.potential + parts.interaction;
      if (energy_new > energy * (1.0 + 1e-13)) {
        // Splitting transient raised the energy: retry the batch with a smaller step.
        psi = saved;
        dtau *= 0.5;
        if (dtau < 1e-5 / wmax) throw NonConvergence("imaginary-time step underflow while lowering the energy");
        build();
        continue;
      }
      energy = energy_new;
      if (opts.energy_history) opts.energy_history->push_back(units.energy_to_si(energy));
      const double change = std::abs(mu_new - mu) / std::abs(mu_new) / (check_every * dtau);
      mu = mu_new;
      if (change < tol) return dtau;
    }
  };

  relax(0.1 / wmax, loose);
  const double h1 = relax(0.01 / wmax, opts.tol);
  const Eigen::ArrayXcd coarse = psi;
  const double h2 = relax(0.5 * h1, opts.tol);
  if (h2 < h1) {
    // Richardson extrapolation removes the O(dtau^2) offset of the fixed point.
    const Eigen::ArrayXcd fine = psi;
    psi = (h1 * h1 * fine - h2 * h2 * coarse) / (h1 * h1 - h2 * h2);
    normalise();
    const double mu_x = chemical_potential(parts);
    const double energy_x = parts.kinetic + parts.potential + parts.interaction;
    if (energy_x <= energy * (1.0 + 1e-13)) {
      energy = energy_x;
      mu = mu_x;
      if (opts.energy_history) opts.energy_history->push_back(units.energy_to_si(energy));
    } else {
      psi = fine;
    }
  }
  chemical_potential(parts);
  GroundState gs;
  gs.field = ComplexField3D(opts.grid);
  gs.field.data = psi / std::pow(l, 1.5);
  gs.chemical_potential = units.energy_to_si(mu);
  gs.energy = units.energy_to_si(parts.kinetic + parts.potential + parts.interaction);
  gs.iterations = iterations;
  return gs;
}

} // namespace becfocus
