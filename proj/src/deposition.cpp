#include "becfocus/deposition.hpp"

#include "becfocus/errors.hpp"

#include <algorithm>
#include <cmath>

namespace becfocus {

void PlaneGrid::validate() const {
  for (int r = 0; r < 2; ++r) {
    if (n[r] < 2) throw DomainError("plane grid needs at least two points per axis");
    if (!(extent(r) > 0.0) || !std::isfinite(extent(r))) throw DomainError("plane grid extent must be positive");
  }
}

Eigen::ArrayXd PlaneGrid::axis(int r) const {
  Eigen::ArrayXd a(n[r]);
  for (int i = 0; i < n[r]; ++i) a(i) = coordinate(r, i);
  return a;
}

PlaneGrid PlaneGrid::from(const GridSpec& g) {
  PlaneGrid p;
  p.n = {g.n[0], g.n[1]};
  p.extent = {g.extent(0), g.extent(1)};
  p.offset = {g.offset(0), g.offset(1)};
  return p;
}

DepositMap accumulate_deposit(const PlaneGrid& grid, const std::vector<DensitySlice>& slices, double speed,
                              const std::string& source) {
  grid.validate();
  if (slices.empty()) throw DomainError("no slices to accumulate");
  DepositMap m;
  m.grid = grid;
  m.speed = speed;
  m.source = source;
  m.raw = Eigen::ArrayXXd::Zero(grid.n[0], grid.n[1]);
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const auto& d = slices[s].density;
    if (d.rows() != grid.n[0] || d.cols() != grid.n[1]) {
      throw DomainError("slice " + std::to_string(s) + " does not match the deposit grid");
    }
    if (s > 0 && !(slices[s].t > slices[s - 1].t)) throw DomainError("slice times must be strictly increasing");
  }
  for (std::size_t s = 1; s < slices.size(); ++s) {
    const double h = slices[s].t - slices[s - 1].t;
    m.raw += 0.5 * h * (slices[s - 1].density + slices[s].density);
  }
  m.t_end = slices.back().t;
  return m;
}

double fwhm(const Eigen::ArrayXd& x, const Eigen::ArrayXd& profile) {
  if (x.size() != profile.size() || x.size() < 3) throw DomainError("fwhm needs matching axes of length >= 3");
  Eigen::Index ip;
  const double peak = profile.maxCoeff(&ip);
  if (!(peak > 0.0)) throw DomainError("profile has no positive maximum");
  const double half = 0.5 * peak;
  Eigen::Index l = ip;
  while (l > 0 && profile(l) >= half) --l;
  if (profile(l) >= half) throw NoHalfCrossing("profile stays above half maximum at the lower boundary");
  Eigen::Index r = ip;
  while (r < profile.size() - 1 && profile(r) >= half) ++r;
  if (profile(r) >= half) throw NoHalfCrossing("profile stays above half maximum at the upper boundary");
  const double xl = x(l) + (half - profile(l)) * (x(l + 1) - x(l)) / (profile(l + 1) - profile(l));
  const double xr = x(r - 1) + (half - profile(r - 1)) * (x(r) - x(r - 1)) / (profile(r) - profile(r - 1));
  return xr - xl;
}

ProfileStats profile_stats(const Eigen::ArrayXXd& density, const PlaneGrid& grid, double atoms0, double atoms_end) {
  grid.validate();
  if (density.rows() != grid.n[0] || density.cols() != grid.n[1]) throw DomainError("density does not match grid");
  Eigen::Index i, j;
  const double peak = density.maxCoeff(&i, &j);
  if (!(peak > 0.0)) throw DomainError("density map has no peak");
  ProfileStats s;
  s.peak = peak;
  s.fwhm_x = fwhm(grid.axis(0), density.col(j));
  s.fwhm_y = fwhm(grid.axis(1), density.row(i).transpose());
  s.integrated_atoms = density.sum() * grid.spacing(0) * grid.spacing(1);
  s.loss_fraction = 1.0 - atoms_end / atoms0;
  return s;
}

ProfileStats profile_stats(const DepositMap& map, double atoms0, double atoms_end) {
  return profile_stats(map.density(), map.grid, atoms0, atoms_end);
}

namespace {

Eigen::ArrayXd trapezoid_weights(const std::vector<double>& t) {
  const std::size_t n = t.size();
  Eigen::ArrayXd w = Eigen::ArrayXd::Zero(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double h = t[i] - t[i - 1];
    w(i - 1) += 0.5 * h;
    w(i) += 0.5 * h;
  }
  return w;
}

/// Per-sample amplitude N / (pi^(3/2) W) exp(-h^2 / Wz^2) times its time weight.
Eigen::ArrayXd plane_weights(const std::vector<VariationalState>& states, const Kinematics& kin) {
  std::vector<double> t;
  t.reserve(states.size());
  for (const auto& s : states) t.push_back(s.t);
  Eigen::ArrayXd w = trapezoid_weights(t);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    const double h = kin.height(s.t);
    w(i) *= ansatz_peak_density(s) * std::exp(-h * h / (s.width(2) * s.width(2)));
  }
  return w;
}

Eigen::MatrixXd gaussian_columns(const Eigen::ArrayXd& axis, const std::vector<VariationalState>& states, int r) {
  Eigen::MatrixXd g(axis.size(), Eigen::Index(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s) {
    g.col(s) = (-(axis / states[s].width(r)).square()).exp().matrix();
  }
  return g;
}

Eigen::ArrayXd cut(const Eigen::ArrayXd& axis, const std::vector<VariationalState>& states, const Eigen::ArrayXd& w,
                   int r) {
  return (gaussian_columns(axis, states, r) * w.matrix()).array();
}

Eigen::ArrayXd symmetric_axis(double half, int n) {
  return Eigen::ArrayXd::LinSpaced(n, -half, half);
}

double cut_fwhm(const std::vector<VariationalState>& states, const Eigen::ArrayXd& w, int r, double guess,
                int points, Eigen::ArrayXd& axis_out, Eigen::ArrayXd& cut_out) {
  double half = 4.0 * guess;
  double coarse = 0.0;
  for (int attempt = 0;; ++attempt) {
    const Eigen::ArrayXd ax = symmetric_axis(half, std::max(201, points / 4));
    try {
      coarse = fwhm(ax, cut(ax, states, w, r));
      break;
    } catch (const NoHalfCrossing&) {
      if (attempt > 20) throw;
      half *= 2.0;
    }
  }
  axis_out = symmetric_axis(1.5 * coarse, points);
  cut_out = cut(axis_out, states, w, r);
  return fwhm(axis_out, cut_out);
}

} // namespace

DepositMap deposit_from_states(const std::vector<VariationalState>& states, const Kinematics& kin,
                               const PlaneGrid& grid) {
  grid.validate();
  if (states.size() < 2) throw DomainError("deposit needs at least two states");
  const Eigen::ArrayXd w = plane_weights(states, kin);
  DepositMap m;
  m.grid = grid;
  m.speed = kin.plane_speed();
  m.t_end = states.back().t;
  m.source = "variational";
  const Eigen::MatrixXd gx = gaussian_columns(grid.axis(0), states, 0);
  const Eigen::MatrixXd gy = gaussian_columns(grid.axis(1), states, 1);
  m.raw = (gx * w.matrix().asDiagonal() * gy.transpose()).array();
  return m;
}

VariationalDeposit deposit_variational(const VariationalConfig& cfg, const DepositOptions& opts) {
  cfg.validate();
  if (!(opts.plane_height < cfg.kin.z0)) throw DomainError("deposit plane must lie below the release height");
  Kinematics kin = cfg.kin;
  kin.z0 -= opts.plane_height;
  VariationalDeposit out;
  out.t_cross = kin.plane_crossing_time();

  SamplingPlan probe;
  probe.times = {out.t_cross};
  const auto head = integrate(cfg, out.t_cross, probe);
  const double wz = head.back().width(2);
  const double t_end = opts.t_end > 0.0 ? opts.t_end : kin.time_to_fall(kin.z0 + 3.0 * wz);
  if (!(t_end > out.t_cross)) throw DomainError("deposit end time precedes the plane crossing");
  const double t_begin = kin.z0 > 6.0 * wz ? kin.time_to_fall(kin.z0 - 6.0 * wz) : 0.0;

  SamplingPlan plan;
  const int backbone = 4000;
  for (int i = 0; i <= backbone; ++i) plan.times.push_back(t_begin + (t_end - t_begin) * i / backbone);
  plan.times.push_back(out.t_cross);
  std::sort(plan.times.begin(), plan.times.end());
  plan.dense_begin = t_begin;
  plan.dense_end = t_end;
  plan.substeps = opts.substeps;
  out.trajectory = integrate(cfg, t_end, plan);

  std::vector<VariationalState> window;
  for (const auto& s : out.trajectory) {
    if (s.t >= t_begin) window.push_back(s);
    if (s.t == out.t_cross) out.at_crossing = s;
  }
  const Eigen::ArrayXd w = plane_weights(window, kin);
  const double speed = kin.plane_speed();

  // Weighted RMS width sets the first search range.
  Vec3 guess = Vec3::Zero();
  for (std::size_t s = 0; s < window.size(); ++s) guess += w(s) * window[s].width.cwiseAbs2();
  guess = (guess / w.sum()).cwiseSqrt();

  const double fx = cut_fwhm(window, w, 0, guess(0), opts.cut_points, out.cut_xpos, out.cut_x);
  const double fy = cut_fwhm(window, w, 1, guess(1), opts.cut_points, out.cut_ypos, out.cut_y);
  out.cut_x *= speed;
  out.cut_y *= speed;

  PlaneGrid grid;
  grid.n = opts.map_points;
  grid.extent = {2.0 * opts.map_half_width * fx, 2.0 * opts.map_half_width * fy};
  out.map = deposit_from_states(window, kin, grid);
  out.map.t_end = t_end;

  double integrated = 0.0;
  for (std::size_t s = 0; s < window.size(); ++s) {
    integrated += w(s) * constants::pi * window[s].width(0) * window[s].width(1);
  }
  out.stats.fwhm_x = fx;
  out.stats.fwhm_y = fy;
  out.stats.peak = std::max(out.cut_x.maxCoeff(), out.cut_y.maxCoeff());
  out.stats.integrated_atoms = integrated * speed;
  out.stats.loss_fraction = 1.0 - out.trajectory.back().atoms / cfg.atoms0;
  return out;
}

InstantProfile instantaneous_profile(const std::vector<VariationalState>& trajectory, const Kinematics& kin,
                                     double atoms0, double t_star, std::array<int, 2> points) {
  if (trajectory.empty()) throw DomainError("empty trajectory");
  if (t_star < trajectory.front().t || t_star > trajectory.back().t) {
    throw DomainError("instant " + std::to_string(t_star) + " s outside the simulated span");
  }
  auto it = std::lower_bound(trajectory.begin(), trajectory.end(), t_star,
                             [](const VariationalState& s, double t) { return s.t < t; });
  VariationalState st = *it;
  if (it->t != t_star) {
    const VariationalState& a = *(it - 1);
    const VariationalState& b = *it;
    const double u = (t_star - a.t) / (b.t - a.t);
    st.t = t_star;
    st.width = (1 - u) * a.width + u * b.width;
    st.width_rate = (1 - u) * a.width_rate + u * b.width_rate;
    st.atoms = (1 - u) * a.atoms + u * b.atoms;
  }
  InstantProfile p;
  p.state = st;
  p.grid.n = points;
  p.grid.extent = {5.0 * st.width(0), 5.0 * st.width(1)};
  const Eigen::ArrayXd xs = p.grid.axis(0), ys = p.grid.axis(1);
  p.column = column_density(st, xs, ys);
  p.slice = slice_density_at_plane(st, -kin.height(t_star), xs, ys);
  p.stats = profile_stats(p.column, p.grid, atoms0, st.atoms);
  return p;
}

Eigen::ArrayXXd resample(const Eigen::ArrayXXd& density, const Eigen::ArrayXd& from_x, const Eigen::ArrayXd& from_y,
                         const PlaneGrid& to) {
  auto locate = [](const Eigen::ArrayXd& ax, double v, int& i0, double& w) {
    const long n = ax.size();
    if (v < ax(0) || v > ax(n - 1)) return false;
    const double s = (v - ax(0)) / (ax(n - 1) - ax(0)) * double(n - 1);
    i0 = std::min(int(std::floor(s)), int(n - 2));
    w = s - i0;
    return true;
  };
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(to.n[0], to.n[1]);
  const Eigen::ArrayXd xs = to.axis(0), ys = to.axis(1);
  for (int i = 0; i < to.n[0]; ++i) {
    int ix;
    double wx;
    if (!locate(from_x, xs(i), ix, wx)) continue;
    for (int j = 0; j < to.n[1]; ++j) {
      int iy;
      double wy;
      if (!locate(from_y, ys(j), iy, wy)) continue;
      out(i, j) = (1 - wx) * ((1 - wy) * density(ix, iy) + wy * density(ix, iy + 1)) +
                  wx * ((1 - wy) * density(ix + 1, iy) + wy * density(ix + 1, iy + 1));
    }
  }
  return out;
}

void GpeSliceCollector::operator()(const GpeSnapshot& snap) {
  const FrameSample& f = snap.frame;
  const double t = snap.observation.t;
  const double z = -kin_.height(t) / f.lambda(2);
  const Eigen::ArrayXXd frame_slice = plane_density(snap.field, z) / f.volume();
  const GridSpec& g = snap.field.grid;
  const Eigen::ArrayXd fx = g.axis(0) * f.lambda(0), fy = g.axis(1) * f.lambda(1);
  const PlaneGrid native = PlaneGrid::from(g);
  if (f.lambda.isOnes() && native == grid_) {
    slices_.push_back({t, frame_slice});
  } else {
    slices_.push_back({t, resample(frame_slice, fx, fy, grid_)});
  }
}

} // namespace becfocus
