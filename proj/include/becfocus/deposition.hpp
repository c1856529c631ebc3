#pragma once

#include "becfocus/gpe.hpp"
#include "becfocus/variational.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace becfocus {

/// Cell-centred uniform (x, y) grid in the surface plane. Rows index x.
struct PlaneGrid {
  std::array<int, 2> n{201, 201};
  Eigen::Vector2d extent = Eigen::Vector2d::Constant(1e-6);  // m
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();

  void validate() const;
  double spacing(int r) const { return extent(r) / n[r]; }
  double coordinate(int r, int i) const { return offset(r) + (i + 0.5 - 0.5 * n[r]) * spacing(r); }
  Eigen::ArrayXd axis(int r) const;
  bool operator==(const PlaneGrid& o) const { return n == o.n && extent == o.extent && offset == o.offset; }

  /// The (x, y) part of a 3D grid.
  static PlaneGrid from(const GridSpec& g);
};

/// Density of the z = 0 plane at one instant (atoms/m^3).
struct DensitySlice {
  double t;
  Eigen::ArrayXXd density;
};

/// Time-integrated surface deposit. `raw` is the literal integral of the
/// plane density over time (atoms s/m^3); `density()` rescales it by the
/// centre-of-mass speed at the plane to atoms/m^2.
struct DepositMap {
  PlaneGrid grid;
  Eigen::ArrayXXd raw;
  double speed = 1.0;  // m/s
  double t_end = 0.0;
  std::string source;  // "variational" or "gpe"

  Eigen::ArrayXXd density() const { return raw * speed; }
};

struct ProfileStats {
  double fwhm_x = 0.0;
  double fwhm_y = 0.0;
  double peak = 0.0;  // atoms/m^2
  double integrated_atoms = 0.0;
  double loss_fraction = 0.0;
};

/// Trapezoidal time integral of plane slices sharing `grid`.
DepositMap accumulate_deposit(const PlaneGrid& grid, const std::vector<DensitySlice>& slices, double speed,
                              const std::string& source);

/// Width between the half-maximum crossings nearest the global maximum,
/// linearly interpolated. Throws NoHalfCrossing when a side never drops below half.
double fwhm(const Eigen::ArrayXd& x, const Eigen::ArrayXd& profile);

/// Peak, FWHM of the x and y cuts through the peak, and the integral of a
/// 2D density (atoms/m^2).
ProfileStats profile_stats(const Eigen::ArrayXXd& density, const PlaneGrid& grid, double atoms0, double atoms_end);
ProfileStats profile_stats(const DepositMap& map, double atoms0, double atoms_end);

struct DepositOptions {
  /// End of the time integral; non-positive selects the time at which the
  /// centre of mass is 3 W_z(t*) below the plane.
  double t_end = 0.0;
  /// Height of the deposit plane above the beam centre (m).
  double plane_height = 0.0;
  std::array<int, 2> map_points{201, 201};
  /// Map half-width in units of the FWHM along each axis.
  double map_half_width = 2.0;
  int cut_points = 2001;
  int substeps = 8;
};

struct VariationalDeposit {
  DepositMap map;
  ProfileStats stats;
  double t_cross = 0.0;           // centre of mass at the plane
  VariationalState at_crossing;
  std::vector<VariationalState> trajectory;
  Eigen::ArrayXd cut_x, cut_xpos;  // fine cut through the peak (atoms/m^2)
  Eigen::ArrayXd cut_y, cut_ypos;
};

/// Deposit of the Gaussian ansatz through the plane at opts.plane_height. The plane density
/// is separable, so the time integral is a matrix product Gx diag(w) Gy^T.
VariationalDeposit deposit_variational(const VariationalConfig& cfg, const DepositOptions& opts = {});

/// Deposit of given ansatz states (trapezoid weights over their times) on a grid.
DepositMap deposit_from_states(const std::vector<VariationalState>& states, const Kinematics& kin,
                               const PlaneGrid& grid);

struct InstantProfile {
  PlaneGrid grid;
  Eigen::ArrayXXd column;  // atoms/m^2, z-integrated ansatz density
  Eigen::ArrayXXd slice;   // atoms/m^3 at z = 0
  ProfileStats stats;      // from the column density
  VariationalState state;
};

/// Profile of the ansatz at the instant t_star (default: plane crossing).
InstantProfile instantaneous_profile(const std::vector<VariationalState>& trajectory, const Kinematics& kin,
                                     double atoms0, double t_star, std::array<int, 2> points = {201, 201});

/// Collects z = 0 plane slices from a GPE evolution onto a fixed lab grid.
/// The field's z axis points up with the centre of mass at z = 0, so the
/// plane lies at z = -(z0 - fallen(t)); scaling-frame fields are mapped to lab
/// coordinates and bilinearly resampled.
class GpeSliceCollector {
public:
  GpeSliceCollector(Kinematics kin, PlaneGrid lab_grid) : kin_(kin), grid_(lab_grid) {}
  void operator()(const GpeSnapshot& snap);
  const std::vector<DensitySlice>& slices() const { return slices_; }
  const PlaneGrid& grid() const { return grid_; }

private:
  Kinematics kin_;
  PlaneGrid grid_;
  std::vector<DensitySlice> slices_;
};

/// Bilinear resampling of a density given on the (x, y) nodes of `from` onto
/// `to`; zero outside the source box.
Eigen::ArrayXXd resample(const Eigen::ArrayXXd& density, const Eigen::ArrayXd& from_x, const Eigen::ArrayXd& from_y,
                         const PlaneGrid& to);

} // namespace becfocus
