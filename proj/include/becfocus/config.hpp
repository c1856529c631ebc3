#pragma once

#include "becfocus/gpe.hpp"
#include "becfocus/optics.hpp"
#include "becfocus/physics.hpp"
#include "becfocus/variational.hpp"

#include <string>
#include <vector>

namespace becfocus {

enum class ModelSelect { Variational, Gpe, Both };
enum class PowerReference { Ballistic, FixedXi };
enum class PowerUnit { Relative, Watt };
enum class InitialWidths { ThomasFermi, Equilibrium };
enum class DepositPlane { Surface, Focus };

struct GpeSettings {
  GridSpec grid{{128, 64, 64}, Vec3(83e-6, 20.2e-6, 20.2e-6), Vec3::Zero()};  // 24 and 15.5 oscillator lengths of the default trap
  double rel_tol = 1e-6;
  double ground_state_tol = 1e-10;
  bool scaling_frame = true;
  int observations = 400;       // uniform schedule over the run
  int focus_observations = 400; // extra samples around the plane crossing
  double absorbing_width = 0.0;
};

/// Everything a run or sweep needs. Keys of the INI file (all SI unless noted):
///
///   [species]    see load_species
///   [trap]       frequency_x, frequency_y, frequency_z (Hz); atoms;
///                scattering_length_a0 (in-trap, sets the initial widths);
///                quench (true: in-trap value above, false: same as the run's a_s);
///                initial_widths (thomas_fermi | equilibrium: stationary Gaussian)
///   [beam]       sigma_z; harmonic_k; detuning (rad/s) | detuning_hz;
///                power_reference (ballistic | fixed); xi (fixed only, 0 = calibrate)
///   [kinematics] z0; g
///   [model]      select (variational | gpe | both); rel_tol; collapse_floor;
///                loss_multiplier; deposit_plane (surface: z = 0 | focus: the
///                point's focal plane z_f)
///   [sweep]      scattering_length_a0, power, kick (comma-separated lists);
///                power_unit (relative | watt)
///   [gpe]        nx, ny, nz; extent_x, extent_y, extent_z; rel_tol;
///                ground_state_tol; frame (scaling | plain); observations;
///                focus_observations; absorbing_width
///   [output]     directory; workers (0 = hardware concurrency);
///                trajectory (bool); deposit (bool)
struct RunConfig {
  SpeciesParams species;
  TrapFrequencies trap;
  double atoms0 = 1e5;
  double initial_scattering_a0 = 100.0;
  bool quench = true;
  InitialWidths initial_widths = InitialWidths::ThomasFermi;

  FocusingBeam beam;
  PowerReference power_reference = PowerReference::Ballistic;
  double xi = 0.0;
  Kinematics kin;

  ModelSelect model = ModelSelect::Variational;
  double rel_tol = 1e-10;
  double collapse_floor = 1e-9;
  double loss_multiplier = 1.0;
  DepositPlane deposit_plane = DepositPlane::Surface;

  std::vector<double> scattering_a0{100.0};
  std::vector<double> powers{1.0};
  PowerUnit power_unit = PowerUnit::Relative;
  std::vector<double> kicks{0.0};

  GpeSettings gpe;

  std::string output_dir = "out";
  int workers = 0;
  bool write_trajectory = true;
  bool write_deposit = true;

  void validate() const;
};

/// Reads an INI run configuration; missing keys keep the defaults above.
/// Throws ConfigError on unreadable files, unknown enum values or invalid values.
RunConfig load_run_config(const std::string& path);

/// Full-scale defaults (Rb-85, 500 um drop, 100 um beam, a_s = 100 a0, P = P_opt, no kick).
RunConfig default_run_config();

/// The scaled-down configuration used for the variational-vs-GPE comparison:
/// z0 = 50 um, sigma_z = 20 um, N0 = 1e4, k scaled by sqrt(0.1), no quench.
RunConfig reduced_run_config();

std::string to_string(ModelSelect m);
std::string to_string(PowerReference r);
std::string to_string(InitialWidths w);
std::string to_string(DepositPlane p);

} // namespace becfocus
