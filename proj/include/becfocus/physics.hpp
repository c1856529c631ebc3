#pragma once

#include <cmath>
#include <numbers>
#include <string>

namespace becfocus {

namespace constants {
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double amu = 1.66053906660e-27;  // kg
inline constexpr double pi = std::numbers::pi;
inline constexpr double standard_gravity = 9.81;  // m/s^2
} // namespace constants

/// Atomic constants of the condensed species. All SI.
///
/// The linewidth is always stored as an angular rate (s^-1). Presets given as
/// a linear frequency are converted on load (see `LinewidthConvention`).
struct SpeciesParams {
  std::string name = "Rb85";
  double mass = 84.911789738 * constants::amu;
  double linewidth = 3.8e7;             // gamma, s^-1 (angular)
  double saturation_intensity = 16.7;   // W/m^2
  double three_body_K = 4e-41;          // m^6/s
  double recoil_wavenumber = 2.0 * constants::pi / 780.24e-9;  // 1/m
  double bohr_radius = 5.29e-11;        // m

  void validate() const;
};

enum class LinewidthConvention { Angular, Linear };

SpeciesParams rb85();

/// Reads a species block from an INI file. Keys (section `[species]`):
/// preset (rb85), name, mass_kg | mass_amu, linewidth, linewidth_convention (angular|linear),
/// saturation_intensity, three_body_K, recoil_wavelength | recoil_wavenumber,
/// bohr_radius. Missing keys keep the Rb-85 defaults.
SpeciesParams load_species(const std::string& path);

/// Harmonic-oscillator units of a reference trap frequency.
///
/// length = sqrt(hbar/(m w)), time = 1/w, energy = hbar w.
class UnitScaling {
public:
  UnitScaling(double mass, double omega);

  double length_unit() const { return length_; }
  double time_unit() const { return time_; }
  double energy_unit() const { return energy_; }

  double length_to_si(double q) const { return q * length_; }
  double length_from_si(double q) const { return q / length_; }
  double time_to_si(double q) const { return q * time_; }
  double time_from_si(double q) const { return q / time_; }
  double energy_to_si(double q) const { return q * energy_; }
  double energy_from_si(double q) const { return q / energy_; }
  double velocity_to_si(double q) const { return q * length_ / time_; }
  double velocity_from_si(double q) const { return q * time_ / length_; }

private:
  double length_;
  double time_;
  double energy_;
};

/// u = 4 pi hbar^2 a_s / m  (J m^3). Negative a_s gives attraction.
double interaction_strength(double scattering_length, const SpeciesParams& species);

/// Initial velocity imparted by n photon recoils: n hbar k_L / m.
double kick_velocity(double n_kicks, const SpeciesParams& species);

/// Speed after the centre of mass has fallen a distance z0 from initial speed v0.
double fall_velocity_at(double z0, double v0, double g = constants::standard_gravity);

/// Energy-equivalent three-body coefficient hbar*K (J m^6) entering the
/// Gross-Pitaevskii loss term -i hbar K |psi|^4.
inline double loss_energy_coefficient(const SpeciesParams& s) { return constants::hbar * s.three_body_K; }

} // namespace becfocus
