#include "becfocus/physics.hpp"

#include "becfocus/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace becfocus {

void SpeciesParams::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("species: ") + key + " must be finite and > 0");
    }
  };
  positive(mass, "mass");
  positive(linewidth, "linewidth");
  positive(saturation_intensity, "saturation_intensity");
  positive(three_body_K, "three_body_K");
  positive(recoil_wavenumber, "recoil_wavenumber");
  positive(bohr_radius, "bohr_radius");
}

SpeciesParams rb85() { return SpeciesParams{}; }

SpeciesParams load_species(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read species file: ") + e.what());
  }
  SpeciesParams s = rb85();
  const auto& sec = tree.get_child("species", tree);
  const auto preset = sec.get<std::string>("preset", "rb85");
  if (preset != "rb85") throw ConfigError("species: unknown preset '" + preset + "' (known: rb85)");
  s.name = sec.get<std::string>("name", s.name);
  if (auto v = sec.get_optional<double>("mass_kg")) s.mass = *v;
  if (auto v = sec.get_optional<double>("mass_amu")) s.mass = *v * constants::amu;
  s.linewidth = sec.get<double>("linewidth", s.linewidth);
  const auto conv = sec.get<std::string>("linewidth_convention", "angular");
  if (conv == "linear") {
    s.linewidth *= 2.0 * constants::pi;
  } else if (conv != "angular") {
    throw ConfigError("species: linewidth_convention must be angular or linear");
  }
  s.saturation_intensity = sec.get<double>("saturation_intensity", s.saturation_intensity);
  s.three_body_K = sec.get<double>("three_body_K", s.three_body_K);
  if (auto v = sec.get_optional<double>("recoil_wavelength")) s.recoil_wavenumber = 2.0 * constants::pi / *v;
  s.recoil_wavenumber = sec.get<double>("recoil_wavenumber", s.recoil_wavenumber);
  s.bohr_radius = sec.get<double>("bohr_radius", s.bohr_radius);
  s.validate();
  return s;
}

UnitScaling::UnitScaling(double mass, double omega)
    : length_(std::sqrt(constants::hbar / (mass * omega))),
      time_(1.0 / omega),
      energy_(constants::hbar * omega) {
  if (!(mass > 0.0) || !(omega > 0.0)) throw DomainError("UnitScaling: mass and omega must be > 0");
}

double interaction_strength(double scattering_length, const SpeciesParams& species) {
  using constants::hbar;
  return 4.0 * constants::pi * hbar * hbar * scattering_length / species.mass;
}

double kick_velocity(double n_kicks, const SpeciesParams& species) {
  if (n_kicks < 0.0) throw DomainError("kick_velocity: n_kicks must be >= 0");
  return n_kicks * constants::hbar * species.recoil_wavenumber / species.mass;
}

double fall_velocity_at(double z0, double v0, double g) {
  if (z0 < 0.0) throw DomainError("fall_velocity_at: z0 must be >= 0");
  return std::sqrt(v0 * v0 + 2.0 * g * z0);
}

} // namespace becfocus
