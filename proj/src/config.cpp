#include "becfocus/config.hpp"

#include "becfocus/errors.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <sstream>

namespace becfocus {

namespace pt = boost::property_tree;

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<double> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (p.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw ConfigError(key + ": cannot parse '" + p + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(key + ": list is empty");
  return out;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError(key + ": invalid value '" + tree.get<std::string>(key) + "'");
  }
}

bool get_bool(const pt::ptree& tree, const std::string& key, bool fallback) {
  auto v = tree.get_optional<std::string>(key);
  if (!v) return fallback;
  std::string s = boost::to_lower_copy(boost::trim_copy(*v));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + *v + "'");
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be finite and > 0");
}

} // namespace

std::string to_string(ModelSelect m) {
  switch (m) {
  case ModelSelect::Variational: return "variational";
  case ModelSelect::Gpe: return "gpe";
  case ModelSelect::Both: return "both";
  }
  return "?";
}

std::string to_string(DepositPlane p) { return p == DepositPlane::Surface ? "surface" : "focus"; }

std::string to_string(InitialWidths w) { return w == InitialWidths::ThomasFermi ? "thomas_fermi" : "equilibrium"; }

std::string to_string(PowerReference r) { return r == PowerReference::Ballistic ? "ballistic" : "fixed"; }

void RunConfig::validate() const {
  species.validate();
  require_positive(trap.x, "trap.frequency_x");
  require_positive(trap.y, "trap.frequency_y");
  require_positive(trap.z, "trap.frequency_z");
  require_positive(atoms0, "trap.atoms");
  require_positive(beam.sigma_z, "beam.sigma_z");
  require_positive(beam.harmonic_k, "beam.harmonic_k");
  require_positive(beam.detuning, "beam.detuning");
  require_positive(kin.z0, "kinematics.z0");
  require_positive(kin.g, "kinematics.g");
  if (!(xi >= 0.0)) throw ConfigError("beam.xi must be >= 0");
  require_positive(rel_tol, "model.rel_tol");
  if (rel_tol > 1e-8) throw ConfigError("model.rel_tol must be <= 1e-8");
  require_positive(collapse_floor, "model.collapse_floor");
  if (!(loss_multiplier >= 0.0)) throw ConfigError("model.loss_multiplier must be >= 0");
  if (scattering_a0.empty() || powers.empty() || kicks.empty()) throw ConfigError("sweep axes must be nonempty");
  for (double p : powers) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("sweep.power entries must be >= 0");
  }
  for (double k : kicks) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("sweep.kick entries must be >= 0");
  }
  for (double a : scattering_a0) {
    if (!std::isfinite(a)) throw ConfigError("sweep.scattering_length_a0 entries must be finite");
  }
  if (initial_widths == InitialWidths::ThomasFermi) {
    const double in_trap = quench ? initial_scattering_a0 : *std::min_element(scattering_a0.begin(), scattering_a0.end());
    if (!(in_trap > 0.0)) {
      throw ConfigError("Thomas-Fermi initial widths need an in-trap scattering length > 0; use "
                        "trap.initial_widths = equilibrium");
    }
  }
  if (model != ModelSelect::Variational && !quench) {
    if (*std::min_element(scattering_a0.begin(), scattering_a0.end()) < 0.0) {
      throw ConfigError("gpe ground state needs an in-trap scattering length >= 0 (enable trap.quench)");
    }
  }
  if (model != ModelSelect::Variational) {
    gpe.grid.validate();
    const double in_trap = quench ? initial_scattering_a0 : *std::min_element(scattering_a0.begin(), scattering_a0.end());
    gpe.grid.validate_resolution(equilibrium_widths(trap, atoms0, in_trap * species.bohr_radius, species));
    require_positive(gpe.rel_tol, "gpe.rel_tol");
    require_positive(gpe.ground_state_tol, "gpe.ground_state_tol");
    if (gpe.observations < 2) throw ConfigError("gpe.observations must be >= 2");
    if (gpe.focus_observations < 0) throw ConfigError("gpe.focus_observations must be >= 0");
    if (!(gpe.absorbing_width >= 0.0 && gpe.absorbing_width < 0.5)) {
      throw ConfigError("gpe.absorbing_width must be in [0, 0.5)");
    }
  }
  if (output_dir.empty()) throw ConfigError("output.directory must not be empty");
  if (workers < 0) throw ConfigError("output.workers must be >= 0");
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig reduced_run_config() {
  RunConfig c;
  c.atoms0 = 1e4;
  c.quench = false;
  c.initial_widths = InitialWidths::Equilibrium;
  c.kin.z0 = 50e-6;
  c.beam.sigma_z = 20e-6;
  c.beam.harmonic_k *= std::sqrt(0.1);
  c.scattering_a0 = {0.0, 10.0};
  c.model = ModelSelect::Both;
  c.power_reference = PowerReference::FixedXi;
  c.xi = 5.37;
  c.gpe.grid.n = {128, 64, 64};
  return c;
}

RunConfig load_run_config(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  RunConfig c;
  if (tree.get_child_optional("species")) c.species = load_species(path);

  const double two_pi = 2.0 * constants::pi;
  c.trap.x = two_pi * get<double>(tree, "trap.frequency_x", c.trap.x / two_pi);
  c.trap.y = two_pi * get<double>(tree, "trap.frequency_y", c.trap.y / two_pi);
  c.trap.z = two_pi * get<double>(tree, "trap.frequency_z", c.trap.z / two_pi);
  c.atoms0 = get<double>(tree, "trap.atoms", c.atoms0);
  c.initial_scattering_a0 = get<double>(tree, "trap.scattering_length_a0", c.initial_scattering_a0);
  c.quench = get_bool(tree, "trap.quench", c.quench);
  const auto iw = boost::to_lower_copy(get<std::string>(tree, "trap.initial_widths", to_string(c.initial_widths)));
  if (iw == "thomas_fermi") {
    c.initial_widths = InitialWidths::ThomasFermi;
  } else if (iw == "equilibrium") {
    c.initial_widths = InitialWidths::Equilibrium;
  } else {
    throw ConfigError("trap.initial_widths must be thomas_fermi or equilibrium");
  }

  c.beam.sigma_z = get<double>(tree, "beam.sigma_z", c.beam.sigma_z);
  c.beam.harmonic_k = get<double>(tree, "beam.harmonic_k", c.beam.harmonic_k);
  if (tree.get_optional<std::string>("beam.detuning_hz")) {
    c.beam.detuning = two_pi * get<double>(tree, "beam.detuning_hz", 0.0);
  }
  c.beam.detuning = get<double>(tree, "beam.detuning", c.beam.detuning);
  const auto ref = boost::to_lower_copy(get<std::string>(tree, "beam.power_reference", "ballistic"));
  if (ref == "ballistic") {
    c.power_reference = PowerReference::Ballistic;
  } else if (ref == "fixed") {
    c.power_reference = PowerReference::FixedXi;
  } else {
    throw ConfigError("beam.power_reference must be ballistic or fixed");
  }
  c.xi = get<double>(tree, "beam.xi", c.xi);

  c.kin.z0 = get<double>(tree, "kinematics.z0", c.kin.z0);
  c.kin.g = get<double>(tree, "kinematics.g", c.kin.g);

  const auto model = boost::to_lower_copy(get<std::string>(tree, "model.select", "variational"));
  if (model == "variational") {
    c.model = ModelSelect::Variational;
  } else if (model == "gpe") {
    c.model = ModelSelect::Gpe;
  } else if (model == "both") {
    c.model = ModelSelect::Both;
  } else {
    throw ConfigError("model.select must be variational, gpe or both");
  }
  c.rel_tol = get<double>(tree, "model.rel_tol", c.rel_tol);
  c.collapse_floor = get<double>(tree, "model.collapse_floor", c.collapse_floor);
  c.loss_multiplier = get<double>(tree, "model.loss_multiplier", c.loss_multiplier);
  const auto plane = boost::to_lower_copy(get<std::string>(tree, "model.deposit_plane", "surface"));
  if (plane == "surface") {
    c.deposit_plane = DepositPlane::Surface;
  } else if (plane == "focus") {
    c.deposit_plane = DepositPlane::Focus;
  } else {
    throw ConfigError("model.deposit_plane must be surface or focus");
  }

  if (auto v = tree.get_optional<std::string>("sweep.scattering_length_a0")) {
    c.scattering_a0 = parse_list(*v, "sweep.scattering_length_a0");
  }
  if (auto v = tree.get_optional<std::string>("sweep.power")) c.powers = parse_list(*v, "sweep.power");
  if (auto v = tree.get_optional<std::string>("sweep.kick")) c.kicks = parse_list(*v, "sweep.kick");
  const auto unit = boost::to_lower_copy(get<std::string>(tree, "sweep.power_unit", "relative"));
  if (unit == "relative") {
    c.power_unit = PowerUnit::Relative;
  } else if (unit == "watt") {
    c.power_unit = PowerUnit::Watt;
  } else {
    throw ConfigError("sweep.power_unit must be relative or watt");
  }

  c.gpe.grid.n[0] = get<int>(tree, "gpe.nx", c.gpe.grid.n[0]);
  c.gpe.grid.n[1] = get<int>(tree, "gpe.ny", c.gpe.grid.n[1]);
  c.gpe.grid.n[2] = get<int>(tree, "gpe.nz", c.gpe.grid.n[2]);
  c.gpe.grid.extent(0) = get<double>(tree, "gpe.extent_x", c.gpe.grid.extent(0));
  c.gpe.grid.extent(1) = get<double>(tree, "gpe.extent_y", c.gpe.grid.extent(1));
  c.gpe.grid.extent(2) = get<double>(tree, "gpe.extent_z", c.gpe.grid.extent(2));
  c.gpe.rel_tol = get<double>(tree, "gpe.rel_tol", c.gpe.rel_tol);
  c.gpe.ground_state_tol = get<double>(tree, "gpe.ground_state_tol", c.gpe.ground_state_tol);
  const auto frame = boost::to_lower_copy(get<std::string>(tree, "gpe.frame", "scaling"));
  if (frame != "scaling" && frame != "plain") throw ConfigError("gpe.frame must be scaling or plain");
  c.gpe.scaling_frame = frame == "scaling";
  c.gpe.observations = get<int>(tree, "gpe.observations", c.gpe.observations);
  c.gpe.focus_observations = get<int>(tree, "gpe.focus_observations", c.gpe.focus_observations);
  c.gpe.absorbing_width = get<double>(tree, "gpe.absorbing_width", c.gpe.absorbing_width);

  c.output_dir = get<std::string>(tree, "output.directory", c.output_dir);
  c.workers = get<int>(tree, "output.workers", c.workers);
  c.write_trajectory = get_bool(tree, "output.trajectory", c.write_trajectory);
  c.write_deposit = get_bool(tree, "output.deposit", c.write_deposit);

  c.validate();
  return c;
}

} // namespace becfocus
