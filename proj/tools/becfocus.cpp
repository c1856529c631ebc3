#include "becfocus/config.hpp"
#include "becfocus/errors.hpp"
#include "becfocus/optics.hpp"
#include "becfocus/plotdata.hpp"
#include "becfocus/sweep.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

using namespace becfocus;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

RunConfig load_or_default(const std::string& path) { return path.empty() ? default_run_config() : load_run_config(path); }

void print_row(const ResultRow& r) {
  std::printf("%-28s %-11s z_f=%9.3f um  fwhm_x=%8.2f nm  fwhm_y=%8.1f nm  peak=%10.4g /um^2  "
              "inst_fwhm_x=%7.2f nm  loss=%6.3f%%  %s\n",
              r.run_id.c_str(), r.model.c_str(), r.z_f * 1e6, r.fwhm_x * 1e9, r.fwhm_y * 1e9, r.peak * 1e-12,
              r.inst_fwhm_x * 1e9, 100.0 * r.loss_fraction, r.status.c_str());
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical focusing of a falling Bose-Einstein condensate: variational and GPE models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int workers = -1;

  auto* run = app.add_subcommand("run", "Evaluate a single sweep point");
  run->add_option("config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  double a_s = std::numeric_limits<double>::quiet_NaN();
  double power = std::numeric_limits<double>::quiet_NaN();
  double kick = std::numeric_limits<double>::quiet_NaN();
  std::string model_name;
  run->add_option("--a-s", a_s, "Scattering length (a0); default: first sweep value");
  run->add_option("--power", power, "Power in the config's unit; default: first sweep value");
  run->add_option("--kick", kick, "Momentum kick (hbar k_L); default: first sweep value");
  run->add_option("--model", model_name, "variational | gpe; default: the config's model")
      ->check(CLI::IsMember({"variational", "gpe"}));
  run->add_option("-o,--output", output_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run the Cartesian product of the sweep axes");
  sweep->add_option("config", config_path, "INI run configuration")->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--output", output_dir, "Output directory");
  sweep->add_option("-j,--workers", workers, "Worker threads (0 = hardware concurrency)");

  auto* repro = app.add_subcommand("reproduce", "Run a figure recipe and emit its plot data");
  std::string figure;
  bool full_scale = false;
  repro->add_option("figure-id", figure, "fig3 | fig4 | fig44 | fig5 | fig6 | fig7 | fig9 | fig10")->required();
  repro->add_option("-c,--config", config_path, "Base configuration (defaults: built-in full-scale parameters)")
      ->check(CLI::ExistingFile);
  repro->add_option("-o,--output", output_dir, "Output directory");
  repro->add_option("-j,--workers", workers, "Worker threads (0 = hardware concurrency)");
  repro->add_flag("--full-scale", full_scale, "fig9/fig10 at full scale instead of the reduced configuration");

  auto* cal = app.add_subcommand("calibrate-xi", "Calibrate the focusing coefficient and optimal power");
  std::vector<double> cal_kicks;
  cal->add_option("-c,--config", config_path, "Configuration (defaults: built-in full-scale parameters)")->check(CLI::ExistingFile);
  cal->add_option("--kick", cal_kicks, "Kicks (hbar k_L); default: the config's kick axis");

  auto* val = app.add_subcommand("validate-config", "Parse and validate a configuration");
  val->add_option("config", config_path, "INI run configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig cfg = load_or_default(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (workers >= 0) cfg.workers = workers;

    if (*val) {
      cfg.validate();
      std::cout << "valid: " << cfg.scattering_a0.size() * cfg.powers.size() * cfg.kicks.size()
                << " sweep point(s), model " << to_string(cfg.model) << ", power reference "
                << to_string(cfg.power_reference) << "\n";
      return kOk;
    }

    if (*cal) {
      if (cal_kicks.empty()) cal_kicks = cfg.kicks;
      std::printf("%8s %10s %10s %12s %12s %12s\n", "kick", "xi_unif", "xi_ball", "P_unif_mW", "P_ball_mW", "v_plane");
      for (double k : cal_kicks) {
        Kinematics kin = cfg.kin;
        kin.v0 = kick_velocity(k, cfg.species);
        const double E0 = kinetic_energy_at_plane(kin, cfg.species);
        XiCalibrationOptions ballistic;
        ballistic.model = LongitudinalModel::Ballistic;
        const double xu = calibrate_xi(kin, cfg.beam, cfg.species).xi;
        const double xb = calibrate_xi(kin, cfg.beam, cfg.species, ballistic).xi;
        std::printf("%8g %10.4f %10.4f %12.4f %12.4f %12.5f\n", k, xu, xb,
                    1e3 * optimal_power(E0, xu, cfg.beam, cfg.species),
                    1e3 * optimal_power(E0, xb, cfg.beam, cfg.species), kin.plane_speed());
      }
      return kOk;
    }

    if (*run) {
      SweepPoint p;
      p.scattering_a0 = std::isnan(a_s) ? cfg.scattering_a0.front() : a_s;
      p.power = std::isnan(power) ? cfg.powers.front() : power;
      p.kick = std::isnan(kick) ? cfg.kicks.front() : kick;
      if (!model_name.empty()) {
        p.model = model_name == "gpe" ? ModelSelect::Gpe : ModelSelect::Variational;
      } else {
        p.model = cfg.model == ModelSelect::Gpe ? ModelSelect::Gpe : ModelSelect::Variational;
      }
      if (p.model == ModelSelect::Gpe && cfg.model == ModelSelect::Variational) cfg.model = ModelSelect::Gpe;
      cfg.scattering_a0 = {p.scattering_a0};
      cfg.powers = {p.power};
      cfg.kicks = {p.kick};
      const ResultRow r = run_single(cfg, p);
      print_row(r);
      return r.failed() ? kPartialFailure : kOk;
    }

    if (*sweep) {
      const SweepResult res = run_sweep(cfg);
      for (const auto& r : res.rows()) print_row(r);
      std::cout << "results: " << cfg.output_dir << "/results.csv\n";
      return res.partial_failure() ? kPartialFailure : kOk;
    }

    if (*repro) {
      const FigureRecipe recipe = make_recipe(figure, cfg, full_scale);
      RunConfig rc = recipe.config;
      rc.output_dir = cfg.output_dir + "/" + figure;
      const SweepResult res = run_sweep(rc);
      for (const auto& r : res.rows()) print_row(r);
      const PlotFiles files = emit_plotdata(res.points, recipe, rc.output_dir);
      std::cout << "plot data: " << files.csv << ", " << files.json << "\n";
      return res.partial_failure() ? kPartialFailure : kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartialFailure;
  }
  return kOk;
}
