#include "becfocus/plotdata.hpp"

#include "becfocus/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

namespace becfocus {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::vector<double> kScattering{-1, 1, 5, 10, 50, 100};

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string label(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Figure {
  std::string id;
  std::string description;
  std::vector<std::string> columns;  // shared by every series
  std::vector<Series> series;
  json extra = json::object();
};

PlotFiles write_figure(const Figure& fig, const std::string& dir) {
  fs::create_directories(dir);
  PlotFiles files{(fs::path(dir) / (fig.id + ".csv")).string(), (fs::path(dir) / (fig.id + ".json")).string()};
  std::ofstream csv(files.csv, std::ios::binary);
  csv << "series";
  for (const auto& c : fig.columns) csv << ',' << c;
  csv << '\n';
  json jseries = json::array();
  for (const auto& s : fig.series) {
    json cols = json::object();
    for (std::size_t c = 0; c < fig.columns.size(); ++c) {
      json v = json::array();
      for (const auto& r : s.rows) v.push_back(jnum(r[c]));
      cols[fig.columns[c]] = v;
    }
    jseries.push_back({{"name", s.name}, {"data", cols}});
    for (const auto& r : s.rows) {
      csv << s.name;
      for (double v : r) csv << ',' << num(v);
      csv << '\n';
    }
  }
  json doc = {{"figure", fig.id}, {"description", fig.description}, {"columns", fig.columns}, {"series", jseries}};
  for (auto it = fig.extra.begin(); it != fig.extra.end(); ++it) doc[it.key()] = it.value();
  std::ofstream(files.json, std::ios::binary) << doc.dump(2) << '\n';
  return files;
}

const PointResult* find(const std::vector<PointResult>& results, const SweepPoint& p) {
  for (const auto& r : results) {
    if (r.point == p) return &r;
  }
  return nullptr;
}

/// One series per value of `group`, ordered along `along`, over the recipe's points.
Figure tabular(const std::vector<const PointResult*>& pts, const std::function<double(const SweepPoint&)>& group,
               const char* group_fmt, const std::function<double(const SweepPoint&)>& along,
               const std::string& along_name, const std::vector<std::string>& value_names,
               const std::function<std::vector<double>(const ResultRow&)>& values) {
  Figure fig;
  fig.columns = {along_name};
  fig.columns.insert(fig.columns.end(), value_names.begin(), value_names.end());
  std::vector<std::pair<std::string, double>> keys;
  for (const auto* p : pts) {
    const std::string name = (p->point.model == ModelSelect::Gpe ? "gpe_" : "var_") + label(group_fmt, group(p->point));
    auto it = std::find_if(fig.series.begin(), fig.series.end(), [&](const Series& s) { return s.name == name; });
    if (it == fig.series.end()) {
      fig.series.push_back({name, fig.columns, {}});
      it = fig.series.end() - 1;
    }
    std::vector<double> row{along(p->point)};
    const auto v = values(p->row);
    row.insert(row.end(), v.begin(), v.end());
    it->rows.push_back(row);
  }
  for (auto& s : fig.series) {
    std::sort(s.rows.begin(), s.rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
  }
  return fig;
}

double scattering(const SweepPoint& p) { return p.scattering_a0; }
double power(const SweepPoint& p) { return p.power; }
double kick(const SweepPoint& p) { return p.kick; }

std::vector<double> deposit_values(const ResultRow& r) { return {r.fwhm_x, r.fwhm_y, r.peak, r.loss_fraction}; }
const std::vector<std::string> kDepositNames{"fwhm_x_m", "fwhm_y_m", "peak_atoms_per_m2", "loss_fraction"};

} // namespace

std::vector<std::string> recipe_ids() { return {"fig3", "fig4", "fig44", "fig5", "fig6", "fig7", "fig9", "fig10"}; }

FigureRecipe make_recipe(const std::string& id, const RunConfig& base, bool full_scale) {
  FigureRecipe r;
  r.id = id;
  RunConfig c = base;
  c.power_unit = PowerUnit::Relative;
  c.model = ModelSelect::Variational;
  c.powers = {1.0};
  c.kicks = {0.0};
  if (id == "fig3") {
    r.description = "Deposited density maps and x/y cuts, a_s = -1 a0, p = 0 and 32 hbar k";
    c.scattering_a0 = {-1.0};
    c.kicks = {0.0, 32.0};
  } else if (id == "fig4") {
    r.description = "Deposit FWHM, peak density and loss at each focal plane against a_s for 0.5, 1, 2, 4 P_opt, p = 0";
    c.scattering_a0 = kScattering;
    c.deposit_plane = DepositPlane::Focus;
    c.powers = {0.5, 1.0, 2.0, 4.0};
  } else if (id == "fig44") {
    r.description = "W_x against the height of the centre of mass for 0.5, 1, 2, 4 P_opt, a_s = 100 a0";
    c.scattering_a0 = {100.0};
    c.powers = {0.5, 1.0, 2.0, 4.0};
  } else if (id == "fig5") {
    r.description = "Widths and atom number against height for a_s = -10, -5, -1 a0";
    c.scattering_a0 = {-10.0, -5.0, -1.0};
  } else if (id == "fig6") {
    r.description = "Deposit FWHM, peak density and loss against kick for each a_s";
    c.scattering_a0 = kScattering;
    c.kicks = {0, 2, 4, 6, 8, 10, 12, 14, 16};
  } else if (id == "fig7") {
    r.description = "Instantaneous FWHM, peak column density and loss at the plane crossing";
    c.scattering_a0 = kScattering;
    c.kicks = {32.0, 64.0, 128.0};
  } else if (id == "fig9" || id == "fig10") {
    if (!full_scale) {
      RunConfig red = reduced_run_config();
      red.output_dir = base.output_dir;
      red.workers = base.workers;
      red.species = base.species;
      c = red;
      c.power_unit = PowerUnit::Relative;
      c.powers = {1.0};
    }
    c.model = ModelSelect::Both;
    if (id == "fig9") {
      r.description = "Variational and GPE deposit FWHM_x, FWHM_y and peak density against a_s";
      c.scattering_a0 = full_scale ? kScattering : std::vector<double>{0, 1, 5, 10, 50, 100};
      c.kicks = {0.0};
    } else {
      r.description = "Variational and GPE deposit profiles n0(x) at y = 0, a_s = 100 a0, p = 0 and 32 hbar k";
      c.scattering_a0 = {100.0};
      c.kicks = {0.0, 32.0};
    }
  } else {
    std::string known;
    for (const auto& k : recipe_ids()) known += " " + k;
    throw ConfigError("unknown figure id '" + id + "'; known:" + known);
  }
  r.config = c;
  return r;
}

PlotFiles emit_plotdata(const std::vector<PointResult>& results, const FigureRecipe& recipe, const std::string& dir) {
  std::vector<const PointResult*> pts;
  std::vector<std::string> missing;
  for (const auto& p : sweep_points(recipe.config)) {
    const PointResult* r = find(results, p);
    if (r) {
      pts.push_back(r);
    } else {
      missing.push_back(make_run_id(p));
    }
  }
  if (!missing.empty()) {
    std::string msg = recipe.id + ": results lack " + std::to_string(missing.size()) + " point(s):";
    for (const auto& m : missing) msg += " " + m;
    throw MissingPoints(missing, msg);
  }

  const std::string& id = recipe.id;
  Figure fig;
  if (id == "fig4") {
    fig = tabular(pts, power, "P%gx", scattering, "a_s_a0", kDepositNames, deposit_values);
    fig.extra["focal_planes_m"] = json::object();
    for (const auto* p : pts) {
      if (p->point.scattering_a0 == 100.0) fig.extra["focal_planes_m"][label("P%gx", p->point.power)] = jnum(p->row.z_f);
    }
  } else if (id == "fig6") {
    fig = tabular(pts, scattering, "as%g", kick, "kick_hbark", kDepositNames, deposit_values);
  } else if (id == "fig7") {
    fig = tabular(pts, kick, "k%g", scattering, "a_s_a0", {"inst_fwhm_x_m", "inst_peak_atoms_per_m2", "loss_fraction"},
                  [](const ResultRow& r) {
                    return std::vector<double>{r.inst_fwhm_x, r.inst_peak, r.loss_fraction};
                  });
  } else if (id == "fig9") {
    fig = tabular(pts, kick, "k%g", scattering, "a_s_a0", kDepositNames, deposit_values);
  } else if (id == "fig44" || id == "fig5") {
    const bool widths = id == "fig5";
    fig.columns = widths ? std::vector<std::string>{"z_m", "t_s", "W_x_m", "W_y_m", "W_z_m", "N"}
                         : std::vector<std::string>{"z_m", "W_x_m"};
    json minima = json::object();
    for (const auto* p : pts) {
      const std::string name = widths ? label("as%g", p->point.scattering_a0) : label("P%gx", p->point.power);
      Series s{name, fig.columns, {}};
      const Kinematics& kin = p->model_config.kin;
      for (const auto& st : p->trajectory) {
        if (widths) {
          s.rows.push_back({kin.height(st.t), st.t, st.width(0), st.width(1), st.width(2), st.atoms});
        } else {
          s.rows.push_back({kin.height(st.t), st.width(0)});
        }
      }
      fig.series.push_back(std::move(s));
      json m = json::array();
      for (const auto& w : p->curve.minima) m.push_back({{"z_m", w.height}, {"W_x_m", w.width}});
      minima[name] = {{"z_f_m", jnum(p->row.z_f)}, {"minima", m}, {"status", p->row.status}};
    }
    fig.extra["focus"] = minima;
  } else if (id == "fig3" || id == "fig10") {
    fig.columns = {"x_m", "n0_atoms_per_m2"};
    for (const auto* p : pts) {
      Series s{(p->point.model == ModelSelect::Gpe ? "gpe_" : "var_") + label("k%g", p->point.kick), fig.columns, {}};
      for (Eigen::Index i = 0; i < p->cut_x.size(); ++i) s.rows.push_back({p->cut_xpos(i), p->cut_x(i)});
      fig.series.push_back(std::move(s));
      if (id == "fig3" && p->deposit) {
        const Eigen::ArrayXXd d = p->deposit->density();
        Eigen::Index pi, pj;
        d.maxCoeff(&pi, &pj);
        Series y{label("var_k%g_y", p->point.kick), fig.columns, {}};
        const Eigen::ArrayXd ys = p->deposit->grid.axis(1);
        for (Eigen::Index j = 0; j < d.cols(); ++j) y.rows.push_back({ys(j), d(pi, j)});
        fig.series.push_back(std::move(y));
      }
    }
  }
  fig.id = id;
  fig.description = recipe.description;
  fig.extra["run_ids"] = json::array();
  for (const auto* p : pts) fig.extra["run_ids"].push_back(p->row.run_id);
  return write_figure(fig, dir);
}

PlotFiles reproduce(const std::string& id, const RunConfig& base, bool full_scale) {
  const FigureRecipe recipe = make_recipe(id, base, full_scale);
  RunConfig cfg = recipe.config;
  cfg.output_dir = (fs::path(base.output_dir) / id).string();
  const SweepResult res = run_sweep(cfg, true);
  return emit_plotdata(res.points, recipe, cfg.output_dir);
}

} // namespace becfocus
