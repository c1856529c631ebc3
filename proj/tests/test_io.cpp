#include "becfocus/config.hpp"
#include "becfocus/errors.hpp"
#include "becfocus/grid_io.hpp"
#include "becfocus/plotdata.hpp"
#include "becfocus/sweep.hpp"

#include "doctest.h"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace becfocus;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("becfocus_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string write_ini(const std::string& name, const std::string& body) {
  const fs::path p = scratch(name) / "run.ini";
  std::ofstream(p) << body;
  return p.string();
}

template <std::size_t N>
void swap_at(std::string& b, std::size_t pos) {
  std::reverse(b.begin() + pos, b.begin() + pos + N);
}

/// The same file as written on a machine of the other byte order.
std::string byte_swapped(std::string b) {
  for (std::size_t p = 8; p < 24; p += 4) swap_at<4>(b, p);
  for (std::size_t p = 24; p < b.size(); p += 8) swap_at<8>(b, p);
  return b;
}

RunConfig small_sweep(const fs::path& dir) {
  RunConfig c = default_run_config();
  c.scattering_a0 = {100.0, 10.0};
  c.powers = {1.0};
  c.kicks = {0.0};
  c.output_dir = dir.string();
  return c;
}

} // namespace

TEST_CASE("field checkpoint round trip") {
  const GridSpec g{{16, 32, 16}, Vec3(10e-6, 12e-6, 8e-6), Vec3(1e-6, 0.0, -2e-6)};
  ComplexField3D f = gaussian_field(g, Vec3(2e-6, 1e-6, 1e-6), 100.0, g.offset);
  f.data *= std::complex<double>(0.6, -0.8);
  f.t = 1.25e-3;
  const fs::path p = scratch("field") / "f.bin";
  write_field(p.string(), f);
  CHECK(fs::file_size(p) == 112 + 16 * std::uintmax_t(g.size()));
  const ComplexField3D back = read_field(p.string());
  CHECK(back.grid == g);
  CHECK(back.t == f.t);
  CHECK((back.data == f.data).all());

  const fs::path swapped = p.parent_path() / "swapped.bin";
  std::ofstream(swapped, std::ios::binary) << byte_swapped(slurp(p));
  const ComplexField3D other = read_field(swapped.string());
  CHECK(other.grid == g);
  CHECK((other.data == f.data).all());

  std::ofstream(p.parent_path() / "junk.bin", std::ios::binary) << "not a grid file";
  CHECK_THROWS(read_field((p.parent_path() / "junk.bin").string()));
}

TEST_CASE("deposit files") {
  DepositMap m;
  m.grid.n = {5, 3};
  m.grid.extent = Eigen::Vector2d(1e-6, 2e-6);
  m.raw = Eigen::ArrayXXd::Random(5, 3).abs();
  m.speed = 0.099;
  m.t_end = 0.01;
  m.source = "variational";
  const fs::path dir = scratch("deposit");
  write_deposit((dir / "d.bin").string(), m);
  const DepositMap back = read_deposit((dir / "d.bin").string());
  CHECK(back.grid == m.grid);
  CHECK((back.raw == m.raw).all());
  CHECK(back.speed == m.speed);
  CHECK(back.t_end == m.t_end);
  CHECK_THROWS(read_field((dir / "d.bin").string()));

  write_deposit_csv((dir / "d.csv").string(), m);
  std::ifstream in(dir / "d.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y,n0,raw");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 15);
}

TEST_CASE("config parsing") {
  const auto path = write_ini("config", R"([trap]
frequency_x = 12
atoms = 2e4
[beam]
sigma_z = 50e-6
power_reference = fixed
xi = 5.37
[model]
select = variational
deposit_plane = focus
[sweep]
scattering_length_a0 = -1, 5, 100
power = 0.5, 2
kick = 0, 32
[output]
directory = somewhere
workers = 3
)");
  const RunConfig c = load_run_config(path);
  CHECK(c.trap.x == doctest::Approx(2 * 3.14159265358979323846 * 12));
  CHECK(c.atoms0 == 2e4);
  CHECK(c.beam.sigma_z == 50e-6);
  CHECK(c.power_reference == PowerReference::FixedXi);
  CHECK(c.deposit_plane == DepositPlane::Focus);
  CHECK(c.scattering_a0 == std::vector<double>{-1, 5, 100});
  CHECK(c.powers == std::vector<double>{0.5, 2});
  CHECK(c.kicks == std::vector<double>{0, 32});
  CHECK(c.output_dir == "somewhere");
  CHECK(c.workers == 3);
  CHECK(sweep_points(c).size() == 12);

  CHECK_NOTHROW(default_run_config().validate());
  CHECK_NOTHROW(reduced_run_config().validate());
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.ini"), ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("bad_enum", "[model]\nselect = magic\n")), ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("bad_number", "[sweep]\npower = 1, x\n")), ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("negative", "[sweep]\nkick = -2\n")), ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("preset", "[species]\npreset = cs133\n")), ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("tf", "[trap]\nquench = false\n[sweep]\nscattering_length_a0 = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("grid", "[model]\nselect = gpe\n[gpe]\nny = 48\n")), ConfigError);
  CHECK_THROWS_AS(load_run_config(write_ini("coarse", "[model]\nselect = gpe\n[gpe]\nny = 16\nnz = 16\n")),
                  ConfigError);
}

TEST_CASE("sweep order") {
  RunConfig c = default_run_config();
  c.scattering_a0 = {100, -1, 10, 10};
  c.powers = {2, 1};
  c.model = ModelSelect::Both;
  const auto pts = sweep_points(c);
  CHECK(pts.size() == 12);
  CHECK(pts.front().scattering_a0 == -1);
  CHECK(pts.front().power == 1);
  CHECK(pts.front().model == ModelSelect::Variational);
  CHECK(pts[1].model == ModelSelect::Gpe);
  CHECK(pts.back().scattering_a0 == 100);
  CHECK(make_run_id(pts.front()) == "var_as-1_p1_k0");
  CHECK(make_run_id(pts[1]) == "gpe_as-1_p1_k0");
}

TEST_CASE("sweeps are deterministic") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  RunConfig ca = small_sweep(a);
  ca.workers = 2;
  RunConfig cb = small_sweep(b);
  cb.workers = 1;
  const SweepResult ra = run_sweep(ca);
  const SweepResult rb = run_sweep(cb);
  REQUIRE(ra.points.size() == 2);
  CHECK_FALSE(ra.partial_failure());
  for (const char* f : {"results.csv", "results.json"}) CHECK(slurp(a / f) == slurp(b / f));
  auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
  ma["config"].erase("output");
  mb["config"].erase("output");
  CHECK(ma == mb);
  for (const auto& p : ra.points) {
    const fs::path rel = fs::path("points") / p.row.run_id;
    for (const char* f : {"trajectory.csv", "deposit.csv", "deposit.bin"}) {
      CHECK(fs::exists(a / rel / f));
      CHECK(slurp(a / rel / f) == slurp(b / rel / f));
    }
  }

  const auto rows = read_results_csv((a / "results.csv").string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].run_id == ra.points[0].row.run_id);
  CHECK(rows[0].fwhm_x == doctest::Approx(ra.points[0].row.fwhm_x).epsilon(1e-11));
  CHECK(rows[1].status == "ok");

  std::istringstream header(slurp(a / "results.csv"));
  std::string first;
  std::getline(header, first);
  std::string expect;
  for (const auto& c : result_columns()) expect += (expect.empty() ? "" : ",") + c;
  CHECK(first == expect);

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  for (const auto& p : manifest["points"]) {
    for (const char* key : {"xi", "P_opt_W", "I0_W_m2", "W0_m", "v_at_plane_m_s"}) {
      CHECK_MESSAGE(p.contains(key), key);
    }
  }
  CHECK(manifest.contains("config"));
  CHECK(manifest.contains("versions"));
}

TEST_CASE("single point equals a one-point sweep") {
  const fs::path a = scratch("single_a"), b = scratch("single_b");
  RunConfig c = small_sweep(a);
  c.scattering_a0 = {50.0};
  const ResultRow single = run_single(c, sweep_points(c).front());
  c.output_dir = b.string();
  const SweepResult sweep = run_sweep(c);
  REQUIRE(sweep.points.size() == 1);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(single.fwhm_x == sweep.points[0].row.fwhm_x);
}

TEST_CASE("collapse is recorded and isolated") {
  RunConfig c = small_sweep(scratch("collapse"));
  c.atoms0 = 1e6;
  c.scattering_a0 = {-200.0, 100.0};
  const SweepResult with = run_sweep(c, false);
  REQUIRE(with.points.size() == 2);
  CHECK(with.points[0].row.status.rfind("collapse", 0) == 0);
  CHECK(std::isnan(with.points[0].row.fwhm_x));
  CHECK_FALSE(with.partial_failure());
  c.scattering_a0 = {100.0};
  const SweepResult alone = run_sweep(c, false);
  CHECK(alone.points[0].row.fwhm_x == with.points[1].row.fwhm_x);
  CHECK(alone.points[0].row.peak == with.points[1].row.peak);
}

TEST_CASE("zero power does not focus") {
  RunConfig c = small_sweep(scratch("nopower"));
  c.scattering_a0 = {100.0};
  c.powers = {0.0};
  const SweepResult r = run_sweep(c, false);
  const ResultRow& row = r.points[0].row;
  CHECK(row.status.rfind("no_focus", 0) == 0);
  CHECK(std::isnan(row.z_f));
  CHECK(row.fwhm_x > 2 * std::sqrt(std::log(2.0)) * r.points[0].trajectory.front().width(0));
}

TEST_CASE("plot data") {
  const RunConfig base = default_run_config();
  for (const auto& id : recipe_ids()) CHECK_NOTHROW(make_recipe(id, base));
  CHECK_THROWS_AS(make_recipe("fig99", base), ConfigError);

  const FigureRecipe fig44 = make_recipe("fig44", base);
  CHECK(sweep_points(fig44.config).size() == 4);
  try {
    emit_plotdata({}, fig44, scratch("plot_empty").string());
    FAIL("expected MissingPoints");
  } catch (const MissingPoints& e) {
    CHECK(e.missing.size() == 4);
    CHECK(std::string(e.what()).find("var_as100_p0.5_k0") != std::string::npos);
  }

  const FigureRecipe fig9 = make_recipe("fig9", base);
  const auto pts9 = sweep_points(fig9.config);
  CHECK(pts9.size() == 12);
  CHECK(std::count_if(pts9.begin(), pts9.end(), [](const SweepPoint& p) { return p.model == ModelSelect::Gpe; }) == 6);

  const fs::path dir = scratch("plot44");
  RunConfig cfg = fig44.config;
  cfg.output_dir = dir.string();
  const SweepResult res = run_sweep(cfg, false);
  const PlotFiles files = emit_plotdata(res.points, fig44, dir.string());
  const auto doc = nlohmann::json::parse(slurp(files.json));
  CHECK(doc["series"].size() == 4);
  CHECK(doc["columns"] == nlohmann::json::array({"z_m", "W_x_m"}));
  CHECK(doc["run_ids"].size() == 4);
}
