#pragma once

#include "becfocus/config.hpp"
#include "becfocus/sweep.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace becfocus {

/// Results do not cover a recipe's axes; what() lists the missing points.
class MissingPoints : public std::runtime_error {
public:
  MissingPoints(std::vector<std::string> ids, const std::string& what)
      : std::runtime_error(what), missing(std::move(ids)) {}
  std::vector<std::string> missing;
};

struct FigureRecipe {
  std::string id;
  std::string description;
  RunConfig config;  // axes and model of the figure
};

/// Recipe ids: fig3, fig4, fig44, fig5, fig6, fig7, fig9, fig10.
std::vector<std::string> recipe_ids();

/// The recipe's sweep, built on `base` (physics settings, output directory).
/// fig9 and fig10 start from the reduced configuration unless `full_scale`.
FigureRecipe make_recipe(const std::string& id, const RunConfig& base, bool full_scale = false);

struct PlotFiles {
  std::string csv;
  std::string json;
};

/// Writes <dir>/<id>.csv (long format, one series per curve) and <dir>/<id>.json
/// (axis metadata and the series). Throws MissingPoints when `results` lack
/// any point of the recipe.
PlotFiles emit_plotdata(const std::vector<PointResult>& results, const FigureRecipe& recipe, const std::string& dir);

/// Runs the recipe's sweep and emits its plot data into base.output_dir.
PlotFiles reproduce(const std::string& id, const RunConfig& base, bool full_scale = false);

} // namespace becfocus
