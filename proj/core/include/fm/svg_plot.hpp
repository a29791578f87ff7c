#pragma once

// Minimal deterministic SVG charts for run reports.

#include <filesystem>
#include <string>
#include <vector>

#include "fm/report.hpp"

namespace fm {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  enum class Kind { lines, bars } kind = Kind::lines;
  std::vector<Series> series;        // lines
  std::vector<std::string> bar_labels;  // bars: one value per label in series[0].y
};

// Lays panels out on a grid with `columns` columns. Throws PlotError when a
// panel has no data.
std::string render_svg(const std::string& title, const std::vector<Panel>& panels,
                       int columns = 2);

struct PlotOutput {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

// importance.svg, sae_training.svg, selectivity.svg, steering.svg and
// manifold.svg. A missing stage is skipped with a warning; an empty
// selectivity vector throws PlotError("no data").
PlotOutput emit_plots(const RunReport& report, const std::filesystem::path& dir);

Panel selectivity_histogram_panel(const std::vector<double>& rho, int bins = 20);
Panel selectivity_cdf_panel(const std::vector<double>& rho);

}  // namespace fm
