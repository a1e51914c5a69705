#pragma once

#include <limits>
#include <string>
#include <vector>

namespace spectralflow {

/// Self-contained SVG line plot of run or sweep-summary CSV files.
struct PlotOptions {
  std::string metric = "energy";  // any metric column name
  bool log_y = false;             // log10 axis; non-positive samples dropped
  double reference = std::numeric_limits<double>::quiet_NaN();  // horizontal rule
  std::string title;
  int width = 960;
  int height = 600;
};

/// Renders one series per CSV text: plain run records plot the metric column
/// against step; sweep summaries plot <metric>_mean with a +-1 standard
/// deviation band from <metric>_var. Throws ConfigError when the metric
/// column is absent or no finite samples remain.
std::string render_plot_svg(const std::vector<std::string>& csv_texts,
                            const PlotOptions& options);

}  // namespace spectralflow
