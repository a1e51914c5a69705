#include "spectralflow/plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spectralflow/errors.hpp"
#include "text_util.hpp"

namespace spectralflow {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // band edges; empty when the CSV is a plain run
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Series parse_csv_series(const std::string& text, const std::string& metric,
                        const std::string& label) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("plot: empty CSV input");
  const auto header = split(line, ',');
  const int step_col = column_index(header, "step");
  if (step_col < 0) throw ConfigError("plot: CSV has no 'step' column");
  int value_col = column_index(header, metric);
  int var_col = -1;
  if (value_col < 0) {
    value_col = column_index(header, metric + "_mean");
    var_col = column_index(header, metric + "_var");
    if (value_col < 0) {
      throw ConfigError("plot: no column '" + metric + "' or '" + metric +
                        "_mean' in CSV");
    }
  }
  Series s;
  s.label = label;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) <= std::max(step_col, value_col)) {
      throw ConfigError("plot: short CSV row on line " + std::to_string(line_no));
    }
    const double x = detail::parse_double(cells[step_col], "plot step");
    const double y = detail::parse_double(cells[value_col], "plot value");
    if (!std::isfinite(y)) continue;
    s.x.push_back(x);
    s.y.push_back(y);
    if (var_col >= 0) {
      const double var = detail::parse_double(cells[var_col], "plot variance");
      const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
      s.lo.push_back(y - sd);
      s.hi.push_back(y + sd);
    }
  }
  return s;
}

std::string fmt_tick(double v, bool log_axis) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", log_axis ? std::pow(10.0, v) : v);
  return buf;
}

}  // namespace

std::string render_plot_svg(const std::vector<std::string>& csv_texts,
                            const PlotOptions& options) {
  if (csv_texts.empty()) throw ConfigError("plot: no CSV inputs");
  std::vector<Series> series;
  for (std::size_t i = 0; i < csv_texts.size(); ++i) {
    series.push_back(parse_csv_series(csv_texts[i], options.metric,
                                      "series " + std::to_string(i)));
  }

  const auto transform = [&](double v) { return options.log_y ? std::log10(v) : v; };
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool any = false;
  const auto absorb = [&](double x, double y_raw) {
    if (options.log_y && y_raw <= 0.0) return;
    const double y = transform(y_raw);
    if (!std::isfinite(y)) return;
    if (!any) {
      x_min = x_max = x;
      y_min = y_max = y;
      any = true;
      return;
    }
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  };
  for (const Series& s : series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      absorb(s.x[k], s.y[k]);
      if (!s.lo.empty()) {
        absorb(s.x[k], s.lo[k]);
        absorb(s.x[k], s.hi[k]);
      }
    }
  }
  if (std::isfinite(options.reference) &&
      (!options.log_y || options.reference > 0.0) && any) {
    absorb(x_min, options.reference);
  }
  if (!any) throw ConfigError("plot: no finite samples for metric " + options.metric);
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) {
    y_max += 1.0;
    y_min -= 1.0;
  }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  const double ml = 80, mr = 24, mt = 40, mb = 56;
  const double pw = options.width - ml - mr;
  const double ph = options.height - mt - mb;
  const auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
  const auto py = [&](double y_raw) {
    const double y = transform(y_raw);
    return mt + (y_max - y) / (y_max - y_min) * ph;
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width
      << " " << options.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "<text x=\"" << options.width / 2.0
        << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << options.title << "</text>\n";
  }
  // Axes frame and ticks.
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fx = x_min + (x_max - x_min) * t / 5.0;
    const double gx = px(fx);
    svg << "<line x1=\"" << gx << "\" y1=\"" << mt + ph << "\" x2=\"" << gx
        << "\" y2=\"" << mt + ph + 6 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << gx << "\" y=\"" << mt + ph + 22
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt_tick(fx, false) << "</text>\n";
    const double fy = y_min + (y_max - y_min) * t / 5.0;
    const double gy = mt + ph - ph * t / 5.0;
    svg << "<line x1=\"" << ml - 6 << "\" y1=\"" << gy << "\" x2=\"" << ml
        << "\" y2=\"" << gy << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml - 10 << "\" y=\"" << gy + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt_tick(fy, options.log_y) << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2.0 << "\" y=\"" << options.height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
         "step</text>\n"
      << "<text x=\"18\" y=\"" << mt + ph / 2.0
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << mt + ph / 2.0 << ")\">" << options.metric << (options.log_y ? " (log)" : "")
      << "</text>\n";

  // Variance bands first so lines draw on top.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    if (s.lo.empty()) continue;
    std::ostringstream pts;
    bool open = false;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (options.log_y && s.hi[k] <= 0.0) continue;
      pts << px(s.x[k]) << ',' << py(std::max(s.hi[k], options.log_y ? 1e-300 : s.hi[k]))
          << ' ';
      open = true;
    }
    for (std::size_t k = s.x.size(); k-- > 0;) {
      const double lo = options.log_y ? std::max(s.lo[k], 1e-300) : s.lo[k];
      if (options.log_y && s.lo[k] <= 0.0 && s.hi[k] <= 0.0) continue;
      pts << px(s.x[k]) << ',' << py(lo) << ' ';
    }
    if (open) {
      svg << "<polygon points=\"" << pts.str() << "\" fill=\""
          << kPalette[i % std::size(kPalette)] << "\" fill-opacity=\"0.18\" "
             "stroke=\"none\"/>\n";
    }
  }
  // Reference rule.
  if (std::isfinite(options.reference) && (!options.log_y || options.reference > 0.0)) {
    const double gy = py(options.reference);
    svg << "<line x1=\"" << ml << "\" y1=\"" << gy << "\" x2=\"" << ml + pw
        << "\" y2=\"" << gy
        << "\" stroke=\"black\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n";
  }
  // Series polylines and legend.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    std::ostringstream pts;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (options.log_y && s.y[k] <= 0.0) continue;
      pts << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
    }
    svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
        << kPalette[i % std::size(kPalette)] << "\" stroke-width=\"1.8\"/>\n";
    const double ly = mt + 16 + 18 * static_cast<double>(i);
    svg << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\""
        << ml + pw - 126 << "\" y2=\"" << ly << "\" stroke=\""
        << kPalette[i % std::size(kPalette)] << "\" stroke-width=\"3\"/>\n"
        << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace spectralflow
