#pragma once

#include <string>
#include <vector>

#include "plasmo/types.hpp"

namespace plasmo::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

// deterministic standalone SVG; series with at most 50 points also get
// circle markers
std::string svg_line_plot(const std::vector<Series>& series,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::string& title);

// ranked horizontal bars (attribution summaries)
std::string svg_bar_chart(const std::vector<std::string>& labels,
                          const std::vector<double>& values,
                          const std::string& title);

// 8-bit binary PGM with linear scaling; a constant map renders mid-gray.
// sidecar receives a text description of the applied scaling.
std::string pgm_heatmap(const GridXd& grid, std::string* sidecar);

}  // namespace plasmo::plot
