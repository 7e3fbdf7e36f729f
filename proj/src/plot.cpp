#include "plasmo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "plasmo/io.hpp"

namespace plasmo::plot {

namespace {

constexpr int kWidth = 800, kHeight = 500;
constexpr int kMarginL = 70, kMarginR = 160, kMarginT = 40, kMarginB = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
                          "#bcbd22", "#e377c2"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<double> ticks(double lo, double hi, int target = 6) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0})
    if (raw <= mult * mag) {
      step = mult * mag;
      break;
    }
  std::vector<double> out;
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + 1e-12 * span; t += step) out.push_back(t);
  return out;
}

}  // namespace

std::string svg_line_plot(const std::vector<Series>& series,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::string& title) {
  if (series.empty()) throw Error("svg_line_plot: no series");
  Range rx, ry;
  size_t total = 0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw Error("svg_line_plot: series size mismatch");
    total += s.x.size();
    for (double v : s.x) rx.include(v);
    for (double v : s.y) ry.include(v);
  }
  if (total == 0) throw Error("svg_line_plot: empty series");
  rx.pad();
  ry.pad();

  const double pw = kWidth - kMarginL - kMarginR;
  const double ph = kHeight - kMarginT - kMarginB;
  auto px = [&](double v) {
    return kMarginL + pw * (v - rx.lo) / (rx.hi - rx.lo);
  };
  auto py = [&](double v) {
    return kMarginT + ph * (1.0 - (v - ry.lo) / (ry.hi - ry.lo));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << esc(title) << "</text>\n";

  // axes
  svg << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\""
      << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(rx.lo, rx.hi)) {
    svg << "<line x1=\"" << io::format_g(px(t)) << "\" y1=\""
        << kMarginT + ph << "\" x2=\"" << io::format_g(px(t)) << "\" y2=\""
        << kMarginT + ph + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << io::format_g(px(t)) << "\" y=\""
        << kMarginT + ph + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << io::format_g(t) << "</text>\n";
  }
  for (double t : ticks(ry.lo, ry.hi)) {
    svg << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << io::format_g(py(t))
        << "\" x2=\"" << kMarginL << "\" y2=\"" << io::format_g(py(t))
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kMarginL - 9 << "\" y=\""
        << io::format_g(py(t) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << io::format_g(t) << "</text>\n";
  }
  svg << "<text x=\"" << kMarginL + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << esc(x_label) << "</text>\n";
  svg << "<text x=\"18\" y=\"" << kMarginT + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 "
      << kMarginT + ph / 2 << ")\">" << esc(y_label) << "</text>\n";

  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
    if (s.x.size() >= 2) {
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.x.size(); ++i)
        svg << io::format_g(px(s.x[i])) << ',' << io::format_g(py(s.y[i]))
            << (i + 1 < s.x.size() ? " " : "");
      svg << "\"/>\n";
    }
    if (s.x.size() <= 50) {
      for (size_t i = 0; i < s.x.size(); ++i)
        svg << "<circle class=\"marker\" cx=\"" << io::format_g(px(s.x[i]))
            << "\" cy=\"" << io::format_g(py(s.y[i])) << "\" r=\"3\" fill=\""
            << color << "\"/>\n";
    }
    // legend
    const double ly = kMarginT + 16.0 * (k + 1);
    svg << "<line x1=\"" << kMarginL + pw + 10 << "\" y1=\""
        << io::format_g(ly) << "\" x2=\"" << kMarginL + pw + 34 << "\" y2=\""
        << io::format_g(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kMarginL + pw + 40 << "\" y=\""
        << io::format_g(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << esc(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_bar_chart(const std::vector<std::string>& labels,
                          const std::vector<double>& values,
                          const std::string& title) {
  if (labels.empty() || labels.size() != values.size())
    throw Error("svg_bar_chart: bad inputs");
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  if (vmax <= 0.0) vmax = 1.0;

  const int row_h = 34;
  const int height = kMarginT + row_h * static_cast<int>(labels.size()) + 40;
  const double pw = kWidth - kMarginL - kMarginR;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << esc(title) << "</text>\n";
  for (size_t k = 0; k < labels.size(); ++k) {
    const double w = pw * std::abs(values[k]) / vmax;
    const double y = kMarginT + row_h * static_cast<double>(k) + 8;
    svg << "<rect x=\"" << kMarginL << "\" y=\"" << io::format_g(y)
        << "\" width=\"" << io::format_g(w) << "\" height=\"" << row_h - 14
        << "\" fill=\"" << kPalette[k % 10] << "\"/>\n";
    svg << "<text x=\"" << kMarginL - 8 << "\" y=\""
        << io::format_g(y + row_h / 2.0 - 2)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"12\">"
        << esc(labels[k]) << "</text>\n";
    svg << "<text x=\"" << io::format_g(kMarginL + w + 6) << "\" y=\""
        << io::format_g(y + row_h / 2.0 - 2)
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << io::format_g(values[k]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string pgm_heatmap(const GridXd& grid, std::string* sidecar) {
  if (grid.size() == 0) throw Error("pgm_heatmap: empty grid");
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  std::ostringstream head;
  head << "P5\n" << grid.cols() << " " << grid.rows() << "\n255\n";
  std::string out = head.str();
  out.reserve(out.size() + grid.size());
  const bool constant = !(hi > lo);
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      unsigned char v;
      if (constant)
        v = 128;  // degenerate scaling: constant maps render mid-gray
      else
        v = static_cast<unsigned char>(
            std::lround(255.0 * (grid(i, j) - lo) / (hi - lo)));
      out.push_back(static_cast<char>(v));
    }
  if (sidecar) {
    std::ostringstream sc;
    sc << "format: pgm-p5 8-bit\n"
       << "rows: " << grid.rows() << "\ncols: " << grid.cols() << "\n"
       << "scaling: linear\n"
       << "value_min: " << io::format_full(lo) << "\n"
       << "value_max: " << io::format_full(hi) << "\n";
    if (constant) sc << "note: constant map rendered mid-gray (128)\n";
    *sidecar = sc.str();
  }
  return out;
}

}  // namespace plasmo::plot
