#include "qmixdsa/harness/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "qmixdsa/error.hpp"
#include "qmixdsa/harness/metrics.hpp"

namespace qmixdsa::harness {

namespace {

constexpr double kWidth = 900.0, kHeight = 540.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 24.0, kBottom = 48.0;
constexpr int kMovingWindow = 20;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::vector<double> moving_average(const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= kMovingWindow) sum -= xs[i - kMovingWindow];
    const auto n = std::min<std::size_t>(i + 1, kMovingWindow);
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

void polyline(std::ostringstream& svg, const std::vector<double>& ys,
              double y_max, std::size_t count, const char* color) {
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  svg << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x =
        count > 1 ? kLeft + plot_w * static_cast<double>(i) /
                               static_cast<double>(count - 1)
                  : kLeft + plot_w / 2.0;
    const double y = kHeight - kBottom - plot_h * (ys[i] / y_max);
    svg << fmt(x) << "," << fmt(y) << " ";
  }
  svg << "\"/>\n";
}

}  // namespace

void export_plot(const std::string& metrics_csv_path,
                 const std::string& svg_path) {
  const auto rows = load_metrics(metrics_csv_path);

  std::vector<double> successes, collisions;
  double oracle_sum = 0.0;
  for (const auto& row : rows) {
    successes.push_back(row.successes);
    collisions.push_back(row.collisions);
    oracle_sum += row.oracle_bound;
  }
  const auto succ_ma = moving_average(successes);
  const auto coll_ma = moving_average(collisions);
  const double oracle_mean =
      rows.empty() ? 0.0 : oracle_sum / static_cast<double>(rows.size());

  double y_max = oracle_mean;
  for (double v : succ_ma) y_max = std::max(y_max, v);
  for (double v : coll_ma) y_max = std::max(y_max, v);
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.05;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes.
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\""
      << fmt(kLeft) << "\" y2=\"" << fmt(kHeight - kBottom)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kHeight - kBottom)
      << "\" x2=\"" << fmt(kWidth - kRight) << "\" y2=\""
      << fmt(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\""
      << fmt(kHeight - 12.0)
      << "\" text-anchor=\"middle\" font-size=\"13\">episode</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
         "16 "
      << fmt(kTop + plot_h / 2) << ")\">per-episode count</text>\n";
  // Y ticks at 0, half, max.
  for (int i = 0; i <= 2; ++i) {
    const double v = y_max * i / 2.0;
    const double y = kHeight - kBottom - plot_h * (v / y_max);
    svg << "<text x=\"" << fmt(kLeft - 8.0) << "\" y=\"" << fmt(y + 4.0)
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
    svg << "<line x1=\"" << fmt(kLeft - 4.0) << "\" y1=\"" << fmt(y)
        << "\" x2=\"" << fmt(kLeft) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"black\"/>\n";
  }

  if (!rows.empty()) {
    // Oracle reference.
    const double oy = kHeight - kBottom - plot_h * (oracle_mean / y_max);
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(oy) << "\" x2=\""
        << fmt(kWidth - kRight) << "\" y2=\"" << fmt(oy)
        << "\" stroke=\"#7f7f7f\" stroke-dasharray=\"6,4\"/>\n";
    polyline(svg, succ_ma, y_max, rows.size(), "#1f77b4");
    polyline(svg, coll_ma, y_max, rows.size(), "#d62728");
    // X ticks: first and last episode.
    svg << "<text x=\"" << fmt(kLeft) << "\" y=\""
        << fmt(kHeight - kBottom + 16.0)
        << "\" text-anchor=\"middle\" font-size=\"11\">1</text>\n";
    svg << "<text x=\"" << fmt(kWidth - kRight) << "\" y=\""
        << fmt(kHeight - kBottom + 16.0)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << rows.size()
        << "</text>\n";
  }

  // Legend.
  svg << "<text x=\"" << fmt(kWidth - kRight - 220.0) << "\" y=\""
      << fmt(kTop + 14.0) << "\" font-size=\"12\" fill=\"#1f77b4\">successes "
      "(moving avg)</text>\n";
  svg << "<text x=\"" << fmt(kWidth - kRight - 220.0) << "\" y=\""
      << fmt(kTop + 30.0) << "\" font-size=\"12\" fill=\"#d62728\">collisions "
      "(moving avg)</text>\n";
  svg << "<text x=\"" << fmt(kWidth - kRight - 220.0) << "\" y=\""
      << fmt(kTop + 46.0) << "\" font-size=\"12\" fill=\"#7f7f7f\">oracle "
      "bound (mean)</text>\n";
  svg << "</svg>\n";

  std::ofstream out(svg_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open SVG for writing: " + svg_path);
  out << svg.str();
  if (!out) throw DataError("failed writing SVG: " + svg_path);
}

}  // namespace qmixdsa::harness
