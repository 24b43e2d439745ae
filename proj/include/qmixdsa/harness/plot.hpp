#pragma once

#include <string>

namespace qmixdsa::harness {

// Renders a metrics CSV as an SVG line chart: 20-episode moving averages of
// successes and collisions per episode, plus a dashed reference line at the
// mean oracle bound. Output bytes are a pure function of the input.
void export_plot(const std::string& metrics_csv_path,
                 const std::string& svg_path);

}  // namespace qmixdsa::harness
