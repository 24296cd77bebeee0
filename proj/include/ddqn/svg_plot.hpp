#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ddqn::plot {

struct Line {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Line> lines;
};

// Renders panels stacked vertically into one standalone SVG document.
std::string render_svg(const std::vector<Panel>& panels, int width = 800, int panel_height = 320);

std::string xml_escape(const std::string& text);

}  // namespace ddqn::plot
