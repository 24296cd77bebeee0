#include "ddqn/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ddqn::plot {

namespace {

constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_svg(const std::vector<Panel>& panels, int width, int panel_height) {
  const int height = panel_height * std::max<int>(1, static_cast<int>(panels.size()));
  const double left = 70, right = 20, top = 35, bottom = 45;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double y0 = static_cast<double>(p) * panel_height;
    const double plot_w = width - left - right;
    const double plot_h = panel_height - top - bottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& line : panel.lines)
      for (const auto& [x, y] : line.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymin -= 1, ymax += 1;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double y) { return y0 + top + (ymax - y) / (ymax - ymin) * plot_h; };

    svg << "<g>\n"
        << "<text x=\"" << num(width / 2.0) << "\" y=\"" << num(y0 + 20)
        << "\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(panel.title) << "</text>\n"
        << "<rect x=\"" << num(left) << "\" y=\"" << num(y0 + top) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double fx = xmin + (xmax - xmin) * k / 4.0;
      const double fy = ymin + (ymax - ymin) * k / 4.0;
      svg << "<text x=\"" << num(sx(fx)) << "\" y=\"" << num(y0 + top + plot_h + 15)
          << "\" text-anchor=\"middle\">" << tick(fx) << "</text>\n"
          << "<text x=\"" << num(left - 5) << "\" y=\"" << num(sy(fy) + 4)
          << "\" text-anchor=\"end\">" << tick(fy) << "</text>\n"
          << "<line x1=\"" << num(left) << "\" y1=\"" << num(sy(fy)) << "\" x2=\"" << num(left + plot_w)
          << "\" y2=\"" << num(sy(fy)) << "\" stroke=\"#ddd\"/>\n";
    }
    if (ymin < 0 && ymax > 0)
      svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(left + plot_w)
          << "\" y2=\"" << num(sy(0)) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(y0 + panel_height - 8)
        << "\" text-anchor=\"middle\">" << xml_escape(panel.x_label) << "</text>\n"
        << "<text x=\"15\" y=\"" << num(y0 + top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
        << num(y0 + top + plot_h / 2) << ")\">" << xml_escape(panel.y_label) << "</text>\n";

    for (std::size_t l = 0; l < panel.lines.size(); ++l) {
      const auto& line = panel.lines[l];
      const char* color = kColors[l % kColors.size()];
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
      for (const auto& [x, y] : line.points)
        if (std::isfinite(x) && std::isfinite(y)) svg << num(sx(x)) << ',' << num(sy(y)) << ' ';
      svg << "\"/>\n";
      svg << "<text x=\"" << num(left + 8) << "\" y=\"" << num(y0 + top + 14 + 14.0 * static_cast<double>(l))
          << "\" fill=\"" << color << "\">" << xml_escape(line.label) << "</text>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ddqn::plot
