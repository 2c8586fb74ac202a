#include <algorithm>
#include <cstdio>
#include <sstream>

#include "evrptw/bench.hpp"
#include "evrptw/error.hpp"
#include "evrptw/io.hpp"

namespace evrptw::bench {

namespace {

constexpr double kSize = 600.0;
constexpr double kMargin = 30.0;
constexpr double kLegend = 70.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string colour(std::size_t i) {
  constexpr std::size_t n = std::size(kPalette);
  if (i < n) return kPalette[i];
  char buf[32];
  std::snprintf(buf, sizeof buf, "hsl(%zu,65%%,45%%)", (i * 47) % 360);
  return buf;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

std::string route_svg(const Instance& instance, const Solution& solution) {
  double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;
  for (const Node& n : instance.nodes()) {
    lo_x = std::min(lo_x, n.x);
    hi_x = std::max(hi_x, n.x);
    lo_y = std::min(lo_y, n.y);
    hi_y = std::max(hi_y, n.y);
  }
  const double span = std::max(hi_x - lo_x, hi_y - lo_y);
  const double scale = (kSize - 2 * kMargin) / span;
  auto px = [&](const Node& n) { return kMargin + (n.x - lo_x) * scale; };
  // SVG y grows downward.
  auto py = [&](const Node& n) { return kLegend + kMargin + (hi_y - n.y) * scale; };

  for (const Route& r : solution.routes) {
    for (int id : r) {
      if (!instance.valid_id(id)) throw InvalidArgument("route references node " + std::to_string(id));
    }
  }

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kSize) << "\" height=\""
      << num(kSize + kLegend) << "\" viewBox=\"0 0 " << num(kSize) << " " << num(kSize + kLegend) << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  char legend[256];
  std::snprintf(legend, sizeof legend, "J = %.2f   K = %d   D = %.3f%s", solution.cost, solution.fleet_size,
                solution.total_distance, solution.feasible ? "" : "   (infeasible)");
  out << "  <g font-family=\"sans-serif\" font-size=\"14\">\n"
      << "    <text x=\"" << num(kMargin) << "\" y=\"24\">" << instance.class_label() << " N="
      << instance.n_customers() << " M=" << instance.n_stations() << "</text>\n"
      << "    <text x=\"" << num(kMargin) << "\" y=\"46\">" << legend << "</text>\n";
  for (std::size_t r = 0; r < solution.routes.size(); ++r) {
    const double x = kMargin + 300.0 + 60.0 * static_cast<double>(r % 4);
    const double y = 18.0 + 18.0 * static_cast<double>(r / 4);
    out << "    <line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 16) << "\" y2=\"" << num(y)
        << "\" stroke=\"" << colour(r) << "\" stroke-width=\"3\"/>\n"
        << "    <text x=\"" << num(x + 20) << "\" y=\"" << num(y + 5) << "\" font-size=\"12\">r" << r + 1
        << "</text>\n";
  }
  out << "  </g>\n";

  out << "  <g fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t r = 0; r < solution.routes.size(); ++r) {
    out << "    <polyline stroke=\"" << colour(r) << "\" points=\"";
    for (std::size_t k = 0; k < solution.routes[r].size(); ++k) {
      const Node& n = instance.node(solution.routes[r][k]);
      out << (k ? " " : "") << num(px(n)) << "," << num(py(n));
    }
    out << "\"/>\n";
  }
  out << "  </g>\n";

  out << "  <g stroke=\"black\" stroke-width=\"1\">\n";
  for (const Node& n : instance.nodes()) {
    const double x = px(n);
    const double y = py(n);
    switch (n.kind) {
      case NodeKind::Depot:
        out << "    <rect x=\"" << num(x - 7) << "\" y=\"" << num(y - 7)
            << "\" width=\"14\" height=\"14\" fill=\"black\"/>\n";
        break;
      case NodeKind::Customer:
        out << "    <circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"5\" fill=\"white\"/>\n";
        break;
      case NodeKind::Station:
        out << "    <polygon points=\"" << num(x) << "," << num(y - 8) << " " << num(x - 7) << "," << num(y + 6)
            << " " << num(x + 7) << "," << num(y + 6) << "\" fill=\"#2ca02c\"/>\n";
        break;
    }
  }
  out << "  </g>\n</svg>\n";
  return out.str();
}

void emit_route_svg(const Instance& instance, const Solution& solution, const std::filesystem::path& path) {
  io::write_text(path, route_svg(instance, solution));
}

}  // namespace evrptw::bench
