#include "prefroute/dot.hpp"

#include <sstream>

namespace prefroute {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string label_of(const std::vector<StopInfo>& stops, int id) {
  if (id >= 0 && static_cast<std::size_t>(id) < stops.size() && !stops[id].name.empty()) {
    return stops[id].name;
  }
  return std::to_string(id);
}

}  // namespace

std::string routing_to_dot(const Routing& x, const std::vector<StopInfo>& stops,
                           const std::string& title) {
  std::ostringstream out;
  out << "digraph routing {\n";
  if (!title.empty()) out << "  label=\"" << title << "\";\n";
  out << "  node [shape=circle, fontsize=10];\n";
  out << "  0 [shape=box, label=\"" << label_of(stops, 0) << "\"];\n";
  const Routing c = canonical(x);
  for (std::size_t k = 0; k < c.tours.size(); ++k) {
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    int prev = kDepot;
    for (int s : c.tours[k]) {
      out << "  " << s << " [label=\"" << label_of(stops, s) << "\"];\n";
      out << "  " << prev << " -> " << s << " [color=\"" << color << "\"];\n";
      prev = s;
    }
    out << "  " << prev << " -> 0 [color=\"" << color << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace prefroute
