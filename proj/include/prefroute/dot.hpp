#pragma once

#include <string>

#include "prefroute/core.hpp"

namespace prefroute {

// Graphviz rendering of a routing, one color per tour.
std::string routing_to_dot(const Routing& x, const std::vector<StopInfo>& stops,
                           const std::string& title);

}  // namespace prefroute
