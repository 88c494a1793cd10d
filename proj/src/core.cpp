#include "prefroute/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace prefroute {

using nlohmann::json;

namespace {

const char* kWeekdayNames[7] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};

std::string fmt_int(long long v) { return std::to_string(v); }

}  // namespace

const char* weekday_name(Weekday d) { return kWeekdayNames[static_cast<int>(d)]; }

Weekday weekday_from_name(const std::string& name) {
  for (int i = 0; i < 7; ++i) {
    if (name == kWeekdayNames[i]) return static_cast<Weekday>(i);
  }
  throw ParseError("unknown weekday '" + name + "'");
}

std::vector<int> RoutingInstance::active_stops() const {
  std::vector<int> out;
  out.reserve(demands.size());
  for (const auto& [s, q] : demands) out.push_back(s);
  return out;
}

int RoutingInstance::demand_of(int stop) const {
  auto it = std::lower_bound(demands.begin(), demands.end(), stop,
                             [](const auto& p, int s) { return p.first < s; });
  if (it == demands.end() || it->first != stop) return 0;
  return it->second;
}

bool RoutingInstance::is_active(int stop) const {
  auto it = std::lower_bound(demands.begin(), demands.end(), stop,
                             [](const auto& p, int s) { return p.first < s; });
  return it != demands.end() && it->first == stop;
}

int RoutingInstance::total_demand() const {
  int total = 0;
  for (const auto& [s, q] : demands) total += q;
  return total;
}

std::vector<Arc> arcs_of(const Routing& x) {
  std::vector<Arc> arcs;
  for (const auto& tour : x.tours) {
    if (tour.empty()) continue;
    int prev = kDepot;
    for (int s : tour) {
      arcs.emplace_back(prev, s);
      prev = s;
    }
    arcs.emplace_back(prev, kDepot);
  }
  std::sort(arcs.begin(), arcs.end());
  return arcs;
}

Mat incidence_of(const Routing& x, std::size_t dim) {
  Mat m(dim, dim);
  for (const auto& [s, r] : arcs_of(x)) {
    m(static_cast<std::size_t>(s), static_cast<std::size_t>(r)) = 1.0;
  }
  return m;
}

Routing canonical(Routing x) {
  std::sort(x.tours.begin(), x.tours.end());
  return x;
}

bool routing_less(const Routing& a, const Routing& b) {
  return canonical(a).tours < canonical(b).tours;
}

double routing_cost(const Mat& cost, const Routing& x) {
  Routing c = canonical(x);
  double total = 0.0;
  for (const auto& tour : c.tours) {
    int prev = kDepot;
    for (int s : tour) {
      total += cost(prev, s);
      prev = s;
    }
    total += cost(prev, kDepot);
  }
  return total;
}

double routing_distance_km(const DistanceMatrix& d, const Routing& x) {
  return routing_cost(d, x);
}

std::vector<std::string> validate_routing(const RoutingInstance& inst, const Routing& x) {
  std::vector<std::string> violations;

  std::map<int, int> out_degree;
  for (int s : inst.active_stops()) out_degree[s] = 0;

  for (const auto& tour : x.tours) {
    if (tour.empty()) {
      violations.push_back("empty tour (every vehicle must serve at least one stop)");
      continue;
    }
    int load = 0;
    for (int s : tour) {
      if (s == kDepot) {
        violations.push_back("depot appears inside a tour");
        continue;
      }
      if (!inst.is_active(s)) {
        violations.push_back("stop " + fmt_int(s) + " is not in the active set");
        continue;
      }
      out_degree[s] += 1;
      load += inst.demand_of(s);
    }
    if (load > inst.capacity) {
      violations.push_back("tour load " + fmt_int(load) + " > Q=" + fmt_int(inst.capacity));
    }
  }

  for (const auto& [s, deg] : out_degree) {
    if (deg != 1) {
      violations.push_back("stop " + fmt_int(s) + " has out-degree " + fmt_int(deg));
    }
  }

  int m = static_cast<int>(x.tours.size());
  if (m != inst.vehicle_count) {
    violations.push_back("depot out-degree " + fmt_int(m) +
                         " ≠ m=" + fmt_int(inst.vehicle_count));
  }
  return violations;
}

std::vector<std::string> validate_incidence(const RoutingInstance& inst, const Mat& x) {
  std::vector<std::string> violations;
  const std::size_t n = x.rows();
  if (x.cols() != n) throw ValidationError("incidence matrix is not square");

  auto active = inst.active_stops();
  for (int s : active) {
    if (static_cast<std::size_t>(s) >= n) {
      throw ValidationError("incidence matrix too small for stop " + fmt_int(s));
    }
  }

  std::vector<char> is_active(n, 0);
  is_active[kDepot] = 1;
  for (int s : active) is_active[static_cast<std::size_t>(s)] = 1;

  // Degree constraints: one departure and one arrival per active stop.
  for (int s : active) {
    int out = 0, in = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (x(s, r) != 0.0) {
        if (!is_active[r]) {
          violations.push_back("arc " + to_string({s, static_cast<int>(r)}) +
                               " leaves the active set");
        }
        ++out;
      }
      if (x(r, s) != 0.0) ++in;
    }
    if (out != 1) violations.push_back("stop " + fmt_int(s) + " has out-degree " + fmt_int(out));
    if (in != 1) violations.push_back("stop " + fmt_int(s) + " has in-degree " + fmt_int(in));
  }

  int depot_out = 0, depot_in = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (x(kDepot, r) != 0.0) ++depot_out;
    if (x(r, kDepot) != 0.0) ++depot_in;
  }
  if (depot_out != inst.vehicle_count) {
    violations.push_back("depot out-degree " + fmt_int(depot_out) +
                         " ≠ m=" + fmt_int(inst.vehicle_count));
  }
  if (depot_in != inst.vehicle_count) {
    violations.push_back("depot in-degree " + fmt_int(depot_in) +
                         " ≠ m=" + fmt_int(inst.vehicle_count));
  }

  // Walk depot-anchored chains; anything left over sits on a subtour.
  std::vector<char> visited(n, 0);
  for (std::size_t first = 0; first < n; ++first) {
    if (x(kDepot, first) == 0.0) continue;
    int load = 0;
    std::size_t cur = first;
    std::size_t guard = 0;
    while (cur != static_cast<std::size_t>(kDepot) && guard++ <= n) {
      if (visited[cur]) break;  // re-entered a chain; degree checks flag it
      visited[cur] = 1;
      load += inst.demand_of(static_cast<int>(cur));
      std::size_t next = n;
      for (std::size_t r = 0; r < n; ++r) {
        if (x(cur, r) != 0.0) {
          next = r;
          break;
        }
      }
      if (next == n) break;  // dead end; out-degree check flags it
      cur = next;
    }
    if (load > inst.capacity) {
      violations.push_back("tour load " + fmt_int(load) + " > Q=" + fmt_int(inst.capacity));
    }
  }
  for (int s : active) {
    bool has_out = false;
    for (std::size_t r = 0; r < n; ++r) {
      if (x(s, r) != 0.0) has_out = true;
    }
    if (!visited[static_cast<std::size_t>(s)] && has_out) {
      violations.push_back("stop " + fmt_int(s) + " lies on a subtour disconnected from the depot");
    }
  }
  return violations;
}

std::size_t HistoryDataset::lower_bound_record(int t) const {
  std::size_t lo = 0;
  while (lo < records.size() && records[lo].instance.timestamp < t) ++lo;
  return lo;
}

namespace {

RoutingInstance instance_from_json(const json& day, int capacity) {
  RoutingInstance inst;
  inst.timestamp = day.at("t").get<int>();
  inst.weekday = weekday_from_name(day.at("weekday").get<std::string>());
  inst.vehicle_count = day.at("vehicles").get<int>();
  inst.capacity = capacity;
  for (const auto& [key, value] : day.at("demands").items()) {
    inst.demands.emplace_back(std::stoi(key), value.get<int>());
  }
  std::sort(inst.demands.begin(), inst.demands.end());
  return inst;
}

}  // namespace

HistoryDataset history_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("history file is not valid JSON: ") + e.what());
  }

  HistoryDataset h;
  try {
    int capacity = doc.at("capacity").get<int>();
    for (const auto& s : doc.at("stops")) {
      h.stops.push_back({s.at("id").get<int>(), s.value("name", std::string())});
    }
    std::sort(h.stops.begin(), h.stops.end(),
              [](const StopInfo& a, const StopInfo& b) { return a.id < b.id; });

    const auto& dm = doc.at("distance_matrix");
    h.distance = Mat::square(dm.size());
    for (std::size_t i = 0; i < dm.size(); ++i) {
      if (dm[i].size() != dm.size()) {
        throw ParseError("distance_matrix is not square");
      }
      for (std::size_t j = 0; j < dm.size(); ++j) {
        h.distance(i, j) = dm[i][j].get<double>();
      }
    }

    for (const auto& day : doc.at("days")) {
      DayRecord rec;
      rec.instance = instance_from_json(day, capacity);
      for (const auto& route : day.at("routes")) {
        rec.routing.tours.push_back(route.get<std::vector<int>>());
      }
      h.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("history file is missing fields: ") + e.what());
  }

  validate_history(h);
  return h;
}

HistoryDataset load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open history file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return history_from_json_text(buf.str());
}

std::string history_to_json_text(const HistoryDataset& h) {
  json doc;
  doc["capacity"] = h.records.empty() ? 0 : h.records.front().instance.capacity;
  doc["stops"] = json::array();
  for (const auto& s : h.stops) doc["stops"].push_back({{"id", s.id}, {"name", s.name}});
  json dm = json::array();
  for (std::size_t i = 0; i < h.distance.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < h.distance.cols(); ++j) row.push_back(h.distance(i, j));
    dm.push_back(std::move(row));
  }
  doc["distance_matrix"] = std::move(dm);
  doc["days"] = json::array();
  for (const auto& rec : h.records) {
    json day;
    day["t"] = rec.instance.timestamp;
    day["weekday"] = weekday_name(rec.instance.weekday);
    day["vehicles"] = rec.instance.vehicle_count;
    json demands = json::object();
    for (const auto& [s, q] : rec.instance.demands) demands[std::to_string(s)] = q;
    day["demands"] = std::move(demands);
    day["routes"] = rec.routing.tours;
    doc["days"].push_back(std::move(day));
  }
  return doc.dump(2);
}

void save_history(const HistoryDataset& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write history file '" + path + "'");
  out << history_to_json_text(h) << "\n";
}

void validate_history(const HistoryDataset& h) {
  const std::size_t n = h.stops.size();
  if (n == 0 || h.stops.front().id != kDepot) {
    throw ValidationError("stop universe must contain the depot (id 0)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (h.stops[i].id != static_cast<int>(i)) {
      throw ValidationError("stop ids must be contiguous 0..n; found gap at id " +
                            fmt_int(h.stops[i].id));
    }
  }
  if (h.distance.rows() != n || h.distance.cols() != n) {
    throw ValidationError("distance_matrix size does not match the stop universe");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (h.distance(i, i) != 0.0) {
      throw ValidationError("distance_matrix diagonal must be zero (stop " + fmt_int(i) + ")");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (h.distance(i, j) < 0.0) {
        throw ValidationError("negative distance between stops " + fmt_int(i) + " and " +
                              fmt_int(j));
      }
    }
  }

  int prev_t = std::numeric_limits<int>::min();
  for (std::size_t k = 0; k < h.records.size(); ++k) {
    const auto& rec = h.records[k];
    const auto& inst = rec.instance;
    auto fail = [&](const std::string& msg) {
      throw ValidationError("record t=" + fmt_int(inst.timestamp) + ": " + msg);
    };
    if (inst.timestamp <= prev_t) fail("timestamps must be strictly increasing");
    prev_t = inst.timestamp;
    if (inst.vehicle_count < 1) fail("vehicle_count must be >= 1");
    for (const auto& [s, q] : inst.demands) {
      if (s <= 0 || static_cast<std::size_t>(s) >= n) fail("unknown stop id " + fmt_int(s));
      if (q < 0) fail("negative demand at stop " + fmt_int(s));
      if (q > inst.capacity) {
        fail("demand " + fmt_int(q) + " of stop " + fmt_int(s) + " exceeds Q=" +
             fmt_int(inst.capacity));
      }
    }
    if (inst.total_demand() > inst.vehicle_count * inst.capacity) {
      fail("total demand " + fmt_int(inst.total_demand()) + " exceeds fleet capacity " +
           fmt_int(inst.vehicle_count * inst.capacity));
    }
    auto violations = validate_routing(inst, rec.routing);
    if (!violations.empty()) fail(violations.front());
  }
}

std::string to_string(const Arc& a) {
  return "(" + std::to_string(a.first) + "," + std::to_string(a.second) + ")";
}

}  // namespace prefroute
