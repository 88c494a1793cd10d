#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prefroute/matrix.hpp"

namespace prefroute {

// Malformed input files, broken invariants, bad arguments.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that does not parse at all.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// No feasible routing exists for the instance.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kDepot = 0;

enum class Weekday { Mon = 0, Tue, Wed, Thu, Fri, Sat, Sun };

const char* weekday_name(Weekday d);
Weekday weekday_from_name(const std::string& name);

struct StopInfo {
  int id = 0;
  std::string name;
};

// One day's problem: which stops need service, their demands, the fleet.
struct RoutingInstance {
  int timestamp = 0;
  Weekday weekday = Weekday::Mon;
  int vehicle_count = 1;
  int capacity = 0;
  // Sorted by stop id; the key set is the active set S^t (depot excluded).
  std::vector<std::pair<int, int>> demands;

  std::vector<int> active_stops() const;
  int demand_of(int stop) const;
  bool is_active(int stop) const;
  int total_demand() const;
};

// A set of depot-anchored tours. Each tour lists customer stops in visit
// order; the depot endpoints are implicit. Tours are the auditable form,
// the incidence matrix the computational one.
struct Routing {
  std::vector<std::vector<int>> tours;
};

using Arc = std::pair<int, int>;

// Directed arcs with x_sr = 1, sorted. |result| = |active| + #tours.
std::vector<Arc> arcs_of(const Routing& x);

// Dense 0/1 incidence over a universe of `dim` stops.
Mat incidence_of(const Routing& x, std::size_t dim);

// Tours sorted lexicographically; first elements are distinct for any
// feasible routing, so this is a total order.
Routing canonical(Routing x);
bool routing_less(const Routing& a, const Routing& b);

// Sum of arc costs in canonical tour order. Both solver backends report
// objectives through this so equal routings give bit-identical sums.
double routing_cost(const Mat& cost, const Routing& x);

double routing_distance_km(const DistanceMatrix& d, const Routing& x);

// Every violated constraint among degree, fleet-size, capacity and
// activity; empty means x is feasible for inst.
std::vector<std::string> validate_routing(const RoutingInstance& inst, const Routing& x);

// Same checks on a raw binary arc matrix, including subtour detection
// (a tours list cannot encode a depot-detached cycle, a matrix can).
std::vector<std::string> validate_incidence(const RoutingInstance& inst, const Mat& x);

struct DayRecord {
  RoutingInstance instance;
  Routing routing;
};

// Chronologically ordered (instance, realized routing) pairs plus the
// distance matrix over the full stop universe. Immutable after load.
struct HistoryDataset {
  std::vector<StopInfo> stops;  // ids 0..n, 0 is the depot
  DistanceMatrix distance;
  std::vector<DayRecord> records;

  std::size_t universe_size() const { return stops.size(); }
  // Index of the first record with timestamp >= t.
  std::size_t lower_bound_record(int t) const;
};

HistoryDataset load_history(const std::string& path);
HistoryDataset history_from_json_text(const std::string& text);
void save_history(const HistoryDataset& h, const std::string& path);
std::string history_to_json_text(const HistoryDataset& h);

// Validates records against their instances and the dataset-level
// invariants; throws ValidationError naming the first offender.
void validate_history(const HistoryDataset& h);

std::string to_string(const Arc& a);

}  // namespace prefroute
