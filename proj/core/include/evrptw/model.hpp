#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evrptw {

/// Absolute slack used by every feasibility comparison (battery, clock, load).
inline constexpr double kFeasTol = 1e-9;

enum class NodeKind { Depot, Customer, Station };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view s);

struct Node {
  int id = 0;
  NodeKind kind = NodeKind::Customer;
  double x = 0.0;
  double y = 0.0;
  int demand = 0;
  double service_time = 0.0;
  double tw_open = 0.0;
  double tw_close = 0.0;

  bool operator==(const Node&) const = default;
};

/// Fleet and energy parameters shared by every vehicle of an instance.
struct VehicleParams {
  int capacity = 30;
  double battery_capacity = 1.0;
  double consume_rate = 1.0;   // energy per unit distance
  double recharge_rate = 5.0;  // energy per unit time
  double speed = 1.0;
  double horizon = 4.0;        // depot closing time
  double fleet_penalty = 100.0;

  bool operator==(const VehicleParams&) const = default;
};

/// Immutable problem description. Node order is depot (id 0), then the
/// N customers (ids 1..N), then the M stations (ids N+1..N+M). Euclidean
/// distances are computed once at construction.
class Instance {
 public:
  Instance(std::vector<Node> nodes, int n_customers, int n_stations, VehicleParams params,
           std::string class_label, std::uint64_t seed);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int n_customers() const { return n_customers_; }
  int n_stations() const { return n_stations_; }
  const VehicleParams& params() const { return params_; }
  const std::string& class_label() const { return class_label_; }
  std::uint64_t seed() const { return seed_; }

  int capacity() const { return params_.capacity; }
  double battery_capacity() const { return params_.battery_capacity; }
  double consume_rate() const { return params_.consume_rate; }
  double recharge_rate() const { return params_.recharge_rate; }
  double speed() const { return params_.speed; }
  double horizon() const { return params_.horizon; }
  double fleet_penalty() const { return params_.fleet_penalty; }

  double dist(int i, int j) const {
    return dist_[static_cast<std::size_t>(i) * nodes_.size() + static_cast<std::size_t>(j)];
  }
  double travel_time(int i, int j) const { return dist(i, j) / params_.speed; }

  bool valid_id(int id) const { return id >= 0 && id < size(); }
  bool is_depot(int id) const { return id == 0; }
  bool is_customer(int id) const { return id >= 1 && id <= n_customers_; }
  bool is_station(int id) const { return id > n_customers_ && id < size(); }
  int first_station() const { return n_customers_ + 1; }

  int total_demand() const;

  /// Order-sensitive 64-bit digest of every field; used to tie trajectories
  /// to the instance they were collected on.
  std::uint64_t digest() const;

  bool operator==(const Instance& other) const;

 private:
  std::vector<Node> nodes_;
  int n_customers_;
  int n_stations_;
  VehicleParams params_;
  std::string class_label_;
  std::uint64_t seed_;
  std::vector<double> dist_;
};

/// Phase-gated feasibility rules. Capacity is always enforced; time windows
/// are only meaningful on top of battery tracking.
struct ConstraintSet {
  bool capacity = true;
  bool battery = false;
  bool time_windows = false;

  bool valid() const { return capacity && (!time_windows || battery); }
  bool operator==(const ConstraintSet&) const = default;

  static constexpr ConstraintSet full() { return {true, true, true}; }
};

enum class ViolationKind { Capacity, Battery, TimeWindow, Coverage };

std::string_view to_string(ViolationKind kind);
ViolationKind violation_kind_from_string(std::string_view s);

struct Violation {
  ViolationKind kind = ViolationKind::Coverage;
  int route = -1;  // -1 when not attributable to one route
  int node = -1;
  double magnitude = 0.0;

  bool operator==(const Violation&) const = default;
};

using Route = std::vector<int>;

struct Solution {
  std::vector<Route> routes;
  std::vector<std::vector<double>> arrival_times;   // per visit, before waiting
  std::vector<std::vector<double>> battery_levels;  // per visit, before recharging
  double total_distance = 0.0;
  int fleet_size = 0;
  double cost = 0.0;
  bool feasible = false;
  std::vector<Violation> violations;

  bool operator==(const Solution&) const = default;
};

/// Sum of traversed edge lengths plus the fleet penalty for every route that
/// serves at least one customer. Throws InvalidArgument on bad node ids.
double objective(std::span<const Route> routes, const Instance& instance);

/// Number of routes with at least one customer.
int fleet_size(std::span<const Route> routes, const Instance& instance);

double total_distance(std::span<const Route> routes, const Instance& instance);

/// Per-route replay result.
struct RouteReplay {
  std::vector<double> arrival_times;
  std::vector<double> battery_levels;
  double distance = 0.0;
  int load = 0;
  std::vector<Violation> violations;
};

/// Replays one route (depot ... depot) under the given constraints with the
/// full transition semantics: free waiting at early arrivals when windows are
/// active, and full linear-rate recharging at stations when battery tracking
/// is active.
RouteReplay replay_route(const Instance& instance, const Route& route,
                         const ConstraintSet& constraints, int route_index = 0);

struct FeasibilityReport {
  bool feasible = false;
  std::vector<Violation> violations;
  std::vector<std::vector<double>> arrival_times;
  std::vector<std::vector<double>> battery_levels;
  double total_distance = 0.0;
  int fleet_size = 0;
  double cost = 0.0;
};

/// Independent validator. Coverage (every customer exactly once) is always
/// checked; capacity, battery and time windows only when their flag is on.
/// Throws InvalidArgument for structurally broken routes (bad ids, not
/// depot-bounded).
FeasibilityReport check_solution(const Instance& instance, std::span<const Route> routes,
                                 const ConstraintSet& constraints);
FeasibilityReport check_solution(const Instance& instance, const Solution& solution,
                                 const ConstraintSet& constraints);

/// Builds a fully populated Solution (schedules, cost, verdict) from routes.
Solution make_solution(const Instance& instance, std::vector<Route> routes,
                       const ConstraintSet& constraints);

/// A Solution carrying no routes and marked infeasible.
Solution infeasible_solution();

enum class InstanceCheck { Structure, Demand, BatteryReach, WindowFit };

std::string_view to_string(InstanceCheck check);

struct InstanceViolation {
  InstanceCheck check = InstanceCheck::Structure;
  int node = -1;
  std::string detail;
};

/// Empty iff every demand fits the vehicle, every customer is reachable on
/// one charge either directly from the depot or with one station detour on
/// each side, and every window fits the horizon.
std::vector<InstanceViolation> validate_instance(const Instance& instance);

/// True iff customer `id` can be served on a leg a -> id -> b where a and b
/// are the depot or stations reachable from the depot on one charge.
bool battery_reachable(const Instance& instance, int id);

/// lambda * ceil(total demand / capacity).
double fleet_lower_bound(const Instance& instance);

}  // namespace evrptw
