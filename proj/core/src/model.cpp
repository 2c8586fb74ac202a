#include "evrptw/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "evrptw/error.hpp"

namespace evrptw {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Depot: return "depot";
    case NodeKind::Customer: return "customer";
    case NodeKind::Station: return "station";
  }
  return "?";
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "depot") return NodeKind::Depot;
  if (s == "customer") return NodeKind::Customer;
  if (s == "station") return NodeKind::Station;
  throw FormatError("unknown node kind '" + std::string(s) + "'");
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Capacity: return "capacity";
    case ViolationKind::Battery: return "battery";
    case ViolationKind::TimeWindow: return "time_window";
    case ViolationKind::Coverage: return "coverage";
  }
  return "?";
}

ViolationKind violation_kind_from_string(std::string_view s) {
  if (s == "capacity") return ViolationKind::Capacity;
  if (s == "battery") return ViolationKind::Battery;
  if (s == "time_window") return ViolationKind::TimeWindow;
  if (s == "coverage") return ViolationKind::Coverage;
  throw FormatError("unknown violation kind '" + std::string(s) + "'");
}

std::string_view to_string(InstanceCheck check) {
  switch (check) {
    case InstanceCheck::Structure: return "structure";
    case InstanceCheck::Demand: return "demand";
    case InstanceCheck::BatteryReach: return "battery_reach";
    case InstanceCheck::WindowFit: return "window_fit";
  }
  return "?";
}

Instance::Instance(std::vector<Node> nodes, int n_customers, int n_stations, VehicleParams params,
                   std::string class_label, std::uint64_t seed)
    : nodes_(std::move(nodes)),
      n_customers_(n_customers),
      n_stations_(n_stations),
      params_(params),
      class_label_(std::move(class_label)),
      seed_(seed) {
  if (n_customers_ < 1 || n_stations_ < 0) {
    throw InvalidArgument("instance needs at least one customer and a non-negative station count");
  }
  if (static_cast<int>(nodes_.size()) != 1 + n_customers_ + n_stations_) {
    throw InvalidArgument("node count does not match 1 + N + M");
  }
  for (int i = 0; i < size(); ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const NodeKind expected =
        i == 0 ? NodeKind::Depot : (i <= n_customers_ ? NodeKind::Customer : NodeKind::Station);
    if (n.id != i) throw InvalidArgument("node ids must equal their position");
    if (n.kind != expected) throw InvalidArgument("node " + std::to_string(i) + " has the wrong kind");
  }
  if (params_.capacity <= 0 || params_.battery_capacity <= 0 || params_.consume_rate <= 0 ||
      params_.recharge_rate <= 0 || params_.speed <= 0 || params_.horizon <= 0 ||
      params_.fleet_penalty < 0) {
    throw InvalidArgument("vehicle parameters must be positive (fleet penalty non-negative)");
  }
  const std::size_t n = nodes_.size();
  dist_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist_[i * n + j] = std::hypot(nodes_[i].x - nodes_[j].x, nodes_[i].y - nodes_[j].y);
    }
  }
}

int Instance::total_demand() const {
  int total = 0;
  for (int i = 1; i <= n_customers_; ++i) total += node(i).demand;
  return total;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  void real(double v) { bytes(std::bit_cast<std::uint64_t>(v)); }
  void integer(std::int64_t v) { bytes(static_cast<std::uint64_t>(v)); }
};

}  // namespace

std::uint64_t Instance::digest() const {
  Fnv1a f;
  f.integer(n_customers_);
  f.integer(n_stations_);
  f.integer(params_.capacity);
  f.real(params_.battery_capacity);
  f.real(params_.consume_rate);
  f.real(params_.recharge_rate);
  f.real(params_.speed);
  f.real(params_.horizon);
  f.real(params_.fleet_penalty);
  for (char c : class_label_) f.integer(c);
  f.bytes(seed_);
  for (const Node& n : nodes_) {
    f.integer(static_cast<int>(n.kind));
    f.real(n.x);
    f.real(n.y);
    f.integer(n.demand);
    f.real(n.service_time);
    f.real(n.tw_open);
    f.real(n.tw_close);
  }
  return f.h;
}

bool Instance::operator==(const Instance& other) const {
  return nodes_ == other.nodes_ && n_customers_ == other.n_customers_ &&
         n_stations_ == other.n_stations_ && params_ == other.params_ &&
         class_label_ == other.class_label_ && seed_ == other.seed_;
}

namespace {

void check_route_structure(const Instance& instance, const Route& route, std::size_t index) {
  if (route.size() < 2 || route.front() != 0 || route.back() != 0) {
    throw InvalidArgument("route " + std::to_string(index) + " must start and end at the depot");
  }
  for (std::size_t k = 0; k < route.size(); ++k) {
    const int id = route[k];
    if (!instance.valid_id(id)) {
      throw InvalidArgument("route " + std::to_string(index) + " references invalid node id " +
                            std::to_string(id));
    }
    if (id == 0 && k != 0 && k + 1 != route.size()) {
      throw InvalidArgument("route " + std::to_string(index) + " passes through the depot");
    }
  }
}

bool serves_customer(const Instance& instance, const Route& route) {
  return std::any_of(route.begin(), route.end(), [&](int id) { return instance.is_customer(id); });
}

}  // namespace

double total_distance(std::span<const Route> routes, const Instance& instance) {
  double d = 0.0;
  for (std::size_t r = 0; r < routes.size(); ++r) {
    check_route_structure(instance, routes[r], r);
    for (std::size_t k = 1; k < routes[r].size(); ++k) d += instance.dist(routes[r][k - 1], routes[r][k]);
  }
  return d;
}

int fleet_size(std::span<const Route> routes, const Instance& instance) {
  int k = 0;
  for (const Route& r : routes) k += serves_customer(instance, r) ? 1 : 0;
  return k;
}

double objective(std::span<const Route> routes, const Instance& instance) {
  const double d = total_distance(routes, instance);
  return d + instance.fleet_penalty() * fleet_size(routes, instance);
}

RouteReplay replay_route(const Instance& instance, const Route& route,
                         const ConstraintSet& constraints, int route_index) {
  check_route_structure(instance, route, static_cast<std::size_t>(route_index));
  RouteReplay out;
  const double q_bat = instance.battery_capacity();
  double clock = 0.0;
  double battery = q_bat;
  out.arrival_times.push_back(0.0);
  out.battery_levels.push_back(battery);

  for (std::size_t k = 1; k < route.size(); ++k) {
    const int from = route[k - 1];
    const int to = route[k];
    const double d = instance.dist(from, to);
    out.distance += d;
    clock += d / instance.speed();
    if (constraints.battery) battery -= instance.consume_rate() * d;
    out.arrival_times.push_back(clock);
    out.battery_levels.push_back(battery);

    const Node& node = instance.node(to);
    if (constraints.battery && battery < -kFeasTol) {
      out.violations.push_back({ViolationKind::Battery, route_index, to, -battery});
    }
    if (constraints.time_windows && clock > node.tw_close + kFeasTol) {
      out.violations.push_back({ViolationKind::TimeWindow, route_index, to, clock - node.tw_close});
    }
    if (node.kind == NodeKind::Customer) {
      if (constraints.time_windows) clock = std::max(clock, node.tw_open);
      clock += node.service_time;
      out.load += node.demand;
    } else if (node.kind == NodeKind::Station && constraints.battery) {
      clock += (q_bat - battery) / instance.recharge_rate();
      battery = q_bat;
    }
  }
  if (constraints.capacity && out.load > instance.capacity()) {
    out.violations.push_back({ViolationKind::Capacity, route_index, -1,
                              static_cast<double>(out.load - instance.capacity())});
  }
  return out;
}

FeasibilityReport check_solution(const Instance& instance, std::span<const Route> routes,
                                 const ConstraintSet& constraints) {
  FeasibilityReport report;
  std::vector<int> seen(static_cast<std::size_t>(instance.size()), 0);
  std::vector<int> first_route(static_cast<std::size_t>(instance.size()), -1);
  for (std::size_t r = 0; r < routes.size(); ++r) {
    RouteReplay rr = replay_route(instance, routes[r], constraints, static_cast<int>(r));
    report.total_distance += rr.distance;
    report.arrival_times.push_back(std::move(rr.arrival_times));
    report.battery_levels.push_back(std::move(rr.battery_levels));
    report.violations.insert(report.violations.end(), rr.violations.begin(), rr.violations.end());
    bool has_customer = false;
    for (int id : routes[r]) {
      if (!instance.is_customer(id)) continue;
      has_customer = true;
      if (seen[static_cast<std::size_t>(id)]++ == 0) first_route[static_cast<std::size_t>(id)] = static_cast<int>(r);
    }
    report.fleet_size += has_customer ? 1 : 0;
  }
  for (int id = 1; id <= instance.n_customers(); ++id) {
    const int count = seen[static_cast<std::size_t>(id)];
    if (count != 1) {
      report.violations.push_back({ViolationKind::Coverage, count == 0 ? -1 : first_route[static_cast<std::size_t>(id)],
                                   id, static_cast<double>(count == 0 ? 1 : count - 1)});
    }
  }
  report.cost = report.total_distance + instance.fleet_penalty() * report.fleet_size;
  report.feasible = report.violations.empty();
  return report;
}

FeasibilityReport check_solution(const Instance& instance, const Solution& solution,
                                 const ConstraintSet& constraints) {
  return check_solution(instance, std::span<const Route>(solution.routes), constraints);
}

Solution make_solution(const Instance& instance, std::vector<Route> routes,
                       const ConstraintSet& constraints) {
  FeasibilityReport rep = check_solution(instance, std::span<const Route>(routes), constraints);
  Solution s;
  s.routes = std::move(routes);
  s.arrival_times = std::move(rep.arrival_times);
  s.battery_levels = std::move(rep.battery_levels);
  s.total_distance = rep.total_distance;
  s.fleet_size = rep.fleet_size;
  s.cost = rep.cost;
  s.feasible = rep.feasible;
  s.violations = std::move(rep.violations);
  return s;
}

Solution infeasible_solution() {
  Solution s;
  s.feasible = false;
  s.cost = std::numeric_limits<double>::infinity();
  return s;
}

bool battery_reachable(const Instance& instance, int id) {
  const double range = instance.battery_capacity() / instance.consume_rate();
  std::vector<int> anchors{0};
  for (int s = instance.first_station(); s < instance.size(); ++s) {
    if (instance.dist(0, s) <= range + kFeasTol) anchors.push_back(s);
  }
  for (int a : anchors) {
    for (int b : anchors) {
      if (instance.dist(a, id) + instance.dist(id, b) <= range + kFeasTol) return true;
    }
  }
  return false;
}

std::vector<InstanceViolation> validate_instance(const Instance& instance) {
  std::vector<InstanceViolation> out;
  const double horizon = instance.horizon();
  for (const Node& n : instance.nodes()) {
    std::ostringstream why;
    if (n.x < 0.0 || n.x > 1.0 || n.y < 0.0 || n.y > 1.0) {
      out.push_back({InstanceCheck::Structure, n.id, "coordinates outside the unit square"});
    }
    if (n.tw_open > n.tw_close) {
      out.push_back({InstanceCheck::Structure, n.id, "tw_open > tw_close"});
    }
    if (n.kind != NodeKind::Customer && (n.demand != 0 || n.service_time != 0.0)) {
      out.push_back({InstanceCheck::Structure, n.id, "non-customer node with demand or service time"});
    }
    if (n.kind != NodeKind::Customer) continue;
    if (n.demand < 0 || n.service_time < 0.0) {
      out.push_back({InstanceCheck::Structure, n.id, "negative demand or service time"});
    }
    if (n.demand > instance.capacity()) {
      why << "demand " << n.demand << " exceeds capacity " << instance.capacity();
      out.push_back({InstanceCheck::Demand, n.id, why.str()});
    }
    if (!battery_reachable(instance, n.id)) {
      out.push_back({InstanceCheck::BatteryReach, n.id,
                     "no depot/station leg through the customer fits one charge"});
    }
    if (n.tw_close + n.service_time + instance.travel_time(n.id, 0) > horizon + kFeasTol) {
      out.push_back({InstanceCheck::WindowFit, n.id, "window closes too late to return to the depot"});
    }
  }
  return out;
}

double fleet_lower_bound(const Instance& instance) {
  const int q = instance.capacity();
  const int vehicles = (instance.total_demand() + q - 1) / q;
  return instance.fleet_penalty() * vehicles;
}

}  // namespace evrptw
