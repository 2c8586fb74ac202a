#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evrptw/random.hpp"

namespace evrptw::testing {

Instance make_instance(Point depot, const std::vector<CustomerSpec>& customers, const std::vector<Point>& stations,
                       VehicleParams params) {
  std::vector<Node> nodes;
  Node d;
  d.id = 0;
  d.kind = NodeKind::Depot;
  d.x = depot.x;
  d.y = depot.y;
  d.tw_close = params.horizon;
  nodes.push_back(d);
  for (const CustomerSpec& c : customers) {
    Node n;
    n.id = static_cast<int>(nodes.size());
    n.kind = NodeKind::Customer;
    n.x = c.x;
    n.y = c.y;
    n.demand = c.demand;
    n.service_time = c.service_time;
    n.tw_open = c.tw_open;
    n.tw_close = c.tw_close;
    nodes.push_back(n);
  }
  for (const Point& p : stations) {
    Node n;
    n.id = static_cast<int>(nodes.size());
    n.kind = NodeKind::Station;
    n.x = p.x;
    n.y = p.y;
    n.tw_close = params.horizon;
    nodes.push_back(n);
  }
  return Instance(std::move(nodes), static_cast<int>(customers.size()), static_cast<int>(stations.size()), params,
                  "R", 0);
}

namespace {

// Independent route simulator used only by the oracle. Mirrors the written
// semantics: travel, then (customer) wait under windows and serve, or
// (station) recharge fully when battery tracking is on.
class RouteEnumerator {
 public:
  RouteEnumerator(const Instance& in, const ConstraintSet& c, int max_stations)
      : in_(in), c_(c), max_stations_(max_stations), n_(in.n_customers()) {
    const std::size_t subsets = std::size_t{1} << n_;
    best_.assign(subsets, std::numeric_limits<double>::infinity());
    best_route_.assign(subsets, {});
  }

  void run() {
    route_ = {0};
    extend(0, 0.0, in_.battery_capacity(), 0, 0.0, 0, 0);
  }

  const std::vector<double>& best() const { return best_; }
  const std::vector<Route>& routes() const { return best_route_; }

 private:
  static constexpr double kTol = 1e-9;

  void extend(int pos, double clock, double battery, int load, double dist, unsigned subset, int stations) {
    if (subset != 0 && pos != 0) try_close(pos, clock, battery, dist, subset);
    for (int j = 1; j <= n_; ++j) {
      if (subset & (1u << (j - 1))) continue;
      const Node& node = in_.node(j);
      if (c_.capacity && load + node.demand > in_.capacity()) continue;
      const double d = in_.dist(pos, j);
      double b = battery;
      if (c_.battery) {
        b -= in_.consume_rate() * d;
        if (b < -kTol) continue;
      }
      double t = clock + d / in_.speed();
      if (c_.time_windows) {
        if (t > node.tw_close + kTol) continue;
        t = std::max(t, node.tw_open);
      }
      t += node.service_time;
      route_.push_back(j);
      extend(j, t, b, load + node.demand, dist + d, subset | (1u << (j - 1)), stations);
      route_.pop_back();
    }
    // Stations only matter when battery is tracked: without it a station
    // visit is a pure detour under the triangle inequality.
    if (!c_.battery || stations >= max_stations_ || in_.is_station(pos)) return;
    for (int s = in_.first_station(); s < in_.size(); ++s) {
      const double d = in_.dist(pos, s);
      const double b = battery - in_.consume_rate() * d;
      if (b < -kTol) continue;
      double t = clock + d / in_.speed();
      if (c_.time_windows && t > in_.node(s).tw_close + kTol) continue;
      t += (in_.battery_capacity() - b) / in_.recharge_rate();
      route_.push_back(s);
      extend(s, t, in_.battery_capacity(), load, dist + d, subset, stations + 1);
      route_.pop_back();
    }
  }

  void try_close(int pos, double clock, double battery, double dist, unsigned subset) {
    const double d = in_.dist(pos, 0);
    if (c_.battery && battery - in_.consume_rate() * d < -kTol) return;
    if (c_.time_windows && clock + d / in_.speed() > in_.node(0).tw_close + kTol) return;
    const double cost = dist + d + in_.fleet_penalty();
    Route r = route_;
    r.push_back(0);
    if (cost < best_[subset] - 1e-12 || (std::abs(cost - best_[subset]) <= 1e-12 && r < best_route_[subset])) {
      best_[subset] = cost;
      best_route_[subset] = std::move(r);
    }
  }

  const Instance& in_;
  ConstraintSet c_;
  int max_stations_;
  int n_;
  Route route_;
  std::vector<double> best_;
  std::vector<Route> best_route_;
};

}  // namespace

EnumerationResult enumerate_optimum(const Instance& instance, const ConstraintSet& constraints, int max_stations) {
  const int n = instance.n_customers();
  if (n > 12) throw std::invalid_argument("enumeration oracle is limited to 12 customers");
  RouteEnumerator e(instance, constraints, max_stations);
  e.run();
  const std::size_t full = (std::size_t{1} << n) - 1;
  std::vector<double> best(full + 1, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> choice(full + 1, 0);
  best[0] = 0.0;
  for (std::size_t mask = 1; mask <= full; ++mask) {
    const std::size_t low = mask & (~mask + 1);
    // Every sub-mask holding the lowest customer of `mask` is a candidate route.
    for (std::size_t sub = mask; sub != 0; sub = (sub - 1) & mask) {
      if (!(sub & low)) continue;
      const double c = e.best()[sub] + best[mask ^ sub];
      if (c < best[mask]) {
        best[mask] = c;
        choice[mask] = sub;
      }
    }
  }
  EnumerationResult out;
  if (!std::isfinite(best[full])) return out;
  out.cost = best[full];
  for (std::size_t mask = full; mask != 0; mask ^= choice[mask]) out.routes.push_back(e.routes()[choice[mask]]);
  std::sort(out.routes.begin(), out.routes.end());
  if (!check_solution(instance, out.routes, constraints).feasible) {
    throw std::logic_error("enumeration oracle produced a solution rejected by check_solution");
  }
  return out;
}

namespace {

void walk(const env::EnvState& s, const std::function<void(const env::EnvState&, bool)>& on_leaf, long& leaves,
          long max_leaves) {
  if (s.terminal) {
    if (++leaves > max_leaves) throw std::runtime_error("episode tree exceeds the leaf budget");
    on_leaf(s, false);
    return;
  }
  const env::Mask m = env::feasible_actions(s);
  bool any = false;
  for (std::size_t a = 0; a < m.size(); ++a) {
    if (!m[a]) continue;
    any = true;
    env::EnvState next = s;
    env::step(next, static_cast<int>(a));
    walk(next, on_leaf, leaves, max_leaves);
  }
  if (!any) {
    if (++leaves > max_leaves) throw std::runtime_error("episode tree exceeds the leaf budget");
    on_leaf(s, true);
  }
}

}  // namespace

long walk_all_episodes(const env::EnvState& root, const std::function<void(const env::EnvState&, bool)>& on_leaf,
                       long max_leaves) {
  long leaves = 0;
  walk(root, on_leaf, leaves, max_leaves);
  return leaves;
}

Eigen::VectorXd finite_difference(const policy::PolicyParams& params,
                                  const std::function<double(const policy::PolicyParams&)>& f, double h) {
  const Eigen::VectorXd theta = params.flatten();
  Eigen::VectorXd g(theta.size());
  policy::PolicyParams p = params;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) += h;
    p.unflatten(t);
    const double up = f(p);
    t(i) = theta(i) - h;
    p.unflatten(t);
    const double down = f(p);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

double random_episode(env::EnvState& state, std::uint64_t seed) {
  Rng rng(seed);
  double total = 0.0;
  while (!state.terminal) {
    const env::Mask m = env::feasible_actions(state);
    std::vector<double> w(m.begin(), m.end());
    if (std::none_of(m.begin(), m.end(), [](char c) { return c != 0; })) {
      total += env::mark_infeasible(state).reward;
      break;
    }
    total += env::step(state, static_cast<int>(rng.categorical(w))).reward;
  }
  return total;
}

}  // namespace evrptw::testing
