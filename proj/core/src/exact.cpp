#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "evrptw/baselines.hpp"
#include "evrptw/error.hpp"

namespace evrptw::baselines {

namespace {

constexpr double kTieTol = 1e-12;
constexpr std::size_t kMaxStoredLabels = 4'000'000;

struct LabelKey {
  std::vector<std::uint64_t> visited;
  int position = 0;
  bool open = false;

  bool operator==(const LabelKey&) const = default;
};

struct LabelKeyHash {
  std::size_t operator()(const LabelKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(k.position * 2 + (k.open ? 1 : 0));
    for (std::uint64_t w : k.visited) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct Label {
  double clock;
  double battery;
  int load;
  double cost;
  int stations;
  int sym;  // symmetry bound on the next route's first customer

  bool dominates(const Label& o) const {
    return clock <= o.clock && battery >= o.battery && load <= o.load && cost <= o.cost && stations <= o.stations &&
           sym <= o.sym;
  }
};

class Search {
 public:
  Search(const Instance& in, const ConstraintSet& c, const ExactConfig& cfg)
      : in_(in), c_(c), cfg_(cfg), n_(in.n_customers()) {
    start_ = std::chrono::steady_clock::now();
    visited_.assign(static_cast<std::size_t>(in.size()), 0);
    bits_.assign(static_cast<std::size_t>((in.size() + 63) / 64), 0);
    escape_.assign(static_cast<std::size_t>(in.size()), 0.0);
    for (int j = 0; j < in.size(); ++j) {
      double e = in.dist(j, 0);
      for (int s = in.first_station(); s < in.size(); ++s) e = std::min(e, in.dist(j, s));
      escape_[static_cast<std::size_t>(j)] = e;
    }
    remaining_demand_ = in.total_demand();
    battery_ = in.battery_capacity();
    cur_.push_back(0);
  }

  void seed(const std::vector<Route>& routes, double cost) {
    best_routes_ = canonical_routes(routes);
    best_cost_ = cost;
  }

  ExactResult run() {
    dfs();
    ExactResult out;
    out.nodes = nodes_;
    out.certified = !timed_out_;
    out.elapsed_s = elapsed();
    if (best_routes_.empty() && n_ > 0) {
      out.solution = infeasible_solution();
      out.proven_infeasible = out.certified;
      return out;
    }
    out.solution = make_solution(in_, best_routes_, c_);
    if (!out.solution.feasible) throw std::logic_error("exact_solve produced a solution that fails validation");
    return out;
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  bool route_open() const { return route_first_ >= 0; }

  double lower_bound() const {
    const int q = in_.capacity();
    const int slack = route_open() ? q - load_ : 0;
    const int excess = remaining_demand_ - slack;
    const int extra_routes = excess > 0 ? (excess + q - 1) / q : 0;
    return cost_ + in_.fleet_penalty() * extra_routes + mst_bound();
  }

  // Prim's MST over {position} + unvisited customers + {depot}.
  double mst_bound() const {
    std::vector<int>& pts = scratch_pts_;
    pts.clear();
    pts.push_back(0);
    if (pos_ != 0) pts.push_back(pos_);
    for (int j = 1; j <= n_; ++j) {
      if (!visited_[static_cast<std::size_t>(j)]) pts.push_back(j);
    }
    const std::size_t k = pts.size();
    if (k <= 1) return 0.0;
    std::vector<double>& key = scratch_key_;
    key.assign(k, std::numeric_limits<double>::infinity());
    std::vector<char> in_tree(k, 0);
    key[0] = 0.0;
    double total = 0.0;
    for (std::size_t it = 0; it < k; ++it) {
      std::size_t u = k;
      for (std::size_t v = 0; v < k; ++v) {
        if (!in_tree[v] && (u == k || key[v] < key[u])) u = v;
      }
      in_tree[u] = 1;
      total += key[u];
      for (std::size_t v = 0; v < k; ++v) {
        if (!in_tree[v]) key[v] = std::min(key[v], in_.dist(pts[u], pts[v]));
      }
    }
    return total;
  }

  bool dominated_or_store() {
    LabelKey key{bits_, pos_, route_open()};
    Label label{c_.time_windows ? clock_ : 0.0,
                c_.battery ? battery_ : 0.0,
                load_,
                cost_,
                stations_,
                route_open() ? route_first_ : prev_first_};
    auto& bucket = labels_[std::move(key)];
    for (const Label& l : bucket) {
      if (l.dominates(label)) return true;
    }
    const std::size_t before = bucket.size();
    std::erase_if(bucket, [&](const Label& l) { return label.dominates(l); });
    stored_ -= before - bucket.size();
    if (stored_ < kMaxStoredLabels) {
      bucket.push_back(label);
      ++stored_;
    }
    return false;
  }

  void record() {
    std::vector<Route> cand = canonical_routes(routes_);
    if (cost_ < best_cost_ - kTieTol || (std::abs(cost_ - best_cost_) <= kTieTol && cand < best_routes_)) {
      best_cost_ = cost_;
      best_routes_ = std::move(cand);
    }
  }

  void set_visited(int j, bool on) {
    visited_[static_cast<std::size_t>(j)] = on ? 1 : 0;
    const auto w = static_cast<std::size_t>(j / 64);
    const std::uint64_t bit = std::uint64_t{1} << (j % 64);
    if (on) {
      bits_[w] |= bit;
    } else {
      bits_[w] &= ~bit;
    }
  }

  void dfs() {
    ++nodes_;
    if ((nodes_ & 1023) == 0 && elapsed() > cfg_.time_limit_s) timed_out_ = true;
    if (timed_out_) return;
    if (lower_bound() > best_cost_ + kTieTol) return;
    if (cfg_.use_dominance && dominated_or_store()) return;

    // Customers nearest first, then stations, then closing the route.
    std::vector<int> order;
    for (int j = 1; j <= n_; ++j) {
      if (!visited_[static_cast<std::size_t>(j)]) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return in_.dist(pos_, a) < in_.dist(pos_, b); });
    for (int j : order) {
      try_customer(j);
      if (timed_out_) return;
    }
    if (c_.battery && !in_.is_station(pos_) && stations_ < cfg_.max_stations_per_route) {
      for (int s = in_.first_station(); s < in_.size(); ++s) {
        try_station(s);
        if (timed_out_) return;
      }
    }
    if (route_open()) try_depot();
  }

  void try_customer(int j) {
    const Node& node = in_.node(j);
    if (route_first_ < 0 && j <= prev_first_) return;
    if (c_.capacity && load_ + node.demand > in_.capacity()) return;
    const double d = in_.dist(pos_, j);
    const double nb = c_.battery ? battery_ - in_.consume_rate() * d : battery_;
    if (c_.battery && nb - in_.consume_rate() * escape_[static_cast<std::size_t>(j)] < -kFeasTol) return;
    const double arrival = clock_ + d / in_.speed();
    double nclock = arrival;
    if (c_.time_windows) {
      if (arrival > node.tw_close + kFeasTol) return;
      nclock = std::max(arrival, node.tw_open);
    }
    nclock += node.service_time;
    if (c_.time_windows && nclock + in_.travel_time(j, 0) > in_.node(0).tw_close + kFeasTol) return;

    const State saved = save();
    cost_ += d + (route_first_ < 0 ? in_.fleet_penalty() : 0.0);
    if (route_first_ < 0) route_first_ = j;
    pos_ = j;
    clock_ = nclock;
    battery_ = nb;
    load_ += node.demand;
    remaining_demand_ -= node.demand;
    set_visited(j, true);
    cur_.push_back(j);
    dfs();
    cur_.pop_back();
    set_visited(j, false);
    restore(saved);
  }

  void try_station(int s) {
    if (s == pos_) return;
    const double d = in_.dist(pos_, s);
    const double nb = battery_ - in_.consume_rate() * d;
    if (nb < -kFeasTol) return;
    const double arrival = clock_ + d / in_.speed();
    const double charged = arrival + (in_.battery_capacity() - nb) / in_.recharge_rate();
    if (c_.time_windows) {
      if (arrival > in_.node(s).tw_close + kFeasTol) return;
      if (charged + in_.travel_time(s, 0) > in_.node(0).tw_close + kFeasTol) return;
    }
    const State saved = save();
    cost_ += d;
    pos_ = s;
    clock_ = charged;
    battery_ = in_.battery_capacity();
    ++stations_;
    cur_.push_back(s);
    dfs();
    cur_.pop_back();
    restore(saved);
  }

  void try_depot() {
    const double d = in_.dist(pos_, 0);
    if (c_.battery && battery_ - in_.consume_rate() * d < -kFeasTol) return;
    if (c_.time_windows && clock_ + d / in_.speed() > in_.node(0).tw_close + kFeasTol) return;
    const State saved = save();
    Route closed = cur_;
    closed.push_back(0);
    routes_.push_back(std::move(closed));
    const Route open_route = std::move(cur_);
    cur_ = {0};
    cost_ += d;
    prev_first_ = route_first_;
    route_first_ = -1;
    pos_ = 0;
    clock_ = 0.0;
    battery_ = in_.battery_capacity();
    load_ = 0;
    stations_ = 0;
    if (remaining_demand_ == 0 && std::all_of(visited_.begin() + 1, visited_.begin() + 1 + n_,
                                              [](char v) { return v != 0; })) {
      record();
    } else {
      dfs();
    }
    cur_ = open_route;
    routes_.pop_back();
    restore(saved);
  }

  struct State {
    int pos;
    double clock;
    double battery;
    int load;
    double cost;
    int stations;
    int route_first;
    int prev_first;
    int remaining_demand;
  };

  State save() const {
    return {pos_, clock_, battery_, load_, cost_, stations_, route_first_, prev_first_, remaining_demand_};
  }

  void restore(const State& s) {
    pos_ = s.pos;
    clock_ = s.clock;
    battery_ = s.battery;
    load_ = s.load;
    cost_ = s.cost;
    stations_ = s.stations;
    route_first_ = s.route_first;
    prev_first_ = s.prev_first;
    remaining_demand_ = s.remaining_demand;
  }

  const Instance& in_;
  ConstraintSet c_;
  ExactConfig cfg_;
  int n_;
  std::chrono::steady_clock::time_point start_;
  std::vector<double> escape_;

  std::vector<char> visited_;
  std::vector<std::uint64_t> bits_;
  std::vector<Route> routes_;
  Route cur_;
  int pos_ = 0;
  double clock_ = 0.0;
  double battery_ = 0.0;
  int load_ = 0;
  double cost_ = 0.0;
  int stations_ = 0;
  int route_first_ = -1;
  int prev_first_ = 0;
  int remaining_demand_ = 0;

  std::vector<Route> best_routes_;
  double best_cost_ = std::numeric_limits<double>::infinity();
  long nodes_ = 0;
  bool timed_out_ = false;
  std::unordered_map<LabelKey, std::vector<Label>, LabelKeyHash> labels_;
  std::size_t stored_ = 0;
  mutable std::vector<int> scratch_pts_;
  mutable std::vector<double> scratch_key_;
};

// Greedy output can only seed the search when it lies inside the search
// space, otherwise the result could differ from the restricted optimum.
bool within_search_space(const std::vector<Route>& routes, const Instance& in, int max_stations) {
  for (const Route& r : routes) {
    int stations = 0;
    for (std::size_t k = 1; k + 1 < r.size(); ++k) {
      if (in.is_station(r[k])) {
        ++stations;
        if (in.is_station(r[k - 1])) return false;
      }
    }
    if (stations > max_stations) return false;
  }
  return true;
}

}  // namespace

ExactResult exact_solve(const Instance& instance, const ConstraintSet& constraints, const ExactConfig& config) {
  if (!constraints.valid()) throw InvalidArgument("invalid constraint set");
  if (!(config.time_limit_s > 0.0)) throw InvalidArgument("exact_solve needs a positive time limit");
  if (config.max_stations_per_route < 0) throw InvalidArgument("max_stations_per_route must be >= 0");
  if (instance.n_customers() == 0) {
    ExactResult r;
    r.solution = make_solution(instance, {}, constraints);
    r.certified = true;
    return r;
  }
  Search search(instance, constraints, config);
  if (config.seed_with_greedy) {
    const Solution g = greedy_construct(instance, constraints);
    if (g.feasible && within_search_space(g.routes, instance, config.max_stations_per_route)) {
      search.seed(g.routes, g.cost);
    }
  }
  return search.run();
}

}  // namespace evrptw::baselines
