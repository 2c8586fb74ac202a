#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "evrptw/baselines.hpp"
#include "evrptw/error.hpp"
#include "evrptw/random.hpp"

namespace evrptw::baselines {

std::string_view to_string(Neighborhood n) {
  switch (n) {
    case Neighborhood::Relocate: return "relocate";
    case Neighborhood::Swap: return "swap";
    case Neighborhood::TwoOpt: return "two-opt";
    case Neighborhood::StationInsert: return "station-insert";
    case Neighborhood::StationRemove: return "station-remove";
  }
  return "?";
}

bool VNSConfig::valid() const {
  return !order.empty() && max_shake >= 1 && initial_temperature >= 0.0 && cooling > 0.0 && cooling <= 1.0 &&
         max_iterations >= 0 && time_limit_s > 0.0;
}

namespace {

constexpr double kImprove = 1e-10;

using Seq = std::vector<int>;  // route body without the depot ends

struct Plan {
  std::vector<Seq> routes;
  std::vector<double> costs;  // distance + lambda per non-empty route
  double total = 0.0;
};

class Vns {
 public:
  Vns(const Instance& in, const ConstraintSet& c, const VNSConfig& cfg)
      : in_(in), c_(c), cfg_(cfg), rng_(cfg.seed), start_(std::chrono::steady_clock::now()) {}

  Solution run(const Solution& initial) {
    Plan x = from_routes(initial.routes);
    local_search(x);
    Plan best = x;
    double temperature = cfg_.initial_temperature * x.total;
    int k = 1;
    for (int it = 0; it < cfg_.max_iterations && !out_of_time(); ++it) {
      Plan y = x;
      shake(y, k);
      local_search(y);
      if (!valid_plan(y)) {
        k = k % cfg_.max_shake + 1;
        continue;
      }
      if (y.total < x.total - kImprove) {
        x = std::move(y);
        k = 1;
      } else {
        const double delta = y.total - x.total;
        if (temperature > 0.0 && rng_.uniform() < std::exp(-delta / temperature)) x = std::move(y);
        k = k % cfg_.max_shake + 1;
      }
      if (x.total < best.total - kImprove ||
          (std::abs(x.total - best.total) <= kImprove && canonical_less(full(x), full(best)))) {
        best = x;
      }
      temperature *= cfg_.cooling;
    }
    Solution sol = make_solution(in_, canonical_routes(full(best)), c_);
    return sol.feasible ? sol : initial;
  }

 private:
  bool out_of_time() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() > cfg_.time_limit_s;
  }

  bool has_customer(const Seq& s) const {
    return std::any_of(s.begin(), s.end(), [&](int id) { return in_.is_customer(id); });
  }

  Route to_route(const Seq& s) const {
    Route r;
    r.reserve(s.size() + 2);
    r.push_back(0);
    r.insert(r.end(), s.begin(), s.end());
    r.push_back(0);
    return r;
  }

  std::vector<Route> full(const Plan& p) const {
    std::vector<Route> out;
    for (const Seq& s : p.routes) out.push_back(to_route(s));
    return out;
  }

  // Cost of a route body, or nothing when it breaks a constraint.
  std::optional<double> cost(const Seq& s) const {
    if (s.empty()) return 0.0;
    if (!has_customer(s)) return std::nullopt;
    for (std::size_t k = 1; k < s.size(); ++k) {
      if (in_.is_station(s[k]) && in_.is_station(s[k - 1])) return std::nullopt;
    }
    const RouteReplay r = replay_route(in_, to_route(s), c_);
    if (!r.violations.empty()) return std::nullopt;
    return r.distance + in_.fleet_penalty();
  }

  bool station_gap_ok(const Seq& s, std::size_t gap, int st) const {
    const int before = gap == 0 ? 0 : s[gap - 1];
    const int after = gap == s.size() ? 0 : s[gap];
    return before != st && after != st && !in_.is_station(before) && !in_.is_station(after);
  }

  // A route broken by a move gets one chance: the cheapest single station
  // insertion that makes it feasible.
  std::optional<std::pair<Seq, double>> repaired(Seq s) const {
    if (auto c = cost(s)) return std::make_pair(std::move(s), *c);
    if (!c_.battery || s.empty()) return std::nullopt;
    std::optional<std::pair<Seq, double>> best;
    for (std::size_t gap = 0; gap <= s.size(); ++gap) {
      for (int st = in_.first_station(); st < in_.size(); ++st) {
        if (!station_gap_ok(s, gap, st)) continue;
        Seq t = s;
        t.insert(t.begin() + static_cast<std::ptrdiff_t>(gap), st);
        if (auto c = cost(t); c && (!best || *c < best->second - kImprove)) best = std::make_pair(std::move(t), *c);
      }
    }
    return best;
  }

  // Removing a customer can leave two stations side by side. Every way of
  // keeping one station of each such pair is a candidate.
  void single_station_runs(const Seq& s, std::vector<Seq>& out) const {
    for (std::size_t k = 1; k < s.size(); ++k) {
      if (in_.is_station(s[k]) && in_.is_station(s[k - 1])) {
        single_station_runs(without(s, k - 1), out);
        single_station_runs(without(s, k), out);
        return;
      }
    }
    out.push_back(s);
  }

  std::optional<std::pair<Seq, double>> evaluate(const Seq& s, bool repair) const {
    std::vector<Seq> candidates;
    single_station_runs(s, candidates);
    std::optional<std::pair<Seq, double>> best;
    for (Seq& t : candidates) {
      std::optional<std::pair<Seq, double>> r;
      if (repair) {
        r = repaired(std::move(t));
      } else if (auto c = cost(t)) {
        r = std::make_pair(std::move(t), *c);
      }
      if (r && (!best || r->second < best->second - kImprove)) best = std::move(r);
    }
    return best;
  }

  Plan from_routes(const std::vector<Route>& routes) const {
    Plan p;
    for (const Route& r : routes) {
      Seq s(r.begin() + 1, r.end() - 1);
      if (s.empty()) continue;
      const auto c = cost(s);
      if (!c) throw InvalidArgument("VNS initial solution has an infeasible route");
      p.routes.push_back(std::move(s));
      p.costs.push_back(*c);
      p.total += *c;
    }
    return p;
  }

  bool valid_plan(const Plan& p) const { return check_solution(in_, full(p), c_).feasible; }

  // Replaces routes a and b (b may equal a or be routes.size() for a new
  // route) when the result is cheaper by more than kImprove, or always when
  // force is set and both routes are feasible.
  bool apply(Plan& p, std::size_t a, Seq na, std::size_t b, Seq nb, bool repair, bool force) const {
    auto ra = evaluate(na, repair);
    if (!ra) return false;
    std::optional<std::pair<Seq, double>> rb;
    const double old_a = p.costs[a];
    double old_b = 0.0;
    if (b != a) {
      rb = evaluate(nb, repair);
      if (!rb) return false;
      old_b = b < p.routes.size() ? p.costs[b] : 0.0;
    }
    const double delta = ra->second + (rb ? rb->second : 0.0) - old_a - old_b;
    if (!force && delta >= -kImprove) return false;
    if (b == p.routes.size()) {
      p.routes.emplace_back();
      p.costs.push_back(0.0);
    }
    p.routes[a] = std::move(ra->first);
    p.costs[a] = ra->second;
    if (rb) {
      p.routes[b] = std::move(rb->first);
      p.costs[b] = rb->second;
    }
    p.total += delta;
    compact(p);
    return true;
  }

  void compact(Plan& p) const {
    for (std::size_t i = p.routes.size(); i-- > 0;) {
      if (p.routes[i].empty()) {
        p.routes.erase(p.routes.begin() + static_cast<std::ptrdiff_t>(i));
        p.costs.erase(p.costs.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
  }

  static Seq without(const Seq& s, std::size_t i) {
    Seq t = s;
    t.erase(t.begin() + static_cast<std::ptrdiff_t>(i));
    return t;
  }

  static Seq with(const Seq& s, std::size_t pos, int id) {
    Seq t = s;
    t.insert(t.begin() + static_cast<std::ptrdiff_t>(pos), id);
    return t;
  }

  bool relocate(Plan& p) {
    const std::size_t r = p.routes.size();
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t i = 0; i < p.routes[a].size(); ++i) {
        const int id = p.routes[a][i];
        if (!in_.is_customer(id)) continue;
        const Seq rest = without(p.routes[a], i);
        for (std::size_t b = 0; b <= r; ++b) {
          if (b == a) {
            for (std::size_t pos = 0; pos <= rest.size(); ++pos) {
              if (pos == i) continue;
              if (apply(p, a, with(rest, pos, id), a, {}, true, false)) return true;
            }
          } else if (b == r) {
            if (rest.empty()) continue;  // moving a lone customer to a new route changes nothing
            if (apply(p, a, rest, b, {id}, true, false)) return true;
          } else {
            for (std::size_t pos = 0; pos <= p.routes[b].size(); ++pos) {
              if (apply(p, a, rest, b, with(p.routes[b], pos, id), true, false)) return true;
            }
          }
        }
      }
      if (out_of_time()) return false;
    }
    return false;
  }

  bool swap(Plan& p) {
    const std::size_t r = p.routes.size();
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t i = 0; i < p.routes[a].size(); ++i) {
        if (!in_.is_customer(p.routes[a][i])) continue;
        for (std::size_t b = a; b < r; ++b) {
          for (std::size_t j = b == a ? i + 1 : 0; j < p.routes[b].size(); ++j) {
            if (!in_.is_customer(p.routes[b][j])) continue;
            Seq na = p.routes[a];
            if (b == a) {
              std::swap(na[i], na[j]);
              if (apply(p, a, std::move(na), a, {}, true, false)) return true;
            } else {
              Seq nb = p.routes[b];
              std::swap(na[i], nb[j]);
              if (apply(p, a, std::move(na), b, std::move(nb), true, false)) return true;
            }
          }
        }
      }
      if (out_of_time()) return false;
    }
    return false;
  }

  bool two_opt(Plan& p) {
    const std::size_t r = p.routes.size();
    for (std::size_t a = 0; a < r; ++a) {
      const Seq& s = p.routes[a];
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.size(); ++j) {
          Seq t = s;
          std::reverse(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          if (apply(p, a, std::move(t), a, {}, true, false)) return true;
        }
      }
      // Tail exchange between two routes.
      for (std::size_t b = a + 1; b < r; ++b) {
        const Seq& u = p.routes[b];
        for (std::size_t i = 0; i <= s.size(); ++i) {
          for (std::size_t j = 0; j <= u.size(); ++j) {
            if ((i == 0 && j == 0) || (i == s.size() && j == u.size())) continue;
            Seq na(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(i));
            na.insert(na.end(), u.begin() + static_cast<std::ptrdiff_t>(j), u.end());
            Seq nb(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(j));
            nb.insert(nb.end(), s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
            if ((!na.empty() && !has_customer(na)) || (!nb.empty() && !has_customer(nb))) continue;
            if (apply(p, a, std::move(na), b, std::move(nb), true, false)) return true;
          }
        }
      }
      if (out_of_time()) return false;
    }
    return false;
  }

  bool station_insert(Plan& p) {
    if (!c_.battery) return false;
    for (std::size_t a = 0; a < p.routes.size(); ++a) {
      const Seq& s = p.routes[a];
      for (std::size_t gap = 0; gap <= s.size(); ++gap) {
        for (int st = in_.first_station(); st < in_.size(); ++st) {
          if (!station_gap_ok(s, gap, st)) continue;
          if (apply(p, a, with(s, gap, st), a, {}, false, false)) return true;
        }
      }
    }
    return false;
  }

  bool station_remove(Plan& p) {
    for (std::size_t a = 0; a < p.routes.size(); ++a) {
      const Seq& s = p.routes[a];
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (in_.is_station(s[i]) && apply(p, a, without(s, i), a, {}, false, false)) return true;
      }
    }
    return false;
  }

  bool explore(Plan& p, Neighborhood n) {
    switch (n) {
      case Neighborhood::Relocate: return relocate(p);
      case Neighborhood::Swap: return swap(p);
      case Neighborhood::TwoOpt: return two_opt(p);
      case Neighborhood::StationInsert: return station_insert(p);
      case Neighborhood::StationRemove: return station_remove(p);
    }
    return false;
  }

  // Variable neighbourhood descent: restart from the first neighbourhood
  // after every improvement.
  void local_search(Plan& p) {
    std::size_t k = 0;
    while (k < cfg_.order.size() && !out_of_time()) {
      if (explore(p, cfg_.order[k])) {
        k = 0;
      } else {
        ++k;
      }
    }
  }

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(n) - 1)); }

  // k random feasible relocations or swaps.
  void shake(Plan& p, int k) {
    constexpr int kAttempts = 32;
    for (int move = 0; move < k; ++move) {
      for (int attempt = 0; attempt < kAttempts; ++attempt) {
        if (p.routes.empty()) return;
        const std::size_t a = pick(p.routes.size());
        std::vector<std::size_t> cust;
        for (std::size_t i = 0; i < p.routes[a].size(); ++i) {
          if (in_.is_customer(p.routes[a][i])) cust.push_back(i);
        }
        const std::size_t i = cust[pick(cust.size())];
        const int id = p.routes[a][i];
        bool done = false;
        if (rng_.uniform() < 0.5) {
          const std::size_t b = pick(p.routes.size() + 1);
          const Seq rest = without(p.routes[a], i);
          if (b == a) {
            done = apply(p, a, with(rest, pick(rest.size() + 1), id), a, {}, true, true);
          } else if (b == p.routes.size()) {
            done = !rest.empty() && apply(p, a, rest, b, {id}, true, true);
          } else {
            done = apply(p, a, rest, b, with(p.routes[b], pick(p.routes[b].size() + 1), id), true, true);
          }
        } else {
          const std::size_t b = pick(p.routes.size());
          std::vector<std::size_t> other;
          for (std::size_t j = 0; j < p.routes[b].size(); ++j) {
            if (in_.is_customer(p.routes[b][j]) && !(b == a && j == i)) other.push_back(j);
          }
          if (other.empty()) continue;
          const std::size_t j = other[pick(other.size())];
          Seq na = p.routes[a];
          if (b == a) {
            std::swap(na[i], na[j]);
            done = apply(p, a, std::move(na), a, {}, true, true);
          } else {
            Seq nb = p.routes[b];
            std::swap(na[i], nb[j]);
            done = apply(p, a, std::move(na), b, std::move(nb), true, true);
          }
        }
        if (done) break;
      }
    }
  }

  const Instance& in_;
  ConstraintSet c_;
  VNSConfig cfg_;
  Rng rng_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

Solution vns_solve(const Instance& instance, const ConstraintSet& constraints, const VNSConfig& config) {
  if (!config.valid()) throw InvalidArgument("invalid VNS config");
  if (!constraints.valid()) throw InvalidArgument("invalid constraint set");
  const Solution initial = greedy_construct(instance, constraints);
  if (!initial.feasible) return initial;
  if (instance.n_customers() == 0) return initial;
  Vns vns(instance, constraints, config);
  return vns.run(initial);
}

}  // namespace evrptw::baselines
