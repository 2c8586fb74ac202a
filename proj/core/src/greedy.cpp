#include <algorithm>
#include <limits>
#include <memory>

#include "evrptw/baselines.hpp"
#include "evrptw/env.hpp"

namespace evrptw::baselines {

std::vector<Route> canonical_routes(std::vector<Route> routes) {
  std::sort(routes.begin(), routes.end());
  return routes;
}

bool canonical_less(std::span<const Route> a, std::span<const Route> b) {
  const auto ca = canonical_routes({a.begin(), a.end()});
  const auto cb = canonical_routes({b.begin(), b.end()});
  return ca < cb;
}

namespace {

int nearest_customer(const env::EnvState& s, const env::Mask& m) {
  const Instance& inst = s.inst();
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= inst.n_customers(); ++j) {
    if (m[static_cast<std::size_t>(j)] && inst.dist(s.position, j) < best_d) {
      best_d = inst.dist(s.position, j);
      best = j;
    }
  }
  return best;
}

// Station whose visit unlocks a customer at the least detour, else one that
// unlocks the depot when the depot is not reachable directly.
int pick_station(const env::EnvState& s, const env::Mask& m) {
  const Instance& inst = s.inst();
  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  int depot_fallback = -1;
  double depot_score = std::numeric_limits<double>::infinity();
  for (int st = inst.first_station(); st < inst.size(); ++st) {
    if (!m[static_cast<std::size_t>(st)]) continue;
    env::EnvState next = s;
    env::step(next, st);
    const env::Mask m2 = env::feasible_actions(next);
    const int c = nearest_customer(next, m2);
    const double to_station = inst.dist(s.position, st);
    if (c >= 0) {
      const double score = to_station + inst.dist(st, c);
      if (score < best_score) {
        best_score = score;
        best = st;
      }
    } else if (m2[0] && !m[0]) {
      const double score = to_station + inst.dist(st, 0);
      if (score < depot_score) {
        depot_score = score;
        depot_fallback = st;
      }
    }
  }
  return best >= 0 ? best : depot_fallback;
}

}  // namespace

Solution greedy_construct(const Instance& instance, const ConstraintSet& constraints) {
  auto inst = std::make_shared<const Instance>(instance);
  env::EnvState s = env::reset(inst, constraints);
  const int step_limit = 4 * instance.size() * (instance.n_customers() + 1);
  for (int k = 0; k < step_limit && !s.terminal; ++k) {
    const env::Mask m = env::feasible_actions(s);
    int action = nearest_customer(s, m);
    if (action < 0 && constraints.battery) action = pick_station(s, m);
    if (action < 0 && m[0]) action = 0;
    if (action < 0) return infeasible_solution();
    env::step(s, action);
  }
  if (!s.terminal) return infeasible_solution();
  std::vector<Route> routes;
  for (const Route& r : s.finished_routes) {
    if (std::any_of(r.begin(), r.end(), [&](int id) { return instance.is_customer(id); })) routes.push_back(r);
  }
  Solution sol = make_solution(instance, std::move(routes), constraints);
  if (!sol.feasible) return infeasible_solution();
  return sol;
}

}  // namespace evrptw::baselines
