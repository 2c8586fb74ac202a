#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "evrptw/model.hpp"

namespace evrptw::baselines {

/// Nearest-neighbour construction on the environment's action mask. From
/// each position the closest legal customer is taken; with none left the
/// vehicle detours to the station that unlocks the nearest customer, or
/// returns to the depot. Returns an infeasible marker when stuck.
Solution greedy_construct(const Instance& instance, const ConstraintSet& constraints);

/// Routes sorted lexicographically; the canonical form used for tie-breaks.
std::vector<Route> canonical_routes(std::vector<Route> routes);

/// True when `a` is lexicographically smaller than `b` in canonical form.
bool canonical_less(std::span<const Route> a, std::span<const Route> b);

struct ExactConfig {
  double time_limit_s = 600.0;
  // Without consecutive stations a route holds at most N + 1 visits, so the
  // default never binds.
  int max_stations_per_route = std::numeric_limits<int>::max();
  bool use_dominance = true;
  bool seed_with_greedy = true;
};

struct ExactResult {
  Solution solution;          // infeasible marker when no solution was found
  bool certified = false;     // search exhausted: optimal, or proven infeasible
  bool proven_infeasible = false;
  long nodes = 0;
  double elapsed_s = 0.0;
};

/// Depth-first branch and bound over feasible constructions (the action
/// space of the environment: never two stations in a row, never a route
/// without customers, at most max_stations_per_route station visits). Each node is bounded by
///   cost + lambda * (vehicles still needed) + MST(position, unvisited, depot)
/// and labels dominated at equal (visited, position, open-route) are pruned.
/// Ties in J go to the canonically smaller route set.
ExactResult exact_solve(const Instance& instance, const ConstraintSet& constraints,
                        const ExactConfig& config = {});

enum class Neighborhood { Relocate, Swap, TwoOpt, StationInsert, StationRemove };

std::string_view to_string(Neighborhood n);

struct VNSConfig {
  std::vector<Neighborhood> order{Neighborhood::Relocate, Neighborhood::Swap, Neighborhood::TwoOpt,
                                  Neighborhood::StationInsert, Neighborhood::StationRemove};
  int max_shake = 3;              // shaking strength runs 1..max_shake
  double initial_temperature = 0.05;  // times J of the initial solution
  double cooling = 0.99;              // per iteration
  int max_iterations = 300;
  double time_limit_s = 5.0;
  std::uint64_t seed = 0;

  bool valid() const;
};

/// Variable neighbourhood search started from greedy_construct: shake,
/// first-improvement descent through `order`, simulated-annealing
/// acceptance. Every accepted candidate passes check_solution. Returns the
/// best feasible incumbent, or an infeasible marker when greedy fails.
Solution vns_solve(const Instance& instance, const ConstraintSet& constraints, const VNSConfig& config = {});

}  // namespace evrptw::baselines
