#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evrptw/model.hpp"

namespace evrptw::env {

using Mask = std::vector<char>;

/// Mutable rollout state for one EVRPTW episode. Copying is cheap relative to
/// an episode (a few small vectors) and is how multi-start rollouts fork.
struct EnvState {
  std::shared_ptr<const Instance> instance;
  ConstraintSet constraints;
  int position = 0;
  int load_used = 0;
  double battery = 0.0;
  double clock = 0.0;
  std::vector<char> visited;  // indexed by node id; only customers are ever set
  int served = 0;
  int fleet_count = 0;
  Route current_route;
  std::vector<double> current_arrivals;
  std::vector<double> current_batteries;
  std::vector<Route> finished_routes;
  std::vector<std::vector<double>> finished_arrivals;
  std::vector<std::vector<double>> finished_batteries;
  double distance = 0.0;
  std::optional<int> forced_start;
  bool terminal = false;
  bool infeasible = false;

  const Instance& inst() const { return *instance; }
  bool route_has_customer() const;
  int unserved() const { return inst().n_customers() - served; }
  bool all_served() const { return served == inst().n_customers(); }
};

struct StepInfo {
  bool closed_route = false;
  double distance = 0.0;
  double wait = 0.0;
  double recharge_time = 0.0;
  int unserved = 0;  // only set by mark_infeasible
};

struct StepOutcome {
  double reward = 0.0;
  bool terminal = false;
  StepInfo info;
};

/// Fresh episode at the depot with a full vehicle. When `start_customer` is
/// given and that customer is feasible from the depot, the first decision
/// is restricted to it (multi-start decoding); a start that is infeasible
/// at reset leaves the first mask unrestricted.
EnvState reset(std::shared_ptr<const Instance> instance, const ConstraintSet& constraints,
               std::optional<int> start_customer = std::nullopt);

/// Legal next nodes. Customers need an unvisited slot, spare load, an
/// arrival inside the window that still allows a timely depot return, and
/// enough energy to arrive and then close the route, either directly or
/// through one station whose recharge still fits the horizon.
/// Stations need battery tracking, reachability, and are never chained from
/// a freshly charged station. The depot needs a route with a customer on it.
/// An all-false mask signals a dead end.
Mask feasible_actions(const EnvState& state);

/// Applies `action`; throws MaskViolation if it is not in the mask.
StepOutcome step(EnvState& state, int action);

/// Ends a dead-end episode with a penalty of 2*lambda per unserved customer.
/// Throws InvalidArgument if the mask still has a legal action or every
/// customer is served.
StepOutcome mark_infeasible(EnvState& state);

/// Applies the transition without consulting the mask. Diagnostic replay
/// only (e.g. comparing masks across phases on one action history).
StepOutcome apply_unchecked(EnvState& state, int action);

/// Routes, schedules and cost of the episode so far. Feasibility is taken
/// from the env's own view: terminal and not infeasible.
Solution to_solution(const EnvState& state);

/// Penalty per unserved customer used by mark_infeasible.
double infeasibility_penalty(const Instance& instance);

/// One JSON object (no trailing newline) describing a transition for
/// episode traces: state digest, action, reward.
std::string trace_line(const EnvState& before, int action, const StepOutcome& outcome);

/// 64-bit digest of the dynamic part of a state.
std::uint64_t state_digest(const EnvState& state);

}  // namespace evrptw::env
