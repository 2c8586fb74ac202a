#include "evrptw/env.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <limits>

#include "evrptw/error.hpp"

namespace evrptw::env {

bool EnvState::route_has_customer() const {
  return std::any_of(current_route.begin(), current_route.end(),
                     [&](int id) { return inst().is_customer(id); });
}

double infeasibility_penalty(const Instance& instance) { return 2.0 * instance.fleet_penalty(); }

namespace {

// After serving a customer the vehicle must still be able to close the
// route: straight to the depot, or through one station whose full recharge
// leaves time and energy for the last leg home.
bool has_escape(const EnvState& s, int j, double battery, double done) {
  const Instance& inst = s.inst();
  const double r = inst.consume_rate();
  const bool tw = s.constraints.time_windows;
  if (battery - r * inst.dist(j, 0) >= -kFeasTol) return true;
  for (int st = inst.first_station(); st < inst.size(); ++st) {
    const double left = battery - r * inst.dist(j, st);
    if (left < -kFeasTol) continue;
    if (inst.battery_capacity() - r * inst.dist(st, 0) < -kFeasTol) continue;
    if (tw) {
      const double arrival = done + inst.travel_time(j, st);
      if (arrival > inst.node(st).tw_close + kFeasTol) continue;
      const double charged = arrival + (inst.battery_capacity() - left) / inst.recharge_rate();
      if (charged + inst.travel_time(st, 0) > inst.horizon() + kFeasTol) continue;
    }
    return true;
  }
  return false;
}

void start_vehicle(EnvState& s) {
  s.position = 0;
  s.load_used = 0;
  s.battery = s.inst().battery_capacity();
  s.clock = 0.0;
  s.current_route.assign(1, 0);
  s.current_arrivals.assign(1, 0.0);
  s.current_batteries.assign(1, s.battery);
}

bool customer_allowed(const EnvState& s, int j) {
  const Instance& inst = s.inst();
  const Node& n = inst.node(j);
  if (s.visited[static_cast<std::size_t>(j)]) return false;
  if (s.load_used + n.demand > inst.capacity()) return false;
  const double d = inst.dist(s.position, j);
  double done = 0.0;
  if (s.constraints.time_windows) {
    const double arrival = s.clock + d / inst.speed();
    if (arrival > n.tw_close + kFeasTol) return false;
    done = std::max(arrival, n.tw_open) + n.service_time;
    if (done + inst.travel_time(j, 0) > inst.horizon() + kFeasTol) return false;
  }
  if (s.constraints.battery) {
    const double left = s.battery - inst.consume_rate() * d;
    if (left < -kFeasTol || !has_escape(s, j, left, done)) return false;
  }
  return true;
}

bool station_allowed(const EnvState& s, int st) {
  const Instance& inst = s.inst();
  if (!s.constraints.battery) return false;
  if (st == s.position || inst.is_station(s.position)) return false;
  const double d = inst.dist(s.position, st);
  const double arrival_battery = s.battery - inst.consume_rate() * d;
  if (arrival_battery < -kFeasTol) return false;
  if (s.constraints.time_windows) {
    const double arrival = s.clock + d / inst.speed();
    if (arrival > inst.node(st).tw_close + kFeasTol) return false;
    const double charged = arrival + (inst.battery_capacity() - arrival_battery) / inst.recharge_rate();
    if (charged + inst.travel_time(st, 0) > inst.horizon() + kFeasTol) return false;
  }
  return true;
}

bool depot_allowed(const EnvState& s) {
  const Instance& inst = s.inst();
  if (s.position == 0 || !s.route_has_customer()) return false;
  const double d = inst.dist(s.position, 0);
  if (s.constraints.battery && s.battery - inst.consume_rate() * d < -kFeasTol) return false;
  if (s.constraints.time_windows && s.clock + d / inst.speed() > inst.horizon() + kFeasTol) return false;
  return true;
}

Mask unrestricted_mask(const EnvState& s) {
  const Instance& inst = s.inst();
  Mask m(static_cast<std::size_t>(inst.size()), 0);
  if (s.terminal) return m;
  m[0] = depot_allowed(s) ? 1 : 0;
  for (int j = 1; j <= inst.n_customers(); ++j) m[static_cast<std::size_t>(j)] = customer_allowed(s, j) ? 1 : 0;
  for (int st = inst.first_station(); st < inst.size(); ++st) {
    m[static_cast<std::size_t>(st)] = station_allowed(s, st) ? 1 : 0;
  }
  return m;
}

}  // namespace

EnvState reset(std::shared_ptr<const Instance> instance, const ConstraintSet& constraints,
               std::optional<int> start_customer) {
  if (!instance) throw InvalidArgument("reset needs an instance");
  if (!constraints.valid()) throw InvalidArgument("constraint set must enforce capacity, and battery under time windows");
  if (start_customer && !instance->is_customer(*start_customer)) {
    throw InvalidArgument("start_customer " + std::to_string(*start_customer) + " is not a customer id");
  }
  EnvState s;
  s.instance = std::move(instance);
  s.constraints = constraints;
  s.visited.assign(static_cast<std::size_t>(s.inst().size()), 0);
  start_vehicle(s);
  if (start_customer && unrestricted_mask(s)[static_cast<std::size_t>(*start_customer)]) {
    s.forced_start = start_customer;
  }
  return s;
}

Mask feasible_actions(const EnvState& state) {
  if (state.forced_start) {
    Mask m(static_cast<std::size_t>(state.inst().size()), 0);
    m[static_cast<std::size_t>(*state.forced_start)] = 1;
    return m;
  }
  return unrestricted_mask(state);
}

StepOutcome apply_unchecked(EnvState& s, int action) {
  const Instance& inst = s.inst();
  if (!inst.valid_id(action)) throw InvalidArgument("action " + std::to_string(action) + " is not a node id");
  StepOutcome out;
  const double d = inst.dist(s.position, action);
  out.info.distance = d;
  s.distance += d;
  s.clock += d / inst.speed();
  if (s.constraints.battery) s.battery -= inst.consume_rate() * d;
  s.position = action;
  s.forced_start.reset();
  s.current_route.push_back(action);
  s.current_arrivals.push_back(s.clock);
  s.current_batteries.push_back(s.battery);
  out.reward = -d;

  const Node& n = inst.node(action);
  if (n.kind == NodeKind::Customer) {
    if (s.constraints.time_windows && s.clock < n.tw_open) {
      out.info.wait = n.tw_open - s.clock;
      s.clock = n.tw_open;
    }
    s.clock += n.service_time;
    s.load_used += n.demand;
    if (!s.visited[static_cast<std::size_t>(action)]) {
      s.visited[static_cast<std::size_t>(action)] = 1;
      ++s.served;
    }
  } else if (n.kind == NodeKind::Station) {
    if (s.constraints.battery) {
      out.info.recharge_time = (inst.battery_capacity() - s.battery) / inst.recharge_rate();
      s.clock += out.info.recharge_time;
      s.battery = inst.battery_capacity();
    }
  } else {
    const bool non_empty = s.route_has_customer();
    if (non_empty) {
      ++s.fleet_count;
      out.reward -= inst.fleet_penalty();
      out.info.closed_route = true;
    }
    s.finished_routes.push_back(std::move(s.current_route));
    s.finished_arrivals.push_back(std::move(s.current_arrivals));
    s.finished_batteries.push_back(std::move(s.current_batteries));
    start_vehicle(s);
    if (s.all_served()) s.terminal = true;
  }
  out.terminal = s.terminal;
  return out;
}

StepOutcome step(EnvState& state, int action) {
  if (state.terminal) throw MaskViolation("step on a terminal state");
  if (!state.inst().valid_id(action)) throw MaskViolation("action " + std::to_string(action) + " is not a node id");
  const Mask m = feasible_actions(state);
  if (!m[static_cast<std::size_t>(action)]) {
    throw MaskViolation("action " + std::to_string(action) + " is not allowed from node " +
                        std::to_string(state.position));
  }
  return apply_unchecked(state, action);
}

StepOutcome mark_infeasible(EnvState& state) {
  if (state.terminal) throw InvalidArgument("mark_infeasible on a terminal state");
  if (state.all_served()) throw InvalidArgument("mark_infeasible with every customer served");
  const Mask m = feasible_actions(state);
  if (std::any_of(m.begin(), m.end(), [](char c) { return c != 0; })) {
    throw InvalidArgument("mark_infeasible while the mask still has a legal action");
  }
  StepOutcome out;
  out.info.unserved = state.unserved();
  out.reward = -infeasibility_penalty(state.inst()) * out.info.unserved;
  state.terminal = true;
  state.infeasible = true;
  out.terminal = true;
  return out;
}

Solution to_solution(const EnvState& state) {
  Solution sol;
  sol.routes = state.finished_routes;
  sol.arrival_times = state.finished_arrivals;
  sol.battery_levels = state.finished_batteries;
  sol.total_distance = 0.0;
  for (const Route& r : sol.routes) {
    for (std::size_t k = 1; k < r.size(); ++k) sol.total_distance += state.inst().dist(r[k - 1], r[k]);
  }
  sol.fleet_size = fleet_size(std::span<const Route>(sol.routes), state.inst());
  sol.cost = sol.total_distance + state.inst().fleet_penalty() * sol.fleet_size;
  sol.feasible = state.terminal && !state.infeasible;
  if (!sol.feasible) sol.cost = std::numeric_limits<double>::infinity();
  return sol;
}

std::uint64_t state_digest(const EnvState& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(s.position));
  mix(static_cast<std::uint64_t>(s.load_used));
  mix(std::bit_cast<std::uint64_t>(s.battery));
  mix(std::bit_cast<std::uint64_t>(s.clock));
  mix(static_cast<std::uint64_t>(s.fleet_count));
  for (char v : s.visited) mix(static_cast<std::uint64_t>(v));
  return h;
}

std::string trace_line(const EnvState& before, int action, const StepOutcome& outcome) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"state\":\"%016llx\",\"position\":%d,\"clock\":%.17g,\"battery\":%.17g,\"load\":%d,"
                "\"action\":%d,\"reward\":%.17g,\"terminal\":%s}",
                static_cast<unsigned long long>(state_digest(before)), before.position, before.clock, before.battery,
                before.load_used, action, outcome.reward, outcome.terminal ? "true" : "false");
  return buf;
}

}  // namespace evrptw::env
