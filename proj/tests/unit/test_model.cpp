#include <cmath>

#include "doctest.h"
#include "evrptw/baselines.hpp"
#include "evrptw/env.hpp"
#include "evrptw/error.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/model.hpp"
#include "oracles.hpp"

using namespace evrptw;
using evrptw::testing::make_instance;

namespace {

constexpr ConstraintSet kA{true, false, false};
constexpr ConstraintSet kB{true, true, false};
constexpr ConstraintSet kC = ConstraintSet::full();

bool has_kind(const FeasibilityReport& r, ViolationKind k) {
  for (const auto& v : r.violations) {
    if (v.kind == k) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("objective of a single out-and-back route") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}}, {});
    const std::vector<Route> routes{{0, 1, 0}};
    CHECK(objective(routes, in) == doctest::Approx(101.0).epsilon(1e-12));
    CHECK(fleet_size(routes, in) == 1);
    CHECK(total_distance(routes, in) == doctest::Approx(1.0));
  }

  TEST_CASE("objective of no routes is zero") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}}, {});
    CHECK(objective(std::vector<Route>{}, in) == 0.0);
  }

  TEST_CASE("objective of two unit routes") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}, {0.5, 0}}, {});
    const std::vector<Route> routes{{0, 1, 0}, {0, 2, 0}};
    CHECK(objective(routes, in) == doctest::Approx(202.0).epsilon(1e-12));
  }

  TEST_CASE("objective rejects bad node ids") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}}, {});
    CHECK_THROWS_AS(objective(std::vector<Route>{{0, 7, 0}}, in), InvalidArgument);
    CHECK_THROWS_AS(objective(std::vector<Route>{{0, -1, 0}}, in), InvalidArgument);
  }

  TEST_CASE("capacity overflow is reported with its magnitude") {
    VehicleParams p;
    p.capacity = 5;
    const Instance in = make_instance({0, 0}, {{0, 0.1, 3}, {0.1, 0, 3}}, {}, p);
    const auto r = check_solution(in, std::vector<Route>{{0, 1, 2, 0}}, kA);
    REQUIRE_FALSE(r.feasible);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == ViolationKind::Capacity);
    CHECK(r.violations[0].magnitude == doctest::Approx(1.0));
  }

  TEST_CASE("battery deficit matters only when battery tracking is on") {
    // A 1.05 round trip against a 1.0 battery.
    const Instance in = make_instance({0, 0}, {{0, 0.525}}, {});
    const std::vector<Route> routes{{0, 1, 0}};
    const auto b = check_solution(in, routes, kB);
    REQUIRE_FALSE(b.feasible);
    REQUIRE(has_kind(b, ViolationKind::Battery));
    CHECK(b.violations[0].magnitude == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(check_solution(in, routes, kA).feasible);
  }

  TEST_CASE("coverage is always checked") {
    const Instance in = make_instance({0, 0}, {{0, 0.1}, {0.1, 0}}, {});
    CHECK(has_kind(check_solution(in, std::vector<Route>{{0, 1, 0}}, kA), ViolationKind::Coverage));
    CHECK(has_kind(check_solution(in, std::vector<Route>{{0, 1, 2, 1, 0}}, kA), ViolationKind::Coverage));
  }

  TEST_CASE("structurally broken routes throw") {
    const Instance in = make_instance({0, 0}, {{0, 0.1}, {0.1, 0}}, {});
    CHECK_THROWS_AS(check_solution(in, std::vector<Route>{{1, 2, 0}}, kA), InvalidArgument);
    CHECK_THROWS_AS(check_solution(in, std::vector<Route>{{0, 1, 0, 2, 0}}, kA), InvalidArgument);
    CHECK_THROWS_AS(check_solution(in, std::vector<Route>{{0}}, kA), InvalidArgument);
  }

  TEST_CASE("window violation reports lateness") {
    const Instance in = make_instance({0, 0}, {{0, 0.5, 1, 0.0, 0.3}}, {{0, 0.25}});
    const auto r = check_solution(in, std::vector<Route>{{0, 1, 0}}, kC);
    REQUIRE(has_kind(r, ViolationKind::TimeWindow));
    CHECK(r.violations[0].magnitude == doctest::Approx(0.2));
    CHECK(check_solution(in, std::vector<Route>{{0, 1, 0}}, kB).feasible);
  }

  TEST_CASE("waiting and recharging appear in the schedule") {
    VehicleParams p;
    p.recharge_rate = 5.0;
    const Instance in = make_instance({0, 0}, {{0, 0.3, 1, 1.0, 2.0, 0.05}}, {{0, 0.6}}, p);
    const RouteReplay r = replay_route(in, {0, 1, 2, 1, 0}, kC);
    // Station visit after a customer then the same customer is illegal for
    // coverage but fine for a single-route replay of the schedule.
    REQUIRE(r.arrival_times.size() == 5);
    CHECK(r.arrival_times[1] == doctest::Approx(0.3));
    // Service starts at 1.0, ends 1.05; station reached at 1.35 with 0.4 left.
    CHECK(r.arrival_times[2] == doctest::Approx(1.35));
    CHECK(r.battery_levels[2] == doctest::Approx(0.4));
    // Recharge 0.6 at rate 5 takes 0.12.
    CHECK(r.arrival_times[3] == doctest::Approx(1.35 + 0.12 + 0.3));
    CHECK(r.battery_levels[3] == doctest::Approx(0.7));
  }

  TEST_CASE("validate_instance boundaries") {
    VehicleParams p;
    p.capacity = 4;
    SUBCASE("demand equal to capacity is valid") {
      const Instance in = make_instance({0.5, 0.5}, {{0.5, 0.6, 4}}, {}, p);
      CHECK(validate_instance(in).empty());
    }
    SUBCASE("demand above capacity is rejected") {
      const Instance in = make_instance({0.5, 0.5}, {{0.5, 0.6, 5}}, {}, p);
      const auto v = validate_instance(in);
      REQUIRE(v.size() == 1);
      CHECK(v[0].check == InstanceCheck::Demand);
    }
    SUBCASE("customer out of battery reach without stations") {
      // Round trip 1.2 against a 1.0 battery.
      const Instance in = make_instance({0, 0}, {{0, 0.6}}, {}, p);
      const auto v = validate_instance(in);
      REQUIRE(v.size() == 1);
      CHECK(v[0].check == InstanceCheck::BatteryReach);
      CHECK_FALSE(battery_reachable(in, 1));
    }
    SUBCASE("a station restores reach") {
      const Instance in = make_instance({0, 0}, {{0, 0.6}}, {{0, 0.3}}, p);
      CHECK(validate_instance(in).empty());
      CHECK(battery_reachable(in, 1));
    }
    SUBCASE("window closing exactly at the last timely return") {
      const double close = 4.0 - 0.05 - 0.1;
      const Instance in = make_instance({0, 0}, {{0, 0.1, 1, 0.0, close, 0.05}}, {}, p);
      CHECK(validate_instance(in).empty());
    }
    SUBCASE("window closing past the last timely return") {
      const Instance in = make_instance({0, 0}, {{0, 0.1, 1, 3.95, 3.99, 0.05}}, {}, p);
      const auto v = validate_instance(in);
      REQUIRE_FALSE(v.empty());
      CHECK(v[0].check == InstanceCheck::WindowFit);
    }
  }

  TEST_CASE("fleet_lower_bound") {
    VehicleParams p;
    p.capacity = 5;
    const Instance in = make_instance({0, 0}, {{0, 0.1, 3}, {0.1, 0, 3}, {0.1, 0.1, 5}}, {}, p);
    CHECK(fleet_lower_bound(in) == doctest::Approx(300.0));
  }

  TEST_CASE("make_solution fills cost and schedule") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}}, {});
    const Solution s = make_solution(in, {{0, 1, 0}}, kC);
    CHECK(s.feasible);
    CHECK(s.fleet_size == 1);
    CHECK(s.cost == doctest::Approx(101.0));
    CHECK(s.cost == doctest::Approx(s.total_distance + 100.0 * s.fleet_size));
    REQUIRE(s.arrival_times.size() == 1);
    CHECK(s.arrival_times[0].size() == 3);
    CHECK_FALSE(infeasible_solution().feasible);
    CHECK(infeasible_solution().routes.empty());
  }

  TEST_CASE("properties over generated instances") {
    for (const auto& cls : gen::all_classes()) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        gen::GenConfig gc;
        gc.n_customers = 6;
        gc.n_stations = 2;
        gc.class_spec = cls;
        gc.seed = seed;
        const Instance in = gen::generate(gc);
        const Solution s = baselines::greedy_construct(in, kC);
        if (!s.feasible) continue;
        CAPTURE(cls.code());
        CAPTURE(seed);
        // Objective decomposition and the fleet bound.
        CHECK(s.cost == doctest::Approx(s.total_distance + in.fleet_penalty() * s.fleet_size).epsilon(1e-12));
        CHECK(s.cost >= fleet_lower_bound(in) - 1e-9);
        // Feasible under C implies feasible under the weaker phases.
        CHECK(check_solution(in, s, kB).feasible);
        CHECK(check_solution(in, s, kA).feasible);
        // Distance does not depend on direction.
        std::vector<Route> rev = s.routes;
        for (auto& r : rev) std::reverse(r.begin(), r.end());
        CHECK(objective(rev, in) == doctest::Approx(s.cost).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("check_solution agrees with the environment's schedule") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      gen::GenConfig gc;
      gc.n_customers = 8;
      gc.n_stations = 3;
      gc.class_spec = gen::all_classes()[seed % 9];
      gc.seed = seed;
      auto in = std::make_shared<const Instance>(gen::generate(gc));
      env::EnvState st = env::reset(in, kC);
      testing::random_episode(st, seed);
      if (st.infeasible) continue;
      const Solution from_env = env::to_solution(st);
      const auto report = check_solution(*in, from_env.routes, kC);
      REQUIRE(report.feasible);
      REQUIRE(report.arrival_times.size() == from_env.arrival_times.size());
      for (std::size_t r = 0; r < report.arrival_times.size(); ++r) {
        REQUIRE(report.arrival_times[r].size() == from_env.arrival_times[r].size());
        for (std::size_t k = 0; k < report.arrival_times[r].size(); ++k) {
          CHECK(std::abs(report.arrival_times[r][k] - from_env.arrival_times[r][k]) <= 1e-9);
          CHECK(std::abs(report.battery_levels[r][k] - from_env.battery_levels[r][k]) <= 1e-9);
        }
      }
    }
  }

  TEST_CASE("name conversions round-trip") {
    for (auto k : {NodeKind::Depot, NodeKind::Customer, NodeKind::Station}) {
      CHECK(node_kind_from_string(to_string(k)) == k);
    }
    for (auto k : {ViolationKind::Capacity, ViolationKind::Battery, ViolationKind::TimeWindow, ViolationKind::Coverage}) {
      CHECK(violation_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(node_kind_from_string("truck"), FormatError);
  }

  TEST_CASE("instance construction rejects inconsistent layouts") {
    std::vector<Node> nodes{{0, NodeKind::Depot, 0, 0}, {1, NodeKind::Station, 0.1, 0.1}};
    CHECK_THROWS_AS(Instance(nodes, 1, 0, {}, "R", 0), InvalidArgument);
    CHECK_THROWS_AS(Instance(nodes, 2, 0, {}, "R", 0), InvalidArgument);
  }
}
