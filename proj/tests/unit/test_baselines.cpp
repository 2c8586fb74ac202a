#include <cmath>

#include "doctest.h"
#include "evrptw/baselines.hpp"
#include "evrptw/error.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/policy.hpp"
#include "oracles.hpp"

using namespace evrptw;
using evrptw::testing::make_instance;

namespace {

constexpr ConstraintSet kA{true, false, false};
constexpr ConstraintSet kB{true, true, false};
constexpr ConstraintSet kC = ConstraintSet::full();

Instance generated(const gen::ClassSpec& cls, int n, int m, std::uint64_t seed) {
  gen::GenConfig gc;
  gc.class_spec = cls;
  gc.n_customers = n;
  gc.n_stations = m;
  gc.seed = seed;
  return gen::generate(gc);
}

baselines::VNSConfig fast_vns(std::uint64_t seed = 0) {
  baselines::VNSConfig c;
  c.max_iterations = 60;
  c.time_limit_s = 5.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("exact: one customer") {
    const Instance in = make_instance({0, 0}, {{0.3, 0.4}}, {});
    const auto r = baselines::exact_solve(in, kC);
    CHECK(r.certified);
    CHECK(r.solution.feasible);
    CHECK(r.solution.cost == doctest::Approx(2 * 0.5 + 100.0).epsilon(1e-12));
    CHECK(r.solution.routes == std::vector<Route>{{0, 1, 0}});
  }

  TEST_CASE("exact: symmetric tie goes to the canonical route") {
    const Instance in = make_instance({0.5, 0.5}, {{0.5, 0.7}, {0.7, 0.5}}, {});
    const auto r = baselines::exact_solve(in, kA);
    REQUIRE(r.certified);
    CHECK(r.solution.routes == std::vector<Route>{{0, 1, 2, 0}});
  }

  TEST_CASE("exact matches enumeration on small instances") {
    for (const auto& cls : gen::all_classes()) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const int n = 3 + static_cast<int>(seed % 3);
        const Instance in = generated(cls, n, 2, seed);
        for (ConstraintSet cs : {kA, kB, kC}) {
          const auto oracle = testing::enumerate_optimum(in, cs);
          const auto r = baselines::exact_solve(in, cs);
          CAPTURE(cls.code());
          CAPTURE(seed);
          REQUIRE(r.certified);
          REQUIRE(r.solution.feasible == oracle.feasible());
          if (oracle.feasible()) CHECK(std::abs(r.solution.cost - oracle.cost) <= 1e-9);
        }
      }
    }
  }

  TEST_CASE("exact agrees with and without dominance") {
    baselines::ExactConfig plain;
    plain.use_dominance = false;
    plain.seed_with_greedy = false;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Instance in = generated(gen::all_classes()[seed], 6, 2, seed);
      const auto a = baselines::exact_solve(in, kC);
      const auto b = baselines::exact_solve(in, kC, plain);
      REQUIRE(a.certified);
      REQUIRE(b.certified);
      CHECK(a.solution.cost == doctest::Approx(b.solution.cost).epsilon(1e-12));
      CHECK(a.nodes <= b.nodes);
    }
  }

  TEST_CASE("exact: timeout keeps an uncertified incumbent") {
    const Instance in = generated(gen::ClassSpec::parse("R"), 40, 5, 1);
    baselines::ExactConfig c;
    c.time_limit_s = 0.05;
    const auto r = baselines::exact_solve(in, kC, c);
    CHECK_FALSE(r.certified);
    CHECK(r.elapsed_s < 2.0);
    if (r.solution.feasible) CHECK(check_solution(in, r.solution, kC).feasible);
  }

  TEST_CASE("exact: proven infeasible") {
    const Instance in = make_instance({0, 0}, {{0, 0.5, 1, 0.0, 0.1}, {0, 0.2}}, {});
    const auto r = baselines::exact_solve(in, kC);
    CHECK(r.certified);
    CHECK(r.proven_infeasible);
    CHECK_FALSE(r.solution.feasible);
    CHECK_FALSE(baselines::exact_solve(in, kB).proven_infeasible);
  }

  TEST_CASE("exact: bad arguments") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}}, {});
    baselines::ExactConfig c;
    c.time_limit_s = 0.0;
    CHECK_THROWS_AS(baselines::exact_solve(in, kC, c), InvalidArgument);
    CHECK_THROWS_AS(baselines::exact_solve(in, ConstraintSet{false, false, false}), InvalidArgument);
  }

  TEST_CASE("phase A exact equals the capacitated routing optimum") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Instance in = generated(gen::all_classes()[seed % 9], 5, 2, seed + 50);
      const auto oracle = testing::enumerate_optimum(in, kA, 0);
      const auto r = baselines::exact_solve(in, kA);
      REQUIRE(r.certified);
      CHECK(std::abs(r.solution.cost - oracle.cost) <= 1e-9);
      for (const Route& route : r.solution.routes) {
        for (int id : route) CHECK_FALSE(in.is_station(id));
      }
    }
  }

  TEST_CASE("no method beats a certified exact solution") {
    const auto p = policy::init_params(1, {8, 2, 1});
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const Instance in = generated(gen::all_classes()[seed % 9], 6, 2, seed + 7);
      const auto shared = std::make_shared<const Instance>(in);
      const auto ex = baselines::exact_solve(in, kC);
      REQUIRE(ex.certified);
      if (!ex.solution.feasible) continue;
      const double floor = ex.solution.cost - 1e-9;
      const Solution g = baselines::greedy_construct(in, kC);
      const Solution v = baselines::vns_solve(in, kC, fast_vns());
      const Solution pol = policy::rollout(shared, p, kC, policy::DecodeMode::Greedy, 0).best;
      if (g.feasible) CHECK(g.cost >= floor);
      if (v.feasible) CHECK(v.cost >= floor);
      if (pol.feasible) CHECK(pol.cost >= floor);
    }
  }

  TEST_CASE("vns stays in the action space and never beats exact") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const Instance in = generated(gen::all_classes()[seed % 9], 5, 2, 20000 + seed);
      const auto ex = baselines::exact_solve(in, kC);
      REQUIRE(ex.certified);
      const Solution v = baselines::vns_solve(in, kC, fast_vns());
      if (!v.feasible) continue;
      REQUIRE(ex.solution.feasible);
      CHECK(v.cost >= ex.solution.cost - 1e-9);
      for (const Route& r : v.routes) {
        for (std::size_t k = 1; k < r.size(); ++k) CHECK_FALSE((in.is_station(r[k]) && in.is_station(r[k - 1])));
      }
    }
  }

  TEST_CASE("greedy: one nearest-neighbour tour when everything fits") {
    const Instance in = make_instance({0, 0}, {{0.5, 0.0}, {0.1, 0.0}, {0.3, 0.0}}, {});
    const Solution s = baselines::greedy_construct(in, kA);
    REQUIRE(s.feasible);
    CHECK(s.routes == std::vector<Route>{{0, 2, 3, 1, 0}});
  }

  TEST_CASE("greedy: demand forces two vehicles") {
    const Instance in = make_instance({0, 0}, {{0.1, 0.0, 20}, {0.2, 0.0, 20}}, {});
    const Solution s = baselines::greedy_construct(in, kA);
    REQUIRE(s.feasible);
    CHECK(s.fleet_size == 2);
  }

  TEST_CASE("greedy: detours to a station when needed") {
    const Instance in = make_instance({0, 0}, {{0, 0.45}, {0, 0.9}}, {{0, 0.5}});
    const Solution s = baselines::greedy_construct(in, kB);
    REQUIRE(s.feasible);
    bool uses_station = false;
    for (const Route& r : s.routes) {
      for (int id : r) uses_station |= in.is_station(id);
    }
    CHECK(uses_station);
  }

  TEST_CASE("greedy outputs always validate") {
    int feasible = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const Instance in = generated(gen::all_classes()[seed % 9], 10, 3, seed);
      const Solution s = baselines::greedy_construct(in, kC);
      if (!s.feasible) continue;
      ++feasible;
      REQUIRE(check_solution(in, s, kC).feasible);
    }
    CHECK(feasible > 900);
  }

  TEST_CASE("greedy reports infeasibility") {
    const Instance in = make_instance({0, 0}, {{0, 0.5, 1, 0.0, 0.1}}, {});
    CHECK_FALSE(baselines::greedy_construct(in, kC).feasible);
  }

  TEST_CASE("vns never worsens greedy and is seeded") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Instance in = generated(gen::all_classes()[seed % 9], 12, 3, seed);
      const Solution g = baselines::greedy_construct(in, kC);
      const Solution v = baselines::vns_solve(in, kC, fast_vns(seed));
      if (!g.feasible) {
        CHECK_FALSE(v.feasible);
        continue;
      }
      REQUIRE(v.feasible);
      CHECK(v.cost <= g.cost + 1e-12);
      CHECK(check_solution(in, v, kC).feasible);
      CHECK(baselines::vns_solve(in, kC, fast_vns(seed)) == v);
    }
  }

  TEST_CASE("vns in phase A matches the capacitated optimum on tiny instances") {
    int matched = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Instance in = generated(gen::all_classes()[seed % 9], 5, 2, seed + 200);
      const auto oracle = testing::enumerate_optimum(in, kA, 0);
      const Solution v = baselines::vns_solve(in, kA, fast_vns(seed));
      REQUIRE(v.feasible);
      CHECK(v.cost >= oracle.cost - 1e-9);
      matched += std::abs(v.cost - oracle.cost) <= 1e-9;
    }
    CHECK(matched >= 9);
  }

  TEST_CASE("vns config validation") {
    const Instance in = make_instance({0, 0}, {{0, 0.5}}, {});
    auto c = fast_vns();
    c.max_shake = 0;
    CHECK_THROWS_AS(baselines::vns_solve(in, kC, c), InvalidArgument);
    c = fast_vns();
    c.cooling = 1.5;
    CHECK_THROWS_AS(baselines::vns_solve(in, kC, c), InvalidArgument);
    c = fast_vns();
    c.order.clear();
    CHECK_THROWS_AS(baselines::vns_solve(in, kC, c), InvalidArgument);
  }

  TEST_CASE("canonical order") {
    const std::vector<Route> a{{0, 3, 0}, {0, 1, 2, 0}};
    const auto c = baselines::canonical_routes(a);
    CHECK(c == std::vector<Route>{{0, 1, 2, 0}, {0, 3, 0}});
    const std::vector<Route> b{{0, 1, 3, 0}, {0, 2, 0}};
    CHECK(baselines::canonical_less(a, b));
    CHECK_FALSE(baselines::canonical_less(b, a));
    CHECK_FALSE(baselines::canonical_less(a, a));
    CHECK(baselines::to_string(baselines::Neighborhood::TwoOpt) == "two-opt");
  }
}
