#include <cmath>
#include <set>

#include "doctest.h"
#include "evrptw/error.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/io.hpp"

using namespace evrptw;

namespace {

gen::GenConfig config(const std::string& cls, int n, int m, std::uint64_t seed) {
  gen::GenConfig gc;
  gc.class_spec = gen::ClassSpec::parse(cls);
  gc.n_customers = n;
  gc.n_stations = m;
  gc.seed = seed;
  return gc;
}

}  // namespace

TEST_SUITE("instancegen") {
  TEST_CASE("same seed gives byte-identical instances") {
    for (const auto& cls : gen::all_classes()) {
      const auto gc = config(cls.code(), 20, 3, 42);
      CHECK(io::instance_to_json(gen::generate(gc)) == io::instance_to_json(gen::generate(gc)));
    }
    CHECK_FALSE(gen::generate(config("R", 10, 3, 1)) == gen::generate(config("R", 10, 3, 2)));
  }

  TEST_CASE("class codes parse and print") {
    const auto all = gen::all_classes();
    REQUIRE(all.size() == 9);
    std::set<std::string> codes;
    for (const auto& c : all) {
      codes.insert(c.code());
      CHECK(gen::ClassSpec::parse(c.code()) == c);
    }
    CHECK(codes == std::set<std::string>{"C", "Cm", "Ct", "R", "Rm", "Rt", "RC", "RCm", "RCt"});
    CHECK_THROWS_AS(gen::ClassSpec::parse("X"), InvalidArgument);
    CHECK_THROWS_AS(gen::ClassSpec::parse("Rx"), InvalidArgument);
  }

  TEST_CASE("tight windows span 0.15 T") {
    const Instance in = gen::generate(config("Ct", 10, 3, 7));
    const double t = in.horizon();
    for (int i = 1; i <= in.n_customers(); ++i) {
      CHECK(in.node(i).tw_close - in.node(i).tw_open == doctest::Approx(0.15 * t).epsilon(1e-12));
    }
  }

  TEST_CASE("medium windows span 0.4 T and wide windows fill the feasible range") {
    const Instance m = gen::generate(config("Rm", 10, 3, 8));
    for (int i = 1; i <= m.n_customers(); ++i) {
      CHECK(m.node(i).tw_close - m.node(i).tw_open == doctest::Approx(0.4 * m.horizon()).epsilon(1e-12));
    }
    const Instance w = gen::generate(config("RC", 10, 3, 8));
    for (int i = 1; i <= w.n_customers(); ++i) {
      const Node& n = w.node(i);
      CHECK(n.tw_open == doctest::Approx(w.travel_time(0, i)));
      CHECK(n.tw_close == doctest::Approx(w.horizon() - w.travel_time(i, 0) - n.service_time));
    }
  }

  TEST_CASE("every class at several sizes yields valid instances") {
    for (const auto& cls : gen::all_classes()) {
      for (const auto& cell : gen::default_size_ladder()) {
        if (cell.n_customers > 50) continue;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
          const Instance in = gen::generate(config(cls.code(), cell.n_customers, cell.n_stations, seed));
          CAPTURE(cls.code());
          CHECK(validate_instance(in).empty());
          CHECK(in.n_customers() == cell.n_customers);
          CHECK(in.n_stations() == cell.n_stations);
          for (const Node& n : in.nodes()) {
            CHECK(n.x >= 0.0);
            CHECK(n.x <= 1.0);
            CHECK(n.y >= 0.0);
            CHECK(n.y <= 1.0);
            if (n.kind == NodeKind::Customer) {
              CHECK(n.demand >= gen::kMinDemand);
              CHECK(n.demand <= gen::kMaxDemand);
              CHECK(n.service_time == gen::kServiceTime);
              CHECK(n.tw_open >= in.travel_time(0, n.id) - 1e-12);
              CHECK(n.tw_close + n.service_time + in.travel_time(n.id, 0) <= in.horizon() + 1e-9);
            }
          }
        }
      }
    }
  }

  TEST_CASE("instance stem") {
    const Instance in = gen::generate(config("RCt", 10, 3, 5));
    CHECK(gen::instance_stem(in) == "RCt10S3_5");
  }

  TEST_CASE("impossible overrides raise GenerationError naming the check") {
    auto gc = config("R", 10, 1, 1);
    gc.battery_capacity = 0.02;
    try {
      gen::generate(gc);
      FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
      CHECK(std::string(e.what()).find("battery_reach") != std::string::npos);
    }
    auto small = config("R", 10, 3, 1);
    small.capacity = 0;
    CHECK_THROWS_AS(gen::generate(small), Error);
  }

  TEST_CASE("size ladder") {
    const auto ladder = gen::default_size_ladder();
    REQUIRE(ladder.size() == 7);
    std::vector<std::string> labels;
    for (const auto& c : ladder) labels.push_back(c.label());
    CHECK(labels == std::vector<std::string>{"C5S2", "C10S3", "C20S3", "C30S4", "C40S5", "C50S6", "C100S12"});
  }

  TEST_CASE("benchmark suite") {
    CHECK(gen::benchmark_suite(gen::default_size_ladder(), gen::all_classes(), 0, 1).empty());
    const auto suite = gen::benchmark_suite({{20, 3}}, {gen::ClassSpec::parse("R")}, 50, 9);
    REQUIRE(suite.size() == 50);
    std::set<std::uint64_t> seeds;
    for (const auto& e : suite) {
      seeds.insert(e.instance.seed());
      CHECK(validate_instance(e.instance).empty());
      CHECK(e.instance.class_label() == "R");
    }
    CHECK(seeds.size() == 50);
    const auto again = gen::benchmark_suite({{20, 3}}, {gen::ClassSpec::parse("R")}, 50, 9);
    for (std::size_t i = 0; i < suite.size(); ++i) CHECK(again[i].instance == suite[i].instance);
  }
}
