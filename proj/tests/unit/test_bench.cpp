#include <map>
#include <set>
#include <sstream>
#include <stack>

#include "doctest.h"
#include "evrptw/bench.hpp"
#include "evrptw/error.hpp"
#include "evrptw/io.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace evrptw;
using bench::Method;
using bench::MethodStats;

namespace {

MethodStats stats(Method m, double cost, bool certified = false, bool incomplete = false, int feasible = 3) {
  MethodStats s;
  s.method = m;
  s.instances = 3;
  s.feasible = feasible;
  s.mean_cost = cost;
  s.mean_distance = cost - 100.0;
  s.mean_fleet = 1.0;
  s.certified = certified;
  s.incomplete = incomplete;
  s.timeouts = incomplete ? 1 : 0;
  s.success_rate = 100.0 * feasible / 3.0;
  return s;
}

std::vector<bench::SuiteCell> small_suite(int n, int m, int per_class, const std::vector<std::string>& classes) {
  std::vector<gen::ClassSpec> cls;
  for (const auto& c : classes) cls.push_back(gen::ClassSpec::parse(c));
  return bench::group_suite(gen::benchmark_suite({{n, m}}, cls, per_class, 3));
}

// Tag balance check for the SVG writer's output.
bool well_formed(const std::string& xml) {
  std::stack<std::string> open;
  std::size_t i = 0;
  while ((i = xml.find('<', i)) != std::string::npos) {
    const std::size_t j = xml.find('>', i);
    if (j == std::string::npos) return false;
    const std::string tag = xml.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;
    const std::string name = tag.substr(tag[0] == '/' ? 1 : 0, tag.find_first_of(" \t\n") - (tag[0] == '/' ? 1 : 0));
    if (tag[0] == '/') {
      if (open.empty() || open.top() != name) return false;
      open.pop();
    } else {
      open.push(name);
    }
  }
  return open.empty();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("gap examples at one decimal") {
    CHECK(bench::format_fixed(bench::gap_percent(122.0, 115.2)) == "5.9");
    CHECK(bench::format_fixed(bench::gap_percent(217.3, 207.2)) == "4.9");
    CHECK(bench::format_fixed(bench::gap_percent(150.0, 150.0)) == "0.0");
    CHECK(bench::format_fixed(-0.04) == "0.0");
    CHECK(bench::format_fixed(-0.3) == "-0.3");
    CHECK_THROWS_AS(bench::gap_percent(1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(bench::gap_percent(1.0, -2.0), InvalidArgument);
  }

  TEST_CASE("method names") {
    for (Method m : {Method::Exact, Method::Vns, Method::Greedy, Method::Ppo, Method::Cbdrl}) {
      CHECK(bench::method_from_string(bench::to_string(m)) == m);
    }
    CHECK_THROWS_AS(bench::method_from_string("milp"), InvalidArgument);
  }

  TEST_CASE("baseline precedence") {
    CHECK(bench::choose_baseline({stats(Method::Greedy, 130), stats(Method::Exact, 120, true),
                                  stats(Method::Vns, 119)}) == Method::Exact);
    CHECK(bench::choose_baseline({stats(Method::Exact, 120, false), stats(Method::Vns, 125),
                                  stats(Method::Greedy, 110)}) == Method::Vns);
    CHECK(bench::choose_baseline({stats(Method::Exact, 120, true, true), stats(Method::Vns, 125, false, true),
                                  stats(Method::Greedy, 140), stats(Method::Cbdrl, 130)}) == Method::Cbdrl);
    CHECK_FALSE(bench::choose_baseline({stats(Method::Vns, 125, false, true)}).has_value());
    bench::CellResult cell;
    cell.methods = {stats(Method::Exact, 100, true), stats(Method::Greedy, 110)};
    bench::assign_gaps(cell);
    CHECK(*cell.methods[0].gap == 0.0);
    CHECK(*cell.methods[1].gap == doctest::Approx(10.0));
  }

  TEST_CASE("tables: empty input gives header-only tables") {
    const std::string text = bench::emit_tables({}, bench::TableFormat::Text);
    CHECK(text.find("Delta%") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    const std::string md = bench::emit_tables({}, bench::TableFormat::Markdown);
    CHECK(std::count(md.begin(), md.end(), '\n') == 5);
    const std::string csv = bench::emit_tables({}, bench::TableFormat::Csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
  }

  TEST_CASE("tables: a single method gives a single row") {
    bench::CellResult cell;
    cell.label = "C5S2";
    cell.methods = {stats(Method::Vns, 212.34)};
    bench::assign_gaps(cell);
    const std::string md = bench::emit_tables({cell}, bench::TableFormat::Markdown);
    CHECK(std::count(md.begin(), md.end(), '\n') == 7);
    CHECK(md.find("**212.3**") != std::string::npos);
    CHECK(md.find("| 0.0 |") != std::string::npos);
  }

  TEST_CASE("tables: incomplete methods render as dashes") {
    bench::CellResult cell;
    cell.label = "C50S6";
    cell.methods = {stats(Method::Exact, 0, false, true), stats(Method::Greedy, 300.0)};
    bench::assign_gaps(cell);
    const std::string text = bench::emit_tables({cell}, bench::TableFormat::Text);
    std::istringstream in(text);
    std::string line;
    int dashed = 0;
    while (std::getline(in, line)) {
      if (line.rfind("C50S6  exact", 0) == 0) {
        CHECK(line.find_first_of("0123456789", 12) == std::string::npos);
        ++dashed;
      }
    }
    CHECK(dashed == 2);
    CHECK(cell.baseline == Method::Greedy);
  }

  TEST_CASE("csv parses back to the same values") {
    bench::CellResult cell;
    cell.label = "C10S3";
    cell.methods = {stats(Method::Exact, 1.0 / 3.0 + 200, true), stats(Method::Greedy, 234.56789012345678)};
    cell.methods[1].mean_runtime = 0.1234567890123;
    bench::assign_gaps(cell);
    const std::string csv = bench::emit_tables({cell}, bench::TableFormat::Csv);
    std::istringstream in(csv);
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    const auto h = split(header);
    const auto r = split(row2);
    REQUIRE(h.size() == r.size());
    std::map<std::string, std::string> f;
    for (std::size_t i = 0; i < h.size(); ++i) f[h[i]] = r[i];
    CHECK(f["method"] == "greedy");
    CHECK(std::stod(f["J"]) == cell.methods[1].mean_cost);
    CHECK(std::stod(f["gap"]) == *cell.methods[1].gap);
    CHECK(std::stod(f["time"]) == cell.methods[1].mean_runtime);
    CHECK(f["baseline"] == "exact");
    CHECK(std::stod(split(row1)[9]) == cell.methods[0].mean_cost);
  }

  TEST_CASE("table format names") {
    CHECK(bench::table_format_from_string("md") == bench::TableFormat::Markdown);
    CHECK(bench::table_format_from_string("csv") == bench::TableFormat::Csv);
    CHECK_THROWS_AS(bench::table_format_from_string("html"), InvalidArgument);
  }

  TEST_CASE("route plots") {
    const Instance in = testing::make_instance({0.5, 0.5}, {{0.1, 0.1}, {0.9, 0.9}}, {{0.5, 0.9}});
    const Solution two = make_solution(in, {{0, 1, 0}, {0, 2, 0}}, ConstraintSet::full());
    const std::string svg = bench::route_svg(in, two);
    CHECK(well_formed(svg));
    CHECK(std::count(svg.begin(), svg.end(), 'p') > 0);
    std::size_t polylines = 0;
    std::set<std::string> colours;
    for (std::size_t i = 0; (i = svg.find("<polyline stroke=\"", i)) != std::string::npos; ++i) {
      ++polylines;
      const std::size_t s = i + 18;
      colours.insert(svg.substr(s, svg.find('"', s) - s));
    }
    CHECK(polylines == 2);
    CHECK(colours.size() == 2);
    CHECK(svg.find("<circle") != std::string::npos);
    CHECK(svg.find("<polygon") != std::string::npos);
    CHECK(svg.find("J = ") != std::string::npos);
    const std::string empty = bench::route_svg(in, infeasible_solution());
    CHECK(well_formed(empty));
    CHECK(empty.find("<polyline") == std::string::npos);
    Solution bad = two;
    bad.routes[0][1] = 42;
    CHECK_THROWS_AS(bench::route_svg(in, bad), InvalidArgument);
  }

  TEST_CASE("certified exact is its own baseline with zero gap") {
    const auto suite = small_suite(5, 2, 2, {"R", "Ct"});
    bench::BenchConfig cfg;
    cfg.methods = {Method::Exact, Method::Vns, Method::Greedy};
    cfg.vns.max_iterations = 50;
    cfg.time_limit_s = 60;
    const auto res = bench::run_benchmark(suite, cfg);
    REQUIRE(res.size() == 1);
    CHECK(res[0].label == "C5S2");
    CHECK(res[0].instances == 4);
    CHECK(res[0].baseline == Method::Exact);
    CHECK(*res[0].methods[0].gap == 0.0);
    CHECK(res[0].methods[0].certified);
    for (const auto& m : res[0].methods) {
      if (m.gap) CHECK(*m.gap >= -1e-9);
    }
  }

  TEST_CASE("a timeout marks the whole cell incomplete") {
    const auto suite = small_suite(40, 5, 2, {"R"});
    bench::BenchConfig cfg;
    cfg.methods = {Method::Exact, Method::Greedy};
    cfg.time_limit_s = 0.02;
    const auto res = bench::run_benchmark(suite, cfg);
    REQUIRE(res.size() == 1);
    const auto& ex = res[0].methods[0];
    CHECK(ex.incomplete);
    CHECK(ex.instances == 1);
    CHECK_FALSE(ex.gap.has_value());
    CHECK(res[0].baseline == Method::Greedy);
  }

  TEST_CASE("reported solutions are re-validated") {
    const auto suite = small_suite(8, 2, 1, {"RCt"});
    bench::BenchConfig cfg;
    const auto run = bench::run_method(Method::Greedy, *suite[0].instances[0], cfg);
    if (run.solution.feasible) {
      CHECK(check_solution(*suite[0].instances[0], run.solution, cfg.constraints).feasible);
      CHECK(run.solution.arrival_times.size() == run.solution.routes.size());
    }
  }

  TEST_CASE("learned methods need checkpoints") {
    const auto suite = small_suite(5, 2, 1, {"R"});
    bench::BenchConfig cfg;
    cfg.methods = {Method::Cbdrl};
    CHECK_THROWS_AS(bench::run_benchmark(suite, cfg), InvalidArgument);
  }

  TEST_CASE("zero-shot evaluation at a larger size") {
    const auto p = policy::init_params(3, {8, 2, 1});
    const auto suite = small_suite(100, 12, 1, {"R"});
    const auto a = bench::eval_checkpoint(p, suite, 4);
    const auto b = bench::eval_checkpoint(p, suite, 4);
    REQUIRE(a.size() == 1);
    CHECK(a[0].methods[0].method == Method::Cbdrl);
    CHECK(a[0].methods[0].feasible == b[0].methods[0].feasible);
    CHECK(a[0].methods[0].mean_cost == b[0].methods[0].mean_cost);
    CHECK(a[0].methods[0].success_rate == 100.0 * a[0].methods[0].feasible / 1.0);
    CHECK_THROWS_AS(bench::eval_checkpoint(p, suite, 4, policy::Dims{16, 2, 1}), InvalidArgument);
  }

  TEST_CASE("suites load from disk and reject corrupt files") {
    const auto dir = std::filesystem::temp_directory_path() / "evrptw_bench_suite";
    std::filesystem::remove_all(dir);
    const auto entries = gen::benchmark_suite({{5, 2}, {10, 3}}, {gen::ClassSpec::parse("R")}, 2, 1);
    for (const auto& e : entries) io::write_instance(e.instance, dir / (gen::instance_stem(e.instance) + ".json"));
    const auto suite = bench::load_suite(dir);
    REQUIRE(suite.size() == 2);
    CHECK(suite[0].label == "C5S2");
    CHECK(suite[1].label == "C10S3");
    CHECK(suite[0].instances.size() == 2);
    io::write_text(dir / "zz_bad.json", "{\"format\": \"evrptw-instance/1\"}");
    try {
      bench::load_suite(dir);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("zz_bad.json") != std::string::npos);
    }
    CHECK_THROWS_AS(bench::load_suite(dir / "missing"), InvalidArgument);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("manifest") {
    const auto suite = small_suite(5, 2, 2, {"R"});
    bench::BenchConfig cfg;
    cfg.seed = 77;
    const auto doc = nlohmann::json::parse(bench::manifest_json(cfg, suite, "generated"));
    CHECK(doc.at("version") == bench::version());
    CHECK(doc.at("seed") == 77);
    CHECK(doc.at("cells").size() == 1);
    CHECK(doc.at("cells")[0].at("seeds").size() == 2);
    CHECK(doc.at("methods").size() == 3);
  }
}
