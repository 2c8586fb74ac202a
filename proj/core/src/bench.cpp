#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "evrptw/bench.hpp"
#include "evrptw/error.hpp"
#include "evrptw/io.hpp"
#include "evrptw/parallel.hpp"
#include "json.hpp"

#ifndef EVRPTW_VERSION
#define EVRPTW_VERSION "unknown"
#endif

namespace evrptw::bench {

using nlohmann::json;

double gap_percent(double j, double j_base) {
  if (!(j_base > 0.0)) throw InvalidArgument("gap_percent needs a positive baseline, got " + std::to_string(j_base));
  return (j - j_base) / j_base * 100.0;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  // "-0.0" reads as a regression in a gap column.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::Vns: return "vns";
    case Method::Greedy: return "greedy";
    case Method::Ppo: return "ppo";
    case Method::Cbdrl: return "cbdrl";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  for (Method m : {Method::Exact, Method::Vns, Method::Greedy, Method::Ppo, Method::Cbdrl}) {
    if (s == to_string(m)) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(s) + "' (expected exact, vns, greedy, ppo or cbdrl)");
}

std::optional<Method> choose_baseline(const std::vector<MethodStats>& methods) {
  for (const MethodStats& m : methods) {
    if (m.method == Method::Exact && m.certified && m.has_cost()) return Method::Exact;
  }
  for (const MethodStats& m : methods) {
    if (m.method == Method::Vns && m.has_cost()) return Method::Vns;
  }
  const MethodStats* best = nullptr;
  for (const MethodStats& m : methods) {
    if (m.has_cost() && (!best || m.mean_cost < best->mean_cost)) best = &m;
  }
  if (best) return best->method;
  return std::nullopt;
}

void assign_gaps(CellResult& cell) {
  cell.baseline = choose_baseline(cell.methods);
  const MethodStats* base = nullptr;
  for (const MethodStats& m : cell.methods) {
    if (cell.baseline && m.method == *cell.baseline) base = &m;
  }
  for (MethodStats& m : cell.methods) {
    m.gap.reset();
    if (base && m.has_cost()) m.gap = gap_percent(m.mean_cost, base->mean_cost);
  }
}

namespace {

SuiteCell& cell_for(std::vector<SuiteCell>& cells, int n, int m) {
  for (SuiteCell& c : cells) {
    if (c.n_customers == n && c.n_stations == m) return c;
  }
  SuiteCell c;
  c.n_customers = n;
  c.n_stations = m;
  c.label = gen::SizeCell{n, m}.label();
  cells.push_back(std::move(c));
  return cells.back();
}

void sort_cells(std::vector<SuiteCell>& cells) {
  std::stable_sort(cells.begin(), cells.end(), [](const SuiteCell& a, const SuiteCell& b) {
    return std::pair(a.n_customers, a.n_stations) < std::pair(b.n_customers, b.n_stations);
  });
}

}  // namespace

std::vector<SuiteCell> group_suite(const std::vector<gen::SuiteEntry>& entries) {
  std::vector<SuiteCell> cells;
  for (const gen::SuiteEntry& e : entries) {
    cell_for(cells, e.instance.n_customers(), e.instance.n_stations())
        .instances.push_back(std::make_shared<const Instance>(e.instance));
  }
  sort_cells(cells);
  return cells;
}

std::vector<SuiteCell> load_suite(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InvalidArgument("suite directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SuiteCell> cells;
  for (const auto& f : files) {
    std::shared_ptr<const Instance> inst;
    try {
      inst = std::make_shared<const Instance>(io::read_instance(f));
    } catch (const Error& e) {
      throw FormatError(f.string() + ": " + e.what());
    }
    cell_for(cells, inst->n_customers(), inst->n_stations()).instances.push_back(std::move(inst));
  }
  sort_cells(cells);
  return cells;
}

InstanceRun run_method(Method method, const Instance& instance, const BenchConfig& config) {
  InstanceRun run;
  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  switch (method) {
    case Method::Exact: {
      baselines::ExactConfig ec;
      ec.time_limit_s = config.time_limit_s;
      const baselines::ExactResult r = baselines::exact_solve(instance, config.constraints, ec);
      sol = r.solution;
      run.certified = r.certified;
      run.timed_out = !r.certified;
      break;
    }
    case Method::Vns: {
      baselines::VNSConfig vc = config.vns;
      vc.time_limit_s = std::min(vc.time_limit_s, config.time_limit_s);
      sol = baselines::vns_solve(instance, config.constraints, vc);
      break;
    }
    case Method::Greedy:
      sol = baselines::greedy_construct(instance, config.constraints);
      break;
    case Method::Ppo:
    case Method::Cbdrl: {
      const auto it = config.policies.find(method);
      if (it == config.policies.end()) {
        throw InvalidArgument("method '" + std::string(to_string(method)) + "' needs a checkpoint");
      }
      const int starts = config.multistart > 0 ? std::min(config.multistart, instance.n_customers()) : 0;
      sol = policy::rollout(std::make_shared<const Instance>(instance), it->second, config.constraints,
                            policy::DecodeMode::Greedy, starts)
                .best;
      break;
    }
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (method != Method::Exact && run.seconds > config.time_limit_s) run.timed_out = true;
  // Never trust a self-reported cost.
  if (sol.feasible) {
    sol = make_solution(instance, sol.routes, config.constraints);
  } else {
    sol = infeasible_solution();
  }
  run.solution = std::move(sol);
  return run;
}

std::vector<CellResult> run_benchmark(const std::vector<SuiteCell>& suite, const BenchConfig& config) {
  if (!(config.time_limit_s > 0.0)) throw InvalidArgument("time limit must be positive");
  for (Method m : config.methods) {
    if ((m == Method::Ppo || m == Method::Cbdrl) && !config.policies.contains(m)) {
      throw InvalidArgument("method '" + std::string(to_string(m)) + "' needs a checkpoint");
    }
  }
  std::vector<CellResult> out;
  for (const SuiteCell& cell : suite) {
    CellResult cr;
    cr.label = cell.label;
    cr.n_customers = cell.n_customers;
    cr.n_stations = cell.n_stations;
    cr.instances = static_cast<int>(cell.instances.size());
    for (Method m : config.methods) {
      const std::size_t n = cell.instances.size();
      std::vector<std::optional<InstanceRun>> runs(n);
      std::atomic<bool> timed_out{false};
      parallel_for(n, config.threads, [&](std::size_t i) {
        if (timed_out.load()) return;
        runs[i] = run_method(m, *cell.instances[i], config);
        if (runs[i]->timed_out) timed_out.store(true);
      });
      MethodStats st;
      st.method = m;
      st.certified = m == Method::Exact;
      double dsum = 0.0;
      double ksum = 0.0;
      double jsum = 0.0;
      double tsum = 0.0;
      for (const auto& r : runs) {
        if (!r) continue;
        ++st.instances;
        tsum += r->seconds;
        if (r->timed_out) ++st.timeouts;
        if (!r->certified) st.certified = false;
        if (r->solution.feasible) {
          ++st.feasible;
          dsum += r->solution.total_distance;
          ksum += r->solution.fleet_size;
          jsum += r->solution.cost;
        }
      }
      st.incomplete = st.timeouts > 0;
      if (st.feasible > 0) {
        st.mean_distance = dsum / st.feasible;
        st.mean_fleet = ksum / st.feasible;
        st.mean_cost = jsum / st.feasible;
      }
      st.success_rate = n > 0 ? 100.0 * st.feasible / static_cast<double>(n) : 0.0;
      st.mean_runtime = st.instances > 0 ? tsum / st.instances : 0.0;
      cr.methods.push_back(st);
    }
    assign_gaps(cr);
    out.push_back(std::move(cr));
  }
  return out;
}

std::vector<CellResult> eval_checkpoint(const policy::PolicyParams& params, const std::vector<SuiteCell>& suite,
                                        int multistart, std::optional<policy::Dims> expected_dims, Method as) {
  if (expected_dims && !(*expected_dims == params.dims)) {
    throw InvalidArgument("checkpoint dims (" + std::to_string(params.dims.hidden) + "," +
                          std::to_string(params.dims.heads) + "," + std::to_string(params.dims.layers) +
                          ") differ from the configured dims");
  }
  if (as != Method::Ppo && as != Method::Cbdrl) throw InvalidArgument("eval_checkpoint needs a learned method");
  BenchConfig cfg;
  cfg.methods = {as};
  cfg.policies.emplace(as, params);
  cfg.multistart = multistart;
  cfg.time_limit_s = 1e12;
  return run_benchmark(suite, cfg);
}

std::string version() { return EVRPTW_VERSION; }

std::string manifest_json(const BenchConfig& config, const std::vector<SuiteCell>& suite,
                          const std::string& suite_source) {
  json methods = json::array();
  for (Method m : config.methods) methods.push_back(std::string(to_string(m)));
  json cells = json::array();
  for (const SuiteCell& c : suite) {
    json seeds = json::array();
    for (const auto& inst : c.instances) seeds.push_back(inst->seed());
    cells.push_back(json{{"label", c.label}, {"instances", c.instances.size()}, {"seeds", seeds}});
  }
  json order = json::array();
  for (auto n : config.vns.order) order.push_back(std::string(baselines::to_string(n)));
  json doc{{"version", version()},
           {"suite", suite_source},
           {"methods", methods},
           {"time_limit_s", config.time_limit_s},
           {"multistart", config.multistart},
           {"threads", config.threads},
           {"seed", config.seed},
           {"constraints",
            {{"capacity", config.constraints.capacity},
             {"battery", config.constraints.battery},
             {"time_windows", config.constraints.time_windows}}},
           {"vns",
            {{"order", order},
             {"max_shake", config.vns.max_shake},
             {"initial_temperature", config.vns.initial_temperature},
             {"cooling", config.vns.cooling},
             {"max_iterations", config.vns.max_iterations},
             {"time_limit_s", config.vns.time_limit_s},
             {"seed", config.vns.seed}}},
           {"cells", cells}};
  return doc.dump(2) + "\n";
}

}  // namespace evrptw::bench
