// Command-line front end: instance generation, solving, training,
// benchmarking and route plots.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "evrptw/baselines.hpp"
#include "evrptw/bench.hpp"
#include "evrptw/curriculum.hpp"
#include "evrptw/env.hpp"
#include "evrptw/error.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/io.hpp"
#include "evrptw/policy.hpp"
#include "evrptw/ppo.hpp"

namespace fs = std::filesystem;
using namespace evrptw;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<gen::ClassSpec> parse_classes(const std::string& s) {
  if (s == "all") return gen::all_classes();
  std::vector<gen::ClassSpec> out;
  for (const auto& code : split(s, ',')) out.push_back(gen::ClassSpec::parse(code));
  return out;
}

// "ladder" or a list like "5:2,10:3".
std::vector<gen::SizeCell> parse_sizes(const std::string& s) {
  if (s == "ladder") return gen::default_size_ladder();
  std::vector<gen::SizeCell> out;
  for (const auto& item : split(s, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw InvalidArgument("size '" + item + "' is not N:M");
    out.push_back({std::stoi(parts[0]), std::stoi(parts[1])});
  }
  return out;
}

// Replays the routes of a solution through the environment, one JSON line
// per transition.
void write_trace(const std::shared_ptr<const Instance>& inst, const Solution& sol, const ConstraintSet& cs,
                 const fs::path& path) {
  std::ostringstream out;
  env::EnvState s = env::reset(inst, cs);
  for (const Route& r : sol.routes) {
    for (std::size_t k = 1; k < r.size(); ++k) {
      const env::EnvState before = s;
      const env::StepOutcome o = env::apply_unchecked(s, r[k]);
      out << env::trace_line(before, r[k], o) << "\n";
    }
  }
  io::write_text(path, out.str());
}

void print_solution(const std::string& method, const Solution& sol) {
  std::printf("method=%s feasible=%s J=%.6f K=%d D=%.6f routes=%zu\n", method.c_str(), sol.feasible ? "yes" : "no",
              sol.cost, sol.fleet_size, sol.total_distance, sol.routes.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electric vehicle routing with time windows: generator, solvers, trainer, benchmark"};
  app.require_subcommand(1);

  // gen ---------------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("gen", "Generate instances");
  int g_n = 10, g_m = 3, g_count = 1, g_per_cell = 10;
  std::string g_class = "all", g_sizes = "ladder";
  std::uint64_t g_seed = 0;
  fs::path g_out = "instances";
  bool g_suite = false;
  gen_cmd->add_option("--n", g_n, "Customers");
  gen_cmd->add_option("--m", g_m, "Charging stations");
  gen_cmd->add_option("--class", g_class, "Class code (C, Cm, Ct, R, Rm, Rt, RC, RCm, RCt), a list, or 'all'");
  gen_cmd->add_option("--seed", g_seed, "Base seed");
  gen_cmd->add_option("--count", g_count, "Instances per class");
  gen_cmd->add_option("--out", g_out, "Output directory");
  gen_cmd->add_flag("--suite", g_suite, "Generate a benchmark suite over --sizes instead");
  gen_cmd->add_option("--sizes", g_sizes, "Suite sizes: 'ladder' or N:M list");
  gen_cmd->add_option("--per-cell", g_per_cell, "Suite instances per (size, class)");

  // solve -------------------------------------------------------------------
  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance");
  fs::path s_instance, s_out, s_checkpoint, s_trace;
  std::string s_method = "vns", s_phase = "C";
  double s_time_limit = 600.0;
  std::uint64_t s_seed = 0;
  int s_multistart = 0;
  solve_cmd->add_option("--instance", s_instance, "Instance JSON")->required();
  solve_cmd->add_option("--method", s_method, "exact | vns | greedy | policy")
      ->check(CLI::IsMember({"exact", "vns", "greedy", "policy"}));
  solve_cmd->add_option("--phase", s_phase, "Constraint phase A | B | C")->check(CLI::IsMember({"A", "B", "C"}));
  solve_cmd->add_option("--time-limit", s_time_limit, "Seconds");
  solve_cmd->add_option("--seed", s_seed, "Seed for stochastic methods");
  solve_cmd->add_option("--out", s_out, "Write the solution JSON here");
  solve_cmd->add_option("--checkpoint", s_checkpoint, "Policy checkpoint (method policy)");
  solve_cmd->add_option("--multistart", s_multistart, "Policy starts, 0 means N");
  solve_cmd->add_option("--trace", s_trace, "Write a JSONL transition trace of the solution");

  // train -------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train a policy with curriculum PPO");
  fs::path t_config, t_out = "run";
  std::optional<std::uint64_t> t_seed;
  std::optional<int> t_epochs, t_threads;
  bool t_no_curriculum = false, t_resume = false, t_quiet = false;
  train_cmd->add_option("--config", t_config, "Training config JSON");
  train_cmd->add_option("--seed", t_seed, "Override the config seed");
  train_cmd->add_option("--epochs", t_epochs, "Override the epoch count");
  train_cmd->add_option("--threads", t_threads, "Worker threads");
  train_cmd->add_option("--out", t_out, "Run directory (checkpoints, journal)");
  train_cmd->add_flag("--no-curriculum", t_no_curriculum, "Train on phase C from epoch 0 (standard PPO)");
  train_cmd->add_flag("--resume", t_resume, "Resume from <out>/state");
  train_cmd->add_flag("--quiet", t_quiet, "No per-epoch output");

  // bench -------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark protocol");
  fs::path b_suite, b_checkpoint, b_ppo_checkpoint, b_out = "bench";
  std::string b_methods = "exact,vns,greedy", b_sizes = "ladder", b_classes = "all", b_phase = "C";
  double b_time_limit = 600.0, b_vns_time = 5.0;
  int b_per_cell = 10, b_threads = 1, b_multistart = 0;
  std::uint64_t b_seed = 0;
  bench_cmd->add_option("--suite", b_suite, "Directory of instance JSON files (default: generate)");
  bench_cmd->add_option("--sizes", b_sizes, "Generated suite sizes: 'ladder' or N:M list");
  bench_cmd->add_option("--classes", b_classes, "Generated suite classes");
  bench_cmd->add_option("--per-cell", b_per_cell, "Generated instances per (size, class)");
  bench_cmd->add_option("--methods", b_methods, "Comma list of exact, vns, greedy, ppo, cbdrl");
  bench_cmd->add_option("--checkpoint", b_checkpoint, "Curriculum policy checkpoint (cbdrl)");
  bench_cmd->add_option("--ppo-checkpoint", b_ppo_checkpoint, "Standard PPO checkpoint (ppo)");
  bench_cmd->add_option("--time-limit", b_time_limit, "Per-instance time limit in seconds");
  bench_cmd->add_option("--vns-time", b_vns_time, "VNS search budget per instance");
  bench_cmd->add_option("--multistart", b_multistart, "Policy starts, 0 means N");
  bench_cmd->add_option("--phase", b_phase, "Constraint phase")->check(CLI::IsMember({"A", "B", "C"}));
  bench_cmd->add_option("--threads", b_threads, "Instances solved concurrently");
  bench_cmd->add_option("--seed", b_seed, "Suite and VNS seed");
  bench_cmd->add_option("--out", b_out, "Run directory");

  // plot --------------------------------------------------------------------
  auto* plot_cmd = app.add_subcommand("plot", "Render a solution as SVG");
  fs::path p_instance, p_solution, p_out = "routes.svg";
  plot_cmd->add_option("--instance", p_instance, "Instance JSON")->required();
  plot_cmd->add_option("--solution", p_solution, "Solution JSON (omit for nodes only)");
  plot_cmd->add_option("--out", p_out, "Output SVG");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      if (g_suite) {
        const auto entries = gen::benchmark_suite(parse_sizes(g_sizes), parse_classes(g_class),
                                                  g_per_cell, g_seed);
        for (const auto& e : entries) {
          io::write_instance(e.instance, g_out / e.cell.label() / (gen::instance_stem(e.instance) + ".json"));
        }
        std::printf("wrote %zu instances to %s\n", entries.size(), g_out.string().c_str());
      } else {
        int written = 0;
        for (const auto& cls : parse_classes(g_class)) {
          for (int i = 0; i < g_count; ++i) {
            gen::GenConfig cfg;
            cfg.n_customers = g_n;
            cfg.n_stations = g_m;
            cfg.class_spec = cls;
            cfg.seed = g_seed + static_cast<std::uint64_t>(i);
            const Instance inst = gen::generate(cfg);
            io::write_instance(inst, g_out / (gen::instance_stem(inst) + ".json"));
            ++written;
          }
        }
        std::printf("wrote %d instances to %s\n", written, g_out.string().c_str());
      }
    } else if (*solve_cmd) {
      auto inst = std::make_shared<const Instance>(io::read_instance(s_instance));
      const ConstraintSet cs = curriculum::constraint_set(curriculum::phase_from_string(s_phase));
      Solution sol;
      if (s_method == "exact") {
        baselines::ExactConfig ec;
        ec.time_limit_s = s_time_limit;
        const auto r = baselines::exact_solve(*inst, cs, ec);
        sol = r.solution;
        std::printf("certified=%s nodes=%ld elapsed=%.3fs\n", r.certified ? "yes" : "no", r.nodes, r.elapsed_s);
      } else if (s_method == "vns") {
        baselines::VNSConfig vc;
        vc.time_limit_s = s_time_limit;
        vc.seed = s_seed;
        sol = baselines::vns_solve(*inst, cs, vc);
      } else if (s_method == "greedy") {
        sol = baselines::greedy_construct(*inst, cs);
      } else {
        if (s_checkpoint.empty()) throw InvalidArgument("--method policy needs --checkpoint");
        const auto params = policy::load_params(s_checkpoint);
        sol = policy::rollout(inst, params, cs, policy::DecodeMode::Greedy, s_multistart, s_seed).best;
      }
      print_solution(s_method, sol);
      if (!s_out.empty()) io::write_solution(sol, s_out);
      if (!s_trace.empty()) write_trace(inst, sol, cs, s_trace);
    } else if (*train_cmd) {
      ppo::TrainConfig cfg;
      if (!t_config.empty()) cfg = ppo::train_config_from_json(io::read_text(t_config));
      if (t_seed) cfg.seed = *t_seed;
      if (t_epochs) cfg.epochs = *t_epochs;
      if (t_threads) cfg.ppo.threads = *t_threads;
      if (t_no_curriculum) cfg.schedule.enabled = false;
      ppo::TrainOptions opts;
      opts.out_dir = t_out;
      if (t_resume) opts.resume = ppo::load_train_state(t_out / "state");
      if (!t_quiet) {
        opts.on_epoch = [](const ppo::EpochRecord& r) {
          std::printf("epoch %3d phase %s  J %.3f  feas %.3f  pl %.4f  vl %.4f  ent %.4f  lr %.2e  %.1fs\n", r.epoch,
                      std::string(curriculum::to_string(r.phase)).c_str(), r.mean_cost, r.feasibility_rate,
                      r.policy_loss, r.value_loss, r.entropy, r.lr, r.wall_time);
          std::fflush(stdout);
        };
      }
      const auto state = ppo::train(cfg, opts);
      std::printf("trained %d epochs; checkpoints in %s\n", state.next_epoch, t_out.string().c_str());
    } else if (*bench_cmd) {
      bench::BenchConfig cfg;
      cfg.methods.clear();
      for (const auto& m : split(b_methods, ',')) cfg.methods.push_back(bench::method_from_string(m));
      cfg.time_limit_s = b_time_limit;
      cfg.vns.time_limit_s = b_vns_time;
      cfg.vns.seed = b_seed;
      cfg.multistart = b_multistart;
      cfg.threads = b_threads;
      cfg.seed = b_seed;
      cfg.constraints = curriculum::constraint_set(curriculum::phase_from_string(b_phase));
      if (!b_checkpoint.empty()) cfg.policies.emplace(bench::Method::Cbdrl, policy::load_params(b_checkpoint));
      if (!b_ppo_checkpoint.empty()) cfg.policies.emplace(bench::Method::Ppo, policy::load_params(b_ppo_checkpoint));
      std::vector<bench::SuiteCell> suite;
      std::string source;
      if (!b_suite.empty()) {
        suite = bench::load_suite(b_suite);
        source = b_suite.string();
      } else {
        suite = bench::group_suite(
            gen::benchmark_suite(parse_sizes(b_sizes), parse_classes(b_classes), b_per_cell, b_seed));
        source = "generated sizes=" + b_sizes + " classes=" + b_classes + " per_cell=" + std::to_string(b_per_cell);
      }
      const auto results = bench::run_benchmark(suite, cfg);
      const std::string text = bench::emit_tables(results, bench::TableFormat::Text);
      io::write_text(b_out / "tables.txt", text);
      io::write_text(b_out / "tables.md", bench::emit_tables(results, bench::TableFormat::Markdown));
      io::write_text(b_out / "results.csv", bench::emit_tables(results, bench::TableFormat::Csv));
      io::write_text(b_out / "manifest.json", bench::manifest_json(cfg, suite, source));
      std::cout << text;
    } else if (*plot_cmd) {
      const Instance inst = io::read_instance(p_instance);
      const Solution sol = p_solution.empty() ? Solution{} : io::read_solution(p_solution);
      bench::emit_route_svg(inst, sol, p_out);
      std::printf("wrote %s\n", p_out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
