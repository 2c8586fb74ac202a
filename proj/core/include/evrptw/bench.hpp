#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evrptw/baselines.hpp"
#include "evrptw/instancegen.hpp"
#include "evrptw/model.hpp"
#include "evrptw/policy.hpp"

namespace evrptw::bench {

/// (j - j_base) / j_base * 100, unrounded. Throws InvalidArgument unless
/// j_base > 0.
double gap_percent(double j, double j_base);

/// One-decimal display used in every table ("5.9", "-0.3", "0.0").
std::string format_fixed(double value, int decimals = 1);

enum class Method { Exact, Vns, Greedy, Ppo, Cbdrl };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct MethodStats {
  Method method = Method::Exact;
  int instances = 0;  // attempted
  int feasible = 0;
  int timeouts = 0;
  bool incomplete = false;  // at least one instance hit the time limit
  bool certified = false;   // exact only: every instance certified
  double mean_distance = 0.0;  // over feasible solutions
  double mean_fleet = 0.0;
  double mean_cost = 0.0;
  std::optional<double> gap;  // vs. the cell baseline
  double success_rate = 0.0;  // feasible / cell size * 100
  double mean_runtime = 0.0;  // seconds, solve time only

  /// A complete method with at least one feasible solution.
  bool has_cost() const { return !incomplete && feasible > 0; }
};

struct CellResult {
  std::string label;  // e.g. "C10S3"
  int n_customers = 0;
  int n_stations = 0;
  int instances = 0;
  std::vector<MethodStats> methods;  // in the order requested
  std::optional<Method> baseline;
};

/// The Delta% reference of a cell: certified exact, else a complete VNS,
/// else the complete method with the lowest mean J. Pure function of the
/// per-method stats.
std::optional<Method> choose_baseline(const std::vector<MethodStats>& methods);

/// Fills `baseline` and every method's gap.
void assign_gaps(CellResult& cell);

struct SuiteCell {
  std::string label;
  int n_customers = 0;
  int n_stations = 0;
  std::vector<std::shared_ptr<const Instance>> instances;
};

/// Groups generated suite entries by size label, ordered by (N, M).
std::vector<SuiteCell> group_suite(const std::vector<gen::SuiteEntry>& entries);

/// Reads every *.json instance under `dir` (sorted by file name) and groups
/// them by size. Throws FormatError naming the file on a corrupt instance.
std::vector<SuiteCell> load_suite(const std::filesystem::path& dir);

struct BenchConfig {
  std::vector<Method> methods{Method::Exact, Method::Vns, Method::Greedy};
  double time_limit_s = 600.0;  // per instance
  baselines::VNSConfig vns{};
  std::map<Method, policy::PolicyParams> policies;  // Ppo and Cbdrl checkpoints
  int multistart = 0;                               // 0 means N starts
  ConstraintSet constraints = ConstraintSet::full();
  int threads = 1;
  std::uint64_t seed = 0;
};

/// Outcome of one method on one instance.
struct InstanceRun {
  Solution solution;  // re-validated through check_solution
  bool timed_out = false;
  bool certified = false;
  double seconds = 0.0;
};

InstanceRun run_method(Method method, const Instance& instance, const BenchConfig& config);

/// Solves every instance of every cell with every method. Once a method
/// times out on a cell its remaining instances there are skipped and the
/// cell is marked incomplete for it. Throws InvalidArgument when a learned
/// method has no checkpoint.
std::vector<CellResult> run_benchmark(const std::vector<SuiteCell>& suite, const BenchConfig& config);

/// Zero-shot greedy multi-start evaluation of one checkpoint. Throws
/// InvalidArgument when `expected_dims` is given and differs.
std::vector<CellResult> eval_checkpoint(const policy::PolicyParams& params, const std::vector<SuiteCell>& suite,
                                        int multistart = 0, std::optional<policy::Dims> expected_dims = {},
                                        Method as = Method::Cbdrl);

enum class TableFormat { Text, Markdown, Csv };

TableFormat table_format_from_string(std::string_view s);

/// Distance / fleet / cost / gap table followed by the success / runtime
/// table. CSV output is a single table with full precision.
std::string emit_tables(const std::vector<CellResult>& results, TableFormat format);

/// SVG route plot: depot square, customer circles, station triangles, one
/// colour per route, legend with J, K and D.
std::string route_svg(const Instance& instance, const Solution& solution);
void emit_route_svg(const Instance& instance, const Solution& solution, const std::filesystem::path& path);

/// Version string baked in at build time (git describe).
std::string version();

/// Run manifest: config, seeds, suite summary and version.
std::string manifest_json(const BenchConfig& config, const std::vector<SuiteCell>& suite,
                          const std::string& suite_source);

}  // namespace evrptw::bench
