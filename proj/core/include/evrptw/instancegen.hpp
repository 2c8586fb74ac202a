#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evrptw/model.hpp"

namespace evrptw::gen {

enum class Spatial { Clustered, Random, Mixed };
enum class Tightness { Wide, Medium, Tight };

/// One of the nine class codes C, Cm, Ct, R, Rm, Rt, RC, RCm, RCt.
struct ClassSpec {
  Spatial spatial = Spatial::Random;
  Tightness tightness = Tightness::Wide;

  std::string code() const;
  static ClassSpec parse(std::string_view code);
  bool operator==(const ClassSpec&) const = default;
};

/// All nine classes in canonical order.
std::vector<ClassSpec> all_classes();

inline constexpr double kServiceTime = 0.05;
inline constexpr double kClusterSigma = 0.07;
inline constexpr int kClusterCount = 3;
inline constexpr int kMinDemand = 1;
inline constexpr int kMaxDemand = 9;
inline constexpr int kMaxRetries = 64;

/// Window width as a fraction of the horizon for each tightness level.
double window_width_fraction(Tightness t);

struct GenConfig {
  int n_customers = 10;
  int n_stations = 3;
  ClassSpec class_spec{};
  std::uint64_t seed = 0;
  std::optional<int> capacity;
  std::optional<double> battery_capacity;
  std::optional<double> horizon;
  std::optional<double> fleet_penalty;

  VehicleParams vehicle_params() const;
};

/// Deterministic in (seed, config). Stations are drawn first from their own
/// substreams, then customers; a customer that fails a validity check is
/// redrawn from a retry substream. Throws GenerationError naming the check
/// when the retry budget is exhausted.
Instance generate(const GenConfig& config);

/// File stem used by the CLI: {class}{N}S{M}_{seed}.
std::string instance_stem(const Instance& instance);

struct SizeCell {
  int n_customers;
  int n_stations;
  std::string label() const;  // e.g. "C10S3"
  bool operator==(const SizeCell&) const = default;
};

/// (5,2) (10,3) (20,3) (30,4) (40,5) (50,6) (100,12).
std::vector<SizeCell> default_size_ladder();

struct SuiteEntry {
  SizeCell cell;
  ClassSpec class_spec;
  Instance instance;
};

/// instances_per_cell instances for every (size, class) pair, with seeds
/// derived from (seed, N, M, class, index).
std::vector<SuiteEntry> benchmark_suite(const std::vector<SizeCell>& sizes, const std::vector<ClassSpec>& classes,
                                        int instances_per_cell, std::uint64_t seed);

std::uint64_t suite_instance_seed(std::uint64_t seed, const SizeCell& cell, const ClassSpec& cls, int index);

}  // namespace evrptw::gen
