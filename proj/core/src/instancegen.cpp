#include "evrptw/instancegen.hpp"

#include <algorithm>
#include <cmath>

#include "evrptw/error.hpp"
#include "evrptw/random.hpp"

namespace evrptw::gen {

namespace {

// Substream tags; never reorder.
enum Stream : std::uint64_t { kStationStream = 1, kClusterStream = 2, kCustomerStream = 3, kSuiteStream = 4 };

struct Point {
  double x;
  double y;
};

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::string ClassSpec::code() const {
  std::string c = spatial == Spatial::Clustered ? "C" : (spatial == Spatial::Random ? "R" : "RC");
  if (tightness == Tightness::Medium) c += "m";
  if (tightness == Tightness::Tight) c += "t";
  return c;
}

ClassSpec ClassSpec::parse(std::string_view code) {
  for (const ClassSpec& c : all_classes()) {
    if (c.code() == code) return c;
  }
  throw InvalidArgument("unknown instance class '" + std::string(code) + "'");
}

std::vector<ClassSpec> all_classes() {
  std::vector<ClassSpec> out;
  for (Spatial s : {Spatial::Clustered, Spatial::Random, Spatial::Mixed}) {
    for (Tightness t : {Tightness::Wide, Tightness::Medium, Tightness::Tight}) out.push_back({s, t});
  }
  return out;
}

double window_width_fraction(Tightness t) {
  switch (t) {
    case Tightness::Wide: return 1.0;
    case Tightness::Medium: return 0.4;
    case Tightness::Tight: return 0.15;
  }
  return 1.0;
}

VehicleParams GenConfig::vehicle_params() const {
  VehicleParams p;
  if (capacity) p.capacity = *capacity;
  if (battery_capacity) p.battery_capacity = *battery_capacity;
  if (horizon) p.horizon = *horizon;
  if (fleet_penalty) p.fleet_penalty = *fleet_penalty;
  return p;
}

Instance generate(const GenConfig& config) {
  if (config.n_customers < 1) throw InvalidArgument("n_customers must be >= 1");
  if (config.n_stations < 1) throw InvalidArgument("n_stations must be >= 1");
  const VehicleParams params = config.vehicle_params();
  if (params.capacity <= 0 || params.battery_capacity <= 0 || params.horizon <= 0 || params.fleet_penalty < 0) {
    throw InvalidArgument("parameter overrides must be positive");
  }
  const double horizon = params.horizon;
  const double range = params.battery_capacity / params.consume_rate;
  const Point depot{0.5, 0.5};

  std::vector<Node> nodes;
  nodes.push_back({0, NodeKind::Depot, depot.x, depot.y, 0, 0.0, 0.0, horizon});

  std::vector<Point> stations;
  for (int s = 0; s < config.n_stations; ++s) {
    Rng rng(derive_seed(config.seed, {kStationStream, static_cast<std::uint64_t>(s)}));
    const double x = rng.uniform();
    const double y = rng.uniform();
    stations.push_back({x, y});
  }

  std::vector<Point> anchors{depot};
  for (Point s : stations) {
    if (distance(depot, s) <= range + kFeasTol) anchors.push_back(s);
  }
  auto reachable = [&](Point p) {
    for (Point a : anchors) {
      for (Point b : anchors) {
        if (distance(a, p) + distance(p, b) <= range + kFeasTol) return true;
      }
    }
    return false;
  };

  // A cluster centered out of reach would make all its customers fail.
  std::vector<Point> centers;
  for (int c = 0; c < kClusterCount; ++c) {
    Rng rng(derive_seed(config.seed, {kClusterStream, static_cast<std::uint64_t>(c)}));
    Point center = depot;
    for (int retry = 0; retry < kMaxRetries; ++retry) {
      const double x = rng.uniform();
      const double y = rng.uniform();
      if (reachable({x, y})) {
        center = {x, y};
        break;
      }
    }
    centers.push_back(center);
  }

  const int n_random = config.class_spec.spatial == Spatial::Random
                           ? config.n_customers
                           : (config.class_spec.spatial == Spatial::Mixed ? config.n_customers / 2 : 0);
  const double width = window_width_fraction(config.class_spec.tightness) * horizon;

  for (int i = 1; i <= config.n_customers; ++i) {
    const bool clustered = i > n_random;
    std::string last_failure;
    bool placed = false;
    for (int retry = 0; retry < kMaxRetries && !placed; ++retry) {
      Rng rng(derive_seed(config.seed,
                          {kCustomerStream, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(retry)}));
      Point p{};
      if (clustered) {
        const Point c = centers[static_cast<std::size_t>(rng.uniform_int(0, kClusterCount - 1))];
        const double x = clip01(rng.normal(c.x, kClusterSigma));
        const double y = clip01(rng.normal(c.y, kClusterSigma));
        p = {x, y};
      } else {
        const double x = rng.uniform();
        const double y = rng.uniform();
        p = {x, y};
      }
      const int demand = static_cast<int>(rng.uniform_int(kMinDemand, kMaxDemand));
      const double u01 = rng.uniform();

      if (demand > params.capacity) {
        last_failure = std::string(to_string(InstanceCheck::Demand));
        continue;
      }
      if (!reachable(p)) {
        last_failure = std::string(to_string(InstanceCheck::BatteryReach));
        continue;
      }
      const double t_out = distance(depot, p) / params.speed;
      const double earliest = t_out;
      const double latest = horizon - t_out - kServiceTime;
      if (latest < earliest) {
        last_failure = std::string(to_string(InstanceCheck::WindowFit));
        continue;
      }
      double open = earliest;
      double close = latest;
      if (width < latest - earliest) {
        const double center = earliest + u01 * (latest - earliest);
        open = std::clamp(center - 0.5 * width, earliest, latest - width);
        close = open + width;
      }
      nodes.push_back({i, NodeKind::Customer, p.x, p.y, demand, kServiceTime, open, close});
      placed = true;
    }
    if (!placed) {
      throw GenerationError("customer " + std::to_string(i) + " failed check '" + last_failure + "' after " +
                            std::to_string(kMaxRetries) + " retries");
    }
  }

  for (int s = 0; s < config.n_stations; ++s) {
    const Point p = stations[static_cast<std::size_t>(s)];
    nodes.push_back({config.n_customers + 1 + s, NodeKind::Station, p.x, p.y, 0, 0.0, 0.0, horizon});
  }

  Instance inst(std::move(nodes), config.n_customers, config.n_stations, params, config.class_spec.code(),
                config.seed);
  const auto violations = validate_instance(inst);
  if (!violations.empty()) {
    throw GenerationError("generated instance fails check '" + std::string(to_string(violations.front().check)) +
                          "' at node " + std::to_string(violations.front().node));
  }
  return inst;
}

std::string instance_stem(const Instance& instance) {
  return instance.class_label() + std::to_string(instance.n_customers()) + "S" +
         std::to_string(instance.n_stations()) + "_" + std::to_string(instance.seed());
}

std::string SizeCell::label() const { return "C" + std::to_string(n_customers) + "S" + std::to_string(n_stations); }

std::vector<SizeCell> default_size_ladder() {
  return {{5, 2}, {10, 3}, {20, 3}, {30, 4}, {40, 5}, {50, 6}, {100, 12}};
}

std::uint64_t suite_instance_seed(std::uint64_t seed, const SizeCell& cell, const ClassSpec& cls, int index) {
  return derive_seed(seed, {kSuiteStream, static_cast<std::uint64_t>(cell.n_customers),
                            static_cast<std::uint64_t>(cell.n_stations), static_cast<std::uint64_t>(cls.spatial),
                            static_cast<std::uint64_t>(cls.tightness), static_cast<std::uint64_t>(index)});
}

std::vector<SuiteEntry> benchmark_suite(const std::vector<SizeCell>& sizes, const std::vector<ClassSpec>& classes,
                                        int instances_per_cell, std::uint64_t seed) {
  std::vector<SuiteEntry> out;
  for (const SizeCell& cell : sizes) {
    for (const ClassSpec& cls : classes) {
      for (int i = 0; i < instances_per_cell; ++i) {
        GenConfig cfg;
        cfg.n_customers = cell.n_customers;
        cfg.n_stations = cell.n_stations;
        cfg.class_spec = cls;
        cfg.seed = suite_instance_seed(seed, cell, cls, i);
        out.push_back({cell, cls, generate(cfg)});
      }
    }
  }
  return out;
}

}  // namespace evrptw::gen
