#include "evrptw/io.hpp"

#include <fstream>
#include <sstream>

#include "evrptw/error.hpp"
#include "json.hpp"

namespace evrptw::io {

using nlohmann::json;

namespace {

json node_to_json(const Node& n) {
  return json{{"id", n.id},
              {"kind", std::string(to_string(n.kind))},
              {"x", n.x},
              {"y", n.y},
              {"demand", n.demand},
              {"service_time", n.service_time},
              {"tw_open", n.tw_open},
              {"tw_close", n.tw_close}};
}

Node node_from_json(const json& j) {
  Node n;
  n.id = j.at("id").get<int>();
  n.kind = node_kind_from_string(j.at("kind").get<std::string>());
  n.x = j.at("x").get<double>();
  n.y = j.at("y").get<double>();
  n.demand = j.at("demand").get<int>();
  n.service_time = j.at("service_time").get<double>();
  n.tw_open = j.at("tw_open").get<double>();
  n.tw_close = j.at("tw_close").get<double>();
  return n;
}

void expect_format(const json& doc, const char* format) {
  if (!doc.is_object() || !doc.contains("format") || doc.at("format") != format) {
    throw FormatError(std::string("expected \"format\": \"") + format + "\"");
  }
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string instance_to_json(const Instance& instance) {
  const VehicleParams& p = instance.params();
  json nodes = json::array();
  for (const Node& n : instance.nodes()) nodes.push_back(node_to_json(n));
  json doc{{"format", kInstanceFormat},
           {"class", instance.class_label()},
           {"seed", instance.seed()},
           {"n_customers", instance.n_customers()},
           {"n_stations", instance.n_stations()},
           {"capacity", p.capacity},
           {"battery_capacity", p.battery_capacity},
           {"consume_rate", p.consume_rate},
           {"recharge_rate", p.recharge_rate},
           {"speed", p.speed},
           {"horizon", p.horizon},
           {"fleet_penalty", p.fleet_penalty},
           {"nodes", std::move(nodes)}};
  return doc.dump(1) + "\n";
}

Instance instance_from_json(const std::string& text) {
  const json doc = parse(text);
  expect_format(doc, kInstanceFormat);
  try {
    VehicleParams p;
    p.capacity = doc.at("capacity").get<int>();
    p.battery_capacity = doc.at("battery_capacity").get<double>();
    p.consume_rate = doc.at("consume_rate").get<double>();
    p.recharge_rate = doc.at("recharge_rate").get<double>();
    p.speed = doc.at("speed").get<double>();
    p.horizon = doc.at("horizon").get<double>();
    p.fleet_penalty = doc.at("fleet_penalty").get<double>();
    std::vector<Node> nodes;
    for (const json& n : doc.at("nodes")) nodes.push_back(node_from_json(n));
    return Instance(std::move(nodes), doc.at("n_customers").get<int>(), doc.at("n_stations").get<int>(), p,
                    doc.at("class").get<std::string>(), doc.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad instance document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("inconsistent instance document: ") + e.what());
  }
}

std::string solution_to_json(const Solution& s) {
  json violations = json::array();
  for (const Violation& v : s.violations) {
    violations.push_back(json{{"kind", std::string(to_string(v.kind))},
                              {"route", v.route},
                              {"node", v.node},
                              {"magnitude", v.magnitude}});
  }
  json doc{{"format", kSolutionFormat},
           {"routes", s.routes},
           {"arrival_times", s.arrival_times},
           {"battery_levels", s.battery_levels},
           {"total_distance", s.total_distance},
           {"fleet_size", s.fleet_size},
           {"feasible", s.feasible},
           {"violations", std::move(violations)}};
  // JSON has no infinity; infeasible markers store a null cost.
  doc["cost"] = std::isfinite(s.cost) ? json(s.cost) : json(nullptr);
  return doc.dump(1) + "\n";
}

Solution solution_from_json(const std::string& text) {
  const json doc = parse(text);
  expect_format(doc, kSolutionFormat);
  try {
    Solution s;
    s.routes = doc.at("routes").get<std::vector<Route>>();
    s.arrival_times = doc.at("arrival_times").get<std::vector<std::vector<double>>>();
    s.battery_levels = doc.at("battery_levels").get<std::vector<std::vector<double>>>();
    s.total_distance = doc.at("total_distance").get<double>();
    s.fleet_size = doc.at("fleet_size").get<int>();
    s.cost = doc.at("cost").is_null() ? std::numeric_limits<double>::infinity() : doc.at("cost").get<double>();
    s.feasible = doc.at("feasible").get<bool>();
    for (const json& v : doc.at("violations")) {
      s.violations.push_back({violation_kind_from_string(v.at("kind").get<std::string>()), v.at("route").get<int>(),
                              v.at("node").get<int>(), v.at("magnitude").get<double>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad solution document: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_instance(const Instance& instance, const std::filesystem::path& path) {
  write_text(path, instance_to_json(instance));
}

Instance read_instance(const std::filesystem::path& path) { return instance_from_json(read_text(path)); }

void write_solution(const Solution& solution, const std::filesystem::path& path) {
  write_text(path, solution_to_json(solution));
}

Solution read_solution(const std::filesystem::path& path) { return solution_from_json(read_text(path)); }

}  // namespace evrptw::io
