#include "evrptw/error.hpp"
#include "evrptw/io.hpp"
#include "evrptw/policy.hpp"
#include "json.hpp"

namespace evrptw::policy {

using nlohmann::json;

std::string params_to_json(const PolicyParams& params) {
  json tensors = json::array();
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const ad::Mat& t = params.tensors[i];
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    }
    tensors.push_back(json{{"name", params.names[i]}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", data}});
  }
  json doc{{"format", kPolicyFormat},
           {"dims", {{"hidden", params.dims.hidden}, {"heads", params.dims.heads}, {"layers", params.dims.layers}}},
           {"tensors", std::move(tensors)}};
  return doc.dump() + "\n";
}

PolicyParams params_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kPolicyFormat) {
    throw FormatError(std::string("expected \"format\": \"") + kPolicyFormat + "\"");
  }
  try {
    Dims dims;
    dims.hidden = doc.at("dims").at("hidden").get<int>();
    dims.heads = doc.at("dims").at("heads").get<int>();
    dims.layers = doc.at("dims").at("layers").get<int>();
    PolicyParams p = zero_params(dims);
    const json& tensors = doc.at("tensors");
    if (tensors.size() != p.tensors.size()) throw FormatError("checkpoint tensor count does not match its dims");
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
      const json& t = tensors[i];
      ad::Mat& dst = p.tensors[i];
      if (t.at("name").get<std::string>() != p.names[i] || t.at("rows").get<Eigen::Index>() != dst.rows() ||
          t.at("cols").get<Eigen::Index>() != dst.cols()) {
        throw FormatError("checkpoint tensor '" + t.at("name").get<std::string>() + "' does not match the layout");
      }
      const std::vector<double> data = t.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != dst.size()) throw FormatError("checkpoint tensor data size");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < dst.rows(); ++r) {
        for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = data[k++];
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad checkpoint dims: ") + e.what());
  }
}

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
  io::write_text(path, params_to_json(params));
}

PolicyParams load_params(const std::filesystem::path& path) { return params_from_json(io::read_text(path)); }

}  // namespace evrptw::policy
