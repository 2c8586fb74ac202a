#pragma once

#include <filesystem>
#include <string>

#include "evrptw/model.hpp"

namespace evrptw::io {

inline constexpr const char* kInstanceFormat = "evrptw-instance/1";
inline constexpr const char* kSolutionFormat = "evrptw-solution/1";

std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);

std::string solution_to_json(const Solution& solution);
Solution solution_from_json(const std::string& text);

void write_instance(const Instance& instance, const std::filesystem::path& path);
Instance read_instance(const std::filesystem::path& path);

void write_solution(const Solution& solution, const std::filesystem::path& path);
Solution read_solution(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace evrptw::io
