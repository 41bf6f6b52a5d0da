#pragma once

#include "taskuq/testbed.hpp"
#include "taskuq/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace taskuq {

enum class OutFormat { Table, Json };

OutFormat format_from_string(const std::string& name);
const char* to_string(OutFormat f);

// Shortest-round-trip formatting so reruns are byte-identical.
std::string fmt_double(double v);

// JSON value for a double; non-finite values become strings.
nlohmann::json json_num(double v);

nlohmann::json problem_spec_to_json(const ProblemSpec& spec, std::uint64_t seed);
std::pair<ProblemSpec, std::uint64_t> problem_spec_from_json(const nlohmann::json& j);

void write_problem_spec(const std::filesystem::path& path, const ProblemSpec& spec,
                        std::uint64_t seed);
std::pair<ProblemSpec, std::uint64_t> read_problem_spec(const std::filesystem::path& path);

// Dataset schema: one record per line with round index (1-based), sample
// index, true task output, class label, and the comma-joined task samples.
// The resolved generation config is embedded in the header.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset,
                   const nlohmann::json& config, OutFormat format);
Dataset read_dataset(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace taskuq
