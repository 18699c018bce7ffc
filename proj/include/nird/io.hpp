#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nird/metrics.hpp"
#include "nird/perfmodel.hpp"
#include "nird/problems.hpp"

namespace nird {

/// Lowercase hex SHA-1 of "blob <size>\0" followed by `content`, the hash
/// git assigns to a file with these bytes.
std::string git_blob_sha1(std::string_view content);

/// Writes `content` byte for byte, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

std::string to_string(Functional f);
/// "naive" or "kernel"; throws std::invalid_argument otherwise.
Functional parse_functional(const std::string& text);

/// Parameters of an instantiated problem.  The diffusion coefficient is
/// reported by its value at the four quadrant centres.
nlohmann::json problem_json(const ProblemSpec& problem);

/// Every input that determines a NIRD run's outputs.
nlohmann::json run_inputs_json(const ProblemId& id, const NirdConfig& config);

nlohmann::json ledger_json(const IterationComm& comm);

/// "iteration,lsf"; row 0 is the preprocessing solution.
std::string lsf_csv(const NirdResult& result);
/// "level,N,lsf" from a nested-iteration history.
std::string ni_trace_csv(const NiResult& result);
/// "preset,P,C_T,C_N".
std::string perfmodel_csv_header();
std::string perfmodel_csv_row(const std::string& preset, const MachineProblemParams& params);

}  // namespace nird
