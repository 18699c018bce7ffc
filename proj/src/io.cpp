#include "nird/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace nird {

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw std::runtime_error("git_blob_sha1: digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string to_string(Functional f) { return f == Functional::Naive ? "naive" : "kernel"; }

Functional parse_functional(const std::string& text) {
  if (text == "naive") return Functional::Naive;
  if (text == "kernel") return Functional::Kernel;
  throw std::invalid_argument("unknown functional '" + text + "' (expected naive or kernel)");
}

nlohmann::json problem_json(const ProblemSpec& problem) {
  static const char* side_names[] = {"west", "east", "south", "north"};
  nlohmann::json sides;
  for (int s = 0; s < 4; ++s) {
    sides[side_names[s]] = problem.dirichlet(s) ? "dirichlet" : "neumann";
  }
  nlohmann::json alpha = nlohmann::json::array();
  for (Point c : {Point{0.25, 0.25}, Point{0.75, 0.25}, Point{0.25, 0.75}, Point{0.75, 0.75}}) {
    alpha.push_back(problem.alpha(c));
  }
  return {{"name", problem.name},
          {"alpha_quadrants", alpha},
          {"epsilon", problem.epsilon},
          {"b", {problem.b.x, problem.b.y}},
          {"boundary", sides},
          {"exact_solution_known", static_cast<bool>(problem.exact_p)}};
}

nlohmann::json run_inputs_json(const ProblemId& id, const NirdConfig& config) {
  return {{"problem", id.name},
          {"oscillatory", id.oscillatory},
          {"seed", id.seed},
          {"P", config.P},
          {"E", config.E},
          {"degree", config.degree},
          {"pou", to_string(config.pou)},
          {"iterations", config.iterations},
          {"functional", to_string(config.functional)},
          {"prep_fraction", config.prep_fraction},
          {"prep_ratio", config.prep_ratio},
          {"preprocess", config.preprocess == PreprocessMode::Uniform ? "uniform" : "adaptive"},
          {"macro_n", config.macro_n},
          {"solver_tol", config.solver.tol}};
}

nlohmann::json ledger_json(const IterationComm& comm) {
  std::size_t sent = 0, received = 0;
  for (const auto& round : comm.sent)
    for (int m : round) sent += static_cast<std::size_t>(m);
  for (const auto& round : comm.received)
    for (int m : round) received += static_cast<std::size_t>(m);
  return {{"rounds", comm.rounds}, {"messages_sent", sent}, {"messages_received", received}};
}

std::string lsf_csv(const NirdResult& result) {
  std::ostringstream out;
  out << "iteration,lsf\n0," << format_real(result.initial_lsf) << '\n';
  for (const auto& it : result.iterations) out << it.index << ',' << format_real(it.lsf) << '\n';
  return out.str();
}

std::string ni_trace_csv(const NiResult& result) {
  std::ostringstream out;
  out << "level,N,lsf\n";
  for (std::size_t l = 0; l < result.history.size(); ++l) {
    out << l << ',' << result.history[l].leaves << ',' << format_real(result.history[l].lsf) << '\n';
  }
  return out.str();
}

std::string perfmodel_csv_header() { return "preset,P,C_T,C_N"; }

std::string perfmodel_csv_row(const std::string& preset, const MachineProblemParams& params) {
  return preset + "," + std::to_string(static_cast<long long>(params.P)) + "," +
         format_real(comm_cost_traditional(params)) + "," + format_real(comm_cost_nird(params));
}

}  // namespace nird
