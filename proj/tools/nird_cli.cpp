#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nird/error.hpp"
#include "nird/io.hpp"

namespace fs = std::filesystem;
using namespace nird;

namespace {

// Bad flag values detected after parsing; reported like a parse error.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CommonFlags {
  std::string problem = "poisson_smooth";
  bool oscillatory = false;
  std::uint64_t seed = 1;
  std::size_t E = 2000;
  int degree = 1;
  int iters = 2;
  std::string functional = "kernel";
  std::string preprocess = "adaptive";
  int threads = 0;
  std::string out;
};

void add_problem_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--problem", f.problem, "Test problem")
      ->check(CLI::IsMember(problem_names()))
      ->capture_default_str();
  app->add_flag("--oscillatory", f.oscillatory, "Use the oscillatory source");
  app->add_option("--seed", f.seed, "Seed for the oscillatory amplitudes")->capture_default_str();
}

void add_run_flags(CLI::App* app, CommonFlags& f) {
  add_problem_flags(app, f);
  app->add_option("--E", f.E, "Leaf budget per rank")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--degree", f.degree, "Polynomial degree")->check(CLI::Range(1, 4))->capture_default_str();
  app->add_option("--iters", f.iters, "NIRD iterations")->check(CLI::NonNegativeNumber)->capture_default_str();
  app->add_option("--functional", f.functional, "Subproblem functional")
      ->check(CLI::IsMember({"naive", "kernel"}))
      ->capture_default_str();
  app->add_option("--preprocess", f.preprocess, "Preprocessing refinement")
      ->check(CLI::IsMember({"adaptive", "uniform"}))
      ->capture_default_str();
  app->add_option("--threads", f.threads, "Worker threads (0: NIRD_THREADS or hardware)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--out", f.out, "Output directory");
}

ProblemId problem_id(const CommonFlags& f, int P) { return {f.problem, P, f.seed, f.oscillatory}; }

NirdConfig make_config(const CommonFlags& f, int P, PouKind pou) {
  NirdConfig c;
  c.P = P;
  c.E = f.E;
  c.degree = f.degree;
  c.pou = pou;
  c.iterations = f.iters;
  c.functional = parse_functional(f.functional);
  c.preprocess = f.preprocess == "uniform" ? PreprocessMode::Uniform : PreprocessMode::Adaptive;
  c.threads = f.threads;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

ProblemSpec make_problem(const ProblemId& id) {
  try {
    return instantiate(id);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

nlohmann::json table1_json(const Table1& t) {
  return {{"C_s", format_real(t.C_s)},         {"C_s_tilde", format_real(t.C_s_tilde)},
          {"C_rho", format_real(t.C_rho)},     {"Q_hat", format_real(t.Q_hat)},
          {"C_b", format_real(t.C_b)},         {"C_b_tilde", format_real(t.C_b_tilde)},
          {"skipped", t.skipped}};
}

int run_nird(const CommonFlags& f, int P, const std::string& pou_name, bool table1, bool dump) {
  if (f.out.empty()) throw UsageError("nird requires --out DIR");
  const ProblemId id = problem_id(f, P);
  const NirdConfig config = make_config(f, P, parse_pou_kind(pou_name));
  const ProblemSpec problem = make_problem(id);
  const NirdResult result = nird_run(problem, config);
  const MetricsReport report = measure_all(problem, config, result, table1);

  const fs::path out(f.out);
  nlohmann::json artifacts = nlohmann::json::object();
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(out / name, content);
    artifacts[name] = {{"path", name}, {"sha1", git_blob_sha1(content)}};
  };
  emit("metrics.csv", metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
  emit("lsf.csv", lsf_csv(result));
  std::ostringstream partition;
  write_partition(partition, result.pre.pou.partition());
  emit("partition.csv", partition.str());
  if (dump) {
    for (const auto& it : result.iterations) {
      const std::string stem = "dumps/iter" + std::to_string(it.index);
      std::ostringstream m, u;
      write_mesh(m, *it.mesh);
      write_field(u, it.u);
      emit(stem + "_union.mesh", m.str());
      emit(stem + "_union.field", u.str());
      for (const auto& r : it.ranks) {
        std::ostringstream rm, rf;
        write_mesh(rm, *r.mesh);
        write_field(rf, r.delta);
        emit(stem + "_rank" + std::to_string(r.rank) + ".mesh", rm.str());
        emit(stem + "_rank" + std::to_string(r.rank) + ".field", rf.str());
      }
    }
  }

  const nlohmann::json inputs = run_inputs_json(id, config);
  nlohmann::json iterations = nlohmann::json::array();
  for (std::size_t i = 0; i < result.iterations.size(); ++i) {
    const auto& it = result.iterations[i];
    iterations.push_back({{"index", it.index},
                          {"N_U", it.union_leaves},
                          {"N_T", it.total_leaves},
                          {"lsf", format_real(it.lsf)},
                          {"ledger", ledger_json(result.ledger.iterations[i])}});
  }
  nlohmann::json manifest = {
      {"inputs", inputs},
      {"input_hash", git_blob_sha1(inputs.dump())},
      {"problem", problem_json(problem)},
      {"preprocess",
       {{"N_c", result.pre.mesh->num_leaves()},
        {"eta_ratio", format_real(result.pre.eta_ratio)},
        {"lsf", format_real(result.initial_lsf)},
        {"levels", result.pre.history.size()}}},
      {"iterations", iterations},
      {"ledger_totals",
       {{"rounds", result.ledger.total_rounds()}, {"messages", result.ledger.total_messages()}}},
      {"artifacts", artifacts}};
  if (report.table1) manifest["table1"] = table1_json(*report.table1);
  write_file(out / "manifest.json", manifest.dump(2) + "\n");

  std::printf("N_c=%zu eta_ratio=%s lsf0=%s\n", result.pre.mesh->num_leaves(),
              format_real(result.pre.eta_ratio).c_str(), format_real(result.initial_lsf).c_str());
  for (const auto& it : result.iterations) {
    std::printf("iteration %d: N_U=%zu N_T=%zu lsf=%s\n", it.index, it.union_leaves, it.total_leaves,
                format_real(it.lsf).c_str());
  }
  std::printf("wrote %s\n", (out / "manifest.json").string().c_str());
  return 0;
}

int run_baseline(const CommonFlags& f, int P) {
  const ProblemSpec problem = make_problem(problem_id(f, P));
  NirdConfig config = make_config(f, 1, PouKind::Discontinuous);
  const NiResult base = baseline_solve(problem, f.E, config);
  const std::string csv = ni_trace_csv(base);
  if (!f.out.empty()) write_file(fs::path(f.out) / "baseline.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int run_perfmodel(const std::string& preset_name, const std::vector<int>& Ps, double E, int alpha,
                  const std::string& out_dir) {
  std::vector<std::string> presets;
  if (preset_name == "both") {
    presets = {"easy", "hard"};
  } else {
    presets = {preset_name};
  }
  std::vector<int> sweep = Ps;
  if (sweep.empty()) {
    for (int p = 1; p <= (1 << 20); p *= 2) sweep.push_back(p);
  }
  std::string csv = perfmodel_csv_header() + "\n";
  for (const auto& name : presets) {
    for (int P : sweep) {
      MachineProblemParams params = preset(name);
      params.P = P;
      params.E = E;
      params.alpha = alpha;
      try {
        params.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      csv += perfmodel_csv_row(name, params) + "\n";
    }
  }
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "perfmodel.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int run_table(const CommonFlags& f, const std::vector<int>& Ps, const std::string& pou_name) {
  std::vector<PouKind> kinds;
  if (pou_name == "all") {
    kinds = {PouKind::Discontinuous, PouKind::C0, PouKind::Cinf};
  } else {
    kinds = {parse_pou_kind(pou_name)};
  }
  std::string csv = metrics_csv_header() + "\n";
  for (PouKind kind : kinds) {
    for (int P : Ps) {
      const NirdConfig config = make_config(f, P, kind);
      const ProblemSpec problem = make_problem(problem_id(f, P));
      const NirdResult result = nird_run(problem, config);
      csv += metrics_csv_row(measure_all(problem, config, result, false)) + "\n";
    }
  }
  if (!f.out.empty()) write_file(fs::path(f.out) / "table.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int run_problems(int P, std::uint64_t seed) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& name : problem_names()) list.push_back(problem_json(instantiate({name, P, seed, false})));
  std::cout << list.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested iteration with range decomposition: experiment runner"};
  app.require_subcommand(1);

  CommonFlags nird_flags;
  int nird_P = 16;
  std::string nird_pou = "discts";
  bool nird_table1 = false, nird_dump = false;
  CLI::App* nird_cmd = app.add_subcommand("nird", "Run NIRD and write manifest, metrics and LSF CSVs");
  add_run_flags(nird_cmd, nird_flags);
  nird_cmd->add_option("--P", nird_P, "Number of ranks (power of two)")->capture_default_str();
  nird_cmd->add_option("--pou", nird_pou, "Partition of unity")
      ->check(CLI::IsMember({"discts", "c0", "cinf"}))
      ->capture_default_str();
  nird_cmd->add_flag("--table1", nird_table1, "Add the first-iteration bound constants to the manifest");
  nird_cmd->add_flag("--dump-ranks", nird_dump, "Write per-rank and union meshes and fields");

  CommonFlags base_flags;
  int base_P = 16;
  CLI::App* base_cmd = app.add_subcommand("baseline", "Traditional nested iteration; writes level,N,lsf");
  add_run_flags(base_cmd, base_flags);
  base_cmd->add_option("--P", base_P, "Rank count used only by the oscillatory source");

  std::string preset_name = "both";
  std::vector<int> perf_P;
  double perf_E = 1e6;
  int perf_alpha = 2;
  std::string perf_out;
  CLI::App* perf_cmd = app.add_subcommand("perfmodel", "Communication cost model sweep over P");
  perf_cmd->add_option("--preset", preset_name, "Machine/problem preset")
      ->check(CLI::IsMember({"easy", "hard", "both"}))
      ->capture_default_str();
  perf_cmd->add_option("--P", perf_P, "Comma-separated processor counts (default 1..2^20)")->delimiter(',');
  perf_cmd->add_option("--E", perf_E, "Elements per processor")->capture_default_str();
  perf_cmd->add_option("--alpha", perf_alpha, "NIRD iterations")->capture_default_str();
  perf_cmd->add_option("--out", perf_out, "Output directory");

  CommonFlags table_flags;
  std::vector<int> table_P{4, 16};
  std::string table_pou = "all";
  CLI::App* table_cmd = app.add_subcommand("table", "Metrics rows for every PoU x P combination");
  add_run_flags(table_cmd, table_flags);
  table_cmd->add_option("--P", table_P, "Comma-separated rank counts")->delimiter(',');
  table_cmd->add_option("--pou", table_pou, "Partition of unity or all")
      ->check(CLI::IsMember({"discts", "c0", "cinf", "all"}))
      ->capture_default_str();

  int list_P = 16;
  std::uint64_t list_seed = 1;
  CLI::App* list_cmd = app.add_subcommand("problems", "Print the problem catalog as JSON");
  list_cmd->add_option("--P", list_P, "Rank count for P-dependent sources")->capture_default_str();
  list_cmd->add_option("--seed", list_seed, "Seed for the oscillatory amplitudes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*nird_cmd) return run_nird(nird_flags, nird_P, nird_pou, nird_table1, nird_dump);
    if (*base_cmd) return run_baseline(base_flags, base_P);
    if (*perf_cmd) return run_perfmodel(preset_name, perf_P, perf_E, perf_alpha, perf_out);
    if (*table_cmd) return run_table(table_flags, table_P, table_pou);
    if (*list_cmd) return run_problems(list_P, list_seed);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const NirdError& e) {
    std::fprintf(stderr, "error in stage %s: %s\n", e.stage().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
