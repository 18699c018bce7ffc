#include "nird/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace nird {

namespace {

constexpr double kNegligible = 1e-14;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// a[r][d]: rank r's modified subproblem functional restricted to home domain d.
std::vector<std::vector<double>> domain_errors(const NirdResult& result) {
  const auto& ranks = result.iterations.front().ranks;
  const auto& owner = result.pre.pou.partition().owner;
  const std::size_t P = ranks.size();
  std::vector<std::vector<double>> a(P, std::vector<double>(P, 0.0));
  for (std::size_t r = 0; r < P; ++r) {
    for (std::size_t k = 0; k < owner.size(); ++k) a[r][owner[k]] += ranks[r].coarse_modified_sq[k];
    for (double& v : a[r]) v = std::sqrt(v);
  }
  return a;
}

}  // namespace

std::vector<double> coarse_residual_squared(const ProblemSpec& problem, const MeshForest& coarse,
                                            const DiscreteField& u, int degree) {
  const RhsSamples s = sample_rhs(u.mesh(), problem.quadrature_degree(degree), problem.rhs_function());
  const Eigen::VectorXd e2 = element_lsf_squared(problem, u, s);
  const std::vector<int> parent = coarse.containing_leaves(u.mesh());
  std::vector<double> out(coarse.num_leaves(), 0.0);
  for (std::size_t l = 0; l < parent.size(); ++l) out[parent[l]] += e2[static_cast<Eigen::Index>(l)];
  return out;
}

std::optional<double> measure_C0(const ProblemSpec& problem, const NirdResult& result, int degree,
                                 int* skipped) {
  if (skipped) *skipped = 0;
  if (result.iterations.empty()) return std::nullopt;
  const IterationRecord& it = result.iterations.front();
  const MeshForest& coarse = *result.pre.mesh;
  const std::vector<double> num = coarse_residual_squared(problem, coarse, it.u, degree);
  std::optional<double> best;
  for (std::size_t k = 0; k < coarse.num_leaves(); ++k) {
    double den = 0.0;
    for (int l : result.pre.pou.support_ranks(static_cast<int>(k))) {
      den += std::sqrt(it.ranks[l].coarse_modified_sq[k]);
    }
    if (den < kNegligible) {
      if (skipped) ++*skipped;
      continue;
    }
    const double ratio = std::sqrt(num[k]) / den;
    if (!best || ratio > *best) best = ratio;
  }
  return best;
}

NiResult baseline_solve(const ProblemSpec& problem, std::size_t budget, const NirdConfig& config) {
  NiOptions opt;
  opt.degree = config.degree;
  opt.budget = budget;
  opt.uniform_when_flat = true;
  opt.solver = config.solver;
  const MeshForest start(std::make_shared<const MacroMesh>(MacroMesh::unit_square(config.macro_n)));
  return ni_solve(problem, problem.rhs_function(), start, opt);
}

std::vector<IterationMetrics> measure_KQ(const ProblemSpec& problem, const NirdResult& result,
                                         const NirdConfig& config) {
  std::vector<IterationMetrics> out;
  if (result.iterations.empty()) return out;
  std::size_t largest = 0;
  for (const auto& it : result.iterations) largest = std::max(largest, it.total_leaves);
  // The refinement sequence does not depend on the budget, so one run to the
  // largest budget contains the baseline for every smaller one.
  const NiResult base = baseline_solve(problem, largest, config);
  for (const auto& it : result.iterations) {
    double base_lsf = base.history.front().lsf;
    for (const auto& h : base.history) {
      if (h.leaves <= it.total_leaves) base_lsf = h.lsf;
    }
    IterationMetrics m;
    m.index = it.index;
    m.union_leaves = it.union_leaves;
    m.total_leaves = it.total_leaves;
    m.lsf = it.lsf;
    m.baseline_lsf = base_lsf;
    m.Q = static_cast<double>(it.union_leaves) / static_cast<double>(it.total_leaves);
    m.K = base_lsf > 0.0 ? it.lsf / base_lsf : kNaN;
    out.push_back(m);
  }
  return out;
}

std::optional<Table1> measure_table1(const ProblemSpec& problem, const NirdResult& result,
                                     int degree) {
  if (result.iterations.empty()) return std::nullopt;
  const IterationRecord& it = result.iterations.front();
  const auto a = domain_errors(result);
  const std::size_t P = a.size();
  Table1 t;
  auto take_max = [&t](double& slot, double num, double den) {
    if (den < kNegligible) {
      ++t.skipped;
      return;
    }
    const double v = num / den;
    if (std::isnan(slot) || v > slot) slot = v;
  };
  t.C_s = t.C_s_tilde = t.C_rho = t.C_b_tilde = kNaN;
  for (std::size_t k = 0; k < P; ++k) {
    double into_k = 0.0, out_of_k = 0.0, out_sq = 0.0;
    for (std::size_t l = 0; l < P; ++l) {
      if (l == k) continue;
      take_max(t.C_s, a[l][k], a[k][l]);
      into_k += a[l][k];
      out_of_k += a[k][l];
      out_sq += a[k][l] * a[k][l];
    }
    if (P > 1) {
      take_max(t.C_s_tilde, into_k, out_of_k);
      take_max(t.C_rho, out_of_k * out_of_k, out_sq);
    }
  }

  t.Q_hat = kNaN;
  for (std::size_t k = 0; k < P; ++k) {
    const RankResult& r = it.ranks[k];
    if (r.max_error < kNegligible) {
      ++t.skipped;
      continue;
    }
    const double qk = static_cast<double>(r.home_leaves) / static_cast<double>(r.mesh->num_leaves());
    const double ratio = r.min_home_error / r.max_error;
    const double v = qk * ratio * ratio;
    if (std::isnan(t.Q_hat) || v < t.Q_hat) t.Q_hat = v;
  }
  t.C_b = 1.0 + t.C_s * std::sqrt(t.C_rho * (1.0 - t.Q_hat) / t.Q_hat);

  const std::vector<double> g2 = coarse_residual_squared(problem, *result.pre.mesh, it.u, degree);
  std::vector<double> g(P, 0.0);
  const auto& owner = result.pre.pou.partition().owner;
  for (std::size_t k = 0; k < owner.size(); ++k) g[owner[k]] += g2[k];
  for (std::size_t k = 0; k < P; ++k) take_max(t.C_b_tilde, std::sqrt(g[k]), a[k][k]);
  return t;
}

MetricsReport measure_all(const ProblemSpec& problem, const NirdConfig& config,
                          const NirdResult& result, bool with_table1) {
  MetricsReport r;
  r.problem = problem.name;
  r.pou = config.pou;
  r.P = config.P;
  r.eta_ratio = result.pre.eta_ratio;
  r.coarse_leaves = result.pre.mesh->num_leaves();
  r.initial_lsf = result.initial_lsf;
  r.C0 = measure_C0(problem, result, config.degree, &r.c0_skipped);
  r.iterations = measure_KQ(problem, result, config);
  if (with_table1) r.table1 = measure_table1(problem, result, config.degree);
  return r;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string metrics_csv_header() { return "pou,P,eta_ratio,N_c,C0,Q1,K1,Q2,K2"; }

std::string metrics_csv_row(const MetricsReport& report) {
  std::string row = to_string(report.pou) + "," + std::to_string(report.P) + "," +
                    format_real(report.eta_ratio) + "," + std::to_string(report.coarse_leaves) + "," +
                    format_real(report.C0.value_or(kNaN));
  for (std::size_t i = 0; i < 2; ++i) {
    const bool has = i < report.iterations.size();
    row += "," + format_real(has ? report.iterations[i].Q : kNaN);
    row += "," + format_real(has ? report.iterations[i].K : kNaN);
  }
  return row;
}

}  // namespace nird
