#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nird/nird.hpp"

namespace nird {

// Every quantity below of the form ||L(v^h - v)||_R is approximated by the
// kernel-corrected residual functional restricted to R.

struct IterationMetrics {
  int index = 0;
  std::size_t union_leaves = 0;   // N_U
  std::size_t total_leaves = 0;   // N_T
  double lsf = 0.0;
  double baseline_lsf = 0.0;
  double Q = 0.0;
  double K = 0.0;
};

/// Table-1 diagnostics from the first iteration.  NaN marks a quantity with
/// no admissible term (e.g. C_s for a single rank).
struct Table1 {
  double C_s = 0.0;
  double C_s_tilde = 0.0;
  double C_rho = 0.0;
  double Q_hat = 0.0;
  double C_b = 0.0;
  double C_b_tilde = 0.0;
  int skipped = 0;  // ratios dropped for a zero denominator
};

struct MetricsReport {
  std::string problem;
  PouKind pou = PouKind::Discontinuous;
  int P = 1;
  double eta_ratio = 0.0;
  std::size_t coarse_leaves = 0;  // N_c
  double initial_lsf = 0.0;
  std::optional<double> C0;
  int c0_skipped = 0;
  std::vector<IterationMetrics> iterations;
  std::optional<Table1> table1;
};

/// ||L u - F||^2 of a union-mesh iterate summed per coarse leaf.
std::vector<double> coarse_residual_squared(const ProblemSpec& problem, const MeshForest& coarse,
                                            const DiscreteField& u, int degree);

/// max_k ||L u_1 - F||_{tau_k} / sum_{l in L_k} ||L dv_l - (f_l - phi_l)||_{tau_k};
/// coarse leaves with a denominator below 1e-14 are skipped.  Empty when
/// every denominator is negligible or no iteration has run.
std::optional<double> measure_C0(const ProblemSpec& problem, const NirdResult& result, int degree,
                                 int* skipped = nullptr);

/// Q = N_U / N_T and K = LSF(u_i) / LSF(baseline), where the baseline is a
/// traditional nested-iteration solve with a budget of N_T leaves.
std::vector<IterationMetrics> measure_KQ(const ProblemSpec& problem, const NirdResult& result,
                                         const NirdConfig& config);

/// Baseline used by measure_KQ.
NiResult baseline_solve(const ProblemSpec& problem, std::size_t budget, const NirdConfig& config);

std::optional<Table1> measure_table1(const ProblemSpec& problem, const NirdResult& result,
                                     int degree);

MetricsReport measure_all(const ProblemSpec& problem, const NirdConfig& config,
                          const NirdResult& result, bool with_table1);

/// "%.16e" (17 significant digits); "nan"/"inf" for non-finite values.
std::string format_real(double v);

/// Header "pou,P,eta_ratio,N_c,C0,Q1,K1,Q2,K2".
std::string metrics_csv_header();
/// One row; missing iterations or C0 are written as "nan".
std::string metrics_csv_row(const MetricsReport& report);

}  // namespace nird
