#pragma once

#include <string>
#include <vector>

namespace nird {

/// Latency model inputs: nu communications per V-cycle level, V-cycle
/// convergence factor rho, per-level error reduction beta, coarsening factor
/// c, elements per processor E, processors P and NIRD iterations alpha.
struct MachineProblemParams {
  double nu = 20.0;
  double rho = 0.1;
  double beta = 9.0;
  double c = 4.0;
  double E = 1e6;
  double P = 1024.0;
  int alpha = 2;

  /// Throws std::invalid_argument outside 0<rho<1, beta>1, c>1, nu>=1,
  /// E>=1, alpha>=0 and P a power of two.
  void validate() const;
};

/// nu=20, rho=0.1, beta=9, c=4.
MachineProblemParams easy_preset();
/// nu=40, rho=0.8, beta=9, c=2.
MachineProblemParams hard_preset();
/// "easy" or "hard"; throws std::invalid_argument otherwise.
MachineProblemParams preset(const std::string& name);

/// nu log_{1/rho}(beta) (L_E L_P + L_P^2/2 + L_E + L_P/2) with L_x = log_c x.
double comm_cost_traditional(const MachineProblemParams& p);
/// alpha log2 P.
double comm_cost_nird(const MachineProblemParams& p);

}  // namespace nird
