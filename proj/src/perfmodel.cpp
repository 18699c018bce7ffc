#include "nird/perfmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace nird {

void MachineProblemParams::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  if (!(beta > 1.0)) throw std::invalid_argument("beta must exceed 1");
  if (!(c > 1.0)) throw std::invalid_argument("c must exceed 1");
  if (!(nu >= 1.0)) throw std::invalid_argument("nu must be at least 1");
  if (!(E >= 1.0)) throw std::invalid_argument("E must be at least 1");
  if (alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
  const double l = std::log2(P);
  if (!(P >= 1.0) || l != std::round(l)) throw std::invalid_argument("P must be a power of two");
}

MachineProblemParams easy_preset() { return {20.0, 0.1, 9.0, 4.0, 1e6, 1024.0, 2}; }
MachineProblemParams hard_preset() { return {40.0, 0.8, 9.0, 2.0, 1e6, 1024.0, 2}; }

MachineProblemParams preset(const std::string& name) {
  if (name == "easy") return easy_preset();
  if (name == "hard") return hard_preset();
  throw std::invalid_argument("unknown preset: " + name);
}

double comm_cost_traditional(const MachineProblemParams& p) {
  p.validate();
  const double le = std::log(p.E) / std::log(p.c);
  const double lp = std::log(p.P) / std::log(p.c);
  const double cycles = std::log(p.beta) / std::log(1.0 / p.rho);
  return p.nu * cycles * (le * lp + 0.5 * lp * lp + le + 0.5 * lp);
}

double comm_cost_nird(const MachineProblemParams& p) {
  p.validate();
  return p.alpha * std::log2(p.P);
}

}  // namespace nird
