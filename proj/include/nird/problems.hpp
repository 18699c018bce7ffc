#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nird/fosls.hpp"

namespace nird {

/// A catalog entry.  `oscillatory` swaps the smooth right-hand side
/// sin(pi x) sin(pi y) for the randomly modulated oscillatory one on every
/// problem built on the smooth source; poisson_oscillatory has it built in.
struct ProblemId {
  std::string name = "poisson_smooth";
  int P = 16;
  std::uint64_t seed = 1;
  bool oscillatory = false;
};

const std::vector<std::string>& problem_names();

/// Throws std::invalid_argument for unknown names.
ProblemSpec instantiate(const ProblemId& id);

/// Number of sine half-periods per direction in the oscillatory source:
/// round(3 sqrt(P)).
int oscillation_count(int P);

/// Per-cell amplitudes in [-1, 1] (row-major over the count x count cells).
std::vector<double> oscillation_amplitudes(int count, std::uint64_t seed);

/// Wave-front source with two centres; radii below 1e-12 are clamped.
double wavefront_source(Point x);

}  // namespace nird
