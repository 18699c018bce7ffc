#include "nird/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

namespace nird {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double smooth_source(Point x) { return std::sin(kPi * x.x) * std::sin(kPi * x.y); }

std::function<double(Point)> oscillatory_source(int P, std::uint64_t seed) {
  const int m = oscillation_count(P);
  auto amp = std::make_shared<const std::vector<double>>(oscillation_amplitudes(m, seed));
  return [m, amp](Point x) {
    const int i = std::clamp(static_cast<int>(std::floor(m * x.x)), 0, m - 1);
    const int j = std::clamp(static_cast<int>(std::floor(m * x.y)), 0, m - 1);
    return (*amp)[j * m + i] * std::sin(m * kPi * x.x) * std::sin(m * kPi * x.y);
  };
}

double wavefront_term(double r, double a, double r0) {
  r = std::max(r, 1e-12);
  const double d = 1.0 + a * a * (r0 - r) * (r0 - r);
  return -(a + a * a * a * (r0 * r0 - r * r)) / (r * d * d);
}

}  // namespace

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{
      "poisson_smooth", "poisson_oscillatory", "poisson_localized", "advdiff_in",
      "advdiff_out",    "jump_checkerboard",   "anisotropic",       "wavefront"};
  return names;
}

int oscillation_count(int P) {
  if (P < 1) throw std::invalid_argument("oscillation_count: P must be positive");
  return static_cast<int>(std::lround(3.0 * std::sqrt(static_cast<double>(P))));
}

std::vector<double> oscillation_amplitudes(int count, std::uint64_t seed) {
  std::uint64_t state = seed;
  std::mt19937_64 rng(splitmix64(state));
  std::vector<double> out(static_cast<std::size_t>(count) * count);
  for (double& a : out) {
    // Top 53 bits give a uniform double in [0,1) independent of the library.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    a = 2.0 * u - 1.0;
  }
  return out;
}

double wavefront_source(Point x) {
  constexpr double a = 100.0, r0 = 0.3;
  const double r1 = std::hypot(x.x - 0.65, x.y - 0.65);
  const double r2 = std::hypot(x.x - 0.35, x.y - 0.35);
  return wavefront_term(r1, a, r0) + wavefront_term(r2, a, r0);
}

ProblemSpec instantiate(const ProblemId& id) {
  const auto& names = problem_names();
  if (std::find(names.begin(), names.end(), id.name) == names.end()) {
    throw std::invalid_argument("unknown problem '" + id.name + "'");
  }
  ProblemSpec p;
  p.name = id.name;
  const bool oscillatory = id.oscillatory || id.name == "poisson_oscillatory";
  p.f = smooth_source;
  p.exact_p = [](Point x) { return smooth_source(x) / (2.0 * kPi * kPi); };
  if (id.name == "poisson_localized") {
    p.f = [](Point x) {
      return (x.x >= 0.49 && x.x <= 0.51 && x.y >= 0.49 && x.y <= 0.51) ? 100.0 : 0.0;
    };
    p.exact_p = nullptr;
  } else if (id.name == "advdiff_in" || id.name == "advdiff_out") {
    p.b = {id.name == "advdiff_in" ? -15.0 : 15.0, 0.0};
    p.sides[static_cast<int>(Side::East)] = BoundaryType::Neumann;
    p.exact_p = nullptr;
  } else if (id.name == "jump_checkerboard") {
    p.alpha = [](Point x) {
      const bool low = x.x <= 0.5 && x.y <= 0.5;
      const bool high = x.x >= 0.5 && x.y >= 0.5;
      return (low || high) ? 1.0 : 100.0;
    };
    p.exact_p = nullptr;
  } else if (id.name == "anisotropic") {
    p.epsilon = 1e-3;
    p.exact_p = nullptr;
  } else if (id.name == "wavefront") {
    p.f = wavefront_source;
    p.exact_p = nullptr;
    p.extra_quadrature = 2;
  }
  if (oscillatory) {
    if (id.name == "poisson_localized" || id.name == "wavefront") {
      throw std::invalid_argument("problem '" + id.name + "' has no oscillatory variant");
    }
    p.f = oscillatory_source(id.P, id.seed);
    p.exact_p = nullptr;
    p.extra_quadrature = 2;
    if (id.name != "poisson_oscillatory") p.name = id.name + "+oscillatory";
  }
  p.validate();
  return p;
}

}  // namespace nird
