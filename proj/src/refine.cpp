#include "nird/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nird/error.hpp"

namespace nird {

double ace_objective(std::span<const double> sorted_desc_squared, std::size_t count, double r,
                     double r_c) {
  const double reduction = std::pow(2.0, -2.0 * r_c);
  double top = 0.0, rest = 0.0;
  for (std::size_t i = 0; i < sorted_desc_squared.size(); ++i) {
    (i < count ? top : rest) += sorted_desc_squared[i];
  }
  const double gamma = (top * reduction + rest) / (top + rest);
  const double work = static_cast<double>(sorted_desc_squared.size()) * (1.0 + 3.0 * r);
  return std::log(gamma) / work;
}

std::vector<int> ace_select(std::span<const double> errors, const AceModel& model) {
  if (!(model.r_c > 0.0) || model.grid_steps < 1) {
    throw std::invalid_argument("ace_select: invalid model");
  }
  const std::size_t n = errors.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (double e : errors) {
    if (!(e >= 0.0)) throw std::invalid_argument("ace_select: errors must be nonnegative");
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return errors[a] > errors[b]; });
  if (n == 0 || errors[order[0]] == 0.0) return {};

  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = errors[order[i]] * errors[order[i]];
  // Suffix sums give every candidate in one pass.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sq[i];
  const double total = prefix[n];
  const double reduction = std::pow(2.0, -2.0 * model.r_c);

  std::size_t best_count = 0;
  double best = 0.0;
  for (int k = 1; k <= model.grid_steps; ++k) {
    const std::size_t count =
        (static_cast<std::size_t>(k) * n + model.grid_steps - 1) / model.grid_steps;
    const double r = static_cast<double>(k) / model.grid_steps;
    const double top = prefix[count];
    const double gamma = (top * reduction + (total - top)) / total;
    const double value = std::log(gamma) / (static_cast<double>(n) * (1.0 + 3.0 * r));
    if (best_count == 0 || value < best) {
      best = value;
      best_count = count;
    }
  }
  std::vector<int> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best_count));
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::VectorXd LevelSolve::indicators(Functional mode) const {
  const Eigen::VectorXd& e2 = mode == Functional::Kernel ? modified_errors_squared : errors_squared;
  return e2.cwiseSqrt();
}

LevelSolve solve_level(const ProblemSpec& problem, const RhsFunction& rhs,
                       std::shared_ptr<const MeshForest> mesh, const NiOptions& options,
                       const DiscreteField* guess) {
  auto space = std::make_shared<const LagrangeSpace>(std::move(mesh), options.degree);
  RhsSamples samples =
      sample_rhs(space->mesh(), problem.quadrature_degree(options.degree), rhs);
  DiscreteField field = solve_fosls(problem, space, samples, options.solver, guess);
  LevelSolve out{space, std::move(samples), std::move(field), std::nullopt, {}, {}, 0.0, 0.0};
  out.errors_squared = element_lsf_squared(problem, out.field, out.samples);
  out.lsf = std::sqrt(out.errors_squared.sum());
  if (options.functional == Functional::Kernel) {
    out.kernel = kernel_component(problem, space, out.samples, options.solver);
    out.modified_errors_squared =
        element_lsf_squared(problem, out.field, subtract_kernel(problem, out.samples, *out.kernel));
  } else {
    out.modified_errors_squared = out.errors_squared;
  }
  out.modified_lsf = std::sqrt(out.modified_errors_squared.sum());
  return out;
}

std::vector<int> mark_next(const LevelSolve& level, const NiOptions& options) {
  const std::size_t n = level.space->mesh().num_leaves();
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (options.uniform) return all;
  const Eigen::VectorXd e = level.indicators(options.functional);
  AceModel model;
  model.r_c = options.ace_rate > 0.0 ? options.ace_rate : static_cast<double>(options.degree);
  std::vector<int> marked = ace_select(std::span<const double>(e.data(), n), model);
  if (marked.empty() && options.uniform_when_flat) return all;
  return marked;
}

NiResult ni_solve(const ProblemSpec& problem, const RhsFunction& rhs, const MeshForest& start,
                  const NiOptions& options) {
  if (options.budget < start.num_leaves()) {
    throw std::invalid_argument("ni_solve: budget below the start mesh size");
  }
  const bool warm = options.solver.kind == SolverKind::ConjugateGradient;
  auto mesh = std::make_shared<const MeshForest>(start);
  std::optional<DiscreteField> guess;
  std::vector<NiLevel> history;
  for (int level = 0;; ++level) {
    LevelSolve solved = [&] {
      try {
        return solve_level(problem, rhs, mesh, options, guess ? &*guess : nullptr);
      } catch (const NirdError& e) {
        throw NirdError(e.stage() + "@level" + std::to_string(level), e.what());
      }
    }();
    history.push_back({mesh->num_leaves(), solved.lsf, solved.modified_lsf});
    std::shared_ptr<const MeshForest> next;
    if (mesh->num_leaves() < options.budget) {
      const std::vector<int> marked = mark_next(solved, options);
      if (!marked.empty()) {
        auto candidate = std::make_shared<const MeshForest>(mesh->refine(marked));
        if (candidate->num_leaves() <= options.budget) next = std::move(candidate);
      }
    }
    if (!next) {
      return NiResult{std::move(solved), std::move(history)};
    }
    if (warm) {
      guess = prolong(solved.field, std::make_shared<const LagrangeSpace>(next, options.degree));
    }
    mesh = std::move(next);
  }
}

}  // namespace nird
