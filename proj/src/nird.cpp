#include "nird/nird.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "nird/error.hpp"

namespace nird {

namespace {

bool power_of_two(int p) { return p >= 1 && (p & (p - 1)) == 0; }

int log2_exact(int p) {
  int r = 0;
  while ((1 << r) < p) ++r;
  return r;
}

template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(n, 1));
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads == 1) {
    for (int i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  // Lowest failing index wins so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Field moved onto `space`, whose mesh must refine the field's mesh.
DiscreteField transfer(const DiscreteField& f, const std::shared_ptr<const LagrangeSpace>& space) {
  if (f.space().degree() == space->degree() && f.mesh().same_leaves(space->mesh())) {
    return DiscreteField(space, f.coefficients());
  }
  return prolong(f, space);
}

template <class Fn>
auto tagged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NirdError& e) {
    throw NirdError(stage + "/" + e.stage(), e.what());
  } catch (const std::invalid_argument& e) {
    throw NirdError(stage, e.what());
  }
}

}  // namespace

void NirdConfig::validate() const {
  if (!power_of_two(P)) throw std::invalid_argument("P must be a power of two");
  if (E < static_cast<std::size_t>(P)) throw std::invalid_argument("E must be at least P");
  if (degree < 1 || degree > kMaxDegree) throw std::invalid_argument("degree out of range");
  if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  if (!(prep_fraction > 0.0) || !(prep_ratio >= 1.0)) {
    throw std::invalid_argument("invalid preprocessing thresholds");
  }
  if (macro_n < 1) throw std::invalid_argument("macro_n must be positive");
}

std::size_t CommLedger::total_rounds() const {
  std::size_t n = 0;
  for (const auto& it : iterations) n += static_cast<std::size_t>(it.rounds);
  return n;
}

std::size_t CommLedger::total_messages() const {
  std::size_t n = 0;
  for (const auto& it : iterations) {
    for (const auto& round : it.sent) n += std::accumulate(round.begin(), round.end(), 0ul);
  }
  return n;
}

int default_threads() {
  if (const char* env = std::getenv("NIRD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double eta_ratio(const HomePartition& partition, const Eigen::VectorXd& errors_squared) {
  std::vector<double> eta(partition.ranks, 0.0);
  for (std::size_t k = 0; k < partition.owner.size(); ++k) {
    eta[partition.owner[k]] += errors_squared[static_cast<Eigen::Index>(k)];
  }
  const auto [lo, hi] = std::minmax_element(eta.begin(), eta.end());
  if (*lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(*hi / *lo);
}

Preprocessed preprocess(const ProblemSpec& problem, const NirdConfig& config) {
  config.validate();
  const bool uniform = config.preprocess == PreprocessMode::Uniform ||
                       problem.name.find("oscillatory") != std::string::npos;
  NiOptions opt;
  opt.degree = config.degree;
  opt.solver = config.solver;
  auto mesh = std::make_shared<const MeshForest>(
      std::make_shared<const MacroMesh>(MacroMesh::unit_square(config.macro_n)));
  if (mesh->num_leaves() > config.E) {
    throw std::invalid_argument("E is smaller than the macro mesh");
  }
  std::vector<NiLevel> history;
  for (int level = 0;; ++level) {
    LevelSolve solved = tagged("preprocess@level" + std::to_string(level),
                               [&] { return solve_level(problem, problem.rhs_function(), mesh, opt); });
    history.push_back({mesh->num_leaves(), solved.lsf, solved.modified_lsf});
    const std::size_t n = mesh->num_leaves();
    double ratio = std::numeric_limits<double>::infinity();
    std::optional<HomePartition> part;
    if (n >= static_cast<std::size_t>(config.P)) {
      const Eigen::VectorXd e = solved.errors_squared.cwiseSqrt();
      part = partition_home_domains(mesh, std::span<const double>(e.data(), n), config.P);
      ratio = eta_ratio(*part, solved.errors_squared);
    }
    const bool more = n < static_cast<std::size_t>(config.P) ||
                      (static_cast<double>(n) < config.prep_fraction * static_cast<double>(config.E) &&
                       ratio > config.prep_ratio);
    std::shared_ptr<const MeshForest> next;
    if (more) {
      std::vector<int> marked;
      if (!uniform) marked = mark_next(solved, opt);
      auto candidate = std::make_shared<const MeshForest>(
          marked.empty() ? mesh->refine_all() : mesh->refine(marked));
      if (candidate->num_leaves() <= config.E) {
        next = std::move(candidate);
      } else if (!part) {
        throw NirdError("preprocess", "leaf budget exhausted before N_c >= P");
      }
    }
    if (!next) {
      PartitionOfUnity pou(std::move(*part), config.pou);
      return Preprocessed{mesh, std::move(solved), std::move(pou), ratio, std::move(history)};
    }
    mesh = std::move(next);
  }
}

RhsFunction subproblem_rhs(const ProblemSpec& problem, const PartitionOfUnity& pou, int rank,
                           const DiscreteField& u) {
  return [&problem, &pou, rank, &u](Point x) -> Vec4 {
    const int coarse = pou.mesh().locate(x).leaf;
    const auto& sup = pou.support_ranks(coarse);
    if (!std::binary_search(sup.begin(), sup.end(), rank)) return {0.0, 0.0, 0.0, 0.0};
    const double c = pou.chi_in(rank, coarse, x);
    if (c == 0.0) return {0.0, 0.0, 0.0, 0.0};
    const Vec4 f = problem.rhs(x);
    const Vec4 lu = apply_L(problem, u, x);
    return {c * (f[0] - lu[0]), c * (f[1] - lu[1]), c * (f[2] - lu[2]), c * (f[3] - lu[3])};
  };
}

RankResult subproblem_solve(const ProblemSpec& problem, const Preprocessed& pre, int rank,
                            const DiscreteField& u, const NirdConfig& config) {
  const std::string stage = "subproblem[" + std::to_string(rank) + "]";
  return tagged(stage, [&] {
    const RhsFunction rhs = subproblem_rhs(problem, pre.pou, rank, u);
    NiOptions opt;
    opt.degree = config.degree;
    opt.budget = config.E;
    opt.functional = config.functional;
    opt.solver = config.solver;
    std::vector<NiLevel> history;
    LevelSolve final = [&] {
      if (config.forced_mesh) return solve_level(problem, rhs, config.forced_mesh, opt);
      NiResult ni = ni_solve(problem, rhs, *pre.mesh, opt);
      history = std::move(ni.history);
      return std::move(ni.final);
    }();
    if (config.forced_mesh) {
      history.push_back({final.space->mesh().num_leaves(), final.lsf, final.modified_lsf});
    }
    if (!final.kernel) {
      final.kernel = kernel_component(problem, final.space, final.samples, config.solver);
      final.modified_errors_squared = element_lsf_squared(
          problem, final.field, subtract_kernel(problem, final.samples, *final.kernel));
      final.modified_lsf = std::sqrt(final.modified_errors_squared.sum());
    }
    const MeshForest& sub = final.space->mesh();
    const std::vector<int> parent = pre.mesh->containing_leaves(sub);
    const auto& owner = pre.pou.partition().owner;
    RankResult out{rank, final.space->mesh_ptr(), final.field, std::move(history), {}, {}, 0, 0.0, 0.0};
    out.coarse_modified_sq.assign(pre.mesh->num_leaves(), 0.0);
    out.coarse_naive_sq.assign(pre.mesh->num_leaves(), 0.0);
    double min_home = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < sub.num_leaves(); ++l) {
      const double m2 = final.modified_errors_squared[static_cast<Eigen::Index>(l)];
      out.coarse_modified_sq[parent[l]] += m2;
      out.coarse_naive_sq[parent[l]] += final.errors_squared[static_cast<Eigen::Index>(l)];
      const double e = std::sqrt(m2);
      out.max_error = std::max(out.max_error, e);
      if (owner[parent[l]] == rank) {
        ++out.home_leaves;
        min_home = std::min(min_home, e);
      }
    }
    out.min_home_error = std::isfinite(min_home) ? min_home : 0.0;
    return out;
  });
}


Recombined recombine(const DiscreteField& u, const std::vector<RankResult>& ranks, int degree) {
  const int P = static_cast<int>(ranks.size());
  if (!power_of_two(P)) throw NirdError("recombine", "rank count must be a power of two");
  std::vector<std::shared_ptr<const MeshForest>> mesh(P);
  std::vector<DiscreteField> field;
  field.reserve(P);
  for (int l = 0; l < P; ++l) {
    if (ranks[l].rank != l) throw NirdError("recombine", "results out of rank order");
    if (!(ranks[l].mesh->macro() == u.mesh().macro())) {
      throw NirdError("recombine", "mismatched macro meshes");
    }
    mesh[l] = ranks[l].mesh;
    field.push_back(ranks[l].delta);
  }
  const int rounds = log2_exact(P);
  IterationComm comm{rounds, std::vector<std::vector<int>>(rounds, std::vector<int>(P, 0)),
                     std::vector<std::vector<int>>(rounds, std::vector<int>(P, 0))};
  for (int r = 0; r < rounds; ++r) {
    for (int l = 0; l < P; ++l) {
      const int p = l ^ (1 << r);
      ++comm.sent[r][l];
      ++comm.received[r][p];
      if (p < l) continue;
      // Both partners form the same union and the same ordered sum.
      auto joined = std::make_shared<const MeshForest>(mesh_union(*mesh[l], *mesh[p]));
      auto space = std::make_shared<const LagrangeSpace>(joined, degree);
      DiscreteField sum(space, transfer(field[l], space).coefficients() +
                                   transfer(field[p], space).coefficients());
      mesh[l] = mesh[p] = joined;
      field[l] = sum;
      field[p] = std::move(sum);
    }
  }
  auto joined = std::make_shared<const MeshForest>(mesh_union(u.mesh(), *mesh[0]));
  auto space = std::make_shared<const LagrangeSpace>(joined, degree);
  DiscreteField next(space, transfer(u, space).coefficients() + transfer(field[0], space).coefficients());
  return Recombined{joined, std::move(next), std::move(comm)};
}

NirdResult nird_run(const ProblemSpec& problem, const NirdConfig& config) {
  config.validate();
  problem.validate();
  Preprocessed pre = preprocess(problem, config);
  NirdResult result{std::move(pre), 0.0, {}, {}};
  result.initial_lsf = result.pre.solution.lsf;
  const int threads = config.threads > 0 ? config.threads : default_threads();
  DiscreteField u = result.pre.solution.field;
  for (int i = 1; i <= config.iterations; ++i) {
    std::vector<std::optional<RankResult>> slots(config.P);
    parallel_for(config.P, threads, [&](int l) {
      slots[l] = subproblem_solve(problem, result.pre, l, u, config);
    });
    std::vector<RankResult> ranks;
    std::size_t total = 0;
    for (auto& s : slots) {
      total += s->mesh->num_leaves();
      ranks.push_back(std::move(*s));
    }
    Recombined rec = tagged("recombine", [&] { return recombine(u, ranks, config.degree); });
    const RhsSamples samples =
        sample_rhs(*rec.mesh, problem.quadrature_degree(config.degree), problem.rhs_function());
    const double value = lsf(problem, rec.u, samples);
    result.ledger.iterations.push_back(rec.comm);
    result.iterations.push_back(IterationRecord{i, rec.mesh, rec.u, std::move(ranks), value,
                                                rec.mesh->num_leaves(), total});
    u = std::move(rec.u);
  }
  return result;
}

}  // namespace nird
