#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "nird/pou.hpp"
#include "nird/refine.hpp"

namespace nird {

enum class PreprocessMode { Adaptive, Uniform };

struct NirdConfig {
  int P = 16;
  std::size_t E = 2000;
  int degree = 1;
  PouKind pou = PouKind::Discontinuous;
  int iterations = 2;
  Functional functional = Functional::Kernel;
  double prep_fraction = 0.1;
  double prep_ratio = 10.0;
  /// Adaptive unless forced; problems with an oscillatory source always
  /// preprocess uniformly.
  PreprocessMode preprocess = PreprocessMode::Adaptive;
  int macro_n = 2;
  SolverOptions solver{};
  /// Worker threads for rank solves; 0 reads NIRD_THREADS (default: hardware).
  int threads = 0;
  /// Test hook: every rank solves once on this mesh instead of running NI.
  std::shared_ptr<const MeshForest> forced_mesh;

  /// Throws std::invalid_argument unless P is a power of two, E >= P and
  /// the remaining fields are in range.
  void validate() const;
};

/// Butterfly exchange accounting.  messages[round][rank] counts sends
/// (every send is matched by exactly one receive at the partner).
struct IterationComm {
  int rounds = 0;
  std::vector<std::vector<int>> sent;
  std::vector<std::vector<int>> received;
};

struct CommLedger {
  std::vector<IterationComm> iterations;

  std::size_t total_rounds() const;
  std::size_t total_messages() const;
};

struct Preprocessed {
  std::shared_ptr<const MeshForest> mesh;
  LevelSolve solution;
  PartitionOfUnity pou;
  double eta_ratio = 0.0;
  std::vector<NiLevel> history;
};

/// Per-home-domain LSF ratio max/min for a partition (inf when a domain
/// carries zero error, including the fully unresolved all-zero case).
double eta_ratio(const HomePartition& partition, const Eigen::VectorXd& errors_squared);

Preprocessed preprocess(const ProblemSpec& problem, const NirdConfig& config);

/// x -> chi_l(x) (F(x) - L u(x)).
RhsFunction subproblem_rhs(const ProblemSpec& problem, const PartitionOfUnity& pou, int rank,
                           const DiscreteField& u);

/// Outcome of one rank's subproblem, with the residual data the metrics need.
struct RankResult {
  int rank = 0;
  std::shared_ptr<const MeshForest> mesh;
  DiscreteField delta;
  std::vector<NiLevel> history;
  /// Squared kernel-corrected (and naive) subproblem LSF per coarse leaf.
  std::vector<double> coarse_modified_sq;
  std::vector<double> coarse_naive_sq;
  /// Leaves of the subproblem mesh inside the rank's home domain.
  std::size_t home_leaves = 0;
  /// Smallest per-leaf modified error inside the home domain and the
  /// largest anywhere.
  double min_home_error = 0.0;
  double max_error = 0.0;
};

RankResult subproblem_solve(const ProblemSpec& problem, const Preprocessed& pre, int rank,
                            const DiscreteField& u, const NirdConfig& config);

struct Recombined {
  std::shared_ptr<const MeshForest> mesh;
  DiscreteField u;
  IterationComm comm;
};

/// Butterfly sum: in round r rank l exchanges its running (mesh, field)
/// with l XOR 2^r and both form the union and the sum.  The result is
/// added to `u` on the union of its mesh and the combined mesh.
Recombined recombine(const DiscreteField& u, const std::vector<RankResult>& ranks, int degree);

struct IterationRecord {
  int index = 0;
  std::shared_ptr<const MeshForest> mesh;
  DiscreteField u;
  std::vector<RankResult> ranks;
  double lsf = 0.0;
  std::size_t union_leaves = 0;
  std::size_t total_leaves = 0;
};

struct NirdResult {
  Preprocessed pre;
  double initial_lsf = 0.0;
  std::vector<IterationRecord> iterations;
  CommLedger ledger;
};

NirdResult nird_run(const ProblemSpec& problem, const NirdConfig& config);

/// Worker count from NIRD_THREADS, falling back to the hardware count.
int default_threads();

}  // namespace nird
