#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/rank_approx.hpp"
#include "lowrank/sdp/model.hpp"
#include "lowrank/sdp/solver.hpp"

namespace lowrank {

enum class Shape { general, symmetric };

struct AffineConstraint {
  Matrix coeff;  // <coeff, X> = rhs
  double rhs;
};

// Affine feasible set {X : <A_i, X> = b_i} with an optional PSD requirement
// and trace box for symmetric X.
struct AffineSetSpec {
  Shape shape = Shape::general;
  int rows = 1;
  int cols = 1;
  std::vector<AffineConstraint> constraints;
  bool psd_required = false;
  std::optional<std::pair<double, double>> trace_box;

  static AffineSetSpec general(int m, int n);
  static AffineSetSpec symmetric(int n);

  AffineSetSpec& add(const Matrix& coeff, double rhs);

  // Throws InvalidInput when the description is inconsistent.
  void validate() const;
  // Largest |<A_i, X> - b_i| plus, for PSD sets, the negative eigenvalue part
  // and trace box violation.
  double violation(const Matrix& x) const;
};

// Row and block indices of a built approximation model. Families:
//   pin       top-left of the unit LMI equals I
//   link      PSD block X equals the off-diagonal X (PSD sets only)
//   symmetry  off-diagonal X is symmetric (symmetric, non-PSD sets)
//   coupling  the two LMIs share X
//   shift     Z + eps I block of one LMI equals Z block of the other plus eps I
//   data      <A_i, X> = b_i
struct ApproxLayout {
  int rows = 0;
  int cols = 0;
  int x_block = -1;
  int unit_block = -1;   // [[I, X], [X^T, Z]]
  int shift_block = -1;  // [[Y, X], [X^T, Z + eps I]]
  std::vector<int> pin_rows;
  std::vector<int> link_rows;
  std::vector<int> symmetry_rows;
  std::vector<int> coupling_rows;
  std::vector<int> shift_rows;
  std::vector<int> data_rows;
  int trace_box = -1;
};

struct ApproxModel {
  sdp::BlockSdpProblem problem;
  ApproxLayout layout;
  double epsilon = 0.0;
  double gamma = 0.0;
};

// min tr(Y) + (1/gamma) tr(Z) subject to [[Y, X], [X^T, Z + eps I]] psd,
// [[I, X], [X^T, Z]] psd and X in the set.
ApproxModel build_approx_sdp(const AffineSetSpec& c, double eps, double gamma);

struct ApproxPoint {
  Matrix x;
  Matrix y;
  Matrix z;
  // tr(X (Z + eps I)^{-1} X^T) with the solver's Z + eps I block: the smallest
  // tr(Y) compatible with the returned X and Z.
  double tr_y = 0.0;
  double tr_y_raw = 0.0;
  double tr_z = 0.0;
};

ApproxPoint extract_point(const ApproxModel& model, const sdp::SdpSolution& sol);

enum class RankMinStatus { converged, not_stabilized, numerical_failure, infeasible };

const char* to_string(RankMinStatus s);

struct RankMinStage {
  double epsilon;
  double gamma;
  double tr_y;
  double tr_z;
  int rank_rounded;
  Matrix x;
  sdp::SolveStatus solver_status;
  int solver_iterations;
};

struct RankMinResult {
  std::vector<RankMinStage> trajectory;
  int rank_estimate = 0;
  double least_fnorm_estimate = 0.0;
  RankMinStatus status = RankMinStatus::not_stabilized;
  std::string message;
  // Largest increase of tr(Y) from one stage to the next (diagnostic only).
  double max_tr_y_increase = 0.0;
};

struct RankMinSchedule {
  double epsilon0 = 1.0;
  double beta = 0.25;
  double p = 2.0;  // gamma = eps^p
  int stability_window = 3;
  int max_stages = 25;
  double round_guard = kRoundGuard;
  double max_penalty = 1e12;  // stop once 1/gamma exceeds this
  sdp::SolverOptions solver = tight_solver_options();

  static sdp::SolverOptions tight_solver_options();
};

RankMinResult solve_rankmin(const AffineSetSpec& c, const RankMinSchedule& schedule = {});

// CSV with header stage,epsilon,gamma,trY,trZ,rank_rounded.
void write_trajectory_csv(const RankMinResult& r, std::ostream& out);

struct NuclearNormResult {
  Matrix x;
  double value = 0.0;
  sdp::SolveStatus status = sdp::SolveStatus::numerical_failure;
};

// min ||X||_* over the set; min tr(X) for PSD sets.
NuclearNormResult nuclear_norm_min(const AffineSetSpec& c,
                                   const sdp::SolverOptions& opts = RankMinSchedule::tight_solver_options());

// numerical_rank(X) + ||X||_F^2 / eta.
double penalized_rank_objective(const Matrix& x, double eta);

struct BruteForceRank {
  int min_rank = 0;
  std::vector<int> minimizers;  // indices into the candidate list
  int least_fnorm_minimizer = -1;
  // Whether the candidate of least F-norm overall has the minimum rank.
  bool least_fnorm_has_min_rank = false;
};

BruteForceRank brute_force_min_rank(const std::vector<Matrix>& candidates);

}  // namespace lowrank
