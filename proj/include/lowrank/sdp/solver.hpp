#pragma once

#include <string>
#include <vector>

#include "lowrank/sdp/model.hpp"

namespace lowrank::sdp {

enum class SolveStatus {
  optimal,
  primal_infeasible,  // dual fields hold a Farkas ray scaled to dual objective 1
  dual_infeasible,    // primal fields hold an improving ray scaled to objective -1
  max_iterations,
  numerical_failure,
};

const char* to_string(SolveStatus s);

struct SolverOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  double repair_tol = 1e-4;
  int max_iterations = 200;
  // A ray is accepted as an infeasibility certificate when its residual,
  // relative to its objective, drops below this.
  double infeas_tol = 1e-8;
  double step_fraction = 0.98;
  bool verbose = false;
};

// Box multipliers: t1 >= 0 prices the lower bound, t2 <= 0 the
// upper bound.
struct BoxMultipliers {
  double t1 = 0.0;
  double t2 = 0.0;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<Matrix> blocks;
  Vector scalars;
  Vector y;  // one multiplier per equality
  std::vector<BoxMultipliers> box_multipliers;
  std::vector<Matrix> dual_slacks;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  // Valid lower bound on the optimum; NaN when no certified bound exists.
  double certified_lower_bound = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  std::string message;
};

// Primal-dual path following with Mehrotra predictor-corrector steps and the
// HKM search direction. Throws ModelError for ill-posed models; numerical
// trouble is reported through the status.
SdpSolution solve(const BlockSdpProblem& p, const SolverOptions& opts = {});

// Makes the dual point of sol exactly feasible by shifting each dual slack
// by its negative eigenvalue part and charges the shift against the dual
// objective. Throws BoundUnavailable if the charge exceeds
// repair_tol * (1 + |dual objective|).
double certified_lower_bound(const SdpSolution& sol, const BlockSdpProblem& p,
                             double repair_tol = 1e-4);

// Dual slack C - A^T y per PSD block for the given multipliers, computed
// exactly from the model data.
std::vector<Matrix> dual_slack(const BlockSdpProblem& p, const Vector& y,
                               const std::vector<BoxMultipliers>& box);

// b^T y + sum(lower * t1 + upper * t2) + objective constant.
double dual_value(const BlockSdpProblem& p, const Vector& y,
                  const std::vector<BoxMultipliers>& box);

}  // namespace lowrank::sdp
