#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/rankmin.hpp"
#include "lowrank/sdp/solver.hpp"

namespace lowrank {

// The homogeneous system x^T A_i x = 0, i = 1..m.
struct QuadSystem {
  int n = 0;
  std::vector<SymMatrix> matrices;

  void validate() const;
  double residual(const Vector& x) const;  // max_i |x^T A_i x| / ||x||^2
};

// Trace bounds (1, sqrt(n)) of the normalized rank-one relaxation.
std::pair<double, double> trace_box_constants(int n);

AffineSetSpec relaxation_set(const QuadSystem& q);
ApproxModel build_relaxation(const QuadSystem& q, double eps, double eta);

// Dual certificate of the relaxation. With W = (V, Phi, Q, Theta) the blocks
//   S1 = sum mu_i A_i - (t1 + t2) I - (V + V^T)
//   S2 = [[-Phi, V - Theta], [V^T - Theta^T, I/eta - Q]]
//   S3 = [[I, Theta], [Theta^T, Q]]
// must be PSD, and the certified value is
//   tr(Phi) - eps tr(Q) + t1 + sqrt(n) t2.
struct DualWitness {
  Vector mu;
  double t1 = 0.0;
  double t2 = 0.0;
  Matrix phi;
  Matrix q;
  Matrix v;
  Matrix theta;
};

double witness_value(const DualWitness& w, double eps, int n);
// Block-diagonal 5n x 5n matrix diag(S1, S2, S3).
Matrix witness_matrix(const DualWitness& w, const QuadSystem& q, double eta);
double witness_min_eigenvalue(const DualWitness& w, const QuadSystem& q, double eta);

// Reads the witness off the dual slacks of a relaxation model for the given
// multipliers. The objective only contributes the fixed I and I/eta blocks,
// so the same reading applies to a Farkas ray.
DualWitness witness_from_multipliers(const ApproxModel& model, const Vector& y,
                                     const std::vector<sdp::BoxMultipliers>& box);

// Shifts Q, Phi and t1/t2 just enough to make all three blocks PSD. Returns
// false when no such shift exists (I/eta - Q not positive definite).
bool repair_witness(DualWitness& w, const QuadSystem& q, double eta);

enum class Verdict { certified_zero_only, counterexample_found, inconclusive };

const char* to_string(Verdict v);

struct Counterexample {
  Vector x;
  double residual;
};

struct PencilResult {
  Vector mu;
  double lambda_min;
};

struct CertificateReport {
  Verdict verdict = Verdict::inconclusive;
  double dual_bound = -sdp::kInf;
  double threshold_used = 0.0;  // 1/eta + 1
  double epsilon = 0.0;
  double eta = 0.0;
  // relaxation-dual | relaxation-infeasible | pencil | oracle | none
  std::string route = "none";
  // The alternative strict test dual_bound > 1/eta + 1.
  bool strict_check = false;
  std::optional<DualWitness> witness;
  std::optional<Counterexample> counterexample;
  std::optional<PencilResult> pencil;
  std::vector<std::string> diagnostics;
};

struct OracleOptions {
  int budget = 4000;  // total gradient iterations across restarts
  int restarts = 24;
  std::uint64_t seed = 0;
  double tol = 1e-9;
};

// Multi-start descent of sum_i (x^T A_i x)^2 on the unit sphere followed by
// Gauss-Newton polishing. Restart k uses its own generator seeded from
// (seed, k), so results do not depend on scheduling.
std::optional<Counterexample> nonzero_solution_oracle(const QuadSystem& q,
                                                      const OracleOptions& opts = {});

// max t s.t. sum mu_i A_i - t I psd, |mu_i| <= 1. Returns mu when the optimal
// t exceeds definite_tol and lambda_min(sum mu_i A_i) >= definite_tol / 2.
std::optional<PencilResult> pencil_definite_check(const QuadSystem& q,
                                                  double definite_tol = 1e-8);

struct CertifyOptions {
  // (eps, eta) pairs tried in order; empty selects eta = eps over
  // {1e-2, 1e-3, 1e-4}.
  std::vector<std::pair<double, double>> grid;
  double round_guard = kRoundGuard;
  double definite_tol = 1e-8;
  bool run_oracle = true;
  OracleOptions oracle;
  // Fall back to the witness built from a definite pencil combination.
  bool pencil_route = true;
  sdp::SolverOptions solver;
};

std::vector<std::pair<double, double>> default_certify_grid();

CertificateReport certify_zero_only(const QuadSystem& q, const CertifyOptions& opts = {});

// ceil(bound - 1/eta - round_guard) >= 2. An infinite bound (infeasible
// relaxation) certifies; NaN does not.
bool certifies(double bound, double eta, double round_guard = kRoundGuard);

}  // namespace lowrank
