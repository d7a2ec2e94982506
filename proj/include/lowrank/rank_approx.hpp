#pragma once

#include <stdexcept>
#include <vector>

#include "lowrank/errors.hpp"
#include "lowrank/linalg.hpp"

namespace lowrank {

// Subtracted before taking a ceiling so values a hair above an integer do not
// round the rank up.
inline constexpr double kRoundGuard = 1e-6;

// ceil(value - guard), clamped at zero.
int rounded_rank(double value, double guard = kRoundGuard);

struct PhiResult {
  double value = 0.0;
  double epsilon = 0.0;
  Vector singular_values;  // numerically nonzero, descending
  int numerical_rank = 0;
};

// tr(X (X^T X + eps I)^{-1} X^T), evaluated with a Cholesky solve on the
// smaller of the two Gram matrices.
double phi_direct(const Matrix& x, double eps);

// Sum over strictly positive sigma_i of sigma_i^2 / (sigma_i^2 + eps).
double phi_sv(const Vector& sigma, double eps);

// Surrogate value from the SVD, restricted to numerically nonzero singular
// values.
PhiResult phi(const Matrix& x, double eps);

struct RankGap {
  double gap_exact = 0.0;  // rank - phi = sum eps / (sigma^2 + eps)
  double gap_upper = 0.0;  // eps * sum 1 / sigma^2
};

RankGap rank_gap(const Matrix& x, double eps);

struct RankSchemeStep {
  double epsilon;
  double phi_value;
  int rounded_rank;
};

struct RankSchemeTrace {
  std::vector<RankSchemeStep> iterations;
  int final_rank = 0;
  double final_epsilon = 0.0;
};

struct RankSchemeOptions {
  double epsilon0 = 0.0;  // <= 0 selects ||X||_F^2 (or 1 for X = 0)
  double beta = 0.25;
  int stability_window = 3;
  int max_iters = 60;
  double round_guard = kRoundGuard;
  // Consecutive surrogate values must also agree to this tolerance before the
  // rounded rank counts as stable; < 0 selects round_guard.
  double stability_tol = -1.0;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, RankSchemeTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const RankSchemeTrace& trace() const { return trace_; }

 private:
  RankSchemeTrace trace_;
};

// Shrinks eps geometrically and rounds the surrogate up until the rounded
// value settles. Throws NoConvergence when max_iters runs out first.
RankSchemeTrace exact_rank_scheme(const Matrix& x, const RankSchemeOptions& opts = {});

// eps * min(m, n) / delta^2: worst-case rank - phi over matrices whose nonzero
// singular values are at least delta.
double uniform_rank_bound(int m, int n, double delta, double eps);

}  // namespace lowrank
