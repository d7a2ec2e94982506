#include "lowrank/rank_approx.hpp"

#include <algorithm>
#include <cmath>

namespace lowrank {

namespace {

void require_positive_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InvalidParameter("epsilon must be positive and finite");
  }
}

Vector nonzero_singular_values(const Matrix& x) {
  const Vector s = singular_values(x);
  const int r = numerical_rank(s, static_cast<int>(x.rows()), static_cast<int>(x.cols()));
  return s.head(r);
}

}  // namespace

int rounded_rank(double value, double guard) {
  return std::max(0, static_cast<int>(std::ceil(value - guard)));
}

double phi_direct(const Matrix& x, double eps) {
  require_positive_eps(eps);
  require_finite(x, "matrix");
  if (x.size() == 0) return 0.0;
  // tr(X (X^T X + eps I)^{-1} X^T) = tr((X^T X + eps I)^{-1} X^T X); the same
  // quantity with X X^T, so use whichever Gram matrix is smaller.
  const Matrix g = x.rows() >= x.cols() ? Matrix(x.transpose() * x)
                                        : Matrix(x * x.transpose());
  Matrix shifted = g;
  shifted.diagonal().array() += eps;
  const Matrix sol = solve_spd(SymMatrix(shifted), g);
  return sol.trace();
}

double phi_sv(const Vector& sigma, double eps) {
  require_positive_eps(eps);
  double total = 0.0;
  for (int i = 0; i < sigma.size(); ++i) {
    const double s = sigma(i);
    if (s < 0.0 || !std::isfinite(s)) {
      throw InvalidParameter("singular values must be finite and nonnegative");
    }
    if (s > 0.0) {
      const double s2 = s * s;
      total += s2 / (s2 + eps);
    }
  }
  return total;
}

PhiResult phi(const Matrix& x, double eps) {
  require_positive_eps(eps);
  PhiResult out;
  out.epsilon = eps;
  out.singular_values = nonzero_singular_values(x);
  out.numerical_rank = static_cast<int>(out.singular_values.size());
  out.value = phi_sv(out.singular_values, eps);
  return out;
}

RankGap rank_gap(const Matrix& x, double eps) {
  require_positive_eps(eps);
  const Vector s = nonzero_singular_values(x);
  RankGap g;
  for (int i = 0; i < s.size(); ++i) {
    const double s2 = s(i) * s(i);
    g.gap_exact += eps / (s2 + eps);
    g.gap_upper += eps / s2;
  }
  return g;
}

RankSchemeTrace exact_rank_scheme(const Matrix& x, const RankSchemeOptions& opts) {
  require_finite(x, "matrix");
  if (!(opts.beta > 0.0 && opts.beta < 1.0)) {
    throw InvalidParameter("beta must lie in (0, 1)");
  }
  if (opts.stability_window < 1) throw InvalidParameter("stability window must be >= 1");
  if (opts.max_iters < 1) throw InvalidParameter("max_iters must be >= 1");

  double eps = opts.epsilon0;
  if (eps <= 0.0) {
    const double f2 = x.squaredNorm();
    eps = f2 > 0.0 ? f2 : 1.0;
  }
  require_positive_eps(eps);
  const double tol = opts.stability_tol >= 0.0 ? opts.stability_tol : opts.round_guard;

  // Singular values do not depend on eps; compute them once.
  const Vector s = nonzero_singular_values(x);

  RankSchemeTrace trace;
  int streak = 0;
  for (int k = 0; k < opts.max_iters; ++k) {
    const double value = phi_sv(s, eps);
    const int r = rounded_rank(value, opts.round_guard);
    if (trace.iterations.empty()) {
      streak = 1;
    } else {
      const auto& prev = trace.iterations.back();
      const bool same = prev.rounded_rank == r && std::abs(value - prev.phi_value) <= tol;
      streak = same ? streak + 1 : 1;
    }
    trace.iterations.push_back({eps, value, r});
    trace.final_rank = r;
    trace.final_epsilon = eps;
    // Zero matrix: the surrogate is identically zero, so the first value is final.
    if (s.size() == 0 || streak >= opts.stability_window) return trace;
    eps *= opts.beta;
  }
  throw NoConvergence("rank scheme did not stabilize within max_iters", std::move(trace));
}

double uniform_rank_bound(int m, int n, double delta, double eps) {
  if (!(delta > 0.0)) throw InvalidParameter("delta must be positive");
  if (eps < 0.0) throw InvalidParameter("epsilon must be nonnegative");
  return eps * std::min(m, n) / (delta * delta);
}

}  // namespace lowrank
