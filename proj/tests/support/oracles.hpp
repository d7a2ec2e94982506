// Test-only reference computations and instance generators. Everything here
// avoids the library's own code paths for the quantity being checked.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lowrank/quadcert.hpp"
#include "lowrank/rankmin.hpp"
#include "lowrank/sdp/model.hpp"

namespace lowrank::oracle {

using Rng = std::mt19937_64;

inline Matrix gaussian(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> nd;
  Matrix a(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) a(i, j) = nd(rng);
  }
  return a;
}

inline Matrix random_symmetric(Rng& rng, int n) {
  const Matrix g = gaussian(rng, n, n);
  return 0.5 * (g + g.transpose());
}

inline Matrix orthonormal_columns(Rng& rng, int n, int k) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, n, n));
  return qr.householderQ() * Matrix::Identity(n, k);
}

// U diag(s) V^T with orthonormal U, V and singular values drawn from [lo, hi].
inline Matrix random_rank_matrix(Rng& rng, int rows, int cols, int rank, double lo = 0.1,
                                 double hi = 10.0) {
  if (rank == 0) return Matrix::Zero(rows, cols);
  std::uniform_real_distribution<double> ud(std::log(lo), std::log(hi));
  Vector s(rank);
  for (int i = 0; i < rank; ++i) s(i) = std::exp(ud(rng));
  return orthonormal_columns(rng, rows, rank) * s.asDiagonal() *
         orthonormal_columns(rng, cols, rank).transpose();
}

// Rank via a plain Gaussian factor product G1 (rows x r) * G2 (r x cols).
inline Matrix factor_product(Rng& rng, int rows, int cols, int rank) {
  if (rank == 0) return Matrix::Zero(rows, cols);
  return gaussian(rng, rows, rank) * gaussian(rng, rank, cols);
}

// Surrogate from the eigenvalues of the smaller Gram matrix.
inline double phi_from_gram(const Matrix& x, double eps) {
  const Matrix g = x.rows() <= x.cols() ? Matrix(x * x.transpose()) : Matrix(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = std::max(es.eigenvalues()(i), 0.0);
    s += l / (l + eps);
  }
  return s;
}

// min over Z >= X^2 of tr(X (Z + eps I)^{-1} X) + tr(Z) / eta for symmetric X.
// The minimizing Z shares X's eigenvectors, which leaves a scalar problem per
// eigenvalue: z = max(x^2, |x| sqrt(eta) - eps).
inline double relaxation_value_at(const Matrix& x, double eps, double eta) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (x + x.transpose()));
  double v = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    const double z = std::max(l * l, std::abs(l) * std::sqrt(eta) - eps);
    v += l * l / (z + eps) + z / eta;
  }
  return v;
}

// Minimum of relaxation_value_at over 2x2 PSD X = [[a, b], [b, c]] meeting the
// given linear constraints, by grid search over the trace box 1 <= tr <= sqrt 2.
template <class Feasible>
double relaxation_grid_min_2x2(double eps, double eta, Feasible feasible, int steps = 400) {
  double best = std::numeric_limits<double>::infinity();
  const double tmax = std::sqrt(2.0);
  for (int it = 0; it <= 40; ++it) {
    const double t = 1.0 + (tmax - 1.0) * it / 40.0;
    for (int ia = 0; ia <= steps; ++ia) {
      const double a = t * ia / steps;
      const double c = t - a;
      const double bmax = std::sqrt(std::max(a * c, 0.0));
      for (int ib = -steps / 4; ib <= steps / 4; ++ib) {
        const double b = bmax * ib / (steps / 4);
        Matrix x(2, 2);
        x << a, b, b, c;
        if (!feasible(x)) continue;
        best = std::min(best, relaxation_value_at(x, eps, eta));
      }
    }
  }
  return best;
}

inline int loose_rank(const Matrix& x, double rel = 1e-9) {
  Eigen::JacobiSVD<Matrix> s(x);
  const Vector& v = s.singularValues();
  if (v.size() == 0 || v(0) == 0.0) return 0;
  return static_cast<int>((v.array() > rel * std::max(1.0, v(0))).count());
}

// Replays the exact-rank stopping rule on the closed-form surrogate of a
// matrix with the given nonzero singular values under the rankmin defaults.
inline int simulated_schedule_rank(const Vector& sigma, const RankMinSchedule& s = {}) {
  int streak = 0;
  int last = -1;
  double eps = s.epsilon0;
  for (int k = 0; k < s.max_stages; ++k, eps *= s.beta) {
    if (1.0 / std::pow(eps, s.p) > s.max_penalty) break;
    double phi = 0.0;
    for (int i = 0; i < sigma.size(); ++i) phi += sigma(i) * sigma(i) / (sigma(i) * sigma(i) + eps);
    const int r = std::max(0, static_cast<int>(std::ceil(phi - s.round_guard)));
    streak = r == last ? streak + 1 : 1;
    last = r;
    if (streak >= s.stability_window) return r;
  }
  return -1;
}

// Basis of the symmetric matrices orthogonal (trace inner product) to d,
// starting with the identity when tr(d) = 0.
inline std::vector<Matrix> symmetric_complement(const Matrix& d) {
  const int n = static_cast<int>(d.rows());
  std::vector<Matrix> basis;
  std::vector<Matrix> out;
  basis.push_back(d / d.norm());
  auto try_add = [&](Matrix e) {
    for (const auto& b : basis) e -= (b.array() * e.array()).sum() * b;
    const double nrm = e.norm();
    if (nrm < 1e-8) return;
    e /= nrm;
    basis.push_back(e);
    out.push_back(e);
  };
  try_add(Matrix::Identity(n, n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Matrix e = Matrix::Zero(n, n);
      e(i, j) = e(j, i) = 1.0;
      try_add(e);
    }
  }
  return out;
}

// A unit-trace PSD slice whose least-F-norm element X0 has minimum rank. The
// unit trace is one of the equality rows.
struct RankInstance {
  AffineSetSpec set;
  Matrix x0;
  int rank = 0;
  double fnorm2 = 0.0;
  double oracle_min_rank_grid = 0.0;
};

// For rank 1 the set is the single point X0 (a unit-trace rank-one matrix
// already has the largest F-norm among unit-trace PSD matrices). For rank >= 2
// the set is the segment {X0 + t D} inside the PSD cone, where D has zero trace,
// <X0, D> > 0 and a PSD nonzero compression onto null(X0); t = 0 is then both
// the left end of the segment and the least-F-norm point.
inline std::optional<RankInstance> make_rank_instance(Rng& rng, int n, int r) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const Matrix u = orthonormal_columns(rng, n, n);
  Vector lam(r);
  for (int i = 0; i < r; ++i) lam(i) = 0.5 + ud(rng);
  lam /= lam.sum();
  if (lam.minCoeff() < 0.15) return std::nullopt;
  const Matrix ur = u.leftCols(r);
  const Matrix x0 = ur * lam.asDiagonal() * ur.transpose();

  RankInstance inst;
  inst.x0 = x0;
  inst.rank = r;
  inst.fnorm2 = x0.squaredNorm();
  inst.set = AffineSetSpec::symmetric(n);
  inst.set.psd_required = true;

  if (r == 1) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        Matrix e = Matrix::Zero(n, n);
        e(i, j) = e(j, i) = 1.0;
        inst.set.add(e, (e.array() * x0.array()).sum());
      }
    }
    return inst;
  }

  // D = Ur A Ur^T + Ur B Un^T + Un B^T Ur^T + Un P Un^T with P positive definite
  // of unit-order trace, so the open segment is full rank.
  const int k = n - r;
  const Matrix un = u.rightCols(k);
  const Matrix g = gaussian(rng, k, k);
  Matrix p = g * g.transpose() + 0.5 * Matrix::Identity(k, k);
  p *= (0.5 + ud(rng)) / p.trace();
  Matrix a = random_symmetric(rng, r);
  const Matrix b = 0.3 * gaussian(rng, r, k);
  // Fix tr(D) = 0 and <X0, D> = 1 through two diagonal corrections of A.
  const double trp = p.trace();
  Matrix e1 = Matrix::Zero(r, r);
  e1(0, 0) = 1.0;
  Matrix e2 = Matrix::Zero(r, r);
  e2(1, 1) = 1.0;
  // Solve for c1, c2: tr(A + c1 e1 + c2 e2) + trp = 0 and
  // <diag(lam), A + c1 e1 + c2 e2> = 1.
  Eigen::Matrix2d sys;
  sys << 1.0, 1.0, lam(0), lam(1);
  Eigen::Vector2d rhs(-trp - a.trace(), 1.0 - (lam.asDiagonal() * a).trace());
  if (std::abs(sys.determinant()) < 0.05) return std::nullopt;
  const Eigen::Vector2d c = sys.partialPivLu().solve(rhs);
  a += c(0) * e1 + c(1) * e2;
  Matrix d = ur * a * ur.transpose() + ur * b * un.transpose() + un * b.transpose() * ur.transpose() +
             un * p * un.transpose();
  d = 0.5 * (d + d.transpose());

  for (const auto& e : symmetric_complement(d)) {
    inst.set.add(e, (e.array() * x0.array()).sum());
  }

  // Grid over t on the segment; minimum rank and least F-norm along it.
  double tmax = 0.0;
  for (double t = 1e-3; t < 1e3; t *= 1.05) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(x0 + t * d);
    if (es.eigenvalues().minCoeff() < -1e-12) break;
    tmax = t;
  }
  if (tmax < 0.05) return std::nullopt;
  int min_rank = r;
  for (int i = 0; i <= 2000; ++i) {
    const double t = tmax * i / 2000.0;
    const Matrix x = x0 + t * d;
    Eigen::SelfAdjointEigenSolver<Matrix> es(x);
    const int rk = static_cast<int>((es.eigenvalues().array() > 1e-6).count());
    min_rank = std::min(min_rank, rk);
    if (x.squaredNorm() < inst.fnorm2 - 1e-12) return std::nullopt;
  }
  if (min_rank != r) return std::nullopt;
  inst.oracle_min_rank_grid = min_rank;

  RankMinSchedule s;
  Eigen::SelfAdjointEigenSolver<Matrix> es(x0);
  Vector sig(r);
  for (int i = 0; i < r; ++i) sig(i) = es.eigenvalues()(n - 1 - i);
  if (simulated_schedule_rank(sig, s) != r) return std::nullopt;
  return inst;
}

// A block SDP built around a strictly feasible primal point and a strictly
// feasible dual point, so both problems have Slater points.
struct SlaterSdp {
  sdp::BlockSdpProblem problem;
  double objective_at_primal_point = 0.0;
};

inline SlaterSdp random_slater_sdp(Rng& rng, int max_dim = 8) {
  std::uniform_int_distribution<int> nblocks(1, 3);
  std::uniform_int_distribution<int> dimd(1, max_dim);
  std::uniform_int_distribution<int> nscal(0, 2);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  SlaterSdp out;
  auto& p = out.problem;
  const int nb = nblocks(rng);
  std::vector<int> dims;
  std::vector<Matrix> x0;
  std::vector<Matrix> s0;
  int total = 0;
  for (int k = 0; k < nb; ++k) {
    const int d = dimd(rng);
    dims.push_back(d);
    total += d;
    p.add_psd_block("b" + std::to_string(k), d);
    const Matrix gx = gaussian(rng, d, d);
    x0.push_back(gx * gx.transpose() / d + 0.5 * Matrix::Identity(d, d));
    const Matrix gs = gaussian(rng, d, d);
    s0.push_back(gs * gs.transpose() / d + 0.5 * Matrix::Identity(d, d));
  }
  const int ns = nscal(rng);
  Vector f0(ns);
  for (int j = 0; j < ns; ++j) {
    p.add_scalar("f" + std::to_string(j));
    f0(j) = nd(rng);
  }

  std::uniform_int_distribution<int> mdist(1, std::max(1, total));
  const int m = mdist(rng) + ns;
  std::vector<sdp::LinearForm> forms;
  for (int i = 0; i < m; ++i) {
    sdp::LinearForm f;
    for (int k = 0; k < nb; ++k) {
      if (ud(rng) < 0.3 && nb > 1) continue;
      f.add_elements(k, 0, 0, random_symmetric(rng, dims[k]));
    }
    for (int j = 0; j < ns; ++j) f.add_scalar(j, nd(rng));
    forms.push_back(f);
  }
  Vector y0(m);
  for (int i = 0; i < m; ++i) y0(i) = nd(rng);

  const bool with_box = ud(rng) < 0.4;
  const Vector no_scalars = f0;
  auto value = [&](const sdp::LinearForm& f) { return p.evaluate(f, x0, no_scalars); };

  sdp::LinearForm box_form;
  double box_t1 = 0.0;
  double box_t2 = 0.0;
  if (with_box) {
    box_form.add_trace(0, 0, dims[0], 1.0);
    box_t1 = 0.5 + ud(rng);
    box_t2 = -(0.5 + ud(rng));
  }

  // C_k = sum y_i A_ik + (t1 + t2) B_k + S_k, c_f = sum y_i a_if.
  sdp::LinearForm obj;
  for (int k = 0; k < nb; ++k) {
    Matrix c = s0[k];
    obj.add_elements(k, 0, 0, c);
  }
  for (int i = 0; i < m; ++i) {
    for (const auto& t : forms[i].block_terms()) {
      obj.add_inner(t.block, t.row, t.col, y0(i) * t.value);
    }
    for (const auto& [var, v] : forms[i].scalar_terms()) obj.add_scalar(var, y0(i) * v);
  }
  if (with_box) obj.add_trace(0, 0, dims[0], box_t1 + box_t2);
  obj.add_constant(nd(rng));

  for (int i = 0; i < m; ++i) p.add_equality(forms[i], value(forms[i]), "eq" + std::to_string(i));
  if (with_box) {
    const double v = value(box_form);
    p.add_box(box_form, v - 0.5 - ud(rng), v + 0.5 + ud(rng), "box");
  }
  p.set_objective(obj);
  out.objective_at_primal_point = p.evaluate(p.objective(), x0, f0);
  return out;
}

// Systems x^T A_i x = 0.
inline QuadSystem make_system(int n, const std::vector<Matrix>& mats) {
  QuadSystem q;
  q.n = n;
  for (const auto& a : mats) q.matrices.emplace_back(0.5 * (a + a.transpose()));
  return q;
}

// Random system with a definite combination: A_1 = P + sum_{i>1} c_i A_i for a
// positive definite P, scaled arbitrarily.
inline QuadSystem definite_system(Rng& rng, int n, int m) {
  std::vector<Matrix> mats;
  for (int i = 1; i < m; ++i) mats.push_back(random_symmetric(rng, n));
  const Matrix g = gaussian(rng, n, n);
  Matrix a1 = g * g.transpose() / n + 0.2 * Matrix::Identity(n, n);
  std::normal_distribution<double> nd;
  for (const auto& a : mats) a1 -= 0.5 * nd(rng) * a;
  mats.insert(mats.begin(), a1);
  return make_system(n, mats);
}

inline QuadSystem random_system(Rng& rng, int n, int m) {
  std::vector<Matrix> mats;
  for (int i = 0; i < m; ++i) mats.push_back(random_symmetric(rng, n));
  return make_system(n, mats);
}

// Every A_i has x0^T A_i x0 = 0 for a random unit x0.
inline QuadSystem solvable_system(Rng& rng, int n, int m, Vector* solution = nullptr) {
  Vector x0 = gaussian(rng, n, 1);
  x0.normalize();
  std::vector<Matrix> mats;
  for (int i = 0; i < m; ++i) {
    Matrix a = random_symmetric(rng, n);
    a -= x0.dot(a * x0) * x0 * x0.transpose();
    mats.push_back(a);
  }
  if (solution) *solution = x0;
  return make_system(n, mats);
}

// Solution of x^T A x = 0 for indefinite A from one positive and one negative
// eigenpair: alpha^2 l+ = -beta^2 l-.
inline std::optional<Vector> indefinite_solution(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector& l = es.eigenvalues();
  const int n = static_cast<int>(l.size());
  if (!(l(0) < 0.0 && l(n - 1) > 0.0)) return std::nullopt;
  const double alpha = std::sqrt(-l(0));
  const double beta = std::sqrt(l(n - 1));
  Vector x = alpha * es.eigenvectors().col(n - 1) + beta * es.eigenvectors().col(0);
  return x.normalized();
}

// Largest t with sum mu_i A_i >= t I over |mu_i| <= 1, by random search plus
// coordinate refinement. Only used to classify instances far from the
// boundary, never as a certificate.
inline double pencil_margin_search(const QuadSystem& q, Rng& rng, int samples = 4000) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  const int m = static_cast<int>(q.matrices.size());
  auto value = [&](const Vector& mu) {
    Matrix s = Matrix::Zero(q.n, q.n);
    for (int i = 0; i < m; ++i) s += mu(i) * q.matrices[i].matrix();
    return Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues()(0);
  };
  Vector best(m);
  double bv = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vector mu(m);
    for (int i = 0; i < m; ++i) mu(i) = ud(rng);
    const double v = value(mu);
    if (v > bv) {
      bv = v;
      best = mu;
    }
  }
  double step = 0.25;
  while (step > 1e-6) {
    bool improved = false;
    for (int i = 0; i < m; ++i) {
      for (double sgn : {-1.0, 1.0}) {
        Vector mu = best;
        mu(i) = std::clamp(mu(i) + sgn * step, -1.0, 1.0);
        const double v = value(mu);
        if (v > bv) {
          bv = v;
          best = mu;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return bv;
}

}  // namespace lowrank::oracle
