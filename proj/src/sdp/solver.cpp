#include "lowrank/sdp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "lowrank/errors.hpp"

namespace lowrank::sdp {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::primal_infeasible: return "primal-infeasible-detected";
    case SolveStatus::dual_infeasible: return "dual-infeasible-detected";
    case SolveStatus::max_iterations: return "max-iterations";
    case SolveStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

namespace {

// value * E^(r,c), r <= c.
struct Entry {
  int r;
  int c;
  double v;
};

struct RowPart {
  int row;
  std::vector<Entry> entries;
};

// Internal conic form:
//   min <C, X> + cl.xl + cf.xf
//   s.t. A(X) + Al xl + Af xf = b,  X_k psd, xl >= 0, xf free.
struct Conic {
  std::vector<int> dims;
  int m = 0;
  int nl = 0;
  int nf = 0;
  std::vector<std::vector<RowPart>> parts;  // per block
  Matrix al;
  Matrix af;
  Vector b;
  std::vector<Matrix> c;
  Vector cl;
  Vector cf;
  double obj_const = 0.0;

  // Row bookkeeping back to the model.
  std::vector<int> eq_row;
  std::vector<int> box_lo;
  std::vector<int> box_hi;
  std::vector<bool> box_fixed;
};

double entry_inner(const Entry& e, const Matrix& w) {
  return e.r == e.c ? e.v * w(e.r, e.r) : e.v * (w(e.r, e.c) + w(e.c, e.r));
}

void add_entry_to(Matrix& w, const Entry& e, double scale) {
  w(e.r, e.c) += scale * e.v;
  if (e.r != e.c) w(e.c, e.r) += scale * e.v;
}

struct FormRow {
  std::map<std::tuple<int, int, int>, double> block;
  std::map<int, double> scalar;
};

FormRow merge(const LinearForm& f) {
  FormRow out;
  for (const auto& t : f.block_terms()) out.block[{t.block, t.row, t.col}] += t.value;
  for (const auto& [var, v] : f.scalar_terms()) out.scalar[var] += v;
  return out;
}

class ConicBuilder {
 public:
  explicit ConicBuilder(const BlockSdpProblem& p) : p_(p) {
    for (const auto& b : p.blocks()) conic_.dims.push_back(b.dim);
    conic_.parts.resize(conic_.dims.size());
    conic_.nf = p.num_scalars();
  }

  Conic build() {
    for (const auto& e : p_.equalities()) {
      conic_.eq_row.push_back(add_row(e.form, e.rhs - e.form.constant(), 0));
    }
    for (const auto& bx : p_.boxes()) {
      const double k = bx.form.constant();
      int lo = -1;
      int hi = -1;
      const bool fixed = bx.lower == bx.upper;
      if (fixed) {
        lo = add_row(bx.form, bx.lower - k, 0);
      } else {
        if (std::isfinite(bx.lower)) lo = add_row(bx.form, bx.lower - k, -1);
        if (std::isfinite(bx.upper)) hi = add_row(bx.form, bx.upper - k, +1);
      }
      conic_.box_lo.push_back(lo);
      conic_.box_hi.push_back(hi);
      conic_.box_fixed.push_back(fixed);
    }
    conic_.m = static_cast<int>(rhs_.size());
    conic_.nl = static_cast<int>(lp_cols_.size());
    conic_.b = Eigen::Map<Vector>(rhs_.data(), conic_.m);
    conic_.al = Matrix::Zero(conic_.m, conic_.nl);
    for (int j = 0; j < conic_.nl; ++j) conic_.al(lp_cols_[j].first, j) = lp_cols_[j].second;
    conic_.af = Matrix::Zero(conic_.m, conic_.nf);
    for (const auto& [rc, v] : free_entries_) conic_.af(rc.first, rc.second) += v;

    for (int k = 0; k < static_cast<int>(conic_.dims.size()); ++k) {
      conic_.c.push_back(Matrix::Zero(conic_.dims[k], conic_.dims[k]));
    }
    conic_.cl = Vector::Zero(conic_.nl);
    conic_.cf = Vector::Zero(conic_.nf);
    const FormRow obj = merge(p_.objective());
    for (const auto& [key, v] : obj.block) {
      const auto [k, r, c] = key;
      add_entry_to(conic_.c[k], {r, c, v}, 1.0);
    }
    for (const auto& [var, v] : obj.scalar) conic_.cf(var) += v;
    conic_.obj_const = p_.objective().constant();
    return std::move(conic_);
  }

 private:
  // lp_sign != 0 appends a nonnegative slack with that coefficient.
  int add_row(const LinearForm& f, double rhs, int lp_sign) {
    const int row = static_cast<int>(rhs_.size());
    rhs_.push_back(rhs);
    const FormRow merged = merge(f);
    std::map<int, RowPart> per_block;
    for (const auto& [key, v] : merged.block) {
      const auto [k, r, c] = key;
      if (v == 0.0) continue;
      auto& part = per_block[k];
      part.row = row;
      part.entries.push_back({r, c, v});
    }
    for (auto& [k, part] : per_block) conic_.parts[k].push_back(std::move(part));
    for (const auto& [var, v] : merged.scalar) free_entries_.push_back({{row, var}, v});
    if (lp_sign != 0) lp_cols_.push_back({row, static_cast<double>(lp_sign)});
    return row;
  }

  const BlockSdpProblem& p_;
  Conic conic_;
  std::vector<double> rhs_;
  std::vector<std::pair<int, double>> lp_cols_;
  std::vector<std::pair<std::pair<int, int>, double>> free_entries_;
};

// Primal/dual point of the conic form.
struct Point {
  std::vector<Matrix> x;
  Vector xl;
  Vector xf;
  Vector y;
  std::vector<Matrix> s;
  Vector sl;
};

Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

class Ipm {
 public:
  Ipm(Conic conic, const SolverOptions& opts) : k_(std::move(conic)), opts_(opts) {}

  SdpSolution run(const BlockSdpProblem& p);

 private:
  void scale();
  Vector apply_a(const std::vector<Matrix>& x, const Vector& xl, const Vector& xf) const;
  std::vector<Matrix> adjoint_blocks(const Vector& y) const;
  Matrix schur(const std::vector<Matrix>& x, const std::vector<Matrix>& sinv) const;
  static double max_step(const Matrix& x, const Matrix& dx);
  static double max_step_lp(const Vector& x, const Vector& dx);
  SdpSolution finish(const BlockSdpProblem& p, const Point& pt, SolveStatus status, int iters,
                     double gap, double pinf, double dinf, const std::string& msg) const;

  Conic k_;
  SolverOptions opts_;
  Vector row_scale_;
  std::vector<int> empty_rows_;
  double bscale_ = 1.0;
  double cscale_ = 1.0;
  double bnorm_orig_ = 0.0;
  double cnorm_orig_ = 0.0;
};

void Ipm::scale() {
  row_scale_ = Vector::Ones(k_.m);
  Vector sq = Vector::Zero(k_.m);
  for (const auto& block : k_.parts) {
    for (const auto& part : block) {
      for (const auto& e : part.entries) sq(part.row) += (e.r == e.c ? 1.0 : 2.0) * e.v * e.v;
    }
  }
  for (int i = 0; i < k_.m; ++i) {
    sq(i) += k_.al.row(i).squaredNorm() + k_.af.row(i).squaredNorm();
    if (sq(i) > 0.0) {
      row_scale_(i) = std::sqrt(sq(i));
    } else {
      empty_rows_.push_back(i);
    }
  }
  bnorm_orig_ = k_.b.norm();
  double csq = k_.cl.squaredNorm() + k_.cf.squaredNorm();
  for (const auto& c : k_.c) csq += c.squaredNorm();
  cnorm_orig_ = std::sqrt(csq);

  for (auto& block : k_.parts) {
    for (auto& part : block) {
      for (auto& e : part.entries) e.v /= row_scale_(part.row);
    }
  }
  for (int i = 0; i < k_.m; ++i) {
    k_.al.row(i) /= row_scale_(i);
    k_.af.row(i) /= row_scale_(i);
    k_.b(i) /= row_scale_(i);
  }
  bscale_ = std::max(1.0, k_.m > 0 ? k_.b.cwiseAbs().maxCoeff() : 0.0);
  double cmax = 0.0;
  for (const auto& c : k_.c) cmax = std::max(cmax, c.cwiseAbs().maxCoeff());
  if (k_.nl > 0) cmax = std::max(cmax, k_.cl.cwiseAbs().maxCoeff());
  if (k_.nf > 0) cmax = std::max(cmax, k_.cf.cwiseAbs().maxCoeff());
  cscale_ = std::max(1.0, cmax);
  k_.b /= bscale_;
  for (auto& c : k_.c) c /= cscale_;
  k_.cl /= cscale_;
  k_.cf /= cscale_;
}

Vector Ipm::apply_a(const std::vector<Matrix>& x, const Vector& xl, const Vector& xf) const {
  Vector out = Vector::Zero(k_.m);
  for (size_t k = 0; k < k_.parts.size(); ++k) {
    for (const auto& part : k_.parts[k]) {
      double v = 0.0;
      for (const auto& e : part.entries) v += entry_inner(e, x[k]);
      out(part.row) += v;
    }
  }
  if (k_.nl > 0) out += k_.al * xl;
  if (k_.nf > 0) out += k_.af * xf;
  return out;
}

std::vector<Matrix> Ipm::adjoint_blocks(const Vector& y) const {
  std::vector<Matrix> out;
  for (size_t k = 0; k < k_.parts.size(); ++k) {
    Matrix w = Matrix::Zero(k_.dims[k], k_.dims[k]);
    for (const auto& part : k_.parts[k]) {
      const double yi = y(part.row);
      if (yi == 0.0) continue;
      for (const auto& e : part.entries) add_entry_to(w, e, yi);
    }
    out.push_back(std::move(w));
  }
  return out;
}

// M_ij = sum_k <A_ik, X_k A_jk S_k^{-1}>.
Matrix Ipm::schur(const std::vector<Matrix>& x, const std::vector<Matrix>& sinv) const {
  Matrix m = Matrix::Zero(k_.m, k_.m);
  for (size_t k = 0; k < k_.parts.size(); ++k) {
    const auto& parts = k_.parts[k];
    const Matrix& xk = x[k];
    const Matrix& sk = sinv[k];
    const int n = k_.dims[k];
    Matrix g(n, n);
    for (const auto& pj : parts) {
      g.setZero();
      for (const auto& e : pj.entries) {
        g.noalias() += e.v * xk.col(e.r) * sk.row(e.c);
        if (e.r != e.c) g.noalias() += e.v * xk.col(e.c) * sk.row(e.r);
      }
      for (const auto& pi : parts) {
        double v = 0.0;
        for (const auto& e : pi.entries) {
          v += e.r == e.c ? e.v * g(e.r, e.r) : e.v * (g(e.r, e.c) + g(e.c, e.r));
        }
        m(pi.row, pj.row) += v;
      }
    }
  }
  return sym(m);
}

double Ipm::max_step(const Matrix& x, const Matrix& dx) {
  Eigen::LLT<Matrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Matrix w = llt.matrixL().solve(dx);
  w = llt.matrixL().solve(w.transpose()).transpose();
  const double lmin = min_eigenvalue(sym(w));
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

double Ipm::max_step_lp(const Vector& x, const Vector& dx) {
  double a = kInf;
  for (int i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

SdpSolution Ipm::finish(const BlockSdpProblem& p, const Point& pt, SolveStatus status,
                        int iters, double gap, double pinf, double dinf,
                        const std::string& msg) const {
  SdpSolution sol;
  sol.status = status;
  sol.iterations = iters;
  sol.relative_gap = gap;
  sol.primal_infeasibility = pinf;
  sol.dual_infeasibility = dinf;
  sol.message = msg;

  // Rays are normalized by their own objective and carry no b/c scaling.
  const bool pray = status == SolveStatus::primal_infeasible;
  const bool dray = status == SolveStatus::dual_infeasible;
  const double xs = dray ? 1.0 / cscale_ : bscale_;
  const double ys = pray ? 1.0 / bscale_ : cscale_;

  for (const auto& xk : pt.x) sol.blocks.push_back(xs * xk);
  sol.scalars = xs * pt.xf;
  for (const auto& sk : pt.s) sol.dual_slacks.push_back(ys * sk);
  Vector y(k_.m);
  for (int i = 0; i < k_.m; ++i) y(i) = ys * pt.y(i) / row_scale_(i);

  sol.y.resize(static_cast<int>(k_.eq_row.size()));
  for (size_t e = 0; e < k_.eq_row.size(); ++e) sol.y(e) = y(k_.eq_row[e]);
  for (size_t j = 0; j < k_.box_lo.size(); ++j) {
    BoxMultipliers t;
    if (k_.box_fixed[j]) {
      const double v = y(k_.box_lo[j]);
      t.t1 = std::max(v, 0.0);
      t.t2 = std::min(v, 0.0);
    } else {
      if (k_.box_lo[j] >= 0) t.t1 = y(k_.box_lo[j]);
      if (k_.box_hi[j] >= 0) t.t2 = y(k_.box_hi[j]);
    }
    sol.box_multipliers.push_back(t);
  }
  sol.primal_objective = p.evaluate(p.objective(), sol.blocks, sol.scalars);
  if (pray) {
    sol.dual_objective = dual_value(p, sol.y, sol.box_multipliers) - p.objective().constant();
  } else {
    sol.dual_objective = dual_value(p, sol.y, sol.box_multipliers);
  }
  if (status == SolveStatus::optimal || status == SolveStatus::max_iterations) {
    try {
      sol.certified_lower_bound = certified_lower_bound(sol, p, opts_.repair_tol);
    } catch (const BoundUnavailable&) {
    }
  }
  return sol;
}

SdpSolution Ipm::run(const BlockSdpProblem& p) {
  scale();
  const int nb = static_cast<int>(k_.dims.size());
  const int m = k_.m;
  int ndeg = k_.nl;
  for (int d : k_.dims) ndeg += d;

  Point pt;
  const double bmax = m > 0 ? k_.b.cwiseAbs().maxCoeff() : 0.0;
  double cmax = 0.0;
  for (const auto& c : k_.c) cmax = std::max(cmax, c.cwiseAbs().maxCoeff());
  const double tau_p = 1.0 + bmax;
  const double tau_d = 1.0 + std::max(bmax, cmax);
  for (int d : k_.dims) {
    pt.x.push_back(tau_p * Matrix::Identity(d, d));
    pt.s.push_back(tau_d * Matrix::Identity(d, d));
  }
  pt.xl = Vector::Constant(k_.nl, tau_p);
  pt.sl = Vector::Constant(k_.nl, tau_d);
  pt.xf = Vector::Zero(k_.nf);
  pt.y = Vector::Zero(m);

  // An empty row 0 = b_i with b_i != 0 is a Farkas certificate by itself.
  for (int i : empty_rows_) {
    if (k_.b(i) != 0.0) {
      Point ray = pt;
      ray.y = Vector::Zero(m);
      ray.y(i) = 1.0 / k_.b(i);
      for (auto& sk : ray.s) sk.setZero();
      ray.sl.setZero();
      return finish(p, ray, SolveStatus::primal_infeasible, 0, kInf, kInf, kInf,
                    "constraint without variables has a nonzero right-hand side");
    }
  }

  const double obj_scale = bscale_ * cscale_;
  double gap = kInf;
  double pinf = kInf;
  double dinf = kInf;
  int stall = 0;
  // Best iterate by max(gap, pinf, dinf); returned when progress stalls.
  Point best;
  double best_merit = kInf;
  double best_gap = kInf, best_pinf = kInf, best_dinf = kInf;
  int best_iter = 0;
  int since_best = 0;

  for (int iter = 0; iter <= opts_.max_iterations; ++iter) {
    // Residuals in scaled space.
    const Vector rp = k_.b - apply_a(pt.x, pt.xl, pt.xf);
    const std::vector<Matrix> aty = adjoint_blocks(pt.y);
    std::vector<Matrix> rd(nb);
    double rdsq = 0.0;
    double pobj_s = 0.0;
    double xs_sum = 0.0;
    for (int k = 0; k < nb; ++k) {
      rd[k] = k_.c[k] - aty[k] - pt.s[k];
      rdsq += rd[k].squaredNorm();
      pobj_s += inner(k_.c[k], pt.x[k]);
      xs_sum += inner(pt.x[k], pt.s[k]);
    }
    Vector rl = k_.cl - pt.sl;
    Vector rf = k_.cf;
    if (m > 0) {
      if (k_.nl > 0) rl -= k_.al.transpose() * pt.y;
      if (k_.nf > 0) rf -= k_.af.transpose() * pt.y;
    }
    rdsq += rl.squaredNorm() + rf.squaredNorm();
    pobj_s += k_.cl.dot(pt.xl) + k_.cf.dot(pt.xf);
    xs_sum += pt.xl.dot(pt.sl);
    const double dobj_s = k_.b.dot(pt.y);

    if (!std::isfinite(pobj_s) || !std::isfinite(dobj_s) || !std::isfinite(rdsq)) {
      return finish(p, pt, SolveStatus::numerical_failure, iter, gap, pinf, dinf,
                    "non-finite iterate");
    }

    // Unscaled metrics.
    Vector rp_u = rp;
    for (int i = 0; i < m; ++i) rp_u(i) *= row_scale_(i) * bscale_;
    pinf = rp_u.norm() / (1.0 + bnorm_orig_);
    dinf = cscale_ * std::sqrt(rdsq) / (1.0 + cnorm_orig_);
    const double pobj = obj_scale * pobj_s + k_.obj_const;
    const double dobj = obj_scale * dobj_s + k_.obj_const;
    const double abs_gap = std::max(std::abs(pobj - dobj), obj_scale * xs_sum);
    gap = abs_gap / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double mu = xs_sum / std::max(ndeg, 1);

    if (opts_.verbose) {
      std::fprintf(stderr, "%3d pobj=% .10e dobj=% .10e gap=%.2e pinf=%.2e dinf=%.2e mu=%.2e\n",
                   iter, pobj, dobj, gap, pinf, dinf, mu);
    }

    if (gap <= opts_.gap_tol && pinf <= opts_.feas_tol && dinf <= opts_.feas_tol) {
      return finish(p, pt, SolveStatus::optimal, iter, gap, pinf, dinf, "converged");
    }
    const double merit = std::max({gap, pinf, dinf});
    if (merit < best_merit) {
      if (merit < 0.5 * best_merit) since_best = 0;
      best = pt;
      best_merit = merit;
      best_gap = gap;
      best_pinf = pinf;
      best_dinf = dinf;
      best_iter = iter;
    }
    if (best_merit < 1e-5) ++since_best;
    if (since_best > 12) {
      return finish(p, best, SolveStatus::max_iterations, best_iter, best_gap, best_pinf, best_dinf,
                    "progress stalled; returning best iterate");
    }

    // Farkas ray for the primal: b^T y > 0 with A^T y + S = C - Rd small
    // relative to b^T y.
    if (dobj_s > 1.0) {
      double res = 0.0;
      for (int k = 0; k < nb; ++k) res += (k_.c[k] - rd[k]).squaredNorm();
      res += (k_.cl - rl).squaredNorm() + (k_.cf - rf).squaredNorm();
      if (std::sqrt(res) <= opts_.infeas_tol * dobj_s) {
        Point ray = pt;
        ray.y /= dobj_s;
        for (auto& sk : ray.s) sk /= dobj_s;
        ray.sl /= dobj_s;
        return finish(p, ray, SolveStatus::primal_infeasible, iter, gap, pinf, dinf,
                      "dual objective diverges");
      }
    }
    // Improving primal ray: <C, X> < 0 with A(X) = b - rp small relative.
    if (pobj_s < -1.0) {
      const double res = (k_.b - rp).norm();
      if (res <= opts_.infeas_tol * (-pobj_s)) {
        Point ray = pt;
        for (auto& xk : ray.x) xk /= -pobj_s;
        ray.xl /= -pobj_s;
        ray.xf /= -pobj_s;
        return finish(p, ray, SolveStatus::dual_infeasible, iter, gap, pinf, dinf,
                      "primal objective diverges");
      }
    }
    if (iter == opts_.max_iterations) break;

    // Factorizations.
    std::vector<Matrix> sinv(nb);
    bool ok = true;
    for (int k = 0; k < nb && ok; ++k) {
      Eigen::LLT<Matrix> llt(pt.s[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      sinv[k] = llt.solve(Matrix::Identity(k_.dims[k], k_.dims[k]));
      sinv[k] = sym(sinv[k]);
    }
    if (!ok) {
      return finish(p, pt, SolveStatus::numerical_failure, iter, gap, pinf, dinf,
                    "dual slack lost definiteness");
    }
    const Vector dl = pt.xl.cwiseQuotient(pt.sl);

    Matrix mm = schur(pt.x, sinv);
    if (k_.nl > 0) mm.noalias() += k_.al * dl.asDiagonal() * k_.al.transpose();
    const double diag_max = m > 0 ? mm.diagonal().cwiseAbs().maxCoeff() : 0.0;
    mm.diagonal().array() += 1e-15 * std::max(diag_max, 1e-300) + 1e-300;
    for (int i : empty_rows_) mm(i, i) = std::max(diag_max, 1.0);
    Eigen::LDLT<Matrix> ldlt(mm);
    if (ldlt.info() != Eigen::Success) {
      return finish(p, pt, SolveStatus::numerical_failure, iter, gap, pinf, dinf,
                    "Schur complement factorization failed");
    }
    Eigen::LDLT<Matrix> kfac;
    Matrix minv_af;
    if (k_.nf > 0) {
      minv_af = ldlt.solve(k_.af);
      Matrix kk = sym(k_.af.transpose() * minv_af);
      const double kmax = kk.diagonal().cwiseAbs().maxCoeff();
      kk.diagonal().array() += 1e-14 * std::max(kmax, 1e-300) + 1e-300;
      kfac.compute(kk);
    }

    // Solves for a direction given complementarity targets rc (blocks) and
    // rcl (LP, already divided by s).
    struct Dir {
      std::vector<Matrix> dx, ds;
      Vector dxl, dsl, dxf, dy;
    };
    auto core = [&](const Vector& h, const Vector& rfv, Vector& dxf, Vector& dy) {
      if (k_.nf > 0) {
        const Vector rhs = k_.af.transpose() * ldlt.solve(h) - rfv;
        dxf = kfac.solve(rhs);
        dy = ldlt.solve(h - k_.af * dxf);
      } else {
        dxf = Vector::Zero(0);
        dy = ldlt.solve(h);
      }
    };
    auto direction = [&](const std::vector<Matrix>& rc, const Vector& rcl) {
      Dir d;
      std::vector<Matrix> t(nb);
      for (int k = 0; k < nb; ++k) t[k] = rc[k] - sym(pt.x[k] * rd[k] * sinv[k]);
      const Vector tl = rcl - dl.cwiseProduct(rl);
      const Vector h = rp - apply_a(t, tl, Vector::Zero(k_.nf));
      core(h, rf, d.dxf, d.dy);
      const std::vector<Matrix> atdy = adjoint_blocks(d.dy);
      d.ds.resize(nb);
      d.dx.resize(nb);
      for (int k = 0; k < nb; ++k) {
        d.ds[k] = rd[k] - atdy[k];
        d.dx[k] = rc[k] - sym(pt.x[k] * d.ds[k] * sinv[k]);
      }
      d.dsl = rl;
      if (k_.nl > 0 && m > 0) d.dsl -= k_.al.transpose() * d.dy;
      d.dxl = rcl - dl.cwiseProduct(d.dsl);

      // Iterative refinement against the primal equations; stops once the
      // residual no longer shrinks.
      double last = kInf;
      for (int pass = 0; pass < 10 && m > 0; ++pass) {
        const Vector res = rp - apply_a(d.dx, d.dxl, d.dxf);
        const Vector fres = k_.nf > 0 ? Vector(k_.af.transpose() * d.dy - rf) : Vector::Zero(0);
        const double rn = res.norm() + fres.norm();
        if (rn <= 1e-15 * std::max(rp.norm(), 1.0) || rn > 0.5 * last) break;
        last = rn;
        Vector exf;
        Vector ey;
        core(res, fres, exf, ey);
        const std::vector<Matrix> atey = adjoint_blocks(ey);
        d.dy += ey;
        if (k_.nf > 0) d.dxf += exf;
        for (int k = 0; k < nb; ++k) {
          d.ds[k] -= atey[k];
          d.dx[k] += sym(pt.x[k] * atey[k] * sinv[k]);
        }
        if (k_.nl > 0) {
          const Vector aly = k_.al.transpose() * ey;
          d.dsl -= aly;
          d.dxl += dl.cwiseProduct(aly);
        }
      }
      return d;
    };
    auto steps = [&](const Dir& d, double& ap, double& ad) {
      ap = max_step_lp(pt.xl, d.dxl);
      ad = max_step_lp(pt.sl, d.dsl);
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(pt.x[k], d.dx[k]));
        ad = std::min(ad, max_step(pt.s[k], d.ds[k]));
      }
    };

    // Predictor.
    std::vector<Matrix> rc(nb);
    for (int k = 0; k < nb; ++k) rc[k] = -pt.x[k];
    Vector rcl = -pt.xl;
    const Dir pred = direction(rc, rcl);
    double ap = 0.0;
    double ad = 0.0;
    steps(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xs_aff = 0.0;
    for (int k = 0; k < nb; ++k) {
      xs_aff += inner(pt.x[k] + ap * pred.dx[k], pt.s[k] + ad * pred.ds[k]);
    }
    xs_aff += (pt.xl + ap * pred.dxl).dot(pt.sl + ad * pred.dsl);
    const double mu_aff = xs_aff / std::max(ndeg, 1);
    double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;
    if (std::min(ap, ad) < 0.2) sigma = std::max(sigma, 0.3);

    // Corrector.
    for (int k = 0; k < nb; ++k) {
      rc[k] = sigma * mu * sinv[k] - pt.x[k] - sym(pred.dx[k] * pred.ds[k] * sinv[k]);
    }
    for (int i = 0; i < k_.nl; ++i) {
      rcl(i) = (sigma * mu - pt.xl(i) * pt.sl(i) - pred.dxl(i) * pred.dsl(i)) / pt.sl(i);
    }
    const Dir corr = direction(rc, rcl);
    steps(corr, ap, ad);
    ap = std::min(1.0, opts_.step_fraction * ap);
    ad = std::min(1.0, opts_.step_fraction * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad)) {
      return finish(p, pt, SolveStatus::numerical_failure, iter, gap, pinf, dinf,
                    "non-finite step");
    }
    stall = (ap < 1e-10 && ad < 1e-10) ? stall + 1 : 0;
    if (stall >= 3) {
      return finish(p, pt, SolveStatus::numerical_failure, iter, gap, pinf, dinf,
                    "step length collapsed");
    }

    for (int k = 0; k < nb; ++k) {
      pt.x[k] = sym(pt.x[k] + ap * corr.dx[k]);
      pt.s[k] = sym(pt.s[k] + ad * corr.ds[k]);
    }
    pt.xl += ap * corr.dxl;
    pt.sl += ad * corr.dsl;
    if (k_.nf > 0) pt.xf += ap * corr.dxf;
    pt.y += ad * corr.dy;
  }
  if (best_merit < kInf) {
    return finish(p, best, SolveStatus::max_iterations, best_iter, best_gap, best_pinf, best_dinf,
                  "iteration limit reached; returning best iterate");
  }
  return finish(p, pt, SolveStatus::max_iterations, opts_.max_iterations, gap, pinf, dinf,
                "iteration limit reached");
}

}  // namespace

SdpSolution solve(const BlockSdpProblem& p, const SolverOptions& opts) {
  p.validate();
  if (!(opts.gap_tol > 0.0) || !(opts.feas_tol > 0.0) || opts.max_iterations < 0) {
    throw InvalidParameter("solver tolerances must be positive");
  }
  Ipm ipm(ConicBuilder(p).build(), opts);
  return ipm.run(p);
}

std::vector<Matrix> dual_slack(const BlockSdpProblem& p, const Vector& y,
                               const std::vector<BoxMultipliers>& box) {
  std::vector<Matrix> s;
  for (const auto& b : p.blocks()) s.push_back(Matrix::Zero(b.dim, b.dim));
  auto add = [&](const LinearForm& f, double scale) {
    if (scale == 0.0) return;
    for (const auto& t : f.block_terms()) add_entry_to(s[t.block], {t.row, t.col, t.value}, scale);
  };
  add(p.objective(), 1.0);
  for (size_t e = 0; e < p.equalities().size(); ++e) add(p.equalities()[e].form, -y(e));
  for (size_t j = 0; j < p.boxes().size(); ++j) {
    add(p.boxes()[j].form, -(box[j].t1 + box[j].t2));
  }
  return s;
}

double dual_value(const BlockSdpProblem& p, const Vector& y,
                  const std::vector<BoxMultipliers>& box) {
  double v = p.objective().constant();
  for (size_t e = 0; e < p.equalities().size(); ++e) {
    const auto& eq = p.equalities()[e];
    v += (eq.rhs - eq.form.constant()) * y(e);
  }
  for (size_t j = 0; j < p.boxes().size(); ++j) {
    const auto& bx = p.boxes()[j];
    const double k = bx.form.constant();
    if (box[j].t1 != 0.0) v += (bx.lower - k) * box[j].t1;
    if (box[j].t2 != 0.0) v += (bx.upper - k) * box[j].t2;
  }
  return v;
}

double certified_lower_bound(const SdpSolution& sol, const BlockSdpProblem& p,
                             double repair_tol) {
  if (sol.y.size() != static_cast<int>(p.equalities().size()) ||
      sol.box_multipliers.size() != p.boxes().size()) {
    throw BoundUnavailable("solution carries no dual point for this model");
  }
  std::vector<BoxMultipliers> box = sol.box_multipliers;
  for (size_t j = 0; j < box.size(); ++j) {
    box[j].t1 = std::isfinite(p.boxes()[j].lower) ? std::max(box[j].t1, 0.0) : 0.0;
    box[j].t2 = std::isfinite(p.boxes()[j].upper) ? std::min(box[j].t2, 0.0) : 0.0;
  }
  const double base = dual_value(p, sol.y, box);
  if (!std::isfinite(base)) throw BoundUnavailable("dual objective is not finite");

  double charge = 0.0;
  const std::vector<Matrix> s = dual_slack(p, sol.y, box);
  for (int k = 0; k < p.num_blocks(); ++k) {
    const double lneg = std::max(0.0, -min_eigenvalue(s[k]));
    if (lneg == 0.0) continue;
    double t = p.blocks()[k].trace_bound;
    if (!(t > 0.0)) {
      const double tr = k < static_cast<int>(sol.blocks.size()) ? sol.blocks[k].trace() : 0.0;
      t = std::max(1.0, 2.0 * tr);
    }
    charge += lneg * t;
  }

  // Free scalars need a zero reduced cost; price any residual against a
  // magnitude bound taken from the primal point.
  Vector rf = Vector::Zero(p.num_scalars());
  for (const auto& [var, v] : p.objective().scalar_terms()) rf(var) += v;
  for (size_t e = 0; e < p.equalities().size(); ++e) {
    for (const auto& [var, v] : p.equalities()[e].form.scalar_terms()) rf(var) -= sol.y(e) * v;
  }
  for (size_t j = 0; j < p.boxes().size(); ++j) {
    for (const auto& [var, v] : p.boxes()[j].form.scalar_terms()) {
      rf(var) -= (box[j].t1 + box[j].t2) * v;
    }
  }
  for (int f = 0; f < p.num_scalars(); ++f) {
    const double xv = f < sol.scalars.size() ? std::abs(sol.scalars(f)) : 0.0;
    charge += std::abs(rf(f)) * std::max(1.0, 2.0 * xv);
  }

  if (charge > repair_tol * (1.0 + std::abs(base))) {
    throw BoundUnavailable("dual point too infeasible to repair");
  }
  return base - charge;
}

}  // namespace lowrank::sdp
