#include "lowrank/quadcert.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "lowrank/errors.hpp"
#include "lowrank/io.hpp"

namespace lowrank {

using sdp::LinearForm;

void QuadSystem::validate() const {
  if (n < 1) throw InvalidInput("system dimension must be positive");
  if (matrices.empty()) throw InvalidInput("system needs at least one matrix");
  for (const auto& a : matrices) {
    if (a.dim() != n) throw InvalidInput("system matrix has the wrong dimension");
  }
}

double QuadSystem::residual(const Vector& x) const {
  const double nx = x.squaredNorm();
  if (nx == 0.0) return sdp::kInf;
  double r = 0.0;
  for (const auto& a : matrices) r = std::max(r, std::abs(x.dot(a.matrix() * x)) / nx);
  return r;
}

std::pair<double, double> trace_box_constants(int n) {
  if (n < 1) throw InvalidParameter("dimension must be positive");
  return {1.0, std::sqrt(static_cast<double>(n))};
}

AffineSetSpec relaxation_set(const QuadSystem& q) {
  if (q.n < 1) throw InvalidInput("system dimension must be positive");
  AffineSetSpec c = AffineSetSpec::symmetric(q.n);
  c.psd_required = true;
  for (const auto& a : q.matrices) {
    if (a.dim() != q.n) throw InvalidInput("system matrix has the wrong dimension");
    c.add(a.matrix(), 0.0);
  }
  c.trace_box = trace_box_constants(q.n);
  return c;
}

ApproxModel build_relaxation(const QuadSystem& q, double eps, double eta) {
  return build_approx_sdp(relaxation_set(q), eps, eta);
}

double witness_value(const DualWitness& w, double eps, int n) {
  return w.phi.trace() - eps * w.q.trace() + w.t1 + std::sqrt(static_cast<double>(n)) * w.t2;
}

namespace {

Matrix block_s1(const DualWitness& w, const QuadSystem& q) {
  const int n = q.n;
  Matrix s1 = -(w.t1 + w.t2) * Matrix::Identity(n, n) - (w.v + w.v.transpose());
  for (size_t i = 0; i < q.matrices.size(); ++i) s1 += w.mu(i) * q.matrices[i].matrix();
  return s1;
}

Matrix block_s2(const DualWitness& w, double eta) {
  const int n = static_cast<int>(w.phi.rows());
  Matrix s2(2 * n, 2 * n);
  const Matrix off = w.v - w.theta;
  s2.topLeftCorner(n, n) = -w.phi;
  s2.topRightCorner(n, n) = off;
  s2.bottomLeftCorner(n, n) = off.transpose();
  s2.bottomRightCorner(n, n) = Matrix::Identity(n, n) / eta - w.q;
  return s2;
}

Matrix block_s3(const DualWitness& w) {
  const int n = static_cast<int>(w.phi.rows());
  Matrix s3(2 * n, 2 * n);
  s3.topLeftCorner(n, n) = Matrix::Identity(n, n);
  s3.topRightCorner(n, n) = w.theta;
  s3.bottomLeftCorner(n, n) = w.theta.transpose();
  s3.bottomRightCorner(n, n) = w.q;
  return s3;
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

Matrix witness_matrix(const DualWitness& w, const QuadSystem& q, double eta) {
  const int n = q.n;
  Matrix big = Matrix::Zero(5 * n, 5 * n);
  big.block(0, 0, n, n) = block_s1(w, q);
  big.block(n, n, 2 * n, 2 * n) = block_s2(w, eta);
  big.block(3 * n, 3 * n, 2 * n, 2 * n) = block_s3(w);
  return big;
}

double witness_min_eigenvalue(const DualWitness& w, const QuadSystem& q, double eta) {
  return std::min({min_eigenvalue(symmetrize(block_s1(w, q))),
                   min_eigenvalue(symmetrize(block_s2(w, eta))),
                   min_eigenvalue(symmetrize(block_s3(w)))});
}

DualWitness witness_from_multipliers(const ApproxModel& model, const Vector& y,
                                     const std::vector<sdp::BoxMultipliers>& box) {
  const auto& lay = model.layout;
  if (lay.x_block < 0 || lay.trace_box < 0 || lay.rows != lay.cols) {
    throw InvalidInput("model is not a quadratic relaxation");
  }
  const int n = lay.rows;
  const std::vector<Matrix> s = sdp::dual_slack(model.problem, y, box);
  const Matrix& su = s[lay.unit_block];
  const Matrix& ss = s[lay.shift_block];
  DualWitness w;
  w.phi = symmetrize(-su.topLeftCorner(n, n));
  w.q = symmetrize(ss.bottomRightCorner(n, n));
  w.theta = ss.topRightCorner(n, n);
  w.v = su.topRightCorner(n, n) + w.theta;
  w.mu.resize(static_cast<int>(lay.data_rows.size()));
  for (size_t i = 0; i < lay.data_rows.size(); ++i) w.mu(i) = -y(lay.data_rows[i]);
  w.t1 = box[lay.trace_box].t1;
  w.t2 = box[lay.trace_box].t2;
  return w;
}

bool repair_witness(DualWitness& w, const QuadSystem& q, double eta) {
  const int n = q.n;
  const Matrix id = Matrix::Identity(n, n);
  w.t1 = std::max(w.t1, 0.0);
  w.t2 = std::min(w.t2, 0.0);

  // [[I, Theta], [Theta^T, Q]] psd  <=>  Q - Theta^T Theta psd.
  const Matrix r3 = symmetrize(w.q - w.theta.transpose() * w.theta);
  const double m3 = 1e-10 * (1.0 + r3.cwiseAbs().maxCoeff());
  const double l3 = min_eigenvalue(r3);
  if (l3 < m3) w.q += (m3 - l3) * id;

  // Second block: needs I/eta - Q positive definite, then a Schur shift of Phi.
  const Matrix b = symmetrize(id / eta - w.q);
  Eigen::LLT<Matrix> llt(b);
  if (llt.info() != Eigen::Success || min_eigenvalue(b) <= 1e-12 * (1.0 + b.cwiseAbs().maxCoeff())) {
    return false;
  }
  const Matrix off = w.v - w.theta;
  const Matrix r2 = symmetrize(-w.phi - off * llt.solve(Matrix(off.transpose())));
  const double m2 = 1e-10 * (1.0 + std::max(r2.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  const double l2 = min_eigenvalue(r2);
  if (l2 < m2) w.phi -= (m2 - l2) * id;

  const Matrix s1 = symmetrize(block_s1(w, q));
  const double m1 = 1e-10 * (1.0 + s1.cwiseAbs().maxCoeff());
  const double l1 = min_eigenvalue(s1);
  if (l1 < m1) {
    const double d = m1 - l1;
    if (w.t1 >= d) {
      w.t1 -= d;
    } else {
      w.t2 -= d - w.t1;
      w.t1 = 0.0;
    }
  }
  return witness_min_eigenvalue(w, q, eta) >= 0.0;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::certified_zero_only: return "certified-zero-only";
    case Verdict::counterexample_found: return "counterexample-found";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

namespace {

Vector residuals(const QuadSystem& q, const Vector& x) {
  Vector r(static_cast<int>(q.matrices.size()));
  for (size_t i = 0; i < q.matrices.size(); ++i) r(i) = x.dot(q.matrices[i].matrix() * x);
  return r;
}

// Gauss-Newton with minimum-norm steps on r(x) = 0, renormalizing to the
// sphere after each step (the system is homogeneous).
Vector polish(const QuadSystem& q, Vector x, int steps) {
  const int m = static_cast<int>(q.matrices.size());
  double best = q.residual(x);
  for (int it = 0; it < steps && best > 0.0; ++it) {
    Matrix j(m, q.n);
    for (int i = 0; i < m; ++i) j.row(i) = 2.0 * (q.matrices[i].matrix() * x).transpose();
    const Vector r = residuals(q, x);
    const Vector dx = j.completeOrthogonalDecomposition().solve(r);
    Vector cand = x - dx;
    const double nc = cand.norm();
    if (!(nc > 0.0) || !std::isfinite(nc)) break;
    cand /= nc;
    const double rc = q.residual(cand);
    if (!(rc < best)) break;
    x = cand;
    best = rc;
  }
  return x;
}

}  // namespace

std::optional<Counterexample> nonzero_solution_oracle(const QuadSystem& q,
                                                      const OracleOptions& opts) {
  q.validate();
  if (opts.budget < 1 || opts.restarts < 1) throw InvalidParameter("oracle budget must be positive");
  const int per = std::max(1, opts.budget / opts.restarts);
  std::optional<Counterexample> best;
  for (int k = 0; k < opts.restarts; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(k), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    Vector x(q.n);
    for (int i = 0; i < q.n; ++i) x(i) = normal(rng);
    x.normalize();

    auto f = [&](const Vector& v) { return residuals(q, v).squaredNorm(); };
    double fx = f(x);
    double step = 1.0;
    for (int it = 0; it < per && fx > 0.0; ++it) {
      const Vector r = residuals(q, x);
      Vector g = Vector::Zero(q.n);
      for (size_t i = 0; i < q.matrices.size(); ++i) g += 4.0 * r(i) * (q.matrices[i].matrix() * x);
      g -= x.dot(g) * x;
      const double gn = g.squaredNorm();
      if (gn <= 1e-32) break;
      step = std::min(step * 2.0, 1e6);
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        Vector cand = (x - step * g).normalized();
        const double fc = f(cand);
        if (fc <= fx - 1e-4 * step * gn) {
          x = cand;
          fx = fc;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
      if (std::sqrt(fx) < 1e-4) break;
    }
    x = polish(q, x, 30);
    const double res = q.residual(x);
    if (!best || res < best->residual) best = Counterexample{x, res};
    if (res <= opts.tol) return best;
  }
  return std::nullopt;
}

std::optional<PencilResult> pencil_definite_check(const QuadSystem& q, double definite_tol) {
  q.validate();
  const int n = q.n;
  const int m = static_cast<int>(q.matrices.size());
  sdp::BlockSdpProblem p;
  for (int i = 0; i < m; ++i) p.add_scalar("mu" + std::to_string(i + 1));
  const int t = p.add_scalar("t");
  const int s = p.add_psd_block("slack", n, 0.0);
  // sum mu_i A_i - t I - S = 0 on the upper triangle.
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      LinearForm f;
      for (int i = 0; i < m; ++i) f.add_scalar(i, q.matrices[i](a, b));
      if (a == b) f.add_scalar(t, -1.0);
      f.add_element(s, a, b, -1.0);
      p.add_equality(std::move(f), 0.0, "pencil");
    }
  }
  for (int i = 0; i < m; ++i) p.add_box(LinearForm().add_scalar(i, 1.0), -1.0, 1.0, "mu-bound");
  p.set_objective(LinearForm().add_scalar(t, -1.0));
  sdp::SdpSolution sol;
  try {
    sol = sdp::solve(p);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (sol.status != sdp::SolveStatus::optimal && sol.status != sdp::SolveStatus::max_iterations) {
    return std::nullopt;
  }
  if (!(sol.scalars(t) > definite_tol)) return std::nullopt;
  Vector mu = sol.scalars.head(m);
  Matrix comb = Matrix::Zero(n, n);
  for (int i = 0; i < m; ++i) comb += mu(i) * q.matrices[i].matrix();
  const double lmin = min_eigenvalue(comb);
  if (lmin < definite_tol / 2) return std::nullopt;
  return PencilResult{mu, lmin};
}

std::vector<std::pair<double, double>> default_certify_grid() {
  return {{1e-2, 1e-2}, {1e-3, 1e-3}, {1e-4, 1e-4}};
}

bool certifies(double bound, double eta, double round_guard) {
  if (std::isnan(bound) || bound == -sdp::kInf) return false;
  if (bound == sdp::kInf) return true;
  return std::ceil(bound - 1.0 / eta - round_guard) >= 2.0;
}

namespace {

// Strictly feasible dual point of the relaxation.
DualWitness slater_witness(int n, int m, double eta) {
  DualWitness w;
  w.mu = Vector::Zero(m);
  w.t1 = 1.0;
  w.t2 = -2.0;
  w.phi = -Matrix::Identity(n, n);
  w.q = Matrix::Identity(n, n) / (2.0 * eta);
  w.v = Matrix::Zero(n, n);
  w.theta = Matrix::Zero(n, n);
  return w;
}

DualWitness combine(const DualWitness& a, const DualWitness& ray, double alpha) {
  DualWitness w;
  w.mu = a.mu + alpha * ray.mu;
  w.t1 = a.t1 + alpha * ray.t1;
  w.t2 = a.t2 + alpha * ray.t2;
  w.phi = a.phi + alpha * ray.phi;
  w.q = a.q + alpha * ray.q;
  w.v = a.v + alpha * ray.v;
  w.theta = a.theta + alpha * ray.theta;
  return w;
}

std::string describe(double eps, double eta) {
  return "eps=" + format_double(eps) + " eta=" + format_double(eta);
}

}  // namespace

CertificateReport certify_zero_only(const QuadSystem& q, const CertifyOptions& opts) {
  q.validate();
  std::vector<std::pair<double, double>> grid = opts.grid.empty() ? default_certify_grid() : opts.grid;
  for (const auto& [e, h] : grid) {
    if (!(e > 0.0) || !(h > 0.0)) throw InvalidParameter("epsilon and eta must be positive");
  }
  const int n = q.n;
  const int m = static_cast<int>(q.matrices.size());

  CertificateReport rep;
  rep.epsilon = grid.front().first;
  rep.eta = grid.front().second;
  rep.threshold_used = 1.0 / rep.eta + 1.0;

  rep.pencil = pencil_definite_check(q, opts.definite_tol);

  if (opts.run_oracle) {
    if (auto cx = nonzero_solution_oracle(q, opts.oracle)) {
      rep.verdict = Verdict::counterexample_found;
      rep.counterexample = cx;
      rep.route = "oracle";
      return rep;
    }
  }

  auto accept = [&](DualWitness w, double eps, double eta, const std::string& route) {
    if (!repair_witness(w, q, eta)) {
      rep.diagnostics.push_back(describe(eps, eta) + ": witness repair failed (" + route + ")");
      return false;
    }
    const double bound = witness_value(w, eps, n);
    rep.diagnostics.push_back(describe(eps, eta) + ": " + route + " bound " + format_double(bound));
    const bool better = !std::isfinite(rep.dual_bound) ||
                        bound - 1.0 / eta > rep.dual_bound - 1.0 / rep.eta;
    if (better) {
      rep.dual_bound = bound;
      rep.epsilon = eps;
      rep.eta = eta;
      rep.threshold_used = 1.0 / eta + 1.0;
    }
    if (certifies(bound, eta, opts.round_guard)) {
      rep.verdict = Verdict::certified_zero_only;
      rep.dual_bound = bound;
      rep.epsilon = eps;
      rep.eta = eta;
      rep.threshold_used = 1.0 / eta + 1.0;
      rep.strict_check = bound > 1.0 / eta + 1.0;
      rep.witness = std::move(w);
      rep.route = route;
      return true;
    }
    return false;
  };

  for (const auto& [eps, eta] : grid) {
    const ApproxModel model = build_relaxation(q, eps, eta);
    sdp::SdpSolution sol;
    try {
      sol = sdp::solve(model.problem, opts.solver);
    } catch (const Error& e) {
      rep.diagnostics.push_back(describe(eps, eta) + ": solver error: " + e.what());
      continue;
    }
    rep.diagnostics.push_back(describe(eps, eta) + ": solver " + sdp::to_string(sol.status) +
                              " after " + std::to_string(sol.iterations) + " iterations");
    if (sol.status == sdp::SolveStatus::dual_infeasible) continue;
    if (sol.status == sdp::SolveStatus::primal_infeasible) {
      // Push the strictly feasible dual point along the Farkas ray until the
      // value clears the threshold with room to spare.
      const DualWitness ray = witness_from_multipliers(model, sol.y, sol.box_multipliers);
      const double ray_value = witness_value(ray, eps, n);
      if (!(ray_value > 0.0)) {
        rep.diagnostics.push_back(describe(eps, eta) + ": infeasibility ray has no ascent");
        continue;
      }
      const DualWitness base = slater_witness(n, m, eta);
      const double alpha = (1.0 / eta + 3.0 - witness_value(base, eps, n)) / ray_value;
      if (accept(combine(base, ray, std::max(alpha, 0.0)), eps, eta, "relaxation-infeasible")) {
        return rep;
      }
      continue;
    }
    if (accept(witness_from_multipliers(model, sol.y, sol.box_multipliers), eps, eta,
               "relaxation-dual")) {
      return rep;
    }
  }

  if (opts.pencil_route && rep.pencil) {
    const double eps = grid.front().first;
    const double eta = grid.front().second;
    const double target = 2.5 + 1.0 / eta;
    DualWitness w = slater_witness(n, m, eta);
    w.phi.setZero();
    w.q.setZero();
    w.t1 = target;
    w.t2 = 0.0;
    w.mu = rep.pencil->mu * (target / rep.pencil->lambda_min) * (1.0 + 1e-9);
    if (accept(std::move(w), eps, eta, "pencil")) return rep;
  }
  rep.verdict = Verdict::inconclusive;
  return rep;
}

}  // namespace lowrank
