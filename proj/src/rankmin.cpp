#include "lowrank/rankmin.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "lowrank/errors.hpp"
#include "lowrank/io.hpp"

namespace lowrank {

using sdp::LinearForm;

AffineSetSpec AffineSetSpec::general(int m, int n) {
  AffineSetSpec c;
  c.shape = Shape::general;
  c.rows = m;
  c.cols = n;
  return c;
}

AffineSetSpec AffineSetSpec::symmetric(int n) {
  AffineSetSpec c;
  c.shape = Shape::symmetric;
  c.rows = n;
  c.cols = n;
  return c;
}

AffineSetSpec& AffineSetSpec::add(const Matrix& coeff, double rhs) {
  constraints.push_back({coeff, rhs});
  return *this;
}

void AffineSetSpec::validate() const {
  if (rows < 1 || cols < 1) throw InvalidInput("matrix shape must be positive");
  if (shape == Shape::symmetric && rows != cols) throw InvalidInput("symmetric shape must be square");
  for (const auto& c : constraints) {
    if (c.coeff.rows() != rows || c.coeff.cols() != cols) {
      throw InvalidInput("constraint matrix does not match the declared shape");
    }
    require_finite(c.coeff, "constraint matrix");
    if (!std::isfinite(c.rhs)) throw InvalidInput("constraint right-hand side is not finite");
    if (shape == Shape::symmetric) SymMatrix check(c.coeff);
  }
  if (psd_required && shape != Shape::symmetric) {
    throw InvalidInput("PSD requirement needs a symmetric shape");
  }
  if (trace_box) {
    if (!psd_required) throw InvalidInput("trace box needs a symmetric PSD set");
    if (!(trace_box->first <= trace_box->second)) throw InvalidInput("trace box needs lower <= upper");
  }
}

double AffineSetSpec::violation(const Matrix& x) const {
  double v = 0.0;
  for (const auto& c : constraints) {
    v = std::max(v, std::abs((c.coeff.array() * x.array()).sum() - c.rhs));
  }
  if (psd_required) {
    v = std::max(v, -min_eigenvalue(Matrix(0.5 * (x + x.transpose()))));
    v = std::max(v, (x - x.transpose()).cwiseAbs().maxCoeff());
  }
  if (trace_box) {
    const double t = x.trace();
    v = std::max({v, trace_box->first - t, t - trace_box->second});
  }
  return v;
}

ApproxModel build_approx_sdp(const AffineSetSpec& c, double eps, double gamma) {
  c.validate();
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("epsilon must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidParameter("gamma must be positive");

  ApproxModel model;
  model.epsilon = eps;
  model.gamma = gamma;
  auto& p = model.problem;
  auto& lay = model.layout;
  const int k = c.rows;
  const int l = c.cols;
  lay.rows = k;
  lay.cols = l;

  if (c.psd_required) {
    const double tb = c.trace_box ? c.trace_box->second : 0.0;
    lay.x_block = p.add_psd_block("x", k, tb);
  }
  lay.unit_block = p.add_psd_block("unit", k + l);
  lay.shift_block = p.add_psd_block("shift", k + l);
  const int u = lay.unit_block;
  const int s = lay.shift_block;

  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      lay.pin_rows.push_back(
          p.add_equality(LinearForm().add_element(u, a, b, 1.0), a == b ? 1.0 : 0.0, "pin"));
    }
  }
  if (c.psd_required) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < l; ++b) {
        LinearForm f;
        f.add_element(lay.x_block, a, b, 1.0).add_element(u, a, k + b, -1.0);
        lay.link_rows.push_back(p.add_equality(std::move(f), 0.0, "link"));
      }
    }
  } else if (c.shape == Shape::symmetric) {
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) {
        LinearForm f;
        f.add_element(u, a, k + b, 1.0).add_element(u, b, k + a, -1.0);
        lay.symmetry_rows.push_back(p.add_equality(std::move(f), 0.0, "symmetry"));
      }
    }
  }
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < l; ++b) {
      LinearForm f;
      f.add_element(s, a, k + b, 1.0).add_element(u, a, k + b, -1.0);
      lay.coupling_rows.push_back(p.add_equality(std::move(f), 0.0, "coupling"));
    }
  }
  for (int a = 0; a < l; ++a) {
    for (int b = a; b < l; ++b) {
      LinearForm f;
      f.add_element(s, k + a, k + b, 1.0).add_element(u, k + a, k + b, -1.0);
      lay.shift_rows.push_back(p.add_equality(std::move(f), a == b ? eps : 0.0, "shift"));
    }
  }
  for (const auto& con : c.constraints) {
    LinearForm f;
    if (c.psd_required) {
      f.add_elements(lay.x_block, 0, 0, con.coeff);
    } else {
      f.add_elements(u, 0, k, con.coeff);
    }
    lay.data_rows.push_back(p.add_equality(std::move(f), con.rhs, "data"));
  }
  if (c.trace_box) {
    lay.trace_box = p.add_box(LinearForm().add_trace(lay.x_block, 0, k), c.trace_box->first,
                              c.trace_box->second, "trace");
  }
  LinearForm obj;
  obj.add_trace(s, 0, k, 1.0).add_trace(u, k, l, 1.0 / gamma);
  p.set_objective(std::move(obj));
  return model;
}

ApproxPoint extract_point(const ApproxModel& model, const sdp::SdpSolution& sol) {
  const auto& lay = model.layout;
  const int k = lay.rows;
  const int l = lay.cols;
  const Matrix& u = sol.blocks.at(lay.unit_block);
  const Matrix& s = sol.blocks.at(lay.shift_block);
  ApproxPoint pt;
  pt.x = u.topRightCorner(k, l);
  pt.z = u.bottomRightCorner(l, l);
  pt.y = s.topLeftCorner(k, k);
  pt.tr_y_raw = pt.y.trace();
  pt.tr_z = pt.z.trace();
  pt.tr_y = pt.tr_y_raw;
  const Matrix shifted = 0.5 * (s.bottomRightCorner(l, l) + s.bottomRightCorner(l, l).transpose());
  try {
    const Matrix w = solve_spd(SymMatrix(shifted), Matrix(pt.x.transpose()));
    pt.tr_y = (pt.x * w).trace();
  } catch (const Error&) {
    // Keep the raw trace when the shifted block is numerically singular.
  }
  return pt;
}

const char* to_string(RankMinStatus s) {
  switch (s) {
    case RankMinStatus::converged: return "converged";
    case RankMinStatus::not_stabilized: return "not-stabilized";
    case RankMinStatus::numerical_failure: return "numerical-failure";
    case RankMinStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

sdp::SolverOptions RankMinSchedule::tight_solver_options() {
  sdp::SolverOptions o;
  o.gap_tol = 1e-10;
  o.feas_tol = 1e-10;
  return o;
}

RankMinResult solve_rankmin(const AffineSetSpec& c, const RankMinSchedule& sch) {
  c.validate();
  if (!(sch.p > 1.0)) throw InvalidParameter("p must exceed 1");
  if (!(sch.beta > 0.0 && sch.beta < 1.0)) throw InvalidParameter("beta must lie in (0, 1)");
  if (!(sch.epsilon0 > 0.0)) throw InvalidParameter("epsilon0 must be positive");
  if (sch.stability_window < 1 || sch.max_stages < 1) {
    throw InvalidParameter("window and max_stages must be positive");
  }

  RankMinResult out;
  int streak = 0;
  double eps = sch.epsilon0;
  for (int stage = 0; stage < sch.max_stages; ++stage, eps *= sch.beta) {
    const double gamma = std::pow(eps, sch.p);
    if (1.0 / gamma > sch.max_penalty) {
      out.message = "penalty weight limit reached";
      break;
    }
    const ApproxModel model = build_approx_sdp(c, eps, gamma);
    const sdp::SdpSolution sol = sdp::solve(model.problem, sch.solver);
    if (sol.status == sdp::SolveStatus::primal_infeasible) {
      out.status = RankMinStatus::infeasible;
      out.message = "stage " + std::to_string(stage) + ": feasible set is empty";
      return out;
    }
    if (sol.status != sdp::SolveStatus::optimal) {
      // Accept a stalled solve that is nonetheless accurate to the default
      // tolerances; anything looser ends the schedule.
      const sdp::SolverOptions loose;
      const bool usable = sol.status != sdp::SolveStatus::dual_infeasible &&
                          sol.relative_gap <= loose.gap_tol &&
                          sol.primal_infeasibility <= loose.feas_tol &&
                          sol.dual_infeasibility <= loose.feas_tol;
      if (!usable) {
        out.status = RankMinStatus::numerical_failure;
        out.message = "stage " + std::to_string(stage) + ": solver " + sdp::to_string(sol.status) +
                      " (" + sol.message + ")";
        return out;
      }
    }
    const ApproxPoint pt = extract_point(model, sol);
    const int r = rounded_rank(pt.tr_y, sch.round_guard);
    if (!out.trajectory.empty()) {
      out.max_tr_y_increase = std::max(out.max_tr_y_increase, pt.tr_y - out.trajectory.back().tr_y);
      streak = r == out.trajectory.back().rank_rounded ? streak + 1 : 1;
    } else {
      streak = 1;
    }
    out.trajectory.push_back({eps, gamma, pt.tr_y, pt.tr_z, r, pt.x, sol.status, sol.iterations});
    out.rank_estimate = r;
    out.least_fnorm_estimate = pt.tr_z;
    if (streak >= sch.stability_window) {
      out.status = RankMinStatus::converged;
      out.message = "rounded rank stable for " + std::to_string(streak) + " stages";
      return out;
    }
  }
  out.status = RankMinStatus::not_stabilized;
  if (out.message.empty()) out.message = "stage limit reached";
  return out;
}

void write_trajectory_csv(const RankMinResult& r, std::ostream& out) {
  out << "stage,epsilon,gamma,trY,trZ,rank_rounded\n";
  for (size_t i = 0; i < r.trajectory.size(); ++i) {
    const auto& s = r.trajectory[i];
    out << i << "," << format_double(s.epsilon) << "," << format_double(s.gamma) << ","
        << format_double(s.tr_y) << "," << format_double(s.tr_z) << "," << s.rank_rounded << "\n";
  }
}

NuclearNormResult nuclear_norm_min(const AffineSetSpec& c, const sdp::SolverOptions& opts) {
  c.validate();
  sdp::BlockSdpProblem p;
  const int k = c.rows;
  const int l = c.cols;
  int xb = -1;
  LinearForm obj;
  if (c.psd_required) {
    const double tb = c.trace_box ? c.trace_box->second : 0.0;
    xb = p.add_psd_block("x", k, tb);
    for (const auto& con : c.constraints) {
      p.add_equality(LinearForm().add_elements(xb, 0, 0, con.coeff), con.rhs, "data");
    }
    if (c.trace_box) {
      p.add_box(LinearForm().add_trace(xb, 0, k), c.trace_box->first, c.trace_box->second, "trace");
    }
    obj.add_trace(xb, 0, k);
  } else {
    // [[U, X], [X^T, V]] psd; ||X||_* = min (tr U + tr V) / 2.
    xb = p.add_psd_block("uxv", k + l);
    if (c.shape == Shape::symmetric) {
      for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
          p.add_equality(LinearForm().add_element(xb, a, k + b, 1.0).add_element(xb, b, k + a, -1.0),
                         0.0, "symmetry");
        }
      }
    }
    for (const auto& con : c.constraints) {
      p.add_equality(LinearForm().add_elements(xb, 0, k, con.coeff), con.rhs, "data");
    }
    obj.add_trace(xb, 0, k + l, 0.5);
  }
  p.set_objective(std::move(obj));
  const sdp::SdpSolution sol = sdp::solve(p, opts);
  NuclearNormResult r;
  r.status = sol.status;
  r.value = sol.primal_objective;
  r.x = c.psd_required ? sol.blocks[xb] : Matrix(sol.blocks[xb].topRightCorner(k, l));
  return r;
}

double penalized_rank_objective(const Matrix& x, double eta) {
  if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
  return numerical_rank(x) + x.squaredNorm() / eta;
}

BruteForceRank brute_force_min_rank(const std::vector<Matrix>& candidates) {
  if (candidates.empty()) throw InvalidParameter("candidate list is empty");
  BruteForceRank r;
  std::vector<int> ranks;
  for (const auto& x : candidates) ranks.push_back(numerical_rank(x));
  r.min_rank = *std::min_element(ranks.begin(), ranks.end());
  int least = 0;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (candidates[i].squaredNorm() < candidates[least].squaredNorm()) least = i;
    if (ranks[i] != r.min_rank) continue;
    r.minimizers.push_back(i);
    if (r.least_fnorm_minimizer < 0 ||
        candidates[i].squaredNorm() < candidates[r.least_fnorm_minimizer].squaredNorm()) {
      r.least_fnorm_minimizer = i;
    }
  }
  r.least_fnorm_has_min_rank = ranks[least] == r.min_rank;
  return r;
}

}  // namespace lowrank
