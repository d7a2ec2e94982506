// Command-line front end: phi, rank, rankmin and certify subcommands.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "lowrank/errors.hpp"
#include "lowrank/io.hpp"
#include "lowrank/quadcert.hpp"
#include "lowrank/rank_approx.hpp"
#include "lowrank/rankmin.hpp"
#include "lowrank/sdp/standard_form.hpp"

namespace {

using namespace lowrank;

enum Exit { kOk = 0, kInconclusive = 1, kInputError = 2, kNumericalFailure = 3 };

struct Flags {
  std::vector<std::string> files;
  std::optional<double> epsilon;
  std::optional<double> eta;
  std::optional<double> beta;
  std::optional<double> p;
  std::optional<double> epsilon0;
  std::optional<int> max_stages;
  std::optional<int> window;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  int jobs = 1;
  std::string csv;
  std::string sdpa;
  std::string snapshots;
  bool nuclear = false;
};

struct Outcome {
  int code = kOk;
  std::string out;
  std::string err;
};

// Rank with a relative cutoff suited to interior-point output.
int loose_rank(const Matrix& x) {
  const Vector s = singular_values(x);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > 1e-6 * s(0)).count());
}

std::string indexed_path(const std::string& path, size_t index, size_t count) {
  if (path.empty() || count <= 1) return path;
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + "_" + std::to_string(index) + p.extension().string()))
      .string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

double option(const ProblemFile* f, const char* key, std::optional<double> flag, double fallback) {
  if (flag) return *flag;
  if (f) {
    const auto it = f->options.find(key);
    if (it != f->options.end()) return it->second;
  }
  return fallback;
}

// Loads a plain matrix file or a problem file of kind matrix.
Matrix load_matrix(const std::string& path, std::optional<ProblemFile>& pf) {
  const std::string text = read_file(path);
  std::istringstream probe(text);
  std::istringstream in(text);
  if (is_problem_file(probe)) {
    pf = read_problem(in);
    if (pf->kind != ProblemKind::matrix) throw InvalidInput("expected a problem file of kind matrix");
    return pf->matrix;
  }
  return read_matrix(in);
}

Outcome run_phi(const Flags& fl, const std::string& path) {
  Outcome o;
  std::optional<ProblemFile> pf;
  const Matrix x = load_matrix(path, pf);
  const double eps = option(pf ? &*pf : nullptr, "epsilon", fl.epsilon, 1.0);
  const double value = phi_direct(x, eps);
  const RankGap g = rank_gap(x, eps);
  std::ostringstream s;
  s << "phi=" << format_double(value) << "\n"
    << "gap_exact=" << format_double(g.gap_exact) << "\n"
    << "gap_upper=" << format_double(g.gap_upper) << "\n"
    << "epsilon=" << format_double(eps) << "\n"
    << "numerical_rank=" << numerical_rank(x) << "\n";
  o.out = s.str();
  return o;
}

Outcome run_rank(const Flags& fl, const std::string& path) {
  Outcome o;
  std::optional<ProblemFile> pf;
  const Matrix x = load_matrix(path, pf);
  const ProblemFile* f = pf ? &*pf : nullptr;
  RankSchemeOptions opts;
  opts.epsilon0 = option(f, "epsilon0", fl.epsilon0, 0.0);
  opts.beta = option(f, "beta", fl.beta, opts.beta);
  opts.stability_window = static_cast<int>(option(
      f, "window", fl.window ? std::optional<double>(*fl.window) : std::nullopt, opts.stability_window));
  opts.max_iters = static_cast<int>(option(
      f, "max_iters", fl.max_iters ? std::optional<double>(*fl.max_iters) : std::nullopt, opts.max_iters));
  std::ostringstream s;
  auto dump = [&](const RankSchemeTrace& t) {
    for (size_t i = 0; i < t.iterations.size(); ++i) {
      const auto& it = t.iterations[i];
      s << "iter=" << i << " epsilon=" << format_double(it.epsilon)
        << " phi=" << format_double(it.phi_value) << " rounded=" << it.rounded_rank << "\n";
    }
  };
  try {
    const RankSchemeTrace t = exact_rank_scheme(x, opts);
    dump(t);
    s << "rank=" << t.final_rank << "\n"
      << "final_epsilon=" << format_double(t.final_epsilon) << "\n"
      << "status=converged\n";
  } catch (const NoConvergence& e) {
    dump(e.trace());
    s << "status=no-convergence\n";
    o.code = kInconclusive;
  }
  o.out = s.str();
  return o;
}

Outcome run_rankmin(const Flags& fl, const std::string& path, size_t index, size_t count) {
  Outcome o;
  const std::string text = read_file(path);
  std::istringstream in(text);
  const ProblemFile pf = read_problem(in);
  if (pf.kind != ProblemKind::affine) throw InvalidInput("rankmin needs a problem file of kind affine");
  RankMinSchedule sch;
  sch.epsilon0 = option(&pf, "epsilon0", fl.epsilon0, sch.epsilon0);
  sch.beta = option(&pf, "beta", fl.beta, sch.beta);
  sch.p = option(&pf, "p", fl.p, sch.p);
  sch.max_stages = static_cast<int>(option(
      &pf, "max_stages", fl.max_stages ? std::optional<double>(*fl.max_stages) : std::nullopt,
      sch.max_stages));
  sch.stability_window = static_cast<int>(option(
      &pf, "window", fl.window ? std::optional<double>(*fl.window) : std::nullopt, sch.stability_window));

  if (!fl.sdpa.empty()) {
    const ApproxModel model = build_approx_sdp(pf.affine, sch.epsilon0, std::pow(sch.epsilon0, sch.p));
    std::ostringstream sd;
    sdp::write_sdpa(sdp::standard_form_compile(model.problem), sd);
    write_text(indexed_path(fl.sdpa, index, count), sd.str());
  }

  const RankMinResult r = solve_rankmin(pf.affine, sch);
  std::ostringstream s;
  s << "status=" << to_string(r.status) << "\n"
    << "rank_estimate=" << r.rank_estimate << "\n"
    << "least_fnorm_estimate=" << format_double(r.least_fnorm_estimate) << "\n"
    << "stages=" << r.trajectory.size() << "\n";
  if (!r.trajectory.empty()) s << "final_epsilon=" << format_double(r.trajectory.back().epsilon) << "\n";
  s << "message=" << r.message << "\n";
  if (fl.nuclear) {
    const NuclearNormResult nn = nuclear_norm_min(pf.affine);
    s << "nuclear_status=" << sdp::to_string(nn.status) << "\n"
      << "nuclear_norm=" << format_double(nn.value) << "\n"
      << "nuclear_rank=" << loose_rank(nn.x) << "\n";
  }
  std::ostringstream csv;
  write_trajectory_csv(r, csv);
  if (fl.csv.empty()) {
    s << csv.str();
  } else {
    write_text(indexed_path(fl.csv, index, count), csv.str());
  }
  if (!fl.snapshots.empty()) {
    std::filesystem::create_directories(fl.snapshots);
    for (size_t k = 0; k < r.trajectory.size(); ++k) {
      std::ostringstream m;
      write_matrix(m, r.trajectory[k].x);
      const std::string name = (count > 1 ? std::to_string(index) + "_" : std::string()) + "stage" +
                               std::to_string(k) + ".txt";
      write_text((std::filesystem::path(fl.snapshots) / name).string(), m.str());
    }
  }
  o.out = s.str();
  switch (r.status) {
    case RankMinStatus::converged: o.code = kOk; break;
    case RankMinStatus::numerical_failure: o.code = kNumericalFailure; break;
    default: o.code = kInconclusive; break;
  }
  return o;
}

Outcome run_certify(const Flags& fl, const std::string& path, size_t index, size_t count) {
  Outcome o;
  const std::string text = read_file(path);
  std::istringstream probe(text);
  std::istringstream in(text);
  std::optional<ProblemFile> pf;
  QuadSystem q;
  if (is_problem_file(probe)) {
    pf = read_problem(in);
    if (pf->kind != ProblemKind::quadratic) throw InvalidInput("expected a problem file of kind quadratic");
    q = pf->system;
  } else {
    q = read_system(in);
  }
  const ProblemFile* f = pf ? &*pf : nullptr;
  CertifyOptions opts;
  const bool has_eps = fl.epsilon || (f && f->options.count("epsilon"));
  const bool has_eta = fl.eta || (f && f->options.count("eta"));
  if (has_eps || has_eta) {
    const double eps = option(f, "epsilon", fl.epsilon, 1e-4);
    const double eta = option(f, "eta", fl.eta, has_eps ? eps : 1e-2);
    opts.grid = {{eps, eta}};
  }
  opts.oracle.seed = static_cast<std::uint64_t>(
      option(f, "seed", fl.seed ? std::optional<double>(static_cast<double>(*fl.seed)) : std::nullopt, 0.0));
  opts.oracle.budget = static_cast<int>(
      option(f, "budget", fl.budget ? std::optional<double>(*fl.budget) : std::nullopt, opts.oracle.budget));
  opts.oracle.restarts = static_cast<int>(option(f, "restarts", std::nullopt, opts.oracle.restarts));

  if (!fl.sdpa.empty()) {
    const auto grid = opts.grid.empty() ? default_certify_grid() : opts.grid;
    const ApproxModel model = build_relaxation(q, grid.front().first, grid.front().second);
    std::ostringstream sd;
    sdp::write_sdpa(sdp::standard_form_compile(model.problem), sd);
    write_text(indexed_path(fl.sdpa, index, count), sd.str());
  }

  const CertificateReport r = certify_zero_only(q, opts);
  std::ostringstream s;
  s << "verdict=" << to_string(r.verdict) << "\n"
    << "dual_bound=" << format_double(r.dual_bound) << "\n"
    << "epsilon=" << format_double(r.epsilon) << "\n"
    << "eta=" << format_double(r.eta) << "\n"
    << "threshold=" << format_double(r.threshold_used) << "\n"
    << "route=" << r.route << "\n"
    << "strict_check=" << (r.strict_check ? "true" : "false") << "\n";
  s << "counterexample=";
  if (r.counterexample) {
    for (int i = 0; i < r.counterexample->x.size(); ++i) {
      s << (i ? "," : "") << format_double(r.counterexample->x(i));
    }
    s << "\ncounterexample_residual=" << format_double(r.counterexample->residual);
  } else {
    s << "none";
  }
  s << "\npencil=";
  if (r.pencil) {
    for (int i = 0; i < r.pencil->mu.size(); ++i) s << (i ? "," : "") << format_double(r.pencil->mu(i));
    s << "\npencil_lambda_min=" << format_double(r.pencil->lambda_min);
  } else {
    s << "none";
  }
  s << "\n";
  if (r.witness) {
    s << "witness_t1=" << format_double(r.witness->t1) << "\n"
      << "witness_t2=" << format_double(r.witness->t2) << "\n"
      << "witness_min_eigenvalue="
      << format_double(witness_min_eigenvalue(*r.witness, q, r.eta)) << "\n";
  }
  for (const auto& d : r.diagnostics) s << "# " << d << "\n";
  o.out = s.str();
  o.code = r.verdict == Verdict::inconclusive ? kInconclusive : kOk;
  return o;
}

template <class Fn>
int run_all(const Flags& fl, Fn fn) {
  const size_t count = fl.files.size();
  std::vector<Outcome> results(count);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < count; i = next++) {
      Outcome& o = results[i];
      try {
        o = fn(fl.files[i], i, count);
      } catch (const ParseError& e) {
        o.code = kInputError;
        o.err = fl.files[i] + ": " + e.what();
      } catch (const InvalidInput& e) {
        o.code = kInputError;
        o.err = fl.files[i] + ": " + e.what();
      } catch (const InvalidParameter& e) {
        o.code = kInputError;
        o.err = fl.files[i] + ": " + e.what();
      } catch (const std::exception& e) {
        o.code = kNumericalFailure;
        o.err = fl.files[i] + ": " + e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(fl.jobs, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kOk;
  for (size_t i = 0; i < count; ++i) {
    if (count > 1) std::cout << "file=" << fl.files[i] << "\n";
    std::cout << results[i].out;
    if (!results[i].err.empty()) std::cerr << "error: " << results[i].err << "\n";
    code = std::max(code, results[i].code);
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank surrogates, rank minimization and quadratic-system certificates"};
  app.require_subcommand(1);
  Flags fl;
  app.add_option("--jobs", fl.jobs, "Process up to N input files in parallel")->check(CLI::PositiveNumber);

  auto* phi = app.add_subcommand("phi", "Evaluate the rank surrogate and its error bounds");
  phi->add_option("files", fl.files, "Matrix files")->required()->check(CLI::ExistingFile);
  phi->add_option("--epsilon", fl.epsilon, "Smoothing parameter (default 1)");

  auto* rank = app.add_subcommand("rank", "Exact rank via a shrinking-epsilon schedule");
  rank->add_option("files", fl.files, "Matrix files")->required()->check(CLI::ExistingFile);
  rank->add_option("--epsilon0", fl.epsilon0, "Initial epsilon (default ||X||_F^2)");
  rank->add_option("--beta", fl.beta, "Shrink factor in (0,1)");
  rank->add_option("--window", fl.window, "Stability window");
  rank->add_option("--max-iters", fl.max_iters, "Iteration limit");

  auto* rankmin = app.add_subcommand("rankmin", "Rank minimization over an affine set");
  rankmin->add_option("files", fl.files, "Problem files (kind affine)")->required()->check(CLI::ExistingFile);
  rankmin->add_option("--epsilon0", fl.epsilon0, "First epsilon of the schedule");
  rankmin->add_option("--beta", fl.beta, "Shrink factor in (0,1)");
  rankmin->add_option("--p", fl.p, "Penalty exponent, gamma = epsilon^p");
  rankmin->add_option("--max-stages", fl.max_stages, "Stage limit");
  rankmin->add_option("--window", fl.window, "Stability window");
  rankmin->add_option("--csv", fl.csv, "Write the trajectory CSV here instead of stdout");
  rankmin->add_option("--snapshots", fl.snapshots, "Directory for per-stage X matrix files");
  rankmin->add_option("--sdpa-export", fl.sdpa, "Write the first-stage model in sparse SDPA format");
  rankmin->add_flag("--nuclear", fl.nuclear, "Also report the nuclear-norm baseline");

  auto* certify = app.add_subcommand("certify", "Certify that x^T A_i x = 0 forces x = 0");
  certify->add_option("files", fl.files, "System or problem files (kind quadratic)")
      ->required()
      ->check(CLI::ExistingFile);
  certify->add_option("--epsilon", fl.epsilon, "Relaxation epsilon (replaces the default grid)");
  certify->add_option("--eta", fl.eta, "Penalty parameter eta (default: epsilon)");
  certify->add_option("--seed", fl.seed, "Seed for the counterexample search");
  certify->add_option("--budget", fl.budget, "Iteration budget for the counterexample search");
  certify->add_option("--sdpa-export", fl.sdpa, "Write the relaxation in sparse SDPA format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  if (phi->parsed()) {
    return run_all(fl, [&](const std::string& f, size_t, size_t) { return run_phi(fl, f); });
  }
  if (rank->parsed()) {
    return run_all(fl, [&](const std::string& f, size_t, size_t) { return run_rank(fl, f); });
  }
  if (rankmin->parsed()) {
    return run_all(fl, [&](const std::string& f, size_t i, size_t n) { return run_rankmin(fl, f, i, n); });
  }
  return run_all(fl, [&](const std::string& f, size_t i, size_t n) { return run_certify(fl, f, i, n); });
}
