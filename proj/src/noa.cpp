#include "bagopf/noa.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

#include "bagopf/error.hpp"

namespace bagopf {

namespace {

// Loose acceptance for solver points that stopped on a numerical limit.
constexpr double kInexactFeas = 1e-7;
constexpr double kInexactGap = 1e-6;

}  // namespace

void NoaOptions::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(mu, "mu");
  positive(eps_tol, "eps_tol");
  positive(eps_rank, "eps_rank");
  positive(max_iters, "max_iters");
  positive(stall_iters, "stall_iters");
  positive(stall_rel, "stall_rel");
}

const char* noa_status_name(NoaStatus s) {
  switch (s) {
    case NoaStatus::converged: return "converged";
    case NoaStatus::max_iters: return "max-iters";
    case NoaStatus::stalled: return "stalled";
    case NoaStatus::infeasible: return "infeasible";
    case NoaStatus::numerical_limit: return "numerical-limit";
  }
  return "unknown";
}

EigPair max_eigpair(const Eigen::MatrixXcd& block) {
  const Eigen::MatrixXcd h = 0.5 * (block + block.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const auto& ev = es.eigenvalues();
  const Eigen::Index n = ev.size();
  EigPair p;
  p.lambda_max = ev(n - 1);
  const double tol = 1e-12 * std::max(1.0, std::abs(p.lambda_max));
  Eigen::Index pick = n - 1;
  while (pick > 0 && p.lambda_max - ev(pick - 1) <= tol) --pick;
  p.w_max = es.eigenvectors().col(pick);
  Eigen::Index big = 0;
  p.w_max.cwiseAbs().maxCoeff(&big);
  const Complex ph = p.w_max(big) / std::abs(p.w_max(big));
  p.w_max /= ph;
  p.w_max.normalize();
  return p;
}

std::vector<std::size_t> rank_one_set(const Iterate& iterate, double eps_rank) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < iterate.blocks.size(); ++i) {
    const double tr = iterate.blocks[i].trace().real();
    if (iterate.blocks[i].rows() == 1 ||
        iterate.rank_gaps[i] <= eps_rank * std::max(1.0, tr)) {
      out.push_back(i);
    }
  }
  return out;
}

Iterate make_iterate(const SdrProgram& sdr, std::vector<double> x, double mu,
                     double eps_rank) {
  Iterate it;
  it.blocks = decode_blocks(sdr.layout, x);
  it.objective = sdr.program.objective_value(x);
  it.x = std::move(x);
  for (const auto& b : it.blocks) {
    EigPair p = max_eigpair(b);
    it.rank_gaps.push_back(b.trace().real() - p.lambda_max);
    it.penalty += it.rank_gaps.back();
    it.eigpairs.push_back(std::move(p));
  }
  it.rank_one_set = rank_one_set(it, eps_rank);
  it.f_mu = it.objective + mu * it.penalty;
  return it;
}

Affine rank_gap_linearization(const BagLayout& layout, std::size_t bag,
                              const Eigen::VectorXcd& w, double scale) {
  Affine a;
  const std::size_t n = layout.size[bag];
  for (std::size_t r = 0; r < n; ++r) {
    a.add(layout.re(bag, r, r), scale * (1.0 - std::norm(w(r))));
    for (std::size_t c = r + 1; c < n; ++c) {
      // w^H W w picks up 2 Re(conj(w_r) w_c W_rc) from the (r, c) pair.
      const Complex k = std::conj(w(r)) * w(c);
      a.add(layout.re(bag, r, c), -2.0 * scale * k.real());
      a.add(layout.im(bag, r, c), 2.0 * scale * k.imag());
    }
  }
  return a;
}

bool usable(const SolveResult& r, bool* inexact) {
  if (inexact) *inexact = false;
  if (r.status == SolveStatus::optimal) return true;
  if (r.status != SolveStatus::numerical_limit && r.status != SolveStatus::iteration_limit) {
    return false;
  }
  if (r.x.empty()) return false;
  const bool ok = r.primal_residual <= kInexactFeas && r.dual_residual <= kInexactFeas &&
                  r.relative_gap <= kInexactGap;
  if (ok && inexact) *inexact = true;
  return ok;
}

InitResult init_sdr(const SdrProgram& sdr, const NoaOptions& options,
                    const Backend& backend, const BackendOptions& backend_options) {
  InitResult out;
  out.solve = backend.solve(sdr.program, backend_options);
  if (out.solve.status == SolveStatus::infeasible ||
      out.solve.status == SolveStatus::unbounded) {
    out.status = NoaStatus::infeasible;
    return out;
  }
  if (!usable(out.solve, &out.inexact)) {
    out.status = NoaStatus::numerical_limit;
    return out;
  }
  out.iterate = make_iterate(sdr, out.solve.x, options.mu, options.eps_rank);
  out.lower_bound = out.solve.objective;
  return out;
}

ConicProgram build_iteration_program(const SdrProgram& base, const Iterate& iterate,
                                     const std::vector<std::size_t>& locked, double mu,
                                     double eps_tol) {
  ConicProgram p = base.program;
  const std::size_t bags = base.layout.size.size();
  for (std::size_t i = 0; i < bags; ++i) {
    const Affine a = rank_gap_linearization(base.layout, i, iterate.eigpairs[i].w_max, mu);
    for (const auto& [v, c] : a.terms) p.objective[v] += c;
  }
  for (std::size_t i : locked) {
    LinearRow row;
    row.family = Family::lock;
    row.expr = rank_gap_linearization(base.layout, i, iterate.eigpairs[i].w_max, 1.0);
    row.expr.constant = -eps_tol;
    if (row.expr.terms.empty()) continue;  // 1x1 bags are always rank-one
    p.inequalities.push_back(std::move(row));
  }
  return p;
}

StepResult step(const SdrProgram& base, const Iterate& iterate,
                const std::vector<std::size_t>& locked, double mu, const NoaOptions& options,
                const Backend& backend, const BackendOptions& backend_options) {
  StepResult out;
  double eps = options.eps_tol;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ConicProgram prog = build_iteration_program(base, iterate, locked, mu, eps);
    SolveResult r = backend.solve(prog, backend_options);
    const double elapsed = out.solve.solve_time + r.solve_time;
    out.solve = std::move(r);
    out.solve.solve_time = elapsed;
    if (usable(out.solve, &out.inexact)) {
      out.ok = true;
      out.next = make_iterate(base, out.solve.x, mu, options.eps_rank);
      return out;
    }
    out.retried = true;
    eps *= 10.0;
  }
  return out;
}

double got(double found_value, double lower_bound) {
  if (!(lower_bound > 0.0)) {
    throw ValidationError("optimality gap undefined for a non-positive lower bound");
  }
  return (found_value - lower_bound) / lower_bound;
}

namespace {

TraceRecord record(int iteration, const Iterate& it, const SolveResult& r, bool inexact,
                   bool retried, const std::vector<std::size_t>& lock) {
  TraceRecord t;
  t.iteration = iteration;
  t.objective = it.objective;
  t.penalty = it.penalty;
  t.f_mu = it.f_mu;
  t.locked = it.rank_one_set.size();
  t.max_rank_gap = it.rank_gaps.empty()
                       ? 0.0
                       : *std::max_element(it.rank_gaps.begin(), it.rank_gaps.end());
  for (std::size_t b : lock) t.locked_max_gap = std::max(t.locked_max_gap, it.rank_gaps[b]);
  t.solve_seconds = r.solve_time;
  t.solver_status = r.status;
  t.inexact = inexact;
  t.retried = retried;
  return t;
}

}  // namespace

NoaResult run(const SdrProgram& sdr, const NoaOptions& options, const Backend& backend,
              const BackendOptions& backend_options) {
  options.validate();
  backend_options.validate();
  NoaResult res;
  InitResult init = init_sdr(sdr, options, backend, backend_options);
  if (init.status != NoaStatus::converged) {
    res.status = init.status;
    res.message = "relaxation: " + std::string(status_name(init.solve.status)) +
                  (init.solve.message.empty() ? "" : " (" + init.solve.message + ")");
    return res;
  }
  res.lower_bound = init.lower_bound;
  double mu = options.mu;
  if (options.mu_auto) {
    mu = std::max(1e3, init.iterate.objective / std::max(init.iterate.penalty, 1e-12));
  }
  res.mu = mu;
  Iterate cur = init.iterate;
  cur.f_mu = cur.objective + mu * cur.penalty;
  res.trace.push_back(record(0, cur, init.solve, init.inexact, false, {}));

  const std::size_t bags = cur.blocks.size();
  std::set<std::size_t> locked(cur.rank_one_set.begin(), cur.rank_one_set.end());
  res.status = NoaStatus::max_iters;
  int flat = 0;
  int k = 0;
  while (cur.rank_one_set.size() < bags) {
    if (k == options.max_iters) break;
    ++k;
    const std::vector<std::size_t> lock(locked.begin(), locked.end());
    StepResult s = step(sdr, cur, lock, mu, options, backend, backend_options);
    if (!s.ok) {
      res.status = NoaStatus::numerical_limit;
      res.message = "iteration " + std::to_string(k) + ": " +
                    status_name(s.solve.status) +
                    (s.solve.message.empty() ? "" : " (" + s.solve.message + ")");
      --k;
      break;
    }
    const double before = cur.f_mu;
    cur = std::move(s.next);
    res.trace.push_back(record(k, cur, s.solve, s.inexact, s.retried, lock));
    locked.insert(cur.rank_one_set.begin(), cur.rank_one_set.end());
    if (cur.rank_one_set.size() == bags) break;
    const double change = std::abs(before - cur.f_mu) / std::max(1.0, std::abs(before));
    flat = change < options.stall_rel ? flat + 1 : 0;
    if (flat >= options.stall_iters) {
      res.status = NoaStatus::stalled;
      res.message = "F_mu change below stall_rel for " + std::to_string(flat) + " iterations";
      break;
    }
  }
  if (cur.rank_one_set.size() == bags) res.status = NoaStatus::converged;
  res.iterations = k;
  res.found_value = cur.objective;
  if (res.lower_bound > 0.0) res.got = got(res.found_value, res.lower_bound);
  res.final = std::move(cur);
  return res;
}

}  // namespace bagopf
