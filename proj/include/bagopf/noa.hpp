#pragma once

// Penalized rank-one iteration over the bag matrices. Starting from the
// relaxation optimum, each step solves the base program with the rank gap
// Trace(W) - lambda_max(W) of every bag replaced by its linearization at the
// current top eigenvector, and locks bags that are already rank-one.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bagopf/conic.hpp"
#include "bagopf/sdr.hpp"

namespace bagopf {

struct NoaOptions {
  double mu = 1e6;
  bool mu_auto = false;
  double eps_tol = 1e-5;   ///< lock rows: Trace - w'Ww <= eps_tol
  double eps_rank = 1e-5;  ///< rank-one test, relative to max(1, Trace)
  int max_iters = 100;
  int stall_iters = 10;
  double stall_rel = 1e-7;

  /// Throws ValidationError unless every field is positive.
  void validate() const;
};

struct EigPair {
  double lambda_max = 0.0;
  Eigen::VectorXcd w_max;
};

struct Iterate {
  std::vector<double> x;  ///< full program point
  std::vector<Eigen::MatrixXcd> blocks;
  std::vector<EigPair> eigpairs;
  std::vector<double> rank_gaps;  ///< Trace - lambda_max per bag
  std::vector<std::size_t> rank_one_set;
  double objective = 0.0;  ///< F(W), the base program objective
  double penalty = 0.0;    ///< sum of rank gaps
  double f_mu = 0.0;       ///< objective + mu * penalty
};

struct TraceRecord {
  int iteration = 0;  ///< 0 is the relaxation
  double objective = 0.0;
  double penalty = 0.0;
  double f_mu = 0.0;
  std::size_t locked = 0;  ///< |rank_one_set|
  double max_rank_gap = 0.0;
  double locked_max_gap = 0.0;  ///< largest gap among bags locked during this step
  double solve_seconds = 0.0;
  SolveStatus solver_status = SolveStatus::optimal;
  bool inexact = false;  ///< accepted a near-optimal solver point
  bool retried = false;  ///< lock tolerance was widened for this step
};

enum class NoaStatus { converged, max_iters, stalled, infeasible, numerical_limit };

const char* noa_status_name(NoaStatus s);

struct NoaResult {
  NoaStatus status = NoaStatus::numerical_limit;
  Iterate final;
  double lower_bound = 0.0;
  double found_value = 0.0;
  std::optional<double> got;  ///< empty when the lower bound is not positive
  double mu = 0.0;            ///< penalty weight actually used
  int iterations = 0;
  std::vector<TraceRecord> trace;
  std::string message;
};

/// Top eigenpair of (B + B^H) / 2. Ties pick the lowest-index eigenvector;
/// the phase is fixed so the largest-magnitude entry is real positive.
EigPair max_eigpair(const Eigen::MatrixXcd& block);

/// Bags with Trace - lambda_max <= eps_rank * max(1, Trace); 1x1 bags always.
std::vector<std::size_t> rank_one_set(const Iterate& iterate, double eps_rank);

/// Decodes blocks and fills eigenpairs, gaps, the rank-one set and F_mu.
Iterate make_iterate(const SdrProgram& sdr, std::vector<double> x, double mu,
                     double eps_rank);

/// Linear functional <I - w w^H, W> of one bag in program variables, scaled
/// by `scale`; added into `objective` (dense) or returned as a row.
Affine rank_gap_linearization(const BagLayout& layout, std::size_t bag,
                              const Eigen::VectorXcd& w, double scale);

struct InitResult {
  NoaStatus status = NoaStatus::converged;  ///< converged, infeasible or numerical_limit
  Iterate iterate;
  double lower_bound = 0.0;
  SolveResult solve;
  bool inexact = false;
};

InitResult init_sdr(const SdrProgram& sdr, const NoaOptions& options,
                    const Backend& backend, const BackendOptions& backend_options);

/// Base program plus the penalty objective and one lock row per bag in
/// `locked`.
ConicProgram build_iteration_program(const SdrProgram& base, const Iterate& iterate,
                                     const std::vector<std::size_t>& locked, double mu,
                                     double eps_tol);

struct StepResult {
  bool ok = false;
  Iterate next;
  SolveResult solve;
  bool inexact = false;
  bool retried = false;
};

StepResult step(const SdrProgram& base, const Iterate& iterate,
                const std::vector<std::size_t>& locked, double mu, const NoaOptions& options,
                const Backend& backend, const BackendOptions& backend_options);

NoaResult run(const SdrProgram& sdr, const NoaOptions& options, const Backend& backend,
              const BackendOptions& backend_options = {});

/// (found - lower) / lower; throws ValidationError when lower <= 0.
double got(double found_value, double lower_bound);

/// A solver point good enough to continue from: optimal, or a numerical or
/// iteration limit whose best point is within loose tolerances.
bool usable(const SolveResult& r, bool* inexact = nullptr);

}  // namespace bagopf
