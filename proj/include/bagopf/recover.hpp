#pragma once

// From rank-one bag matrices back to one bus voltage vector, and an
// independent check of that vector against the original AC OPF.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bagopf/casedata.hpp"
#include "bagopf/decomp.hpp"
#include "bagopf/noa.hpp"

namespace bagopf {

struct VoltageSolution {
  Eigen::VectorXcd v;  ///< per dense bus index, per-unit
  double objective = 0.0;
  int reference_bus = 0;
  /// Largest spread of |v_k| between bags sharing bus k, relative to the mean.
  double magnitude_disagreement = 0.0;
  /// Largest phase spread (rad) between bags sharing a bus after alignment.
  double phase_disagreement = 0.0;
  std::vector<std::string> warnings;
};

/// sqrt(lambda_max) w_max; throws NotRankOne when the relative rank gap
/// exceeds eps_rank.
Eigen::VectorXcd extract_block_vector(const Eigen::MatrixXcd& block, const EigPair& eig,
                                      double eps_rank);

/// Phase-aligns the per-bag vectors along a BFS spanning tree of the bag
/// overlap graph, rooted at the first bag holding the reference bus, and
/// merges shared buses (magnitudes averaged, phase from the first bag in BFS
/// order). Throws ValidationError when the overlap graph is disconnected.
VoltageSolution stitch(const std::vector<Eigen::VectorXcd>& block_vectors,
                       const Decomposition& decomp, const Network& network);

/// extract_block_vector on every bag followed by stitch and objective_of.
VoltageSolution recover(const Iterate& iterate, const Decomposition& decomp,
                        const Network& network, const AdmittanceModel& admittance,
                        double eps_rank);

/// max over homed pairs of |v_k conj(v_m) - W_km|.
double outer_product_error(const Eigen::VectorXcd& v, const std::vector<Eigen::MatrixXcd>& blocks,
                           const Decomposition& decomp);

struct LineFlow {
  int from = 0, to = 0;
  Complex s_from, s_to;  ///< per-unit
};

/// Violations are non-negative. Relative violations divide by the bound
/// magnitude (at least 1 for power quantities in per-unit).
struct FeasibilityReport {
  /// |mismatch| of P and Q balance per non-generator bus (per-unit), indexed
  /// like Network::buses with 0 at generator buses.
  std::vector<double> balance_residuals;
  std::map<std::string, double> bound_violations;  ///< family -> worst relative
  std::vector<LineFlow> line_flows;
  std::vector<Complex> generation;  ///< per Network::generators, per-unit
  double worst = 0.0;
  std::string worst_family;

  bool passes(double tol) const { return worst <= tol; }
};

/// Requires at most one generator per bus (aggregate first).
FeasibilityReport verify(const Eigen::VectorXcd& v, const Network& network,
                         const AdmittanceModel& admittance);

/// Generation cost at the injections implied by v.
double objective_of(const Eigen::VectorXcd& v, const Network& network,
                    const AdmittanceModel& admittance);

/// S_k = v_k conj((Y v)_k) for every bus.
Eigen::VectorXcd bus_injections(const Eigen::VectorXcd& v, const AdmittanceModel& admittance);

}  // namespace bagopf
