#pragma once

// Structured reports (schema in docs/report_format.md), the solution export
// and the iteration trace table.

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bagopf/casedata.hpp"
#include "bagopf/decomp.hpp"
#include "bagopf/noa.hpp"
#include "bagopf/recover.hpp"

namespace bagopf {

inline constexpr int kReportVersion = 1;
inline constexpr int kSolutionVersion = 1;

using Json = nlohmann::ordered_json;

Json decomposition_json(const Decomposition& decomp, const Network& network,
                        bool with_members);

/// Rank summary of the relaxation iterate: rank-deficient bag count and the
/// largest and smallest sizes among them.
Json relaxation_json(const Iterate& iterate, const Decomposition& decomp, double eps_rank);

Json feasibility_json(const FeasibilityReport& report);

/// NOA outcome. Timings are left out so equal inputs give equal bytes.
Json noa_json(const NoaResult& result);

Json trace_json(const NoaResult& result);

/// Per-bus |V| and angle (degrees), per-generator dispatch (MW, MVAr),
/// per-line flows (MW, MVAr) and the verification residuals.
Json solution_json(const VoltageSolution& solution, const Network& network,
                   const FeasibilityReport& report);

/// Reads the bus voltages back from a solution export.
Eigen::VectorXcd voltages_from_solution(const Json& solution, const Network& network);

/// iteration,objective,penalty,f_mu,locked,max_rank_gap,locked_max_gap,
/// solve_seconds,solver_status,inexact,retried
void write_trace_csv(const NoaResult& result, std::ostream& out);

}  // namespace bagopf
