#pragma once

// Solver-neutral conic program: a linear objective over real variables,
// linear equalities and inequalities, second-order cones and real symmetric
// PSD blocks whose entries are identified with (signed) variables.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bagopf {

/// a'x + constant, with sparse a.
struct Affine {
  std::vector<std::pair<std::size_t, double>> terms;
  double constant = 0.0;

  void add(std::size_t var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
  }
  Affine& operator+=(const Affine& other);
  Affine& operator*=(double s);
  double eval(const std::vector<double>& x) const;
  /// Sorts terms by variable and merges duplicates; drops exact zeros.
  void normalize();

  bool operator==(const Affine&) const = default;
};

/// Constraint families, used for diagnostics and violation summaries.
enum class Family : std::uint8_t {
  balance,
  generation,
  voltage,
  line_limit,
  voltage_difference,
  angle,
  link,
  epigraph,
  lock,
  other,
};

const char* family_name(Family f);

/// expr == 0 (equality) or expr <= 0 (inequality).
struct LinearRow {
  Affine expr;
  Family family = Family::other;
  bool operator==(const LinearRow&) const = default;
};

/// || (m[1], ..., m[q-1]) || <= m[0].
struct SocCone {
  std::vector<Affine> members;
  Family family = Family::other;
  bool operator==(const SocCone&) const = default;
};

/// Entry (i, j) of a PSD block equals coef * x[var]; var < 0 is a structural
/// zero. Stored column-major over the full size x size matrix.
struct PsdEntry {
  std::int64_t var = -1;
  double coef = 0.0;
  bool operator==(const PsdEntry&) const = default;
};

struct PsdBlock {
  std::size_t size = 0;
  std::vector<PsdEntry> entries;

  const PsdEntry& at(std::size_t i, std::size_t j) const { return entries[i + j * size]; }
  bool operator==(const PsdBlock&) const = default;
};

struct ConicProgram {
  std::size_t num_vars = 0;
  std::vector<double> objective;  ///< dense, num_vars entries
  double objective_offset = 0.0;
  std::vector<LinearRow> equalities;
  std::vector<LinearRow> inequalities;
  std::vector<SocCone> socs;
  std::vector<PsdBlock> psd_blocks;

  double objective_value(const std::vector<double>& x) const;
  /// Throws InternalError when a row or cone references a missing variable.
  void validate() const;
  bool operator==(const ConicProgram&) const = default;
};

/// Worst violation per family at a point; PSD blocks report the negated
/// minimum eigenvalue (0 when PSD).
struct ViolationSummary {
  double equality = 0.0;
  double inequality = 0.0;
  double soc = 0.0;
  double psd = 0.0;
  double worst() const;
};

ViolationSummary max_violation(const ConicProgram& program, const std::vector<double>& x);

/// Sparse text dump for external debugging (see docs/program_dump.md).
std::string dump_program(const ConicProgram& program);

enum class SolveStatus {
  optimal,
  infeasible,
  unbounded,
  numerical_limit,
  iteration_limit,
};

const char* status_name(SolveStatus s);

struct BackendOptions {
  double abs_gap_tol = 1e-8;
  double rel_gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iters = 200;
  bool verbose = false;

  void validate() const;
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_limit;
  std::vector<double> x;
  double objective = 0.0;
  double gap = 0.0;           ///< absolute duality gap at the returned point
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double solve_time = 0.0;    ///< seconds
  std::string message;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual SolveResult solve(const ConicProgram& program,
                            const BackendOptions& options) const = 0;
  virtual std::string name() const = 0;
};

/// Homogeneous self-dual primal-dual interior-point method with
/// Nesterov-Todd scaling and Mehrotra correction.
class InteriorPointBackend final : public Backend {
 public:
  SolveResult solve(const ConicProgram& program,
                    const BackendOptions& options) const override;
  std::string name() const override { return "bagopf-ipm"; }
};

SolveResult solve(const ConicProgram& program, const BackendOptions& options = {});

}  // namespace bagopf
