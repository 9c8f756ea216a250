#pragma once

// Decomposed lifted OPF as a real conic program. Each bag matrix W^i is
// stored as N_i^2 real variables (upper triangle, row-major, real part
// before imaginary part) and constrained PSD through its real embedding.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "bagopf/casedata.hpp"
#include "bagopf/conic.hpp"
#include "bagopf/decomp.hpp"

namespace bagopf {

struct BuildOptions {
  enum class Objective { generation_cost };

  bool enable_angle_constraints = true;
  bool enable_vdiff_constraints = true;
  bool enable_line_limits = true;
  Objective objective_kind = Objective::generation_cost;
};

/// W_km addressed through the stored upper-triangle entry of its home bag;
/// conj is set when W_km is the conjugate of the stored scalar.
struct EntryRef {
  std::size_t bag = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  bool conj = false;
};

/// Variable indices of the bag matrices.
struct BagLayout {
  std::vector<std::size_t> offset;
  std::vector<std::size_t> size;
  std::size_t total = 0;  ///< sum N_i^2

  explicit BagLayout(const Decomposition& decomp = {});
  /// Real part of stored entry (r, c), r <= c.
  std::size_t re(std::size_t bag, std::size_t r, std::size_t c) const;
  /// Imaginary part of stored entry (r, c), r < c.
  std::size_t im(std::size_t bag, std::size_t r, std::size_t c) const;
};

/// Re and Im parts of a complex linear expression in the variables.
struct ComplexAffine {
  Affine re, im;
  /// Adds a * W_ref.
  void add(const BagLayout& layout, const EntryRef& ref, Complex a);
};

struct GeneratorTerm {
  std::size_t generator = 0;  ///< index into Network::generators
  std::size_t bus = 0;        ///< dense bus index
  Affine p;                   ///< real output, per-unit, affine in W
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
  std::size_t epigraph_var = 0;
};

struct ConstraintSet {
  std::vector<LinearRow> equalities;
  std::vector<LinearRow> inequalities;
  std::vector<SocCone> socs;
};

struct SdrProgram {
  ConicProgram program;
  BagLayout layout;
  std::vector<GeneratorTerm> generators;

  /// Generation cost F(W) evaluated from the injections (not the epigraph).
  double cost(const std::vector<double>& x) const;
};

/// Real symmetric 2N x 2N block [[Re, -Im], [Im, Re]].
Eigen::MatrixXd embed_complex(const Eigen::MatrixXcd& w);

/// Throws InternalError when no bag houses the pair.
EntryRef entry_ref(const Decomposition& decomp, std::size_t k, std::size_t m);

/// Complex power injected at bus k, sum over m in N(k) and k of W_km Y_km^*.
ComplexAffine injection(const AdmittanceModel& admittance, const Decomposition& decomp,
                        const BagLayout& layout, std::size_t k);

ConstraintSet build_constraints(const Network& network, const AdmittanceModel& admittance,
                                const Decomposition& decomp, const BuildOptions& options);

/// Epigraph terms and cones; throws ValidationError for c2 <= 0 or more than
/// one generator on a bus (aggregate first).
std::vector<GeneratorTerm> build_objective(const Network& network,
                                           const AdmittanceModel& admittance,
                                           const Decomposition& decomp,
                                           const BagLayout& layout,
                                           std::vector<SocCone>& cones);

SdrProgram assemble(const Network& network, const AdmittanceModel& admittance,
                    const Decomposition& decomp, const BuildOptions& options = {});

std::vector<Eigen::MatrixXcd> decode_blocks(const BagLayout& layout,
                                            const std::vector<double>& x);
void encode_blocks(const BagLayout& layout, const std::vector<Eigen::MatrixXcd>& blocks,
                   std::vector<double>& x);

/// Bag matrices V_b V_b^H of a bus voltage vector.
std::vector<Eigen::MatrixXcd> lift_voltage(const Decomposition& decomp,
                                           const Eigen::VectorXcd& v);
/// Full program point for a voltage vector, epigraph variables at p^2.
std::vector<double> encode_voltage(const SdrProgram& sdr, const Decomposition& decomp,
                                   const Eigen::VectorXcd& v);

}  // namespace bagopf
