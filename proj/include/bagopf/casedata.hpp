#pragma once

// Power-system case data: buses, generators and branches in per-unit, plus
// the bus admittance model every downstream stage consumes.

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

namespace bagopf {

using Complex = std::complex<double>;

struct Bus {
  int id = 0;
  double p_load = 0.0;  ///< per-unit real demand
  double q_load = 0.0;  ///< per-unit reactive demand
  /// Bus shunt admittance (per-unit, consumption convention), folded into
  /// the diagonal admittance entry.
  double g_shunt = 0.0;
  double b_shunt = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  bool is_reference = false;

  bool operator==(const Bus&) const = default;
};

/// One dispatchable unit. Cost coefficients are against per-unit power
/// (c2 in $/hr per pu^2, c1 in $/hr per pu, c0 in $/hr).
struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  /// Cost in $/hr of a per-unit real output.
  double cost(double p) const { return (c2 * p + c1) * p + c0; }

  bool operator==(const Generator&) const = default;
};

/// Standard pi-model branch. The series admittance is 1/(r + jx).
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;      ///< total line charging susceptance (pu)
  double tap_ratio = 1.0;       ///< off-nominal turns ratio, 1 for lines
  double phase_shift = 0.0;     ///< radians
  double s_max = 0.0;           ///< apparent power limit (pu), 0 = unlimited
  std::optional<double> v_diff_max;  ///< bound on |V_from - V_to| (pu)
  std::optional<double> theta_max;   ///< bound on |angle difference| (rad)

  Complex series_admittance() const { return 1.0 / Complex(r, x); }

  bool operator==(const Branch&) const = default;
};

/// A validated physical instance. Construct through make_network(), which
/// enforces the invariants and builds the id index.
class Network {
 public:
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  std::size_t bus_count() const { return buses.size(); }
  /// Dense position of a bus id; throws ValidationError for unknown ids.
  std::size_t index_of(int bus_id) const;
  std::size_t reference_index() const;

  bool operator==(const Network& other) const {
    return base_mva == other.base_mva && buses == other.buses &&
           generators == other.generators && branches == other.branches;
  }

 private:
  friend Network make_network(double, std::vector<Bus>, std::vector<Generator>,
                              std::vector<Branch>);
  std::unordered_map<int, std::size_t> index_;
};

/// Validates field invariants (bounds ordering, unique ids, exactly one
/// reference bus, known endpoints, acute angle limits) and returns the
/// network. Connectivity is checked by the decomposition.
Network make_network(double base_mva, std::vector<Bus> buses,
                     std::vector<Generator> generators,
                     std::vector<Branch> branches);

/// Matpower case-file subset: baseMVA, bus, gen, branch and polynomial
/// gencost tables. Out-of-service units/branches and isolated buses are
/// dropped; quantities are converted to per-unit.
Network parse_matpower(std::string_view text);

/// JSON document mirroring the Network fields (see docs/native_format.md).
Network parse_native(std::string_view text);
std::string to_native(const Network& network);

/// Reads a file, choosing the parser from `format` ("matpower" or
/// "native"); an empty format is inferred from the extension.
Network load_network(const std::string& path, const std::string& format = "");

/// Merges colocated generators into one unit per bus. The merged cost is the
/// exact minimum of the summed quadratic costs over all splits of the total
/// output, which is again quadratic.
Network aggregate_generators(const Network& network);

/// Pi-model admittances of one branch, indexed from/to.
struct BranchAdmittance {
  Complex ff, ft, tf, tt;
};

struct AdmittanceModel {
  /// Bus admittance matrix over dense bus indices; structurally symmetric.
  Eigen::SparseMatrix<Complex> y;
  /// Sorted dense indices of adjacent buses (self excluded).
  std::vector<std::vector<std::size_t>> neighborhoods;
  /// One entry per network branch, same order.
  std::vector<BranchAdmittance> branches;

  Complex entry(std::size_t k, std::size_t m) const { return y.coeff(k, m); }
};

AdmittanceModel build_admittance(const Network& network);

}  // namespace bagopf
