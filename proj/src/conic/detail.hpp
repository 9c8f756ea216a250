#pragma once

// Internal pieces of the interior-point backend. The standard form is
//
//   minimize c'x  subject to  A x = b,  G x + s = h,  s in K,
//
// with K a product of a nonnegative orthant, second-order cones and PSD
// cones. PSD cone vectors hold full column-major p x p matrices.

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "bagopf/conic.hpp"

namespace bagopf::detail {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

struct ConeDims {
  std::size_t l = 0;
  std::vector<std::size_t> q;
  std::vector<std::size_t> s;

  std::size_t total() const;
  /// Barrier degree: l + #q + sum s.
  std::size_t degree() const;
  std::size_t soc_offset(std::size_t i) const;
  std::size_t psd_offset(std::size_t i) const;
};

struct StandardForm {
  std::size_t n = 0;
  SpMat A;  ///< m x n
  SpMat G;  ///< total x n
  Vec c, b, h;
  double offset = 0.0;
  ConeDims dims;
  /// x_original = col_scale .* x_scaled; objective_scaled = obj_scale * c'x.
  Vec col_scale;
  double obj_scale = 1.0;
  Vec row_scale_a;
  Vec row_scale_g;
  bool trivially_infeasible = false;
};

StandardForm to_standard_form(const ConicProgram& program);
/// Ruiz-style equilibration: columns freely, equality and LP rows
/// individually, each SOC/PSD cone by one uniform factor.
void equilibrate(StandardForm& sf, int passes = 15);

// ---- cone algebra --------------------------------------------------------

double dot(const Vec& a, const Vec& b);
/// Identity element of K.
Vec identity(const ConeDims& dims);
/// Smallest t with x + t e in K (i.e. minus the smallest "eigenvalue").
double min_shift(const Vec& x, const ConeDims& dims);

struct SocScale {
  double beta = 1.0;
  Vec v;  ///< W = beta (2 v v' - J)
};

struct PsdScale {
  Mat r;     ///< W u = r' u r
  Mat rinv;  ///< r^{-1}
  Mat q;     ///< rinv' rinv, so (W'W)^{-1} u = q u q
};

/// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
struct Scaling {
  Vec d;  ///< LP: sqrt(s / z)
  std::vector<SocScale> soc;
  std::vector<PsdScale> psd;
  Vec lambda;
};

/// Returns false when s or z is not strictly interior.
bool compute_scaling(const Vec& s, const Vec& z, const ConeDims& dims, Scaling& out);

void apply_w(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out);
void apply_wt(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out);
void apply_winv(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out);
/// (W'W)^{-1} u.
void apply_wtw_inv(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out);

/// Jordan product u o v.
Vec jordan(const Vec& u, const Vec& v, const ConeDims& dims);
/// x with lambda o x = w, using the structure of lambda from compute_scaling
/// (diagonal PSD blocks).
Vec jordan_solve(const Vec& lambda, const Vec& w, const ConeDims& dims);
/// Largest alpha with lambda + alpha d in K, lambda from compute_scaling;
/// infinity when unbounded.
double max_step_scaled(const Vec& lambda, const Vec& d, const ConeDims& dims);

// ---- KKT system ----------------------------------------------------------

/// Solves [[0, A', G'], [A, 0, 0], [G, 0, -W'W]] (x, y, z) = (bx, by, bz)
/// through the reduction H = G'(W'W)^{-1}G.
class KktSolver {
 public:
  explicit KktSolver(const StandardForm& sf);
  /// Factorizes for the given scaling; false on numerical failure.
  bool factor(const Scaling& w);
  void solve(const Vec& bx, const Vec& by, const Vec& bz, Vec& x, Vec& y, Vec& z) const;

 private:
  struct LocalBlock {
    std::size_t row0 = 0;           ///< first cone row in G
    std::size_t rows = 0;
    std::vector<std::size_t> cols;  ///< global columns touching the cone
    Mat g;                          ///< rows x cols.size() dense slice
    std::vector<std::vector<std::pair<std::size_t, double>>> nz;  ///< per local col
  };

  void assemble_h(const Scaling& w);
  void reduced_solve(const Vec& rx, const Vec& ry, Vec& x, Vec& y) const;
  void reduced_apply(const Vec& x, const Vec& y, Vec& ox, Vec& oy) const;

  const StandardForm& sf_;
  std::vector<LocalBlock> lp_, soc_, psd_;
  const Scaling* w_ = nullptr;
  Mat hdense_;
  bool dense_ = false;
  double reg_ = 1e-9;

  // sparse path
  struct Sparse;
  std::shared_ptr<Sparse> sparse_;
  // dense path
  Eigen::LLT<Mat> hchol_;
  Mat hinv_at_;  ///< H^{-1} A'
  Eigen::LLT<Mat> schur_;
};

}  // namespace bagopf::detail
