#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bagopf/error.hpp"
#include "detail.hpp"

namespace bagopf {

Affine& Affine::operator+=(const Affine& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  constant += other.constant;
  return *this;
}

Affine& Affine::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return *this;
}

double Affine::eval(const std::vector<double>& x) const {
  double v = constant;
  for (const auto& [i, a] : terms) v += a * x[i];
  return v;
}

void Affine::normalize() {
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < terms.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < terms.size() && terms[j].first == terms[i].first) sum += terms[j++].second;
    if (sum != 0.0) terms[out++] = {terms[i].first, sum};
    i = j;
  }
  terms.resize(out);
}

const char* family_name(Family f) {
  switch (f) {
    case Family::balance: return "balance";
    case Family::generation: return "generation";
    case Family::voltage: return "voltage";
    case Family::line_limit: return "line_limit";
    case Family::voltage_difference: return "voltage_difference";
    case Family::angle: return "angle";
    case Family::link: return "link";
    case Family::epigraph: return "epigraph";
    case Family::lock: return "lock";
    case Family::other: return "other";
  }
  return "other";
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_limit: return "numerical-limit";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

void BackendOptions::validate() const {
  if (!(abs_gap_tol > 0.0) || !(rel_gap_tol > 0.0) || !(feas_tol > 0.0)) {
    throw ValidationError("backend tolerances must be positive");
  }
  if (max_iters <= 0) throw ValidationError("backend max_iters must be positive");
}

double ConicProgram::objective_value(const std::vector<double>& x) const {
  double v = objective_offset;
  for (std::size_t i = 0; i < num_vars; ++i) v += objective[i] * x[i];
  return v;
}

void ConicProgram::validate() const {
  if (objective.size() != num_vars) {
    throw InternalError("objective has " + std::to_string(objective.size()) +
                        " coefficients for " + std::to_string(num_vars) + " variables");
  }
  auto check = [&](const Affine& a, const char* what) {
    for (const auto& t : a.terms) {
      if (t.first >= num_vars) {
        throw InternalError(std::string(what) + " references variable " +
                            std::to_string(t.first) + " beyond " +
                            std::to_string(num_vars));
      }
    }
  };
  for (const auto& r : equalities) check(r.expr, "equality row");
  for (const auto& r : inequalities) check(r.expr, "inequality row");
  for (const auto& c : socs) {
    if (c.members.empty()) throw InternalError("empty second-order cone");
    for (const auto& m : c.members) check(m, "cone member");
  }
  for (const auto& b : psd_blocks) {
    if (b.entries.size() != b.size * b.size) throw InternalError("PSD block storage mismatch");
    for (const auto& e : b.entries) {
      if (e.var >= static_cast<std::int64_t>(num_vars)) {
        throw InternalError("PSD block references variable beyond num_vars");
      }
    }
    for (std::size_t i = 0; i < b.size; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (!(b.at(i, j) == b.at(j, i))) throw InternalError("PSD block pattern not symmetric");
      }
    }
  }
}

double ViolationSummary::worst() const { return std::max({equality, inequality, soc, psd}); }

ViolationSummary max_violation(const ConicProgram& p, const std::vector<double>& x) {
  ViolationSummary v;
  for (const auto& r : p.equalities) v.equality = std::max(v.equality, std::abs(r.expr.eval(x)));
  for (const auto& r : p.inequalities) v.inequality = std::max(v.inequality, r.expr.eval(x));
  for (const auto& c : p.socs) {
    double sq = 0.0;
    for (std::size_t i = 1; i < c.members.size(); ++i) {
      const double m = c.members[i].eval(x);
      sq += m * m;
    }
    v.soc = std::max(v.soc, std::sqrt(sq) - c.members[0].eval(x));
  }
  for (const auto& b : p.psd_blocks) {
    detail::Mat m(b.size, b.size);
    for (std::size_t j = 0; j < b.size; ++j) {
      for (std::size_t i = 0; i < b.size; ++i) {
        const auto& e = b.at(i, j);
        m(i, j) = e.var < 0 ? 0.0 : e.coef * x[static_cast<std::size_t>(e.var)];
      }
    }
    Eigen::SelfAdjointEigenSolver<detail::Mat> es(m, Eigen::EigenvaluesOnly);
    v.psd = std::max(v.psd, -es.eigenvalues()(0));
  }
  return v;
}

namespace {

void write_affine(std::ostream& os, const Affine& a) {
  os << a.constant;
  for (const auto& [i, c] : a.terms) os << ' ' << i << ':' << c;
  os << '\n';
}

}  // namespace

std::string dump_program(const ConicProgram& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "bagopf-conic 1\n";
  os << "vars " << p.num_vars << '\n';
  os << "objective " << p.objective_offset;
  for (std::size_t i = 0; i < p.num_vars; ++i) {
    if (p.objective[i] != 0.0) os << ' ' << i << ':' << p.objective[i];
  }
  os << '\n';
  os << "eq " << p.equalities.size() << '\n';
  for (const auto& r : p.equalities) {
    os << family_name(r.family) << ' ';
    write_affine(os, r.expr);
  }
  os << "le " << p.inequalities.size() << '\n';
  for (const auto& r : p.inequalities) {
    os << family_name(r.family) << ' ';
    write_affine(os, r.expr);
  }
  os << "soc " << p.socs.size() << '\n';
  for (const auto& c : p.socs) {
    os << "cone " << c.members.size() << ' ' << family_name(c.family) << '\n';
    for (const auto& m : c.members) write_affine(os, m);
  }
  os << "psd " << p.psd_blocks.size() << '\n';
  for (const auto& b : p.psd_blocks) {
    std::size_t nnz = 0;
    for (std::size_t j = 0; j < b.size; ++j) {
      for (std::size_t i = j; i < b.size; ++i) nnz += b.at(i, j).var >= 0;
    }
    os << "block " << b.size << ' ' << nnz << '\n';
    for (std::size_t j = 0; j < b.size; ++j) {
      for (std::size_t i = j; i < b.size; ++i) {
        const auto& e = b.at(i, j);
        if (e.var >= 0) os << i << ' ' << j << ' ' << e.var << ' ' << e.coef << '\n';
      }
    }
  }
  return os.str();
}

namespace detail {

std::size_t ConeDims::total() const {
  std::size_t t = l;
  for (auto d : q) t += d;
  for (auto d : s) t += d * d;
  return t;
}

std::size_t ConeDims::degree() const {
  std::size_t t = l + q.size();
  for (auto d : s) t += d;
  return t;
}

std::size_t ConeDims::soc_offset(std::size_t i) const {
  std::size_t o = l;
  for (std::size_t k = 0; k < i; ++k) o += q[k];
  return o;
}

std::size_t ConeDims::psd_offset(std::size_t i) const {
  std::size_t o = l;
  for (auto d : q) o += d;
  for (std::size_t k = 0; k < i; ++k) o += s[k] * s[k];
  return o;
}

StandardForm to_standard_form(const ConicProgram& p) {
  p.validate();
  StandardForm sf;
  sf.n = p.num_vars;
  sf.offset = p.objective_offset;
  sf.c = Eigen::Map<const Vec>(p.objective.data(), static_cast<Eigen::Index>(p.num_vars));

  using T = Eigen::Triplet<double>;
  constexpr double kTrivial = 1e-12;

  std::vector<T> ta;
  std::vector<double> b;
  for (const auto& r : p.equalities) {
    if (r.expr.terms.empty()) {
      if (std::abs(r.expr.constant) > kTrivial) sf.trivially_infeasible = true;
      continue;
    }
    const auto row = static_cast<int>(b.size());
    for (const auto& [i, a] : r.expr.terms) ta.emplace_back(row, static_cast<int>(i), a);
    b.push_back(-r.expr.constant);
  }

  std::vector<T> tg;
  std::vector<double> h;
  for (const auto& r : p.inequalities) {
    if (r.expr.terms.empty()) {
      if (r.expr.constant > kTrivial) sf.trivially_infeasible = true;
      continue;
    }
    const auto row = static_cast<int>(h.size());
    for (const auto& [i, a] : r.expr.terms) tg.emplace_back(row, static_cast<int>(i), a);
    h.push_back(-r.expr.constant);
  }
  sf.dims.l = h.size();
  for (const auto& c : p.socs) {
    for (const auto& m : c.members) {
      const auto row = static_cast<int>(h.size());
      for (const auto& [i, a] : m.terms) tg.emplace_back(row, static_cast<int>(i), -a);
      h.push_back(m.constant);
    }
    sf.dims.q.push_back(c.members.size());
  }
  for (const auto& blk : p.psd_blocks) {
    for (std::size_t k = 0; k < blk.entries.size(); ++k) {
      const auto& e = blk.entries[k];
      const auto row = static_cast<int>(h.size());
      if (e.var >= 0 && e.coef != 0.0) tg.emplace_back(row, static_cast<int>(e.var), -e.coef);
      h.push_back(0.0);
    }
    sf.dims.s.push_back(blk.size);
  }

  const auto n = static_cast<Eigen::Index>(p.num_vars);
  sf.A.resize(static_cast<Eigen::Index>(b.size()), n);
  sf.A.setFromTriplets(ta.begin(), ta.end());
  sf.G.resize(static_cast<Eigen::Index>(h.size()), n);
  sf.G.setFromTriplets(tg.begin(), tg.end());
  sf.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
  sf.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
  sf.col_scale = Vec::Ones(n);
  sf.row_scale_a = Vec::Ones(sf.A.rows());
  sf.row_scale_g = Vec::Ones(sf.G.rows());
  return sf;
}

namespace {

double clamp_factor(double norm) {
  if (!(norm > 0.0)) return 1.0;
  return std::clamp(1.0 / std::sqrt(norm), 1e-4, 1e4);
}

// Groups of G rows that must share one scale factor.
std::vector<std::pair<std::size_t, std::size_t>> row_groups(const ConeDims& dims) {
  std::vector<std::pair<std::size_t, std::size_t>> g;
  for (std::size_t i = 0; i < dims.l; ++i) g.emplace_back(i, 1);
  std::size_t o = dims.l;
  for (auto d : dims.q) {
    g.emplace_back(o, d);
    o += d;
  }
  for (auto d : dims.s) {
    g.emplace_back(o, d * d);
    o += d * d;
  }
  return g;
}

}  // namespace

void equilibrate(StandardForm& sf, int passes) {
  const auto groups = row_groups(sf.dims);
  for (int pass = 0; pass < passes; ++pass) {
    Vec colmax = Vec::Zero(static_cast<Eigen::Index>(sf.n));
    Vec amax = Vec::Zero(sf.A.rows());
    Vec gmax = Vec::Zero(sf.G.rows());
    for (int k = 0; k < sf.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
        const double v = std::abs(it.value());
        colmax(it.col()) = std::max(colmax(it.col()), v);
        amax(it.row()) = std::max(amax(it.row()), v);
      }
    }
    for (int k = 0; k < sf.G.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.G, k); it; ++it) {
        const double v = std::abs(it.value());
        colmax(it.col()) = std::max(colmax(it.col()), v);
        gmax(it.row()) = std::max(gmax(it.row()), v);
      }
    }
    Vec dc(colmax.size());
    for (Eigen::Index j = 0; j < colmax.size(); ++j) dc(j) = clamp_factor(colmax(j));
    Vec da(amax.size());
    for (Eigen::Index i = 0; i < amax.size(); ++i) da(i) = clamp_factor(amax(i));
    Vec dg(gmax.size());
    for (const auto& [o, len] : groups) {
      double m = 0.0;
      for (std::size_t i = o; i < o + len; ++i) m = std::max(m, gmax(static_cast<Eigen::Index>(i)));
      const double f = clamp_factor(m);
      for (std::size_t i = o; i < o + len; ++i) dg(static_cast<Eigen::Index>(i)) = f;
    }
    sf.A = da.asDiagonal() * sf.A * dc.asDiagonal();
    sf.G = dg.asDiagonal() * sf.G * dc.asDiagonal();
    sf.b = sf.b.cwiseProduct(da);
    sf.h = sf.h.cwiseProduct(dg);
    sf.c = sf.c.cwiseProduct(dc);
    sf.col_scale = sf.col_scale.cwiseProduct(dc);
    sf.row_scale_a = sf.row_scale_a.cwiseProduct(da);
    sf.row_scale_g = sf.row_scale_g.cwiseProduct(dg);
  }
  const double cmax = sf.c.size() ? sf.c.cwiseAbs().maxCoeff() : 0.0;
  sf.obj_scale = cmax > 0.0 ? 1.0 / cmax : 1.0;
  sf.c *= sf.obj_scale;
}

}  // namespace detail

}  // namespace bagopf
