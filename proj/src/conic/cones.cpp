#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "detail.hpp"

namespace bagopf::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Map<const Mat> as_matrix(const Vec& v, std::size_t off, std::size_t p) {
  return Eigen::Map<const Mat>(v.data() + off, static_cast<Eigen::Index>(p),
                               static_cast<Eigen::Index>(p));
}

Eigen::Map<Mat> as_matrix(Vec& v, std::size_t off, std::size_t p) {
  return Eigen::Map<Mat>(v.data() + off, static_cast<Eigen::Index>(p),
                         static_cast<Eigen::Index>(p));
}

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

// J-norm sqrt(x0^2 - |x1|^2), or a nonpositive value when outside the cone.
double soc_jnorm(const Eigen::Ref<const Vec>& x) {
  const double x0 = x(0);
  const double t = x.tail(x.size() - 1).norm();
  if (!(x0 > t)) return -1.0;
  return std::sqrt((x0 - t) * (x0 + t));
}

// Smallest positive root of a t^2 + b t + c with c > 0, infinity if none.
double first_positive_root(double a, double b, double c) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (scale == 0.0) return kInf;
  if (std::abs(a) <= 1e-15 * scale) {
    return b < 0.0 ? -c / b : kInf;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;  // no real root: f keeps the sign of c
  const double sq = std::sqrt(disc);
  const double qv = -0.5 * (b + std::copysign(sq, b));
  double r1 = qv / a;
  double r2 = qv != 0.0 ? c / qv : kInf;
  double best = kInf;
  if (r1 > 0.0) best = std::min(best, r1);
  if (r2 > 0.0) best = std::min(best, r2);
  return best;
}

}  // namespace

double dot(const Vec& a, const Vec& b) { return a.dot(b); }

Vec identity(const ConeDims& dims) {
  Vec e = Vec::Zero(ix(dims.total()));
  e.head(ix(dims.l)).setOnes();
  std::size_t o = dims.l;
  for (auto d : dims.q) {
    e(ix(o)) = 1.0;
    o += d;
  }
  for (auto p : dims.s) {
    for (std::size_t i = 0; i < p; ++i) e(ix(o + i * p + i)) = 1.0;
    o += p * p;
  }
  return e;
}

double min_shift(const Vec& x, const ConeDims& dims) {
  double t = -kInf;
  for (std::size_t i = 0; i < dims.l; ++i) t = std::max(t, -x(ix(i)));
  std::size_t o = dims.l;
  for (auto d : dims.q) {
    const auto seg = x.segment(ix(o), ix(d));
    t = std::max(t, seg.tail(ix(d) - 1).norm() - seg(0));
    o += d;
  }
  for (auto p : dims.s) {
    Mat m = as_matrix(x, o, p);
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    t = std::max(t, -es.eigenvalues()(0));
    o += p * p;
  }
  return t;
}

bool compute_scaling(const Vec& s, const Vec& z, const ConeDims& dims, Scaling& w) {
  w.lambda.resize(ix(dims.total()));
  w.d.resize(ix(dims.l));
  for (std::size_t i = 0; i < dims.l; ++i) {
    const double si = s(ix(i)), zi = z(ix(i));
    if (!(si > 0.0) || !(zi > 0.0)) return false;
    w.d(ix(i)) = std::sqrt(si / zi);
    w.lambda(ix(i)) = std::sqrt(si * zi);
  }
  w.soc.resize(dims.q.size());
  std::size_t o = dims.l;
  for (std::size_t k = 0; k < dims.q.size(); ++k) {
    const std::size_t d = dims.q[k];
    const Vec sk = s.segment(ix(o), ix(d));
    const Vec zk = z.segment(ix(o), ix(d));
    const double sn = soc_jnorm(sk), zn = soc_jnorm(zk);
    if (!(sn > 0.0) || !(zn > 0.0)) return false;
    const Vec sb = sk / sn;
    const Vec zb = zk / zn;
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    Vec wb(ix(d));
    wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
    wb.tail(ix(d) - 1) = (sb.tail(ix(d) - 1) - zb.tail(ix(d) - 1)) / (2.0 * gamma);
    SocScale& sc = w.soc[k];
    sc.beta = std::sqrt(sn / zn);
    sc.v = wb;
    sc.v(0) += 1.0;
    sc.v /= std::sqrt(2.0 * (wb(0) + 1.0));
    o += d;
  }
  w.psd.resize(dims.s.size());
  for (std::size_t k = 0; k < dims.s.size(); ++k) {
    const std::size_t p = dims.s[k];
    Mat sm = as_matrix(s, o, p);
    Mat zm = as_matrix(z, o, p);
    sm = 0.5 * (sm + sm.transpose()).eval();
    zm = 0.5 * (zm + zm.transpose()).eval();
    Eigen::LLT<Mat> ls(sm), lz(zm);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Mat lsm = ls.matrixL();
    const Mat lzm = lz.matrixL();
    Eigen::JacobiSVD<Mat> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0)) return false;
    const Vec isq = sv.cwiseSqrt().cwiseInverse();
    PsdScale& sc = w.psd[k];
    sc.r = lsm * svd.matrixV() * isq.asDiagonal();
    sc.rinv = isq.asDiagonal() * svd.matrixU().transpose() * lzm.transpose();
    sc.q = sc.rinv.transpose() * sc.rinv;
    auto lam = as_matrix(w.lambda, o, p);
    lam.setZero();
    lam.diagonal() = sv;
    o += p * p;
  }
  // lambda for the SOC blocks, W z.
  o = dims.l;
  for (std::size_t k = 0; k < dims.q.size(); ++k) {
    const std::size_t d = dims.q[k];
    const SocScale& sc = w.soc[k];
    const Vec zk = z.segment(ix(o), ix(d));
    Vec jz = zk;
    jz.tail(ix(d) - 1) *= -1.0;
    w.lambda.segment(ix(o), ix(d)) = sc.beta * (2.0 * sc.v.dot(zk) * sc.v - jz);
    o += d;
  }
  return true;
}

namespace {

enum class Op { w, wt, winv, wtw_inv };

void apply(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out, Op op) {
  out.resize(in.size());
  for (std::size_t i = 0; i < dims.l; ++i) {
    const double d = w.d(ix(i));
    const double u = in(ix(i));
    switch (op) {
      case Op::w:
      case Op::wt: out(ix(i)) = d * u; break;
      case Op::winv: out(ix(i)) = u / d; break;
      case Op::wtw_inv: out(ix(i)) = u / (d * d); break;
    }
  }
  std::size_t o = dims.l;
  for (std::size_t k = 0; k < dims.q.size(); ++k) {
    const auto d = ix(dims.q[k]);
    const SocScale& sc = w.soc[k];
    auto winv = [&](const Vec& u) {
      Vec ju = u;
      ju.tail(d - 1) *= -1.0;
      Vec jv = sc.v;
      jv.tail(d - 1) *= -1.0;
      return Vec((2.0 * jv.dot(u) * jv - ju) / sc.beta);
    };
    const Vec u = in.segment(ix(o), d);
    Vec r;
    switch (op) {
      case Op::w:
      case Op::wt: {
        Vec ju = u;
        ju.tail(d - 1) *= -1.0;
        r = sc.beta * (2.0 * sc.v.dot(u) * sc.v - ju);
        break;
      }
      case Op::winv: r = winv(u); break;
      case Op::wtw_inv: r = winv(winv(u)); break;
    }
    out.segment(ix(o), d) = r;
    o += dims.q[k];
  }
  for (std::size_t k = 0; k < dims.s.size(); ++k) {
    const std::size_t p = dims.s[k];
    const PsdScale& sc = w.psd[k];
    const auto u = as_matrix(in, o, p);
    auto r = as_matrix(out, o, p);
    switch (op) {
      case Op::w: r = sc.r.transpose() * u * sc.r; break;
      case Op::wt: r = sc.r * u * sc.r.transpose(); break;
      case Op::winv: r = sc.rinv.transpose() * u * sc.rinv; break;
      case Op::wtw_inv: r = sc.q * u * sc.q; break;
    }
    o += p * p;
  }
}

}  // namespace

void apply_w(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out) {
  apply(w, dims, in, out, Op::w);
}
void apply_wt(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out) {
  apply(w, dims, in, out, Op::wt);
}
void apply_winv(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out) {
  apply(w, dims, in, out, Op::winv);
}
void apply_wtw_inv(const Scaling& w, const ConeDims& dims, const Vec& in, Vec& out) {
  apply(w, dims, in, out, Op::wtw_inv);
}

Vec jordan(const Vec& u, const Vec& v, const ConeDims& dims) {
  Vec out(u.size());
  out.head(ix(dims.l)) = u.head(ix(dims.l)).cwiseProduct(v.head(ix(dims.l)));
  std::size_t o = dims.l;
  for (auto d : dims.q) {
    const auto a = u.segment(ix(o), ix(d));
    const auto b = v.segment(ix(o), ix(d));
    out(ix(o)) = a.dot(b);
    out.segment(ix(o + 1), ix(d - 1)) = a(0) * b.tail(ix(d - 1)) + b(0) * a.tail(ix(d - 1));
    o += d;
  }
  for (auto p : dims.s) {
    const auto a = as_matrix(u, o, p);
    const auto b = as_matrix(v, o, p);
    as_matrix(out, o, p) = 0.5 * (a * b + b * a);
    o += p * p;
  }
  return out;
}

Vec jordan_solve(const Vec& lambda, const Vec& w, const ConeDims& dims) {
  Vec x(w.size());
  x.head(ix(dims.l)) = w.head(ix(dims.l)).cwiseQuotient(lambda.head(ix(dims.l)));
  std::size_t o = dims.l;
  for (auto d : dims.q) {
    const auto l = lambda.segment(ix(o), ix(d));
    const auto r = w.segment(ix(o), ix(d));
    const double l0 = l(0);
    const auto l1 = l.tail(ix(d - 1));
    const double x0 = (l0 * r(0) - l1.dot(r.tail(ix(d - 1)))) / ((l0 - l1.norm()) * (l0 + l1.norm()));
    x(ix(o)) = x0;
    x.segment(ix(o + 1), ix(d - 1)) = (r.tail(ix(d - 1)) - x0 * l1) / l0;
    o += d;
  }
  for (auto p : dims.s) {
    const auto lm = as_matrix(lambda, o, p);
    const auto r = as_matrix(w, o, p);
    auto out = as_matrix(x, o, p);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < p; ++i) {
        out(ix(i), ix(j)) = 2.0 * r(ix(i), ix(j)) / (lm(ix(i), ix(i)) + lm(ix(j), ix(j)));
      }
    }
    o += p * p;
  }
  return x;
}

double max_step_scaled(const Vec& lambda, const Vec& dir, const ConeDims& dims) {
  double alpha = kInf;
  for (std::size_t i = 0; i < dims.l; ++i) {
    const double di = dir(ix(i));
    if (di < 0.0) alpha = std::min(alpha, -lambda(ix(i)) / di);
  }
  std::size_t o = dims.l;
  for (auto d : dims.q) {
    const auto l = lambda.segment(ix(o), ix(d));
    const auto v = dir.segment(ix(o), ix(d));
    const double a = v(0) * v(0) - v.tail(ix(d - 1)).squaredNorm();
    const double b = 2.0 * (l(0) * v(0) - l.tail(ix(d - 1)).dot(v.tail(ix(d - 1))));
    const double c = l(0) * l(0) - l.tail(ix(d - 1)).squaredNorm();
    alpha = std::min(alpha, first_positive_root(a, b, c));
    if (v(0) < 0.0) alpha = std::min(alpha, -l(0) / v(0));
    o += d;
  }
  for (auto p : dims.s) {
    const auto lm = as_matrix(lambda, o, p);
    const Vec isq = lm.diagonal().cwiseSqrt().cwiseInverse();
    Mat m = isq.asDiagonal() * as_matrix(dir, o, p) * isq.asDiagonal();
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    const double mn = es.eigenvalues()(0);
    if (mn < 0.0) alpha = std::min(alpha, -1.0 / mn);
    o += p * p;
  }
  return alpha;
}

}  // namespace bagopf::detail
