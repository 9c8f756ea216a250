#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "bagopf/error.hpp"
#include "detail.hpp"

namespace bagopf {

using detail::Vec;

namespace {

constexpr double kStep = 0.99;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Point {
  Vec x, y, z, s;
  double tau = 1.0, kappa = 1.0;
};

struct Direction {
  Vec dx, dy, dz, ds, ds_scaled, dz_scaled;
  double dtau = 0.0, dkappa = 0.0;
};

// The scaling that is the identity map, used for the initial point.
detail::Scaling identity_scaling(const detail::ConeDims& dims) {
  detail::Scaling w;
  w.d = Vec::Ones(static_cast<Eigen::Index>(dims.l));
  for (auto q : dims.q) {
    detail::SocScale sc;
    sc.v = Vec::Zero(static_cast<Eigen::Index>(q));
    sc.v(0) = 1.0;
    w.soc.push_back(sc);
  }
  for (auto p : dims.s) {
    detail::PsdScale sc;
    const auto pp = static_cast<Eigen::Index>(p);
    sc.r = detail::Mat::Identity(pp, pp);
    sc.rinv = sc.r;
    sc.q = sc.r;
    w.psd.push_back(sc);
  }
  w.lambda = detail::identity(dims);
  return w;
}

double norm(const Vec& v) { return v.size() ? v.norm() : 0.0; }

}  // namespace

SolveResult InteriorPointBackend::solve(const ConicProgram& program,
                                        const BackendOptions& opt) const {
  const auto t0 = std::chrono::steady_clock::now();
  opt.validate();
  SolveResult res;
  auto finish = [&](SolveResult& r) -> SolveResult& {
    r.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };

  detail::StandardForm sf = detail::to_standard_form(program);
  if (sf.trivially_infeasible) {
    res.status = SolveStatus::infeasible;
    res.message = "constant row violated";
    return finish(res);
  }
  detail::equilibrate(sf);
  const auto& dims = sf.dims;
  const auto& A = sf.A;
  const auto& G = sf.G;
  const Vec& c = sf.c;
  const Vec& b = sf.b;
  const Vec& h = sf.h;
  const Vec e = detail::identity(dims);
  const double nu = static_cast<double>(dims.degree());

  detail::KktSolver kkt(sf);
  Point pt;
  {
    const detail::Scaling w = identity_scaling(dims);
    if (!kkt.factor(w)) {
      res.message = "initial KKT factorization failed";
      return finish(res);
    }
    Vec x, y, z;
    kkt.solve(Vec::Zero(c.size()), b, h, pt.x, y, z);
    pt.s = -z;
    kkt.solve(-c, Vec::Zero(b.size()), Vec::Zero(h.size()), x, pt.y, pt.z);
    const double ts = detail::min_shift(pt.s, dims);
    const double tz = detail::min_shift(pt.z, dims);
    if (ts >= -1e-8 * std::max(norm(pt.s), 1.0)) pt.s += (1.0 + ts) * e;
    if (tz >= -1e-8 * std::max(norm(pt.z), 1.0)) pt.z += (1.0 + tz) * e;
  }

  const double resx0 = std::max(1.0, norm(c));
  const double resy0 = std::max(1.0, norm(b));
  const double resz0 = std::max(1.0, norm(h));

  auto unscale_x = [&](const Vec& xs, double tau) {
    std::vector<double> out(sf.n);
    for (std::size_t i = 0; i < sf.n; ++i) {
      out[i] = sf.col_scale(static_cast<Eigen::Index>(i)) * xs(static_cast<Eigen::Index>(i)) / tau;
    }
    return out;
  };

  // Best point seen so far, reported on numerical trouble.
  double best_merit = kInf;
  SolveResult best;

  detail::Scaling w;
  for (int iter = 0; iter <= opt.max_iters; ++iter) {
    const Vec hrx = A.transpose() * pt.y + G.transpose() * pt.z;
    const Vec rx = hrx + c * pt.tau;
    const Vec hry = A * pt.x;
    const Vec ry = hry - b * pt.tau;
    const Vec hrz = pt.s + G * pt.x;
    const Vec rz = hrz - h * pt.tau;
    const double cx = c.dot(pt.x), by = b.dot(pt.y), hz = h.dot(pt.z);
    const double rt = pt.kappa + cx + by + hz;
    const double sz = pt.s.dot(pt.z);

    const double pcost = cx / pt.tau;
    const double dcost = -(by + hz) / pt.tau;
    const double gap = sz / (pt.tau * pt.tau);
    double relgap = kInf;
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;
    if (std::abs(pcost) < 1e-12 && std::abs(dcost) < 1e-12) relgap = gap;
    const double pres = std::max(norm(ry) / resy0, norm(rz) / resz0) / pt.tau;
    const double dres = norm(rx) / resx0 / pt.tau;
    const double pinf = (hz + by < 0.0) ? norm(hrx) / resx0 / -(hz + by) : kInf;
    const double dinf = (cx < 0.0) ? std::max(norm(hry) / resy0, norm(hrz) / resz0) / -cx : kInf;

    if (opt.verbose) {
      std::fprintf(stderr, "%3d % .8e % .8e %.1e %.1e %.1e %.1e %.1e\n", iter, pcost, dcost, gap,
                   relgap, pres, dres, pt.kappa / pt.tau);
    }

    res.iterations = iter;
    res.gap = gap / sf.obj_scale;
    res.relative_gap = relgap;
    res.primal_residual = pres;
    res.dual_residual = dres;

    const bool feasible = pres <= opt.feas_tol && dres <= opt.feas_tol;
    const bool gap_ok = gap <= opt.abs_gap_tol || relgap <= opt.rel_gap_tol;
    if (feasible && gap_ok) {
      res.status = SolveStatus::optimal;
      res.x = unscale_x(pt.x, pt.tau);
      res.objective = program.objective_value(res.x);
      return finish(res);
    }
    if (pinf <= opt.feas_tol) {
      res.status = SolveStatus::infeasible;
      res.message = "primal infeasibility certificate found";
      return finish(res);
    }
    if (dinf <= opt.feas_tol) {
      res.status = SolveStatus::unbounded;
      res.message = "dual infeasibility certificate found";
      return finish(res);
    }
    const double merit = std::max({pres, dres, std::min(relgap, gap)});
    if (merit < best_merit) {
      best_merit = merit;
      best = res;
      best.x = unscale_x(pt.x, pt.tau);
      best.objective = program.objective_value(best.x);
    }
    if (iter == opt.max_iters) break;

    auto bail = [&](const char* why) -> SolveResult {
      best.status = SolveStatus::numerical_limit;
      best.message = why;
      best.iterations = iter;
      return finish(best);
    };

    if (!detail::compute_scaling(pt.s, pt.z, dims, w)) return bail("iterate left the cone");
    if (!kkt.factor(w)) return bail("KKT factorization failed");

    Vec vx, vy, vz;
    kkt.solve(-c, b, h, vx, vy, vz);
    const double cv = c.dot(vx) + b.dot(vy) + h.dot(vz);
    const Vec& lambda = w.lambda;
    const Vec ll = detail::jordan(lambda, lambda, dims);
    const double mu = (sz + pt.tau * pt.kappa) / (nu + 1.0);

    auto direction = [&](double eta, const Vec& rc, double rctau) {
      Direction d;
      const Vec q = detail::jordan_solve(lambda, rc, dims);
      Vec wtq;
      detail::apply_wt(w, dims, q, wtq);
      Vec ux, uy, uz;
      kkt.solve(-eta * rx, -eta * ry, -eta * rz - wtq, ux, uy, uz);
      const double cu = c.dot(ux) + b.dot(uy) + h.dot(uz);
      d.dtau = (-eta * rt - rctau / pt.tau - cu) / (cv - pt.kappa / pt.tau);
      d.dx = ux + d.dtau * vx;
      d.dy = uy + d.dtau * vy;
      d.dz = uz + d.dtau * vz;
      d.dkappa = (rctau - pt.kappa * d.dtau) / pt.tau;
      detail::apply_w(w, dims, d.dz, d.dz_scaled);
      d.ds_scaled = q - d.dz_scaled;
      detail::apply_wt(w, dims, d.ds_scaled, d.ds);
      return d;
    };
    auto max_step = [&](const Direction& d) {
      double a = std::min(detail::max_step_scaled(lambda, d.ds_scaled, dims),
                          detail::max_step_scaled(lambda, d.dz_scaled, dims));
      if (d.dtau < 0.0) a = std::min(a, -pt.tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -pt.kappa / d.dkappa);
      return a;
    };

    const Direction aff = direction(1.0, -ll, -pt.tau * pt.kappa);
    const double alpha_aff = std::min(1.0, max_step(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3.0);
    const Vec rc = -ll + sigma * mu * e - detail::jordan(aff.ds_scaled, aff.dz_scaled, dims);
    const double rctau = -pt.tau * pt.kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Direction d = direction(1.0 - sigma, rc, rctau);
    const double amax = max_step(d);
    const double alpha = std::min(1.0, kStep * amax);
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) return bail("step length collapsed");

    pt.x += alpha * d.dx;
    pt.y += alpha * d.dy;
    pt.z += alpha * d.dz;
    pt.s += alpha * d.ds;
    pt.tau += alpha * d.dtau;
    pt.kappa += alpha * d.dkappa;

    // Keep the homogeneous variables bounded.
    if (pt.tau > 1e6 || pt.tau < 1e-6) {
      const double t = 1.0 / pt.tau;
      pt.x *= t;
      pt.y *= t;
      pt.z *= t;
      pt.s *= t;
      pt.kappa *= t;
      pt.tau = 1.0;
    }
  }
  best.status = SolveStatus::iteration_limit;
  best.message = "iteration limit reached";
  best.iterations = opt.max_iters;
  return finish(best);
}

SolveResult solve(const ConicProgram& program, const BackendOptions& options) {
  return InteriorPointBackend{}.solve(program, options);
}

}  // namespace bagopf
