#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SparseCholesky>

#include "detail.hpp"

namespace bagopf::detail {

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kRegRel = 1e-14;
constexpr int kRefine = 30;

using RowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor>;

}  // namespace

struct KktSolver::Sparse {
  SpMat k;                  ///< lower triangle of [[H + dI, A'], [A, -dI]]
  std::vector<double*> slots;  ///< value slot of each H contribution, in order
  std::vector<double*> hdiag, ydiag;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  bool analyzed = false;
};

namespace {

// Calls sink(i, j, value) with i >= j for every entry of H = G'(W'W)^{-1}G,
// in a fixed order for a fixed program.
template <class Block, class Sink>
void visit_h(const std::vector<Block>& lp, const std::vector<Block>& soc,
             const std::vector<Block>& psd, const Scaling& w, Sink&& sink) {
  for (std::size_t k = 0; k < lp.size(); ++k) {
    const Block& b = lp[k];
    const double di = w.d(ix(b.row0));
    const double wt = 1.0 / (di * di);
    for (std::size_t u = 0; u < b.cols.size(); ++u) {
      for (std::size_t v = 0; v <= u; ++v) {
        sink(b.cols[u], b.cols[v], wt * b.g(0, ix(u)) * b.g(0, ix(v)));
      }
    }
  }
  for (std::size_t k = 0; k < soc.size(); ++k) {
    const Block& b = soc[k];
    const SocScale& sc = w.soc[k];
    const auto d = ix(b.rows);
    Vec jv = sc.v;
    jv.tail(d - 1) *= -1.0;
    Mat jg = b.g;
    jg.bottomRows(d - 1) *= -1.0;
    const Mat m = (2.0 * jv * (jv.transpose() * b.g) - jg) / sc.beta;
    const Mat hl = m.transpose() * m;
    for (std::size_t u = 0; u < b.cols.size(); ++u) {
      for (std::size_t v = 0; v <= u; ++v) sink(b.cols[u], b.cols[v], hl(ix(u), ix(v)));
    }
  }
  for (std::size_t k = 0; k < psd.size(); ++k) {
    const Block& b = psd[k];
    const Mat& q = w.psd[k].q;
    const std::size_t p = static_cast<std::size_t>(q.rows());
    for (std::size_t u = 0; u < b.cols.size(); ++u) {
      const auto& nu = b.nz[u];
      for (std::size_t v = 0; v <= u; ++v) {
        const auto& nv = b.nz[v];
        double acc = 0.0;
        for (const auto& [ru, gu] : nu) {
          const auto a = ix(ru % p), bb = ix(ru / p);
          for (const auto& [rv, gv] : nv) {
            const auto c = ix(rv % p), dd = ix(rv / p);
            acc += gu * gv * q(a, c) * q(dd, bb);
          }
        }
        sink(b.cols[u], b.cols[v], acc);
      }
    }
  }
}

}  // namespace

KktSolver::KktSolver(const StandardForm& sf) : sf_(sf) {
  RowMajor g = sf.G;
  auto make_block = [&](std::size_t row0, std::size_t rows, bool dense_slice) {
    LocalBlock b;
    b.row0 = row0;
    b.rows = rows;
    std::map<std::size_t, std::size_t> local;
    for (std::size_t r = row0; r < row0 + rows; ++r) {
      for (RowMajor::InnerIterator it(g, ix(r)); it; ++it) {
        local.emplace(static_cast<std::size_t>(it.col()), 0);
      }
    }
    std::size_t idx = 0;
    for (auto& [col, pos] : local) {
      pos = idx++;
      b.cols.push_back(col);
    }
    b.nz.resize(b.cols.size());
    if (dense_slice) b.g = Mat::Zero(ix(rows), ix(b.cols.size()));
    for (std::size_t r = row0; r < row0 + rows; ++r) {
      for (RowMajor::InnerIterator it(g, ix(r)); it; ++it) {
        const std::size_t lc = local.at(static_cast<std::size_t>(it.col()));
        if (dense_slice) b.g(ix(r - row0), ix(lc)) = it.value();
        b.nz[lc].emplace_back(r - row0, it.value());
      }
    }
    return b;
  };
  for (std::size_t i = 0; i < sf.dims.l; ++i) lp_.push_back(make_block(i, 1, true));
  for (std::size_t k = 0; k < sf.dims.q.size(); ++k) {
    soc_.push_back(make_block(sf.dims.soc_offset(k), sf.dims.q[k], true));
  }
  for (std::size_t k = 0; k < sf.dims.s.size(); ++k) {
    psd_.push_back(make_block(sf.dims.psd_offset(k), sf.dims.s[k] * sf.dims.s[k], false));
  }

  // Dense linear algebra pays off once H is mostly full.
  const double n = static_cast<double>(sf.n);
  double est = 0.0;
  for (const auto* group : {&lp_, &soc_, &psd_}) {
    for (const auto& b : *group) est += static_cast<double>(b.cols.size()) * b.cols.size();
  }
  dense_ = sf.n <= 6000 && est > 0.2 * n * n;
}

void KktSolver::assemble_h(const Scaling& w) {
  const auto n = ix(sf_.n);
  const auto m = sf_.A.rows();
  if (dense_) return;
  if (!sparse_) {
    sparse_ = std::make_shared<Sparse>();
    std::vector<Eigen::Triplet<double>> t;
    visit_h(lp_, soc_, psd_, w, [&](std::size_t i, std::size_t j, double) {
      t.emplace_back(ix(i), ix(j), 0.0);
    });
    for (Eigen::Index i = 0; i < n + m; ++i) t.emplace_back(i, i, 0.0);
    for (int k = 0; k < sf_.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf_.A, k); it; ++it) {
        t.emplace_back(n + it.row(), it.col(), it.value());
      }
    }
    sparse_->k.resize(n + m, n + m);
    sparse_->k.setFromTriplets(t.begin(), t.end());
    sparse_->k.makeCompressed();
    SpMat& k = sparse_->k;
    auto slot = [&](Eigen::Index i, Eigen::Index j) {
      const int* inner = k.innerIndexPtr();
      const int beg = k.outerIndexPtr()[j], end = k.outerIndexPtr()[j + 1];
      const int* pos = std::lower_bound(inner + beg, inner + end, static_cast<int>(i));
      return k.valuePtr() + (pos - inner);
    };
    visit_h(lp_, soc_, psd_, w, [&](std::size_t i, std::size_t j, double) {
      sparse_->slots.push_back(slot(ix(i), ix(j)));
    });
    for (Eigen::Index i = 0; i < n; ++i) sparse_->hdiag.push_back(slot(i, i));
    for (Eigen::Index i = 0; i < m; ++i) sparse_->ydiag.push_back(slot(n + i, n + i));
  }
  SpMat& k = sparse_->k;
  // Reset the H part, keep A.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (SpMat::InnerIterator it(k, j); it; ++it) {
      if (it.row() < n) it.valueRef() = 0.0;
    }
  }
  std::size_t next = 0;
  auto& slots = sparse_->slots;
  visit_h(lp_, soc_, psd_, w, [&](std::size_t, std::size_t, double v) { *slots[next++] += v; });
}

bool KktSolver::factor(const Scaling& w) {
  w_ = &w;
  const auto n = ix(sf_.n);
  const auto m = sf_.A.rows();
  if (dense_) {
    Mat h = Mat::Zero(n, n);
    visit_h(lp_, soc_, psd_, w, [&](std::size_t i, std::size_t j, double v) {
      h(ix(i), ix(j)) += v;
      if (i != j) h(ix(j), ix(i)) += v;
    });
    hdense_ = h;
    const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    reg_ = kRegRel * scale;
    h.diagonal().array() += reg_;
    hchol_.compute(h);
    if (hchol_.info() != Eigen::Success) return false;
    if (m > 0) {
      const Mat at = Mat(sf_.A.transpose());
      hinv_at_ = hchol_.solve(at);
      Mat s = sf_.A * hinv_at_;
      s.diagonal().array() += reg_;
      schur_.compute(s);
      if (schur_.info() != Eigen::Success) return false;
    }
    return true;
  }
  assemble_h(w);
  double scale = 1.0;
  for (double* d : sparse_->hdiag) scale = std::max(scale, std::abs(*d));
  reg_ = kRegRel * scale;
  for (double* d : sparse_->hdiag) *d += reg_;
  for (double* d : sparse_->ydiag) *d = -reg_;
  if (!sparse_->analyzed) {
    sparse_->ldlt.analyzePattern(sparse_->k);
    sparse_->analyzed = true;
  }
  sparse_->ldlt.factorize(sparse_->k);
  // Undo the regularisation so k holds the exact system for refinement.
  for (double* d : sparse_->hdiag) *d -= reg_;
  for (double* d : sparse_->ydiag) *d = 0.0;
  return sparse_->ldlt.info() == Eigen::Success;
}

void KktSolver::reduced_apply(const Vec& x, const Vec& y, Vec& ox, Vec& oy) const {
  if (dense_) {
    ox = hdense_ * x;
  } else {
    const auto n = ix(sf_.n);
    Vec full(n + y.size());
    full << x, y;
    const Vec r = sparse_->k.selfadjointView<Eigen::Lower>() * full;
    ox = r.head(n);
    oy = r.tail(y.size());
    return;
  }
  if (y.size()) ox += sf_.A.transpose() * y;
  oy = sf_.A * x;
}

void KktSolver::reduced_solve(const Vec& rx, const Vec& ry, Vec& x, Vec& y) const {
  const auto n = ix(sf_.n);
  const auto m = sf_.A.rows();
  auto raw = [&](const Vec& bx, const Vec& by, Vec& sx, Vec& sy) {
    if (dense_) {
      const Vec hr = hchol_.solve(bx);
      if (m > 0) {
        sy = schur_.solve(sf_.A * hr - by);
        sx = hr - hinv_at_ * sy;
      } else {
        sy.resize(0);
        sx = hr;
      }
      return;
    }
    Vec rhs(n + m);
    rhs << bx, by;
    const Vec sol = sparse_->ldlt.solve(rhs);
    sx = sol.head(n);
    sy = sol.tail(m);
  };
  raw(rx, ry, x, y);
  const double bnorm = std::max(1.0, std::max(rx.lpNorm<Eigen::Infinity>(),
                                              m ? ry.lpNorm<Eigen::Infinity>() : 0.0));
  for (int it = 0; it < 5; ++it) {
    Vec ox, oy;
    reduced_apply(x, y, ox, oy);
    const Vec ex = rx - ox;
    const Vec ey = ry - oy;
    const double err = std::max(ex.lpNorm<Eigen::Infinity>(), m ? ey.lpNorm<Eigen::Infinity>() : 0.0);
    if (err <= 1e-14 * bnorm) break;
    Vec dx, dy;
    raw(ex, ey, dx, dy);
    x += dx;
    y += dy;
  }
}

void KktSolver::solve(const Vec& bx, const Vec& by, const Vec& bz, Vec& x, Vec& y,
                      Vec& z) const {
  auto once = [&](const Vec& ex, const Vec& ey, const Vec& ez, Vec& sx, Vec& sy, Vec& sz) {
    Vec t;
    apply_wtw_inv(*w_, sf_.dims, ez, t);
    const Vec rx = ex + sf_.G.transpose() * t;
    reduced_solve(rx, ey, sx, sy);
    const Vec gx_b = sf_.G * sx - ez;
    apply_wtw_inv(*w_, sf_.dims, gx_b, sz);
  };
  once(bx, by, bz, x, y, z);
  // Refine against the unreduced system; the reduction loses accuracy as
  // the scaling becomes extreme.
  const double bnorm = std::max({1.0, bx.lpNorm<Eigen::Infinity>(),
                                 by.size() ? by.lpNorm<Eigen::Infinity>() : 0.0,
                                 bz.lpNorm<Eigen::Infinity>()});
  for (int it = 0; it < kRefine; ++it) {
    Vec wz, wtwz;
    apply_w(*w_, sf_.dims, z, wz);
    apply_wt(*w_, sf_.dims, wz, wtwz);
    const Vec ex = bx - sf_.A.transpose() * y - sf_.G.transpose() * z;
    const Vec ey = by - sf_.A * x;
    const Vec ez = bz - sf_.G * x + wtwz;
    const double err = std::max({ex.lpNorm<Eigen::Infinity>(),
                                 ey.size() ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                                 ez.lpNorm<Eigen::Infinity>()});
    if (err <= 1e-14 * bnorm) break;
    Vec dx, dy, dz;
    once(ex, ey, ez, dx, dy, dz);
    x += dx;
    y += dy;
    z += dz;
  }
}

}  // namespace bagopf::detail
