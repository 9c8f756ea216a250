#include "bagopf/sdr.hpp"

#include <map>

#include "bagopf/error.hpp"

namespace bagopf {

BagLayout::BagLayout(const Decomposition& decomp) {
  for (const Bag& b : decomp.bags) {
    offset.push_back(total);
    size.push_back(b.size());
    total += b.size() * b.size();
  }
}

namespace {

// Position of stored entry (r, c) inside a bag of size n, real part.
std::size_t slot(std::size_t n, std::size_t r, std::size_t c) {
  const std::size_t row_start = r + 2 * (r * (n - 1) - r * (r - 1) / 2);
  return row_start + (c == r ? 0 : 1 + 2 * (c - r - 1));
}

}  // namespace

std::size_t BagLayout::re(std::size_t bag, std::size_t r, std::size_t c) const {
  return offset[bag] + slot(size[bag], r, c);
}

std::size_t BagLayout::im(std::size_t bag, std::size_t r, std::size_t c) const {
  return offset[bag] + slot(size[bag], r, c) + 1;
}

void ComplexAffine::add(const BagLayout& layout, const EntryRef& ref, Complex a) {
  const std::size_t vr = layout.re(ref.bag, ref.row, ref.col);
  re.add(vr, a.real());
  im.add(vr, a.imag());
  if (ref.row != ref.col) {
    const std::size_t vi = layout.im(ref.bag, ref.row, ref.col);
    const double s = ref.conj ? -1.0 : 1.0;
    re.add(vi, -a.imag() * s);
    im.add(vi, a.real() * s);
  }
}

double SdrProgram::cost(const std::vector<double>& x) const {
  double f = 0.0;
  for (const auto& g : generators) {
    const double p = g.p.eval(x);
    f += (g.c2 * p + g.c1) * p + g.c0;
  }
  return f;
}

Eigen::MatrixXd embed_complex(const Eigen::MatrixXcd& w) {
  const auto n = w.rows();
  Eigen::MatrixXd m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = w.real();
  m.topRightCorner(n, n) = -w.imag();
  m.bottomLeftCorner(n, n) = w.imag();
  m.bottomRightCorner(n, n) = w.real();
  return m;
}

EntryRef entry_ref(const Decomposition& decomp, std::size_t k, std::size_t m) {
  const auto loc = decomp.home(k, m);
  if (!loc) {
    throw InternalError("lifted entry (" + std::to_string(k) + "," + std::to_string(m) +
                        ") is not housed in any bag");
  }
  const auto& mem = decomp.bags[loc->bag].members;
  return EntryRef{loc->bag, loc->row, loc->col, k != m && mem[loc->row] != k};
}

ComplexAffine injection(const AdmittanceModel& admittance, const Decomposition& decomp,
                        const BagLayout& layout, std::size_t k) {
  ComplexAffine s;
  const auto& y = admittance.y;
  for (Eigen::SparseMatrix<Complex>::InnerIterator it(y, static_cast<Eigen::Index>(k)); it; ++it) {
    // Column k of a structurally symmetric Y holds Y_mk; use Y_km.
    const auto m = static_cast<std::size_t>(it.row());
    s.add(layout, entry_ref(decomp, k, m), std::conj(admittance.entry(k, m)));
  }
  s.re.normalize();
  s.im.normalize();
  return s;
}

ConstraintSet build_constraints(const Network& network, const AdmittanceModel& admittance,
                                const Decomposition& decomp, const BuildOptions& options) {
  const BagLayout layout(decomp);
  ConstraintSet out;
  const std::size_t n = network.bus_count();

  std::vector<int> gen_at(n, -1);
  for (std::size_t g = 0; g < network.generators.size(); ++g) {
    const std::size_t k = network.index_of(network.generators[g].bus);
    if (gen_at[k] >= 0) {
      throw ValidationError("bus " + std::to_string(network.buses[k].id) +
                            " has several generators; aggregate them first");
    }
    gen_at[k] = static_cast<int>(g);
  }

  auto le = [&](Affine e, Family f) {
    e.normalize();
    out.inequalities.push_back({std::move(e), f});
  };

  for (std::size_t k = 0; k < n; ++k) {
    const Bus& bus = network.buses[k];
    const ComplexAffine s = injection(admittance, decomp, layout, k);
    Affine p = s.re, q = s.im;
    p.constant += bus.p_load;
    q.constant += bus.q_load;
    if (gen_at[k] < 0) {
      out.equalities.push_back({p, Family::balance});
      out.equalities.push_back({q, Family::balance});
    } else {
      const Generator& g = network.generators[static_cast<std::size_t>(gen_at[k])];
      Affine lo = p, hi = p;
      lo *= -1.0;
      lo.constant += g.p_min;  // p_min - p <= 0
      hi.constant -= g.p_max;  // p - p_max <= 0
      le(lo, Family::generation);
      le(hi, Family::generation);
      lo = q;
      hi = q;
      lo *= -1.0;
      lo.constant += g.q_min;
      hi.constant -= g.q_max;
      le(lo, Family::generation);
      le(hi, Family::generation);
    }
    const EntryRef d = entry_ref(decomp, k, k);
    Affine lo, hi;
    lo.add(layout.re(d.bag, d.row, d.col), -1.0);
    lo.constant = bus.v_min * bus.v_min;
    hi.add(layout.re(d.bag, d.row, d.col), 1.0);
    hi.constant = -bus.v_max * bus.v_max;
    le(lo, Family::voltage);
    le(hi, Family::voltage);
  }

  for (std::size_t l = 0; l < network.branches.size(); ++l) {
    const Branch& br = network.branches[l];
    const std::size_t f = network.index_of(br.from);
    const std::size_t t = network.index_of(br.to);
    const BranchAdmittance& ya = admittance.branches[l];
    const EntryRef ft = entry_ref(decomp, f, t);
    const EntryRef tf = entry_ref(decomp, t, f);
    const EntryRef ff = entry_ref(decomp, f, f);
    const EntryRef tt = entry_ref(decomp, t, t);

    if (options.enable_line_limits && br.s_max > 0.0) {
      // Apparent power at both ends of the pi model.
      ComplexAffine sf, st;
      sf.add(layout, ff, std::conj(ya.ff));
      sf.add(layout, ft, std::conj(ya.ft));
      st.add(layout, tt, std::conj(ya.tt));
      st.add(layout, tf, std::conj(ya.tf));
      for (ComplexAffine* s : {&sf, &st}) {
        s->re.normalize();
        s->im.normalize();
        SocCone c;
        c.family = Family::line_limit;
        Affine bound;
        bound.constant = br.s_max;
        c.members = {bound, s->re, s->im};
        out.socs.push_back(std::move(c));
      }
    }
    if (options.enable_vdiff_constraints && br.v_diff_max) {
      ComplexAffine e;
      e.add(layout, ff, 1.0);
      e.add(layout, tt, 1.0);
      e.add(layout, ft, -1.0);
      e.add(layout, tf, -1.0);
      Affine row = e.re;
      row.constant -= *br.v_diff_max * *br.v_diff_max;
      le(row, Family::voltage_difference);
    }
    if (options.enable_angle_constraints && br.theta_max) {
      const double tan_max = std::tan(*br.theta_max);
      ComplexAffine w;
      w.add(layout, ft, 1.0);
      // +-Im(W_ft) - tan * Re(W_ft) <= 0
      for (double sign : {1.0, -1.0}) {
        Affine row = w.im;
        row *= sign;
        Affine re = w.re;
        re *= -tan_max;
        row += re;
        le(row, Family::angle);
      }
    }
  }

  for (const Link& link : decomp.links) {
    auto oriented = [&](const EntryLoc& loc) {
      return decomp.bags[loc.bag].members[loc.row] == link.pair.first;
    };
    Affine re;
    re.add(layout.re(link.home.bag, link.home.row, link.home.col), 1.0);
    re.add(layout.re(link.duplicate.bag, link.duplicate.row, link.duplicate.col), -1.0);
    out.equalities.push_back({re, Family::link});
    if (!link.pair.diagonal()) {
      Affine im;
      im.add(layout.im(link.home.bag, link.home.row, link.home.col),
             oriented(link.home) ? 1.0 : -1.0);
      im.add(layout.im(link.duplicate.bag, link.duplicate.row, link.duplicate.col),
             oriented(link.duplicate) ? -1.0 : 1.0);
      out.equalities.push_back({im, Family::link});
    }
  }
  for (auto& r : out.equalities) r.expr.normalize();
  return out;
}

std::vector<GeneratorTerm> build_objective(const Network& network,
                                           const AdmittanceModel& admittance,
                                           const Decomposition& decomp,
                                           const BagLayout& layout,
                                           std::vector<SocCone>& cones) {
  std::vector<GeneratorTerm> terms;
  std::vector<char> seen(network.bus_count(), 0);
  std::size_t next_var = layout.total;
  for (std::size_t g = 0; g < network.generators.size(); ++g) {
    const Generator& gen = network.generators[g];
    if (!(gen.c2 > 0.0)) {
      throw ValidationError("generator at bus " + std::to_string(gen.bus) +
                            " has c2 <= 0; the cost must be strictly convex");
    }
    GeneratorTerm t;
    t.generator = g;
    t.bus = network.index_of(gen.bus);
    if (seen[t.bus]++) {
      throw ValidationError("bus " + std::to_string(gen.bus) +
                            " has several generators; aggregate them first");
    }
    t.p = injection(admittance, decomp, layout, t.bus).re;
    t.p.constant += network.buses[t.bus].p_load;
    t.c2 = gen.c2;
    t.c1 = gen.c1;
    t.c0 = gen.c0;
    t.epigraph_var = next_var++;
    // (t + 1, 2 p, t - 1) in the second-order cone  <=>  t >= p^2.
    SocCone c;
    c.family = Family::epigraph;
    Affine a0, a1 = t.p, a2;
    a0.add(t.epigraph_var, 1.0);
    a0.constant = 1.0;
    a1 *= 2.0;
    a2.add(t.epigraph_var, 1.0);
    a2.constant = -1.0;
    c.members = {a0, a1, a2};
    cones.push_back(std::move(c));
    terms.push_back(std::move(t));
  }
  return terms;
}

SdrProgram assemble(const Network& network, const AdmittanceModel& admittance,
                    const Decomposition& decomp, const BuildOptions& options) {
  SdrProgram sdr;
  sdr.layout = BagLayout(decomp);
  const BagLayout& layout = sdr.layout;
  ConstraintSet cs = build_constraints(network, admittance, decomp, options);
  std::vector<SocCone> epi;
  sdr.generators = build_objective(network, admittance, decomp, layout, epi);

  ConicProgram& p = sdr.program;
  p.num_vars = layout.total + sdr.generators.size();
  p.objective.assign(p.num_vars, 0.0);
  for (const auto& g : sdr.generators) {
    p.objective[g.epigraph_var] += g.c2;
    for (const auto& [i, a] : g.p.terms) p.objective[i] += g.c1 * a;
    p.objective_offset += g.c1 * g.p.constant + g.c0;
  }
  p.equalities = std::move(cs.equalities);
  p.inequalities = std::move(cs.inequalities);
  p.socs = std::move(cs.socs);
  p.socs.insert(p.socs.end(), epi.begin(), epi.end());

  for (std::size_t b = 0; b < decomp.bags.size(); ++b) {
    const std::size_t nb = layout.size[b];
    PsdBlock blk;
    blk.size = 2 * nb;
    blk.entries.assign(blk.size * blk.size, PsdEntry{});
    auto put = [&](std::size_t i, std::size_t j, std::size_t var, double coef) {
      blk.entries[i + j * blk.size] = {static_cast<std::int64_t>(var), coef};
    };
    for (std::size_t r = 0; r < nb; ++r) {
      for (std::size_t c = 0; c < nb; ++c) {
        const std::size_t lo = std::min(r, c), hi = std::max(r, c);
        const std::size_t vr = layout.re(b, lo, hi);
        put(r, c, vr, 1.0);
        put(nb + r, nb + c, vr, 1.0);
        if (r != c) {
          // Im W_rc is +x for r < c, -x for r > c.
          const std::size_t vi = layout.im(b, lo, hi);
          const double s = r < c ? 1.0 : -1.0;
          put(nb + r, c, vi, s);
          put(r, nb + c, vi, -s);
        }
      }
    }
    p.psd_blocks.push_back(std::move(blk));
  }
  p.validate();
  return sdr;
}

std::vector<Eigen::MatrixXcd> decode_blocks(const BagLayout& layout,
                                            const std::vector<double>& x) {
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(layout.size.size());
  for (std::size_t b = 0; b < layout.size.size(); ++b) {
    const std::size_t n = layout.size[b];
    Eigen::MatrixXcd w(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      w(r, r) = Complex(x[layout.re(b, r, r)], 0.0);
      for (std::size_t c = r + 1; c < n; ++c) {
        const Complex v(x[layout.re(b, r, c)], x[layout.im(b, r, c)]);
        w(r, c) = v;
        w(c, r) = std::conj(v);
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

void encode_blocks(const BagLayout& layout, const std::vector<Eigen::MatrixXcd>& blocks,
                   std::vector<double>& x) {
  if (x.size() < layout.total) x.resize(layout.total, 0.0);
  for (std::size_t b = 0; b < layout.size.size(); ++b) {
    const std::size_t n = layout.size[b];
    const auto& w = blocks[b];
    for (std::size_t r = 0; r < n; ++r) {
      x[layout.re(b, r, r)] = w(r, r).real();
      for (std::size_t c = r + 1; c < n; ++c) {
        x[layout.re(b, r, c)] = w(r, c).real();
        x[layout.im(b, r, c)] = w(r, c).imag();
      }
    }
  }
}

std::vector<Eigen::MatrixXcd> lift_voltage(const Decomposition& decomp,
                                           const Eigen::VectorXcd& v) {
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(decomp.bags.size());
  for (const Bag& b : decomp.bags) {
    Eigen::VectorXcd vb(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) vb(i) = v(b.members[i]);
    out.push_back(vb * vb.adjoint());
  }
  return out;
}

std::vector<double> encode_voltage(const SdrProgram& sdr, const Decomposition& decomp,
                                   const Eigen::VectorXcd& v) {
  std::vector<double> x(sdr.program.num_vars, 0.0);
  encode_blocks(sdr.layout, lift_voltage(decomp, v), x);
  for (const auto& g : sdr.generators) {
    const double p = g.p.eval(x);
    x[g.epigraph_var] = p * p;
  }
  return x;
}

}  // namespace bagopf
