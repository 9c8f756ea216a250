#include "bagopf/recover.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

#include "bagopf/error.hpp"

namespace bagopf {

namespace {

Complex unit(double angle) { return std::polar(1.0, angle); }

double wrap(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

Eigen::VectorXcd extract_block_vector(const Eigen::MatrixXcd& block, const EigPair& eig,
                                      double eps_rank) {
  const double tr = block.trace().real();
  const double gap = tr - eig.lambda_max;
  if (block.rows() > 1 && gap > eps_rank * std::max(1.0, tr)) {
    std::ostringstream os;
    os << "rank gap " << gap << " exceeds " << eps_rank << " * max(1, trace)";
    throw NotRankOne(os.str());
  }
  return std::sqrt(std::max(eig.lambda_max, 0.0)) * eig.w_max;
}

VoltageSolution stitch(const std::vector<Eigen::VectorXcd>& block_vectors,
                       const Decomposition& decomp, const Network& network) {
  const std::size_t nb = decomp.bags.size();
  if (block_vectors.size() != nb) throw ValidationError("one vector per bag expected");
  const std::size_t n = network.bus_count();
  std::vector<std::vector<std::size_t>> bags_of(n);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t k : decomp.bags[b].members) bags_of[k].push_back(b);

  VoltageSolution sol;
  sol.v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  const std::size_t ref = network.reference_index();
  sol.reference_bus = network.buses[ref].id;
  if (nb == 0) return sol;
  if (bags_of[ref].empty()) throw ValidationError("reference bus is in no bag");

  // Per-bag rotation so shared buses agree, found in BFS order.
  std::vector<Complex> rot(nb, Complex(0.0, 0.0));
  std::vector<char> done(nb, 0);
  std::vector<std::size_t> order;
  const std::size_t root = bags_of[ref].front();
  {
    const Complex vr = block_vectors[root](static_cast<Eigen::Index>(
        *decomp.bags[root].position(ref)));
    rot[root] = std::abs(vr) > 0.0 ? std::conj(vr) / std::abs(vr) : Complex(1.0, 0.0);
  }
  done[root] = 1;
  std::queue<std::size_t> q;
  q.push(root);
  while (!q.empty()) {
    const std::size_t b = q.front();
    q.pop();
    order.push_back(b);
    for (std::size_t k : decomp.bags[b].members) {
      for (std::size_t c : bags_of[k]) {
        if (done[c]) continue;
        // Least-squares phase over every bus c shares with aligned bags.
        Complex acc(0.0, 0.0);
        for (std::size_t pos = 0; pos < decomp.bags[c].size(); ++pos) {
          const std::size_t bus = decomp.bags[c].members[pos];
          const auto pb = decomp.bags[b].position(bus);
          if (!pb) continue;
          acc += rot[b] * block_vectors[b](static_cast<Eigen::Index>(*pb)) *
                 std::conj(block_vectors[c](static_cast<Eigen::Index>(pos)));
        }
        rot[c] = std::abs(acc) > 0.0 ? acc / std::abs(acc) : Complex(1.0, 0.0);
        done[c] = 1;
        q.push(c);
      }
    }
  }
  if (order.size() != nb) throw ValidationError("bag overlap graph is disconnected");

  std::vector<std::size_t> rank(nb);
  for (std::size_t i = 0; i < nb; ++i) rank[order[i]] = i;
  for (std::size_t k = 0; k < n; ++k) {
    auto& owners = bags_of[k];
    if (owners.empty()) continue;
    std::sort(owners.begin(), owners.end(),
              [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    double mag_sum = 0.0, mag_lo = INFINITY, mag_hi = 0.0;
    double phase0 = 0.0, phase_spread = 0.0;
    for (std::size_t i = 0; i < owners.size(); ++i) {
      const std::size_t b = owners[i];
      const Complex val =
          rot[b] * block_vectors[b](static_cast<Eigen::Index>(*decomp.bags[b].position(k)));
      const double m = std::abs(val);
      mag_sum += m;
      mag_lo = std::min(mag_lo, m);
      mag_hi = std::max(mag_hi, m);
      if (i == 0) phase0 = std::arg(val);
      else phase_spread = std::max(phase_spread, std::abs(wrap(std::arg(val) - phase0)));
    }
    const double mean = mag_sum / static_cast<double>(owners.size());
    sol.v(static_cast<Eigen::Index>(k)) = mean * unit(k == ref ? 0.0 : phase0);
    if (mean > 0.0) {
      sol.magnitude_disagreement = std::max(sol.magnitude_disagreement, (mag_hi - mag_lo) / mean);
    }
    sol.phase_disagreement = std::max(sol.phase_disagreement, phase_spread);
  }
  if (sol.magnitude_disagreement > 1e-3) {
    std::ostringstream os;
    os << "shared-bus magnitude mismatch " << sol.magnitude_disagreement << " averaged";
    sol.warnings.push_back(os.str());
  }
  return sol;
}

VoltageSolution recover(const Iterate& iterate, const Decomposition& decomp,
                        const Network& network, const AdmittanceModel& admittance,
                        double eps_rank) {
  std::vector<Eigen::VectorXcd> vecs;
  vecs.reserve(iterate.blocks.size());
  for (std::size_t b = 0; b < iterate.blocks.size(); ++b) {
    vecs.push_back(extract_block_vector(iterate.blocks[b], iterate.eigpairs[b], eps_rank));
  }
  VoltageSolution sol = stitch(vecs, decomp, network);
  sol.objective = objective_of(sol.v, network, admittance);
  return sol;
}

double outer_product_error(const Eigen::VectorXcd& v, const std::vector<Eigen::MatrixXcd>& blocks,
                           const Decomposition& decomp) {
  double worst = 0.0;
  for (const auto& [pair, loc] : decomp.term_home) {
    const std::size_t r = decomp.bags[loc.bag].members[loc.row];
    const std::size_t c = decomp.bags[loc.bag].members[loc.col];
    const Complex w = blocks[loc.bag](static_cast<Eigen::Index>(loc.row),
                                      static_cast<Eigen::Index>(loc.col));
    const Complex vv = v(static_cast<Eigen::Index>(r)) * std::conj(v(static_cast<Eigen::Index>(c)));
    worst = std::max(worst, std::abs(vv - w));
  }
  return worst;
}

Eigen::VectorXcd bus_injections(const Eigen::VectorXcd& v, const AdmittanceModel& admittance) {
  const Eigen::VectorXcd i = admittance.y * v;
  return v.cwiseProduct(i.conjugate());
}

FeasibilityReport verify(const Eigen::VectorXcd& v, const Network& network,
                         const AdmittanceModel& admittance) {
  FeasibilityReport rep;
  const std::size_t n = network.bus_count();
  const Eigen::VectorXcd s = bus_injections(v, admittance);
  auto& bv = rep.bound_violations;
  for (const char* f : {"balance", "generation", "voltage", "line_limit",
                        "voltage_difference", "angle"}) {
    bv[f] = 0.0;
  }
  auto bump = [&](const char* family, double rel) {
    bv[family] = std::max(bv[family], std::max(rel, 0.0));
  };

  std::vector<int> gen_at(n, -1);
  for (std::size_t g = 0; g < network.generators.size(); ++g) {
    const std::size_t k = network.index_of(network.generators[g].bus);
    if (gen_at[k] >= 0) {
      throw ValidationError("bus " + std::to_string(network.buses[k].id) +
                            " has several generators; aggregate them first");
    }
    gen_at[k] = static_cast<int>(g);
  }
  rep.balance_residuals.assign(n, 0.0);
  rep.generation.assign(network.generators.size(), Complex(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    const Bus& bus = network.buses[k];
    const Complex sk = s(static_cast<Eigen::Index>(k));
    const Complex load(bus.p_load, bus.q_load);
    if (gen_at[k] < 0) {
      const Complex mis = sk + load;
      const double r = std::max(std::abs(mis.real()), std::abs(mis.imag()));
      rep.balance_residuals[k] = r;
      bump("balance", r / std::max(1.0, std::abs(load)));
    } else {
      const Generator& g = network.generators[static_cast<std::size_t>(gen_at[k])];
      const Complex pg = sk + load;
      rep.generation[static_cast<std::size_t>(gen_at[k])] = pg;
      bump("generation", (pg.real() - g.p_max) / std::max(1.0, std::abs(g.p_max)));
      bump("generation", (g.p_min - pg.real()) / std::max(1.0, std::abs(g.p_min)));
      bump("generation", (pg.imag() - g.q_max) / std::max(1.0, std::abs(g.q_max)));
      bump("generation", (g.q_min - pg.imag()) / std::max(1.0, std::abs(g.q_min)));
    }
    const double vm = std::abs(v(static_cast<Eigen::Index>(k)));
    bump("voltage", (vm - bus.v_max) / bus.v_max);
    if (bus.v_min > 0.0) bump("voltage", (bus.v_min - vm) / bus.v_min);
  }

  for (std::size_t l = 0; l < network.branches.size(); ++l) {
    const Branch& br = network.branches[l];
    const BranchAdmittance& ya = admittance.branches[l];
    const auto f = static_cast<Eigen::Index>(network.index_of(br.from));
    const auto t = static_cast<Eigen::Index>(network.index_of(br.to));
    const Complex vf = v(f), vt = v(t);
    LineFlow lf{br.from, br.to, vf * std::conj(ya.ff * vf + ya.ft * vt),
                vt * std::conj(ya.tf * vf + ya.tt * vt)};
    if (br.s_max > 0.0) {
      bump("line_limit", (std::abs(lf.s_from) - br.s_max) / br.s_max);
      bump("line_limit", (std::abs(lf.s_to) - br.s_max) / br.s_max);
    }
    if (br.v_diff_max && *br.v_diff_max > 0.0) {
      bump("voltage_difference", (std::abs(vf - vt) - *br.v_diff_max) / *br.v_diff_max);
    }
    if (br.theta_max) {
      const double d = std::abs(wrap(std::arg(vf) - std::arg(vt)));
      bump("angle", (d - *br.theta_max) / *br.theta_max);
    }
    rep.line_flows.push_back(lf);
  }
  for (const auto& [fam, val] : bv) {
    if (rep.worst_family.empty() || val > rep.worst) {
      rep.worst = val;
      rep.worst_family = fam;
    }
  }
  return rep;
}

double objective_of(const Eigen::VectorXcd& v, const Network& network,
                    const AdmittanceModel& admittance) {
  const Eigen::VectorXcd s = bus_injections(v, admittance);
  std::vector<char> seen(network.bus_count(), 0);
  double total = 0.0;
  for (const Generator& g : network.generators) {
    const std::size_t k = network.index_of(g.bus);
    if (seen[k]++) {
      throw ValidationError("bus " + std::to_string(g.bus) +
                            " has several generators; aggregate them first");
    }
    const double p = s(static_cast<Eigen::Index>(k)).real() + network.buses[k].p_load;
    total += g.cost(p);
  }
  return total;
}

}  // namespace bagopf
