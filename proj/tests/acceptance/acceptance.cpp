// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when any required criterion fails. Detail lines are indented.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bagopf/casedata.hpp"
#include "bagopf/decomp.hpp"
#include "bagopf/error.hpp"
#include "bagopf/noa.hpp"
#include "bagopf/recover.hpp"
#include "bagopf/sdr.hpp"
#include "support/toy.hpp"

using namespace bagopf;

namespace {

const std::string kData = BAGOPF_DATA_DIR;

// Local NLP optima (interior-point AC OPF from a flat start, computed once
// with an independent solver and frozen here).
const std::map<std::string, double> kNlpReference = {
    {"case9", 5296.6865}, {"case14", 8081.5264}, {"case30", 576.8923},
    {"case57", 41737.7855}, {"case118", 129660.6864}};

const std::vector<std::string> kSuite = {"case9", "case14", "case30", "case57", "case118"};

__attribute__((format(printf, 1, 2))) std::string format(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

struct Criterion {
  std::string id;
  bool pass = true;
  std::vector<std::string> detail;

  void note(const std::string& line) { detail.push_back(line); }
  void check(bool ok, const std::string& line) {
    pass = pass && ok;
    detail.push_back((ok ? "ok   " : "FAIL ") + line);
  }
};

bool report(const Criterion& c, const std::string& title) {
  for (const auto& d : c.detail) std::printf("    %s\n", d.c_str());
  std::printf("%s %s %s\n", c.id.c_str(), c.pass ? "PASS" : "FAIL", title.c_str());
  std::fflush(stdout);
  return c.pass;
}

struct SuiteRun {
  std::string name;
  Network network;
  AdmittanceModel adm;
  Decomposition decomp;
  SdrProgram sdr;
  NoaResult result;
  double verify_worst = INFINITY;
  std::string verify_family;
  std::string recover_error;
};

const NoaOptions kNoa;
const BackendOptions kBackend;
const InteriorPointBackend kIpm;

SuiteRun run_case(const std::string& name) {
  SuiteRun s;
  s.name = name;
  s.network = load_network(kData + "/" + name + ".m");
  s.adm = build_admittance(s.network);
  s.decomp = decompose(s.network, s.adm);
  s.sdr = assemble(s.network, s.adm, s.decomp);
  s.result = run(s.sdr, kNoa, kIpm, kBackend);
  try {
    const VoltageSolution v = recover(s.result.final, s.decomp, s.network, s.adm, kNoa.eps_rank);
    const FeasibilityReport rep = verify(v.v, s.network, s.adm);
    s.verify_worst = rep.worst;
    s.verify_family = rep.worst_family;
  } catch (const std::exception& e) {
    s.recover_error = e.what();
  }
  return s;
}

// AC1: convergence, recovery feasibility and gap on the desk-scale suite.
Criterion ac1(const std::vector<SuiteRun>& runs) {
  Criterion c{"AC1"};
  for (const auto& s : runs) {
    const auto& r = s.result;
    const bool conv = r.status == NoaStatus::converged &&
                      r.final.rank_one_set.size() == s.decomp.bags.size();
    c.check(conv, format("%s status %s, rank-one %zu/%zu after %d iterations", s.name.c_str(),
            noa_status_name(r.status), r.final.rank_one_set.size(), s.decomp.bags.size(),
            r.iterations));
    if (s.recover_error.empty()) {
      c.check(s.verify_worst <= 1e-4, format("%s verify worst %.3e (%s) <= 1e-4", s.name.c_str(),
              s.verify_worst, s.verify_family.c_str()));
    } else {
      c.check(false, format("%s recovery failed: %s", s.name.c_str(), s.recover_error.c_str()));
    }
    const double g = r.got.value_or(INFINITY);
    c.check(g <= 1e-3, format("%s GOT %.3e <= 1e-3 (lb %.6f, found %.6f)", s.name.c_str(), g,
            r.lower_bound, r.found_value));
    const double ref = kNlpReference.at(s.name);
    const double ref_gap = (ref - r.lower_bound) / r.lower_bound;
    c.check(ref_gap >= -1e-6 && ref_gap <= 1e-3,
            format("%s NLP reference %.4f sits %.3e above the lower bound", s.name.c_str(), ref, ref_gap));
    c.note(format("%s found value vs NLP reference %+.3e", s.name.c_str(), (r.found_value - ref) / ref));
  }
  return c;
}

// AC2: F_mu nonincreasing and locked bags stay within eps_tol, read from
// the emitted trace.
Criterion ac2(const std::vector<SuiteRun>& runs) {
  Criterion c{"AC2"};
  for (const auto& s : runs) {
    const auto& tr = s.result.trace;
    double worst_rise = 0.0;
    bool desc = true;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      const double tol =
          10.0 * std::max(kBackend.abs_gap_tol, kBackend.rel_gap_tol * std::abs(tr[i - 1].f_mu));
      const double rise = tr[i].f_mu - tr[i - 1].f_mu;
      worst_rise = std::max(worst_rise, rise / tol);
      desc = desc && rise <= tol;
    }
    c.check(desc, format("%s F_mu over %zu rows, worst rise %.3g x tolerance", s.name.c_str(), tr.size(),
            worst_rise));
    bool perm = true, grows = true;
    double worst_locked = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      worst_locked = std::max(worst_locked, tr[i].locked_max_gap);
      perm = perm && tr[i].locked_max_gap <= kNoa.eps_tol;
      grows = grows && tr[i].locked >= tr[i - 1].locked;
    }
    c.check(perm && grows, format("%s locked bags: worst later gap %.3e <= %.0e, count nondecreasing %s",
            s.name.c_str(), worst_locked, kNoa.eps_tol, grows ? "yes" : "no"));
  }
  return c;
}

// AC3: relaxation bound below the converged value, and bags vs one full
// lifting give the same relaxation optimum.
Criterion ac3(const std::vector<SuiteRun>& runs) {
  Criterion c{"AC3"};
  for (const auto& s : runs) {
    const auto& r = s.result;
    const double tol = 1e-6 * std::max(1.0, std::abs(r.found_value));
    c.check(r.lower_bound <= r.found_value + tol, format("%s lower bound %.6f <= found %.6f",
            s.name.c_str(), r.lower_bound, r.found_value));
    if (s.network.buses.size() > 57) continue;
    const Decomposition full = undecomposed(s.adm);
    const SdrProgram sdr = assemble(s.network, s.adm, full);
    const InitResult init = init_sdr(sdr, kNoa, kIpm, kBackend);
    if (init.status != NoaStatus::converged) {
      c.check(false, format("%s full lifting relaxation: %s", s.name.c_str(), noa_status_name(init.status)));
      continue;
    }
    const double rel = std::abs(init.lower_bound - r.lower_bound) / std::abs(init.lower_bound);
    c.check(rel <= 1e-5, format("%s bags %.6f vs full %.6f, relative %.3e <= 1e-5%s", s.name.c_str(),
            r.lower_bound, init.lower_bound, rel, init.inexact ? " (inexact)" : ""));
  }
  return c;
}

Network graph_network(std::size_t n, const std::vector<std::pair<int, int>>& lines) {
  std::vector<Bus> buses(n);
  for (std::size_t i = 0; i < n; ++i) {
    buses[i].id = static_cast<int>(i + 1);
    buses[i].v_min = 0.9;
    buses[i].v_max = 1.1;
    buses[i].is_reference = i == 0;
  }
  std::vector<Branch> branches;
  for (auto [a, b] : lines) {
    Branch br;
    br.from = a;
    br.to = b;
    br.x = 0.1;
    branches.push_back(br);
  }
  return make_network(100, buses, {}, branches);
}

std::vector<std::pair<int, int>> random_graph(std::mt19937& rng, std::size_t n) {
  std::set<std::pair<int, int>> edges;
  for (std::size_t i = 1; i < n; ++i) {
    const int a = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng) + 1);
    edges.insert({a, static_cast<int>(i + 1)});
  }
  std::uniform_int_distribution<std::size_t> any(1, n);
  const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, n)(rng);
  for (std::size_t e = 0; e < extra; ++e) {
    const int a = static_cast<int>(any(rng)), b = static_cast<int>(any(rng));
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  }
  return {edges.begin(), edges.end()};
}

// Copies of one entry across bags form a connected link graph.
bool duplicates_linked(const Decomposition& d) {
  std::map<BusPair, std::vector<EntryLoc>> copies;
  for (const Bag& b : d.bags)
    for (std::size_t r = 0; r < b.size(); ++r)
      for (std::size_t q = r; q < b.size(); ++q)
        copies[BusPair::of(b.members[r], b.members[q])].push_back({b.index, r, q});
  std::map<EntryLoc, std::set<EntryLoc>> adj;
  for (const Link& l : d.links) {
    adj[l.home].insert(l.duplicate);
    adj[l.duplicate].insert(l.home);
  }
  for (const auto& [pair, locs] : copies) {
    if (locs.size() < 2) continue;
    std::set<EntryLoc> seen{locs[0]};
    std::vector<EntryLoc> todo{locs[0]};
    while (!todo.empty()) {
      const EntryLoc e = todo.back();
      todo.pop_back();
      for (const EntryLoc& f : adj[e])
        if (seen.insert(f).second) todo.push_back(f);
    }
    for (const EntryLoc& e : locs)
      if (!seen.count(e)) return false;
  }
  return true;
}

// AC4: decomposition properties on random graphs and the 2383-bus case.
Criterion ac4() {
  Criterion c{"AC4"};
  std::mt19937 rng(7001);
  int bad_cover = 0, bad_home = 0, bad_links = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 60)(rng);
    const auto lines = random_graph(rng, n);
    const Network net = graph_network(n, lines);
    const AdmittanceModel adm = build_admittance(net);
    const Decomposition d = decompose(net, adm);
    bad_cover += !coverage_check(d, adm).empty();
    for (auto [a, b] : lines) {
      const auto pair = BusPair::of(net.index_of(a), net.index_of(b));
      if (d.term_home.count(pair) != 1) {
        ++bad_home;
        continue;
      }
      const EntryLoc loc = d.term_home.at(pair);
      const Bag& bag = d.bags[loc.bag];
      bad_home += !(BusPair::of(bag.members[loc.row], bag.members[loc.col]) == pair);
    }
    bad_links += !duplicates_linked(d);
  }
  c.check(bad_cover == 0, format("random graphs: %d nonempty coverage reports", bad_cover));
  c.check(bad_home == 0, format("random graphs: %d lines not homed exactly once", bad_home));
  c.check(bad_links == 0, format("random graphs: %d decompositions with unlinked duplicates", bad_links));

  const Network net = load_network(kData + "/case2383wp.m");
  const AdmittanceModel adm = build_admittance(net);
  const Decomposition d = decompose(net, adm);
  const DecompStats st = stats(d, net.buses.size());
  const double rel = std::abs(static_cast<double>(st.bag_count) - 1242.0) / 1242.0;
  c.check(rel <= 0.15, format("case2383wp bag count %zu within 15%% of 1242 (%.1f%%)", st.bag_count,
          100.0 * rel));
  c.check(st.max_bag_size >= 8 && st.max_bag_size <= 12,
          format("case2383wp max bag size %zu within 2 of 10", st.max_bag_size));
  c.check(coverage_check(d, adm).empty(), format("case2383wp coverage report empty"));
  return c;
}

// AC5: lifted feasible voltages satisfy every generated row and reproduce
// the cost.
Criterion ac5() {
  Criterion c{"AC5"};
  std::mt19937 rng(7005);
  double worst_viol = 0.0, worst_cost = 0.0;
  int fails = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 30)(rng);
    const toy::Instance inst = toy::make(rng, n);
    const AdmittanceModel adm = build_admittance(inst.network);
    const Decomposition d = decompose(inst.network, adm);
    const SdrProgram sdr = assemble(inst.network, adm, d);
    const std::vector<double> x = encode_voltage(sdr, d, inst.v);
    const double viol = max_violation(sdr.program, x).worst();
    const Eigen::VectorXcd s = inst.v.cwiseProduct((adm.y * inst.v).conjugate());
    double f = 0.0;
    for (const auto& g : inst.network.generators) {
      const std::size_t k = inst.network.index_of(g.bus);
      f += g.cost(s(static_cast<Eigen::Index>(k)).real() + inst.network.buses[k].p_load);
    }
    const double cost_rel = std::abs(sdr.cost(x) - f) / std::max(1.0, std::abs(f));
    worst_viol = std::max(worst_viol, viol);
    worst_cost = std::max(worst_cost, cost_rel);
    fails += viol > 1e-9 || cost_rel > 1e-9;
  }
  c.check(worst_viol <= 1e-9, format("50 toys: worst lifted constraint violation %.3e <= 1e-9",
          worst_viol));
  c.check(worst_cost <= 1e-9, format("50 toys: worst relative cost error %.3e <= 1e-9", worst_cost));
  c.note(format("%d toys outside tolerance", fails));
  return c;
}

Eigen::MatrixXcd random_hermitian(std::mt19937& rng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(nd(rng), nd(rng));
  return 0.5 * (a + a.adjoint());
}

// AC6: the encoded linearization against central differences of
// mu (Trace - lambda_max).
Criterion ac6() {
  Criterion c{"AC6"};
  std::mt19937 rng(7006);
  const double mu = 1e6, h = 1e-6;
  double worst = 0.0;
  int blocks = 0;
  for (int blk = 0; blk < 12; ++blk) {
    const auto n = static_cast<Eigen::Index>(2 + blk % 6);
    Bag bag;
    for (Eigen::Index i = 0; i < n; ++i) bag.members.push_back(static_cast<std::size_t>(i));
    Decomposition d;
    d.bags = {bag};
    const BagLayout layout(d);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_hermitian(rng, n));
    const Eigen::MatrixXcd u = qr.householderQ();
    Eigen::VectorXd ev(n);
    std::uniform_real_distribution<double> low(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) ev(i) = low(rng);
    ev(n - 1) = 2.0 + low(rng);
    const Eigen::MatrixXcd w = u * ev.cast<Complex>().asDiagonal() * u.adjoint();
    const EigPair p = max_eigpair(w);
    const Affine lin = rank_gap_linearization(layout, 0, p.w_max, mu);
    auto g = [&](const Eigen::MatrixXcd& m) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
      return mu * (m.trace().real() - es.eigenvalues()(n - 1));
    };
    for (int dir = 0; dir < 20; ++dir) {
      const Eigen::MatrixXcd e = random_hermitian(rng, n);
      std::vector<double> xe(layout.total, 0.0);
      encode_blocks(layout, {e}, xe);
      const double slope = lin.eval(xe) - lin.constant;
      const double fd = (g(w + h * e) - g(w - h * e)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - slope) / std::max(std::abs(fd), 1e-8 * mu));
    }
    ++blocks;
  }
  c.check(worst <= 1e-4, format("%d blocks x 20 directions, worst relative error %.3e <= 1e-4", blocks,
          worst));
  return c;
}

// AC7 (optional): large Polish cases. Off unless requested.
Criterion ac7() {
  Criterion c{"AC7"};
  struct Target {
    std::string name;
    double found;
    double got;
  };
  const std::vector<Target> targets = {{"case2736sp", 1.3042e6, 7.6681e-05},
                                       {"case2737sop", 0.0, 1.2891e-05}};
  for (const auto& t : targets) {
    try {
      const SuiteRun s = run_case(t.name);
      const auto& r = s.result;
      c.check(r.status == NoaStatus::converged, format("%s status %s", t.name.c_str(),
              noa_status_name(r.status)));
      if (t.found > 0.0) {
        const double rel = std::abs(r.found_value - t.found) / t.found;
        c.check(rel <= 1e-3, format("%s found %.6g within 0.1%% of %.6g", t.name.c_str(), r.found_value,
                t.found));
      }
      const double g = r.got.value_or(INFINITY);
      c.check(g <= 10.0 * t.got, format("%s GOT %.3e within 10x of %.3e", t.name.c_str(), g, t.got));
    } catch (const std::exception& e) {
      c.check(false, format("%s: %s", t.name.c_str(), e.what()));
    }
  }
  return c;
}

}  // namespace

int main() {
  bool ok = true;
  std::vector<SuiteRun> runs;
  for (const auto& name : kSuite) runs.push_back(run_case(name));
  ok &= report(ac1(runs), "desk-scale suite converges, verifies and closes the gap");
  ok &= report(ac2(runs), "monotone descent and locking permanence");
  ok &= report(ac3(runs), "lower-bound sandwich and bag vs full lifting equality");
  ok &= report(ac4(), "decomposition properties");
  ok &= report(ac5(), "rank-one oracle equivalence");
  ok &= report(ac6(), "subgradient check");
  if (std::getenv("BAGOPF_STRETCH")) {
    report(ac7(), "large-case reproduction (optional)");
  } else {
    std::printf("AC7 SKIP large-case reproduction (optional, set BAGOPF_STRETCH=1)\n");
  }
  return ok ? 0 : 1;
}
