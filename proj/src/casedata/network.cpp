#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "bagopf/casedata.hpp"
#include "bagopf/error.hpp"

namespace bagopf {

std::size_t Network::index_of(int bus_id) const {
  auto it = index_.find(bus_id);
  if (it == index_.end()) {
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
  }
  return it->second;
}

std::size_t Network::reference_index() const {
  for (std::size_t k = 0; k < buses.size(); ++k) {
    if (buses[k].is_reference) return k;
  }
  throw ValidationError("network has no reference bus");
}

Network make_network(double base_mva, std::vector<Bus> buses,
                     std::vector<Generator> generators,
                     std::vector<Branch> branches) {
  if (!(base_mva > 0.0)) throw ValidationError("base_mva must be positive");
  Network net;
  net.base_mva = base_mva;
  int references = 0;
  for (std::size_t k = 0; k < buses.size(); ++k) {
    const Bus& b = buses[k];
    if (!net.index_.emplace(b.id, k).second) {
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    }
    if (b.v_min < 0.0 || b.v_min > b.v_max) {
      throw ValidationError("bus " + std::to_string(b.id) +
                            ": voltage bounds must satisfy 0 <= v_min <= v_max");
    }
    if (b.is_reference) ++references;
  }
  if (!buses.empty() && references != 1) {
    throw ValidationError("expected exactly one reference bus, found " +
                          std::to_string(references));
  }
  for (const Generator& g : generators) {
    if (!net.index_.contains(g.bus)) {
      throw ValidationError("generator at unknown bus " + std::to_string(g.bus));
    }
    if (g.p_min > g.p_max || g.q_min > g.q_max) {
      throw ValidationError("generator at bus " + std::to_string(g.bus) +
                            ": inverted output bounds");
    }
  }
  for (const Branch& br : branches) {
    const std::string tag =
        "branch " + std::to_string(br.from) + "-" + std::to_string(br.to);
    if (!net.index_.contains(br.from) || !net.index_.contains(br.to)) {
      throw ValidationError(tag + ": unknown endpoint");
    }
    if (br.from == br.to) throw ValidationError(tag + ": from == to");
    if (br.s_max < 0.0) throw ValidationError(tag + ": negative s_max");
    if (br.theta_max &&
        !(*br.theta_max > 0.0 && *br.theta_max < std::numbers::pi / 2)) {
      throw ValidationError(tag + ": theta_max must lie in (0, pi/2)");
    }
    if (br.v_diff_max && *br.v_diff_max < 0.0) {
      throw ValidationError(tag + ": negative v_diff_max");
    }
    if (!(br.tap_ratio > 0.0)) throw ValidationError(tag + ": tap ratio <= 0");
  }
  net.buses = std::move(buses);
  net.generators = std::move(generators);
  net.branches = std::move(branches);
  return net;
}

Network load_network(const std::string& path, const std::string& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, std::size_t{0});
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string fmt = format;
  if (fmt.empty()) {
    fmt = (path.ends_with(".json")) ? "native" : "matpower";
  }
  if (fmt == "matpower") return parse_matpower(buf.str());
  if (fmt == "native") return parse_native(buf.str());
  throw ValidationError("unknown input format '" + fmt + "'");
}

namespace {

// Minimum of sum a_i p_i^2 + b_i p_i + c_i subject to sum p_i = P, written
// as A P^2 + B P + C. Stationarity gives p_i = (lambda - b_i) / (2 a_i).
Generator merge_costs(const std::vector<const Generator*>& units) {
  double s = 0.0;     // sum 1/(2 a_i)
  double beta = 0.0;  // sum b_i/(2 a_i)
  for (const Generator* g : units) {
    if (!(g->c2 > 0.0)) {
      throw UnsupportedFeature(
          "colocated generators at bus " + std::to_string(g->bus) +
          " need strictly convex costs (c2 > 0) to be merged");
    }
    s += 1.0 / (2.0 * g->c2);
    beta += g->c1 / (2.0 * g->c2);
  }
  Generator out;
  out.bus = units.front()->bus;
  out.c2 = 1.0 / (2.0 * s);
  out.c1 = beta / s;
  const double lambda0 = beta / s;  // marginal cost at P = 0
  double c0 = 0.0;
  for (const Generator* g : units) {
    const double p = (lambda0 - g->c1) / (2.0 * g->c2);
    c0 += g->cost(p);
  }
  out.c0 = c0;
  for (const Generator* g : units) {
    out.p_min += g->p_min;
    out.p_max += g->p_max;
    out.q_min += g->q_min;
    out.q_max += g->q_max;
  }
  return out;
}

}  // namespace

Network aggregate_generators(const Network& network) {
  std::map<std::size_t, std::vector<const Generator*>> by_bus;
  for (const Generator& g : network.generators) {
    by_bus[network.index_of(g.bus)].push_back(&g);
  }
  std::vector<Generator> merged;
  merged.reserve(by_bus.size());
  for (auto& [k, units] : by_bus) {
    merged.push_back(units.size() == 1 ? *units.front() : merge_costs(units));
  }
  // Keep the input order when nothing had to be merged.
  if (merged.size() == network.generators.size()) return network;
  return make_network(network.base_mva, network.buses, std::move(merged),
                      network.branches);
}

}  // namespace bagopf
