#include "bagopf/report.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "bagopf/error.hpp"

namespace bagopf {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

Json ids_of(const Bag& bag, const Network& network) {
  Json a = Json::array();
  for (std::size_t k : bag.members) a.push_back(network.buses[k].id);
  return a;
}

}  // namespace

Json decomposition_json(const Decomposition& decomp, const Network& network,
                        bool with_members) {
  const DecompStats s = stats(decomp, network.bus_count());
  Json j;
  j["bag_count"] = s.bag_count;
  j["max_bag_size"] = s.max_bag_size;
  j["variable_count"] = s.variable_count;
  j["undecomposed_variable_count"] = s.undecomposed_variable_count;
  j["link_count"] = decomp.links.size();
  if (with_members) {
    Json bags = Json::array();
    for (const Bag& b : decomp.bags) {
      bags.push_back({{"index", b.index},
                      {"center", network.buses[b.center].id},
                      {"members", ids_of(b, network)}});
    }
    j["bags"] = std::move(bags);
  }
  return j;
}

Json relaxation_json(const Iterate& iterate, const Decomposition& decomp, double eps_rank) {
  const std::vector<std::size_t> ones = rank_one_set(iterate, eps_rank);
  std::vector<char> is_one(decomp.bags.size(), 0);
  for (std::size_t i : ones) is_one[i] = 1;
  std::size_t count = 0, largest = 0, smallest = 0;
  double worst_gap = 0.0;
  for (std::size_t i = 0; i < decomp.bags.size(); ++i) {
    worst_gap = std::max(worst_gap, iterate.rank_gaps[i]);
    if (is_one[i]) continue;
    const std::size_t n = decomp.bags[i].size();
    largest = count ? std::max(largest, n) : n;
    smallest = count ? std::min(smallest, n) : n;
    ++count;
  }
  Json j;
  j["lower_bound"] = iterate.objective;
  j["penalty"] = iterate.penalty;
  j["rank_one_count"] = ones.size();
  j["rank_deficient_count"] = count;
  j["rank_deficient_largest_size"] = largest;
  j["rank_deficient_smallest_size"] = smallest;
  j["max_rank_gap"] = worst_gap;
  return j;
}

Json feasibility_json(const FeasibilityReport& report) {
  Json j;
  for (const auto& [fam, v] : report.bound_violations) j[fam] = v;
  j["worst"] = report.worst;
  j["worst_family"] = report.worst_family;
  return j;
}

Json noa_json(const NoaResult& result) {
  Json j;
  j["status"] = noa_status_name(result.status);
  j["lower_bound"] = result.lower_bound;
  j["found_value"] = result.found_value;
  if (result.got) j["got"] = *result.got;
  else j["absolute_gap"] = result.found_value - result.lower_bound;
  j["mu"] = result.mu;
  j["iterations"] = result.iterations;
  Json locked = Json::array();
  for (const auto& t : result.trace) locked.push_back(t.locked);
  j["rank_one_progression"] = std::move(locked);
  j["bag_count"] = result.final.blocks.size();
  if (!result.message.empty()) j["message"] = result.message;
  return j;
}

Json trace_json(const NoaResult& result) {
  Json rows = Json::array();
  for (const auto& t : result.trace) {
    rows.push_back({{"iteration", t.iteration},
                    {"objective", t.objective},
                    {"penalty", t.penalty},
                    {"f_mu", t.f_mu},
                    {"locked", t.locked},
                    {"max_rank_gap", t.max_rank_gap},
                    {"locked_max_gap", t.locked_max_gap},
                    {"solver_status", status_name(t.solver_status)},
                    {"inexact", t.inexact},
                    {"retried", t.retried}});
  }
  return rows;
}

Json solution_json(const VoltageSolution& solution, const Network& network,
                   const FeasibilityReport& report) {
  const double base = network.base_mva;
  Json j;
  j["format"] = "bagopf-solution";
  j["version"] = kSolutionVersion;
  j["base_mva"] = base;
  j["reference_bus"] = solution.reference_bus;
  j["objective"] = solution.objective;
  Json buses = Json::array();
  for (std::size_t k = 0; k < network.bus_count(); ++k) {
    const Complex v = solution.v(static_cast<Eigen::Index>(k));
    buses.push_back({{"id", network.buses[k].id},
                     {"vm", std::abs(v)},
                     {"va_deg", std::arg(v) * kDeg}});
  }
  j["buses"] = std::move(buses);
  Json gens = Json::array();
  for (std::size_t g = 0; g < network.generators.size(); ++g) {
    const Complex s = g < report.generation.size() ? report.generation[g] : Complex{};
    gens.push_back({{"bus", network.generators[g].bus},
                    {"p_mw", s.real() * base},
                    {"q_mvar", s.imag() * base}});
  }
  j["generators"] = std::move(gens);
  Json lines = Json::array();
  for (const LineFlow& f : report.line_flows) {
    lines.push_back({{"from", f.from},
                     {"to", f.to},
                     {"p_from_mw", f.s_from.real() * base},
                     {"q_from_mvar", f.s_from.imag() * base},
                     {"p_to_mw", f.s_to.real() * base},
                     {"q_to_mvar", f.s_to.imag() * base}});
  }
  j["lines"] = std::move(lines);
  j["residuals"] = feasibility_json(report);
  Json warn = Json::array();
  for (const auto& w : solution.warnings) warn.push_back(w);
  j["warnings"] = std::move(warn);
  return j;
}

Eigen::VectorXcd voltages_from_solution(const Json& solution, const Network& network) {
  if (!solution.is_object() || solution.value("format", "") != "bagopf-solution") {
    throw ParseError("not a bagopf solution document", std::string("$"));
  }
  if (solution.value("version", 0) != kSolutionVersion) {
    throw ParseError("unsupported solution version", std::string("$.version"));
  }
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(network.bus_count()));
  std::vector<char> seen(network.bus_count(), 0);
  const auto& buses = solution.at("buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const auto& b = buses[i];
    const std::string path = "$.buses[" + std::to_string(i) + "]";
    if (!b.contains("id") || !b.contains("vm") || !b.contains("va_deg")) {
      throw ParseError("bus entry needs id, vm and va_deg", path);
    }
    std::size_t k = 0;
    try {
      k = network.index_of(b.at("id").get<int>());
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), path);
    }
    v(static_cast<Eigen::Index>(k)) =
        std::polar(b.at("vm").get<double>(), b.at("va_deg").get<double>() / kDeg);
    seen[k] = 1;
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw ParseError("no voltage for bus " + std::to_string(network.buses[k].id),
                       std::string("$.buses"));
    }
  }
  return v;
}

void write_trace_csv(const NoaResult& result, std::ostream& out) {
  out << "iteration,objective,penalty,f_mu,locked,max_rank_gap,locked_max_gap,solve_seconds,"
         "solver_status,inexact,retried\n";
  const auto old = out.precision(17);
  for (const auto& t : result.trace) {
    out << t.iteration << ',' << t.objective << ',' << t.penalty << ',' << t.f_mu << ','
        << t.locked << ',' << t.max_rank_gap << ',' << t.locked_max_gap << ',' << t.solve_seconds << ','
        << status_name(t.solver_status) << ',' << (t.inexact ? 1 : 0) << ','
        << (t.retried ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace bagopf
