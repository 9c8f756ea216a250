#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "bagopf/casedata.hpp"
#include "bagopf/decomp.hpp"
#include "bagopf/error.hpp"

using namespace bagopf;

namespace {

const std::string kTestData = BAGOPF_TEST_DATA_DIR;

// Network with unit buses 1..n and the given lines.
Network graph_network(std::size_t n, const std::vector<std::pair<int, int>>& lines) {
  std::vector<Bus> buses;
  for (std::size_t i = 0; i < n; ++i) {
    Bus b;
    b.id = static_cast<int>(i + 1);
    b.v_min = 0.9;
    b.v_max = 1.1;
    b.is_reference = i == 0;
    buses.push_back(b);
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

std::vector<int> member_ids(const Bag& b, const Network& net) {
  std::vector<int> out;
  for (std::size_t k : b.members) out.push_back(net.buses[k].id);
  return out;
}

// Random connected graph: random spanning tree plus extra chords.
std::vector<std::pair<int, int>> random_graph(std::mt19937& rng, std::size_t n) {
  std::set<std::pair<int, int>> edges;
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    const int a = static_cast<int>(pick(rng) + 1), b = static_cast<int>(i + 1);
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  std::uniform_int_distribution<std::size_t> any(1, n);
  const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, n)(rng);
  for (std::size_t e = 0; e < extra; ++e) {
    const int a = static_cast<int>(any(rng)), b = static_cast<int>(any(rng));
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  }
  return {edges.begin(), edges.end()};
}

// Duplicated copies of each diagonal are joined by links into one component.
bool links_connect_duplicates(const Decomposition& d) {
  std::map<BusPair, std::vector<EntryLoc>> copies;
  for (const Bag& b : d.bags)
    for (std::size_t r = 0; r < b.size(); ++r)
      for (std::size_t c = r; c < b.size(); ++c)
        copies[BusPair::of(b.members[r], b.members[c])].push_back(EntryLoc{b.index, r, c});
  for (const auto& [pair, locs] : copies) {
    if (locs.size() < 2) continue;
    std::map<EntryLoc, EntryLoc> parent;
    for (const auto& l : locs) parent[l] = l;
    auto find = [&](EntryLoc x) {
      while (!(parent[x] == x)) x = parent[x];
      return x;
    };
    for (const Link& l : d.links) {
      if (!(l.pair == pair)) continue;
      parent[find(l.duplicate)] = find(l.home);
    }
    const EntryLoc root = find(locs.front());
    for (const auto& l : locs)
      if (!(find(l) == root)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("degree ordering and tie breaks") {
  const Network wb5 = load_network(kTestData + "/wb5.m");
  const AdmittanceModel adm = build_admittance(wb5);
  std::vector<int> ids;
  for (const auto& b : wb5.buses) ids.push_back(b.id);
  const auto ord = degree_order(adm, ids);
  CHECK(wb5.buses[ord[0]].id == 2);
  CHECK(wb5.buses[ord[1]].id == 3);

  const Network ring = graph_network(5, {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 1}});
  const auto ro = degree_order(build_admittance(ring));
  CHECK(ro == std::vector<std::size_t>{0, 1, 2, 3, 4});

  const Network star = graph_network(5, {{4, 1}, {4, 2}, {4, 3}, {4, 5}});
  CHECK(degree_order(build_admittance(star)).front() == star.index_of(4));
}

TEST_CASE("five-bus network bags by hand") {
  const Network net = load_network(kTestData + "/wb5.m");
  const AdmittanceModel adm = build_admittance(net);
  const Decomposition d = decompose(net, adm);
  REQUIRE(d.bags.size() == 3);
  CHECK(member_ids(d.bags[0], net) == std::vector<int>{2, 1, 3, 4});
  CHECK(member_ids(d.bags[1], net) == std::vector<int>{3, 5});
  CHECK(member_ids(d.bags[2], net) == std::vector<int>{4, 5});
  CHECK(coverage_check(d, adm).empty());
  const DecompStats s = stats(d, net.bus_count());
  CHECK(s.bag_count == 3);
  CHECK(s.max_bag_size == 4);
  CHECK(s.variable_count == 10 + 3 + 3);
  CHECK(s.undecomposed_variable_count == 15);
  // Buses 3, 4 and 5 sit in two bags each.
  CHECK(d.links.size() == 3);
  CHECK(links_connect_duplicates(d));
}

TEST_CASE("two-bus network is one bag without links") {
  const Network net = graph_network(2, {{1, 2}});
  const AdmittanceModel adm = build_admittance(net);
  const Decomposition d = decompose(net, adm);
  REQUIRE(d.bags.size() == 1);
  CHECK(d.bags[0].size() == 2);
  CHECK(d.links.empty());
  CHECK(stats(d, 2).variable_count == 3);
}

TEST_CASE("disconnected network names its components") {
  const Network net = graph_network(4, {{1, 2}, {3, 4}});
  const AdmittanceModel adm = build_admittance(net);
  try {
    decompose(net, adm);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("1") != std::string::npos);
    CHECK(what.find("3") != std::string::npos);
  }
}

TEST_CASE("deleting a bag orphans exactly its homed pairs") {
  const Network net = load_network(kTestData + "/wb5.m");
  const AdmittanceModel adm = build_admittance(net);
  const Decomposition d = decompose(net, adm);
  Decomposition broken = d;
  broken.bags.erase(broken.bags.begin() + 1);  // the {3, 5} bag
  for (std::size_t i = 0; i < broken.bags.size(); ++i) broken.bags[i].index = i;
  broken = make_decomposition(broken.bags, adm);
  const CoverageReport rep = coverage_check(broken, adm);
  REQUIRE(rep.unhoused_lines.size() == 1);
  CHECK(rep.unhoused_lines[0] == BusPair::of(net.index_of(3), net.index_of(5)));
  CHECK(rep.unhoused_diagonals.empty());
}

TEST_CASE("random connected graphs decompose validly") {
  std::mt19937 rng(20240611);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 60)(rng);
    const auto lines = random_graph(rng, n);
    const Network net = graph_network(n, lines);
    const AdmittanceModel adm = build_admittance(net);
    const Decomposition d = decompose(net, adm);
    CAPTURE(trial);
    CAPTURE(n);
    CHECK(coverage_check(d, adm).empty());
    // Each line is homed exactly once, in a bag that holds both ends.
    for (auto [a, b] : lines) {
      const auto pair = BusPair::of(net.index_of(a), net.index_of(b));
      REQUIRE(d.term_home.count(pair) == 1);
      const EntryLoc loc = d.term_home.at(pair);
      const Bag& bag = d.bags[loc.bag];
      CHECK(BusPair::of(bag.members[loc.row], bag.members[loc.col]) == pair);
    }
    for (std::size_t k = 0; k < n; ++k) CHECK(d.term_home.count(BusPair::of(k, k)) == 1);
    CHECK(links_connect_duplicates(d));
    // No stale pairs: a non-center member of bag l was not already jointly
    // held with the center by an earlier bag.
    for (std::size_t l = 0; l < d.bags.size(); ++l) {
      const Bag& bag = d.bags[l];
      for (std::size_t i = 1; i < bag.size(); ++i) {
        for (std::size_t e = 0; e < l; ++e) {
          const Bag& prev = d.bags[e];
          CHECK_FALSE((prev.position(bag.center) && prev.position(bag.members[i])));
        }
      }
      // Non-center members are adjacent to the center.
      for (std::size_t i = 1; i < bag.size(); ++i) {
        const auto& nb = adm.neighborhoods[bag.center];
        CHECK(std::binary_search(nb.begin(), nb.end(), bag.members[i]));
      }
    }
    const DecompStats s = stats(d, n);
    std::size_t sum = 0;
    for (const Bag& b : d.bags) sum += b.size() * (b.size() + 1) / 2;
    CHECK(s.variable_count == sum);
  }
}

TEST_CASE("undecomposed lifting is one bag") {
  const Network net = load_network(kTestData + "/wb5.m");
  const AdmittanceModel adm = build_admittance(net);
  const Decomposition u = undecomposed(adm);
  REQUIRE(u.bags.size() == 1);
  CHECK(u.bags[0].size() == 5);
  CHECK(u.links.empty());
  CHECK(coverage_check(u, adm).empty());
}

TEST_CASE("bags use fewer variables than the full lifting on real cases") {
  const std::string data = BAGOPF_DATA_DIR;
  for (const char* name : {"case9", "case14", "case30", "case57", "case118", "case2383wp"}) {
    const Network net = load_network(data + "/" + name + ".m");
    const AdmittanceModel adm = build_admittance(net);
    const DecompStats s = stats(decompose(net, adm), net.buses.size());
    CAPTURE(name);
    CHECK(s.variable_count < s.undecomposed_variable_count);
  }
}
