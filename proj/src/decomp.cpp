#include "bagopf/decomp.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "bagopf/error.hpp"

namespace bagopf {

std::optional<std::size_t> Bag::position(std::size_t bus) const {
  auto it = std::find(members.begin(), members.end(), bus);
  if (it == members.end()) return std::nullopt;
  return static_cast<std::size_t>(it - members.begin());
}

std::optional<EntryLoc> Decomposition::home(std::size_t k, std::size_t m) const {
  auto it = term_home.find(BusPair::of(k, m));
  if (it == term_home.end()) return std::nullopt;
  return it->second;
}

std::optional<EntryLoc> Decomposition::locate(std::size_t bag, std::size_t k,
                                              std::size_t m) const {
  if (bag >= bags.size()) return std::nullopt;
  auto pk = bags[bag].position(k);
  auto pm = bags[bag].position(m);
  if (!pk || !pm) return std::nullopt;
  return EntryLoc{bag, std::min(*pk, *pm), std::max(*pk, *pm)};
}

std::vector<std::size_t> degree_order(const AdmittanceModel& admittance,
                                      std::span<const int> bus_ids) {
  const auto& nb = admittance.neighborhoods;
  std::vector<std::size_t> order(nb.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t k) -> long long {
    return bus_ids.empty() ? static_cast<long long>(k) : bus_ids[k];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (nb[a].size() != nb[b].size()) return nb[a].size() > nb[b].size();
    return key(a) < key(b);
  });
  return order;
}

namespace {

void check_connected(const AdmittanceModel& admittance, std::span<const int> bus_ids) {
  const auto& nb = admittance.neighborhoods;
  const std::size_t n = nb.size();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int c = static_cast<int>(members.size());
    members.emplace_back();
    std::vector<std::size_t> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      members.back().push_back(k);
      for (std::size_t m : nb[k]) {
        if (comp[m] < 0) {
          comp[m] = c;
          stack.push_back(m);
        }
      }
    }
  }
  if (members.size() <= 1) return;
  std::ostringstream msg;
  msg << "network graph is disconnected (" << members.size() << " components):";
  for (auto& group : members) {
    std::sort(group.begin(), group.end());
    msg << " {";
    const std::size_t shown = std::min<std::size_t>(group.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) {
      if (i) msg << ",";
      msg << (bus_ids.empty() ? static_cast<long long>(group[i]) : bus_ids[group[i]]);
    }
    if (group.size() > shown) msg << ",... " << group.size() << " buses";
    msg << "}";
  }
  throw ValidationError(msg.str());
}

}  // namespace

Decomposition build_bags(const AdmittanceModel& admittance,
                         std::span<const std::size_t> ordering,
                         std::span<const int> bus_ids) {
  const auto& nb = admittance.neighborhoods;
  const std::size_t n = nb.size();
  if (ordering.size() != n) {
    throw ValidationError("ordering must be a permutation of all buses");
  }
  {
    std::vector<char> seen(n, 0);
    for (std::size_t k : ordering) {
      if (k >= n || seen[k]) throw ValidationError("ordering must be a permutation of all buses");
      seen[k] = 1;
    }
  }
  check_connected(admittance, bus_ids);

  std::set<BusPair> covered;
  std::vector<char> housed(n, 0);
  std::vector<Bag> bags;
  for (std::size_t center : ordering) {
    Bag bag;
    bag.center = center;
    bag.members.push_back(center);
    for (std::size_t m : nb[center]) {
      if (!covered.contains(BusPair::of(center, m))) bag.members.push_back(m);
    }
    if (bag.members.size() == 1 && housed[center]) continue;
    // Every pair inside the new bag is now jointly contained in it.
    for (std::size_t a = 0; a < bag.members.size(); ++a) {
      housed[bag.members[a]] = 1;
      for (std::size_t b = a + 1; b < bag.members.size(); ++b) {
        covered.insert(BusPair::of(bag.members[a], bag.members[b]));
      }
    }
    bag.index = bags.size();
    bags.push_back(std::move(bag));
  }
  return make_decomposition(std::move(bags), admittance);
}

Decomposition decompose(const Network& network, const AdmittanceModel& admittance) {
  std::vector<int> ids;
  ids.reserve(network.bus_count());
  for (const Bus& b : network.buses) ids.push_back(b.id);
  const auto order = degree_order(admittance, ids);
  return build_bags(admittance, order, ids);
}

Decomposition make_decomposition(std::vector<Bag> bags,
                                 const AdmittanceModel& admittance) {
  Decomposition d;
  d.bags = std::move(bags);
  // Every copy of every entry, in bag order.
  std::map<BusPair, std::vector<EntryLoc>> copies;
  for (std::size_t i = 0; i < d.bags.size(); ++i) {
    Bag& bag = d.bags[i];
    bag.index = i;
    const auto& mem = bag.members;
    for (std::size_t r = 0; r < mem.size(); ++r) {
      for (std::size_t c = r; c < mem.size(); ++c) {
        copies[BusPair::of(mem[r], mem[c])].push_back(EntryLoc{i, r, c});
      }
    }
  }
  const auto& nb = admittance.neighborhoods;
  for (const auto& [pair, locs] : copies) {
    const bool physical =
        pair.diagonal() ||
        std::binary_search(nb[pair.first].begin(), nb[pair.first].end(), pair.second);
    if (physical) d.term_home.emplace(pair, locs.front());
    for (std::size_t j = 1; j < locs.size(); ++j) {
      d.links.push_back(Link{pair, locs.front(), locs[j]});
    }
  }
  return d;
}

Decomposition undecomposed(const AdmittanceModel& admittance) {
  Bag bag;
  bag.members.resize(admittance.neighborhoods.size());
  std::iota(bag.members.begin(), bag.members.end(), std::size_t{0});
  std::vector<Bag> bags;
  if (!bag.members.empty()) bags.push_back(std::move(bag));
  return make_decomposition(std::move(bags), admittance);
}

namespace {

// Does `loc` hold the entry of `pair` inside its bag?
bool holds(const Decomposition& d, const EntryLoc& loc, const BusPair& pair) {
  if (loc.bag >= d.bags.size()) return false;
  const auto& mem = d.bags[loc.bag].members;
  if (loc.row > loc.col || loc.col >= mem.size()) return false;
  return BusPair::of(mem[loc.row], mem[loc.col]) == pair;
}

std::string describe(const EntryLoc& l) {
  return "bag " + std::to_string(l.bag) + " (" + std::to_string(l.row) + "," +
         std::to_string(l.col) + ")";
}

}  // namespace

CoverageReport coverage_check(const Decomposition& decomp,
                              const AdmittanceModel& admittance) {
  CoverageReport report;
  const auto& nb = admittance.neighborhoods;
  for (std::size_t k = 0; k < nb.size(); ++k) {
    const BusPair diag{k, k};
    auto it = decomp.term_home.find(diag);
    if (it == decomp.term_home.end() || !holds(decomp, it->second, diag)) {
      report.unhoused_diagonals.push_back(k);
    }
    for (std::size_t m : nb[k]) {
      if (m < k) continue;
      const BusPair pair{k, m};
      auto jt = decomp.term_home.find(pair);
      if (jt == decomp.term_home.end() || !holds(decomp, jt->second, pair)) {
        report.unhoused_lines.push_back(pair);
      }
    }
  }

  // Each link must join two copies of its own pair, and every copy beyond
  // the first must be reachable from the first.
  std::set<EntryLoc> linked;
  std::map<BusPair, EntryLoc> first_copy;
  for (std::size_t i = 0; i < decomp.bags.size(); ++i) {
    const auto& mem = decomp.bags[i].members;
    for (std::size_t r = 0; r < mem.size(); ++r) {
      for (std::size_t c = r; c < mem.size(); ++c) {
        first_copy.emplace(BusPair::of(mem[r], mem[c]), EntryLoc{i, r, c});
      }
    }
  }
  for (const Link& l : decomp.links) {
    if (!holds(decomp, l.home, l.pair) || !holds(decomp, l.duplicate, l.pair)) {
      report.link_errors.push_back("link " + describe(l.home) + " <-> " +
                                   describe(l.duplicate) +
                                   " does not join copies of the same bus pair");
      continue;
    }
    if (l.home != first_copy.at(l.pair)) {
      report.link_errors.push_back("link " + describe(l.home) + " <-> " +
                                   describe(l.duplicate) +
                                   " is not anchored at the first copy");
      continue;
    }
    linked.insert(l.duplicate);
  }
  for (std::size_t i = 0; i < decomp.bags.size(); ++i) {
    const auto& mem = decomp.bags[i].members;
    for (std::size_t r = 0; r < mem.size(); ++r) {
      for (std::size_t c = r; c < mem.size(); ++c) {
        const EntryLoc loc{i, r, c};
        const BusPair pair = BusPair::of(mem[r], mem[c]);
        if (first_copy.at(pair) != loc && !linked.contains(loc)) {
          report.link_errors.push_back("copy at " + describe(loc) + " of pair (" +
                                       std::to_string(pair.first) + "," +
                                       std::to_string(pair.second) + ") is unlinked");
        }
      }
    }
  }
  return report;
}

DecompStats stats(const Decomposition& decomp, std::size_t bus_count) {
  DecompStats s;
  s.bag_count = decomp.bags.size();
  for (const Bag& b : decomp.bags) {
    s.max_bag_size = std::max(s.max_bag_size, b.size());
    s.variable_count += b.size() * (b.size() + 1) / 2;
  }
  s.undecomposed_variable_count = bus_count * (bus_count + 1) / 2;
  return s;
}

}  // namespace bagopf
