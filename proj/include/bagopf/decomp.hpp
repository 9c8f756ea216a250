#pragma once

// Bag decomposition of the lifted voltage-product matrix. Buses are visited
// by decreasing degree; each visited bus opens a bag with the neighbours
// whose cross term no earlier bag already holds.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bagopf/casedata.hpp"

namespace bagopf {

/// Unordered pair of dense bus indices, stored with first <= second.
struct BusPair {
  std::size_t first = 0;
  std::size_t second = 0;

  static BusPair of(std::size_t a, std::size_t b) {
    return a <= b ? BusPair{a, b} : BusPair{b, a};
  }
  bool diagonal() const { return first == second; }
  auto operator<=>(const BusPair&) const = default;
};

struct Bag {
  std::size_t index = 0;
  std::size_t center = 0;
  /// Dense bus indices; the center comes first, neighbours ascending.
  std::vector<std::size_t> members;

  std::size_t size() const { return members.size(); }
  /// Position of a bus inside the bag, if it is a member.
  std::optional<std::size_t> position(std::size_t bus) const;
};

/// Upper-triangle location of one scalar inside a bag (row <= col).
struct EntryLoc {
  std::size_t bag = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const EntryLoc&) const = default;
};

/// Equality between two copies of the same lifted entry.
struct Link {
  BusPair pair;
  EntryLoc home;
  EntryLoc duplicate;
};

struct Decomposition {
  std::vector<Bag> bags;
  /// Home of every line pair and every diagonal entry.
  std::map<BusPair, EntryLoc> term_home;
  /// One link per extra copy of any entry held by more than one bag.
  std::vector<Link> links;

  std::optional<EntryLoc> home(std::size_t k, std::size_t m) const;
  /// Location of the pair inside a given bag, if both buses are members.
  std::optional<EntryLoc> locate(std::size_t bag, std::size_t k, std::size_t m) const;
};

struct DecompStats {
  std::size_t bag_count = 0;
  std::size_t max_bag_size = 0;
  /// Complex scalars sum N_i (N_i + 1) / 2.
  std::size_t variable_count = 0;
  /// n (n + 1) / 2 for the single-matrix lifting.
  std::size_t undecomposed_variable_count = 0;
};

/// Bus indices sorted by neighbourhood size, descending; ties by ascending
/// bus id (by index when `bus_ids` is empty).
std::vector<std::size_t> degree_order(const AdmittanceModel& admittance,
                                      std::span<const int> bus_ids = {});

/// Runs the exclusion rule over `ordering` and derives homes and links.
/// Throws ValidationError when the network graph is disconnected.
Decomposition build_bags(const AdmittanceModel& admittance,
                         std::span<const std::size_t> ordering,
                         std::span<const int> bus_ids = {});

/// degree_order followed by build_bags.
Decomposition decompose(const Network& network, const AdmittanceModel& admittance);

/// Homes and links for an arbitrary bag list (first covering bag wins).
Decomposition make_decomposition(std::vector<Bag> bags,
                                 const AdmittanceModel& admittance);

/// One bag holding every bus: the undecomposed lifting.
Decomposition undecomposed(const AdmittanceModel& admittance);

struct CoverageReport {
  std::vector<BusPair> unhoused_lines;
  std::vector<std::size_t> unhoused_diagonals;
  std::vector<std::string> link_errors;

  bool empty() const {
    return unhoused_lines.empty() && unhoused_diagonals.empty() && link_errors.empty();
  }
};

CoverageReport coverage_check(const Decomposition& decomp,
                              const AdmittanceModel& admittance);

DecompStats stats(const Decomposition& decomp, std::size_t bus_count);

}  // namespace bagopf
