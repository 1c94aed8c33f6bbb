#pragma once

#include "uwb/core.hpp"

#include <cstdint>
#include <iosfwd>

namespace uwb {

struct AllocationConfig {
  int k = 4;                                    // active-node count; 0 selects automatically
  double min_frequency = 5.0;                   // Hz, lowest acceptable cycle rate
  double pair_rate = 60.0;                      // pairwise exchanges per second
  double hysteresis_margin = 0.0;               // fractional improvement required to switch
  std::uint64_t enumeration_budget = 1'000'000; // subset evaluations per allocation
};

/// Cost trace of one allocation: every evaluated subset with its cost, plus
/// the chosen active set.
struct CostReport {
  struct Entry {
    std::vector<NodeId> subset;
    double cost = 0.0;
  };
  std::vector<Entry> evaluated;
  std::vector<NodeId> chosen;
  std::uint64_t evaluated_count = 0;
  bool skipped = false;  // enumeration budget exceeded, previous set retained
};

void write_json(const CostReport& report, std::ostream& out);

/// Largest k with pair_rate / C(k, 2) >= min_frequency, bounded by the node
/// count. Throws when even the dimension minimum cannot meet the rate.
int choose_active_count(double min_frequency, double pair_rate, int node_count, Dimension dim);

/// Listener placement cost of an active set: for every 3-subset of the active
/// nodes, the squared distance from that triangle's centroid to each
/// non-active node, summed. Low cost means the passive nodes sit deep inside
/// the envelope the active nodes span.
double tdoa_cost(std::span<const NodeId> active, std::span<const Position> positions);

struct AllocationResult {
  RoleAssignment assignment;
  CostReport report;
};

/// Exhaustive minimization of tdoa_cost over all k-subsets, enumerated in
/// lexicographic order so cost ties resolve to the lexicographically smallest
/// subset. With a previous assignment and a positive hysteresis margin, the
/// previous set is kept unless the best candidate beats its current cost by
/// the margin fraction.
AllocationResult allocate_roles(std::span<const Position> positions, const AllocationConfig& config,
                                const RoleAssignment* previous = nullptr);

/// Role history of one node: (epoch, role) per assignment.
std::vector<std::pair<std::int64_t, Role>> reallocation_trace(
    std::span<const RoleAssignment> assignments, NodeId focus);

}  // namespace uwb
