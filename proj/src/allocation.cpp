#include "uwb/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace uwb {

void write_json(const CostReport& report, std::ostream& out) {
  char buf[64];
  out << "{\"evaluated\":[";
  for (std::size_t i = 0; i < report.evaluated.size(); ++i) {
    const auto& e = report.evaluated[i];
    out << (i ? ",{" : "{") << "\"subset\":[";
    for (std::size_t j = 0; j < e.subset.size(); ++j) {
      out << (j ? "," : "") << e.subset[j];
    }
    std::snprintf(buf, sizeof(buf), "%.9g", e.cost);
    out << "],\"cost\":" << buf << "}";
  }
  out << "],\"chosen\":[";
  for (std::size_t j = 0; j < report.chosen.size(); ++j) {
    out << (j ? "," : "") << report.chosen[j];
  }
  out << "],\"evaluated_count\":" << report.evaluated_count
      << ",\"skipped\":" << (report.skipped ? "true" : "false") << "}";
}

int choose_active_count(double min_frequency, double pair_rate, int node_count, Dimension dim) {
  if (min_frequency <= 0.0) throw ConfigError("minimum cycle frequency must be positive");
  if (pair_rate <= 0.0) throw ConfigError("pair rate must be positive");
  const int floor_k = min_active_count(dim);
  if (node_count < floor_k) throw ConfigError("too few nodes for the solve dimension");
  int best = -1;
  for (int k = 2; k <= node_count; ++k) {
    const double pairs = k * (k - 1) / 2;
    if (pair_rate / pairs >= min_frequency) best = k;
  }
  if (best < floor_k) {
    throw ConfigError("pair rate cannot sustain the minimum cycle frequency at a usable k");
  }
  return best;
}

double tdoa_cost(std::span<const NodeId> active, std::span<const Position> positions) {
  const int k = static_cast<int>(active.size());
  std::vector<bool> is_active(positions.size(), false);
  for (NodeId id : active) is_active[id] = true;

  double cost = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      for (int m = j + 1; m < k; ++m) {
        const Position centroid =
            (positions[active[i]] + positions[active[j]] + positions[active[m]]) / 3.0;
        for (std::size_t l = 0; l < positions.size(); ++l) {
          if (is_active[l]) continue;
          cost += (centroid - positions[l]).squaredNorm();
        }
      }
    }
  }
  return cost;
}

namespace {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > (std::uint64_t{1} << 62)) return std::uint64_t(-1);
  }
  return result;
}

}  // namespace

AllocationResult allocate_roles(std::span<const Position> positions, const AllocationConfig& config,
                                const RoleAssignment* previous) {
  const int n = static_cast<int>(positions.size());
  const int k = config.k;
  if (k < 3 || k > n) throw ConfigError("active count must satisfy 3 <= k <= n");

  AllocationResult out;
  auto complement = [&](const std::vector<NodeId>& active) {
    std::vector<NodeId> listeners;
    listeners.reserve(n - k);
    std::vector<bool> used(n, false);
    for (NodeId id : active) used[id] = true;
    for (NodeId id = 0; id < n; ++id) {
      if (!used[id]) listeners.push_back(id);
    }
    return listeners;
  };

  if (binomial(n, k) > config.enumeration_budget) {
    if (previous == nullptr || !is_partition(*previous, n)) {
      throw ConfigError("enumeration budget exceeded with no previous assignment to keep");
    }
    out.assignment = *previous;
    out.assignment.epoch = previous->epoch + 1;
    out.report.skipped = true;
    out.report.chosen = out.assignment.active;
    return out;
  }

  std::vector<NodeId> subset(k);
  for (int i = 0; i < k; ++i) subset[i] = i;
  std::vector<NodeId> best_subset;
  double best_cost = 0.0;

  while (true) {
    const double cost = tdoa_cost(subset, positions);
    out.report.evaluated.push_back({subset, cost});
    ++out.report.evaluated_count;
    if (best_subset.empty() || cost < best_cost) {
      best_subset = subset;
      best_cost = cost;
    }
    // Next k-combination in lexicographic order.
    int i = k - 1;
    while (i >= 0 && subset[i] == n - k + i) --i;
    if (i < 0) break;
    ++subset[i];
    for (int j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
  }

  if (previous != nullptr && config.hysteresis_margin > 0.0 && is_partition(*previous, n) &&
      static_cast<int>(previous->active.size()) == k) {
    const double previous_cost = tdoa_cost(previous->active, positions);
    if (best_cost >= (1.0 - config.hysteresis_margin) * previous_cost) {
      best_subset = previous->active;
    }
  }

  out.assignment.active = best_subset;
  out.assignment.listeners = complement(best_subset);
  out.assignment.epoch = previous != nullptr ? previous->epoch + 1 : 0;
  out.report.chosen = best_subset;
  return out;
}

std::vector<std::pair<std::int64_t, Role>> reallocation_trace(
    std::span<const RoleAssignment> assignments, NodeId focus) {
  if (assignments.empty()) throw ConfigError("reallocation trace needs at least one assignment");
  std::vector<std::pair<std::int64_t, Role>> trace;
  trace.reserve(assignments.size());
  for (const auto& a : assignments) {
    trace.emplace_back(a.epoch, role_of(a, focus));
  }
  return trace;
}

}  // namespace uwb
