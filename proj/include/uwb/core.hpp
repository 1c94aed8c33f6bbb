#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwb {

using NodeId = std::int32_t;
using Position = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kHullEpsilon = 1e-9;          // m
inline constexpr double kMaxAbsDriftPpm = 100.0;

/// Thrown for invalid configuration (scenario fields, allocator setup, CLI input).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Role : std::uint8_t { Active, Listener };

const char* to_string(Role role);

enum class Dimension : std::uint8_t { Planar, Spatial };

/// Minimum active-node count for a well-posed position solve.
inline int min_active_count(Dimension dim) { return dim == Dimension::Planar ? 3 : 4; }

/// Affine local clock: local_time(t) = t * (1 + drift_ppm * 1e-6) + offset.
/// Strictly increasing for |drift_ppm| <= kMaxAbsDriftPpm.
struct ClockModel {
  double offset = 0.0;     // s
  double drift_ppm = 0.0;  // dimensionless, parts per million

  double local_time(double t) const { return t * (1.0 + drift_ppm * 1e-6) + offset; }

  /// Duration between two captures on this clock separated by dt of simulation
  /// time. The offset cancels in any same-clock difference; only drift rescales.
  double local_duration(double dt) const { return dt * (1.0 + drift_ppm * 1e-6); }
};

/// Partition of the node set into k active nodes and n-k passive listeners.
struct RoleAssignment {
  std::vector<NodeId> active;     // sorted ascending, size k
  std::vector<NodeId> listeners;  // sorted ascending, size n-k
  std::int64_t epoch = 0;
};

/// True iff active and listeners are sorted, disjoint, and together cover [0, n).
bool is_partition(const RoleAssignment& assignment, int node_count);

Role role_of(const RoleAssignment& assignment, NodeId id);

struct TofMeasurement {
  NodeId a = -1;
  NodeId b = -1;
  double distance = 0.0;   // m
  double timestamp = 0.0;  // s, simulation time
  bool clamped = false;    // negative time-of-flight clamped to zero
};

/// Range difference d(listener, responder) - d(listener, initiator) observed by
/// a passive listener for one active pair.
struct TdoaMeasurement {
  NodeId listener = -1;
  NodeId initiator = -1;
  NodeId responder = -1;
  double range_difference = 0.0;  // m, signed
  double timestamp = 0.0;         // s
};

/// Euclidean distance between two point expressions.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar distance(const Eigen::MatrixBase<DerivedA>& a,
                                   const Eigen::MatrixBase<DerivedB>& b) {
  return (a.derived() - b.derived()).norm();
}

struct HullQuery {
  bool inside = false;
  bool degenerate = false;  // collinear (planar) or coplanar (spatial) anchors
};

/// Membership of p in the convex envelope of the anchors, within eps.
/// Planar mode tests the xy projection.
HullQuery hull_contains(std::span<const Position> anchors, const Position& p,
                        Dimension dim = Dimension::Planar, double eps = kHullEpsilon);

/// Convenience wrapper: inside and not degenerate.
inline bool convex_envelope_contains(std::span<const Position> anchors, const Position& p,
                                     Dimension dim = Dimension::Planar,
                                     double eps = kHullEpsilon) {
  const HullQuery q = hull_contains(anchors, p, dim, eps);
  return q.inside && !q.degenerate;
}

}  // namespace uwb
