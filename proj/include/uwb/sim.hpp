#pragma once

#include "uwb/allocation.hpp"
#include "uwb/core.hpp"
#include "uwb/estimators.hpp"
#include "uwb/protocol.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <variant>

namespace uwb {

struct StaticTrajectory {
  Eigen::Vector2d at = Eigen::Vector2d::Zero();
};

/// Shuttles between the endpoints, pausing dwell seconds at each turn.
struct LineTrajectory {
  Eigen::Vector2d from = Eigen::Vector2d::Zero();
  Eigen::Vector2d to = Eigen::Vector2d::Zero();
  double speed = 1.0;  // m/s
  double dwell = 0.0;  // s
};

/// Cycles the corner list along the closed perimeter.
struct RectangleTrajectory {
  std::vector<Eigen::Vector2d> corners;
  double speed = 1.0;
  double dwell = 0.0;
};

/// Visits the points once in order, then holds at the last one.
struct WaypointTrajectory {
  std::vector<Eigen::Vector2d> points;
  double speed = 1.0;
  double dwell = 0.0;
};

using Trajectory =
    std::variant<StaticTrajectory, LineTrajectory, RectangleTrajectory, WaypointTrajectory>;

/// True position at time t; motion happens in the xy plane at height z.
Position trajectory_position(const Trajectory& trajectory, double z, double t);

/// Reference polyline of the trajectory (a single point for static nodes).
std::vector<Eigen::Vector2d> trajectory_path(const Trajectory& trajectory);

/// Distance from p to the nearest point of the reference polyline at height z.
double path_distance(const std::vector<Eigen::Vector2d>& path, double z, const Position& p);

enum class Mode : std::uint8_t { TofOnly, TdoaFixed, Dynamic };
const char* to_string(Mode mode);

enum class TrackingReference : std::uint8_t { Path, Setpoint };

struct NodeSpec {
  NodeId id = -1;
  double z = 0.0;
  Trajectory trajectory = StaticTrajectory{};
};

struct ClockRanges {
  std::array<double, 2> offset_range{0.0, 0.0};     // s
  std::array<double, 2> drift_range_ppm{0.0, 0.0};  // within +-kMaxAbsDriftPpm
};

struct Scenario {
  int version = 1;
  std::string name;
  Mode mode = Mode::Dynamic;
  Dimension dimension = Dimension::Planar;
  double duration = 60.0;  // s
  double timestep = 0.1;   // s, metrics emission cap (one sample set per step)
  std::uint64_t seed = 1;
  NodeId focus = -1;             // -1: first mobile node, else node 0
  double smoothing_alpha = 1.0;  // 1 = unfiltered
  TrackingReference tracking = TrackingReference::Path;
  std::vector<NodeSpec> nodes;
  AllocationConfig allocation;
  MediumModel medium;
  ClockRanges clocks;
  ProtocolTiming protocol;
  bool record_cost_reports = false;  // keep per-epoch CostReports in the result
};

/// Throws ConfigError on any inconsistent field.
void validate(const Scenario& scenario);

NodeId resolve_focus(const Scenario& scenario);

/// Active-node count actually used: the configured k, or the automatic choice
/// when k is zero.
int effective_active_count(const Scenario& scenario);

struct WorldState {
  double t = 0.0;
  std::vector<Position> positions;  // indexed by NodeId
};

WorldState make_world(const Scenario& scenario);
void step_world(WorldState& world, const Scenario& scenario, double dt);

struct MetricsRecord {
  double time = 0.0;
  NodeId node = -1;
  Mode mode = Mode::Dynamic;
  Role role = Role::Listener;
  bool in_hull = false;
  double raw_error = 0.0;       // m, latest estimate vs true position
  double tracking_error = 0.0;  // m, smoothed estimate vs reference
  Position estimate = Position::Zero();
  Position truth = Position::Zero();
};

void write_metrics_csv(std::span<const MetricsRecord> records, std::ostream& out);
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

struct NodeStats {
  std::int64_t estimate_updates = 0;
  std::int64_t tdoa_measurements = 0;
};

struct CycleInfo {
  std::int64_t epoch = 0;
  double t = 0.0;  // snapshot time the cycle's estimates refer to
  std::vector<Position> estimates;
  std::vector<bool> estimate_valid;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  std::vector<RoleAssignment> roles;  // one per epoch
  std::vector<CycleInfo> cycles;
  std::vector<CostReport> cost_reports;  // filled when record_cost_reports is set
  EventLog events;
  std::vector<NodeStats> node_stats;  // indexed by NodeId
  double init_end = 0.0;              // s, end of the all-to-all bootstrap
  double end_time = 0.0;
  std::int64_t completed_cycles = 0;
  std::int64_t failed_exchanges = 0;
  int role_changes = 0;
  bool collapsed = false;
  std::string collapse_reason;
};

/// Runs the full scenario: all-to-all bootstrap ranging and multilateration,
/// then per-cycle pairwise ranging among the active set, passive
/// range-difference capture by the listeners, position updates for both
/// groups, and (in dynamic mode) a role reallocation after every cycle.
RunResult run_scenario(const Scenario& scenario);

/// Exponential moving average with factor alpha in (0, 1]; alpha = 1 returns
/// the input. Steady-state variance shrinks by alpha / (2 - alpha).
template <class T>
std::vector<T> apply_smoothing(std::span<const T> series, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("smoothing factor must lie in (0, 1]");
  std::vector<T> out;
  out.reserve(series.size());
  if (series.empty()) return out;
  T state = series[0];
  out.push_back(state);
  for (std::size_t i = 1; i < series.size(); ++i) {
    state = alpha * series[i] + (1.0 - alpha) * state;
    out.push_back(state);
  }
  return out;
}

/// Box-plot statistics with linearly interpolated quartiles and 1.5 IQR
/// whiskers clamped to the most extreme samples inside the fences. A single
/// sample has quartiles equal to it and no whiskers.
struct BoxStats {
  std::size_t count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::optional<double> whisker_low;
  std::optional<double> whisker_high;
  std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);

enum class Segment : std::uint8_t { All, Switch, HullExit };
const char* to_string(Segment segment);

struct TimeWindows {
  std::vector<std::pair<double, double>> intervals;  // merged, ascending
  bool contains(double t) const;
};

/// Windows of +-half_width seconds around each role change of the focus node,
/// read from its metrics rows. Empty for a constant-role run.
TimeWindows switch_windows(std::span<const MetricsRecord> records, NodeId focus,
                           double half_width);

struct SegmentSummary {
  std::size_t count = 0;
  BoxStats raw_error;
  BoxStats tracking_error;
};

/// Statistics over the focus node's records in the chosen segment; empty when
/// the segment selects nothing. The switch segment needs the window set,
/// which may come from a different run of the same geometry.
std::optional<SegmentSummary> summarize(std::span<const MetricsRecord> records, NodeId focus,
                                        Segment segment, const TimeWindows* windows = nullptr);

}  // namespace uwb
