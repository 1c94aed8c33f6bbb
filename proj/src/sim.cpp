#include "uwb/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace uwb {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::TofOnly: return "tof_only";
    case Mode::TdoaFixed: return "tdoa_fixed";
    case Mode::Dynamic: return "dynamic";
  }
  return "?";
}

const char* to_string(Segment segment) {
  switch (segment) {
    case Segment::All: return "all";
    case Segment::Switch: return "switch";
    case Segment::HullExit: return "hull_exit";
  }
  return "?";
}

namespace {

struct Leg {
  Eigen::Vector2d from, to;
  double travel = 0.0;  // s
  double dwell = 0.0;   // s
};

// Shared sampling for every moving trajectory kind: an ordered list of legs,
// each followed by a pause, walked once or cyclically.
Eigen::Vector2d walk_legs(const std::vector<Leg>& legs, bool cyclic, double t) {
  double total = 0.0;
  for (const Leg& l : legs) total += l.travel + l.dwell;
  if (total <= 0.0) return legs.front().from;
  if (cyclic) {
    t = std::fmod(t, total);
  } else if (t >= total) {
    return legs.back().to;
  }
  for (const Leg& l : legs) {
    if (t < l.travel) {
      const double s = l.travel > 0.0 ? t / l.travel : 1.0;
      return l.from + s * (l.to - l.from);
    }
    t -= l.travel;
    if (t < l.dwell) return l.to;
    t -= l.dwell;
  }
  return legs.back().to;
}

std::vector<Leg> line_legs(const LineTrajectory& line) {
  const double travel = (line.to - line.from).norm() / line.speed;
  return {{line.from, line.to, travel, line.dwell}, {line.to, line.from, travel, line.dwell}};
}

std::vector<Leg> polygon_legs(const std::vector<Eigen::Vector2d>& pts, double speed, double dwell,
                              bool close) {
  std::vector<Leg> legs;
  const std::size_t count = close ? pts.size() : pts.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::Vector2d& a = pts[i];
    const Eigen::Vector2d& b = pts[(i + 1) % pts.size()];
    legs.push_back({a, b, (b - a).norm() / speed, dwell});
  }
  return legs;
}

}  // namespace

Position trajectory_position(const Trajectory& trajectory, double z, double t) {
  Eigen::Vector2d xy = std::visit(
      [&](const auto& traj) -> Eigen::Vector2d {
        using T = std::decay_t<decltype(traj)>;
        if constexpr (std::is_same_v<T, StaticTrajectory>) {
          return traj.at;
        } else if constexpr (std::is_same_v<T, LineTrajectory>) {
          return walk_legs(line_legs(traj), true, t);
        } else if constexpr (std::is_same_v<T, RectangleTrajectory>) {
          return walk_legs(polygon_legs(traj.corners, traj.speed, traj.dwell, true), true, t);
        } else {
          if (traj.points.size() < 2) return traj.points.front();
          return walk_legs(polygon_legs(traj.points, traj.speed, traj.dwell, false), false, t);
        }
      },
      trajectory);
  return {xy.x(), xy.y(), z};
}

std::vector<Eigen::Vector2d> trajectory_path(const Trajectory& trajectory) {
  return std::visit(
      [](const auto& traj) -> std::vector<Eigen::Vector2d> {
        using T = std::decay_t<decltype(traj)>;
        if constexpr (std::is_same_v<T, StaticTrajectory>) {
          return {traj.at};
        } else if constexpr (std::is_same_v<T, LineTrajectory>) {
          return {traj.from, traj.to};
        } else if constexpr (std::is_same_v<T, RectangleTrajectory>) {
          auto pts = traj.corners;
          pts.push_back(traj.corners.front());  // closed perimeter
          return pts;
        } else {
          return traj.points;
        }
      },
      trajectory);
}

double path_distance(const std::vector<Eigen::Vector2d>& path, double z, const Position& p) {
  const Eigen::Vector2d q(p.x(), p.y());
  double best = std::numeric_limits<double>::infinity();
  if (path.size() == 1) {
    best = (q - path[0]).norm();
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Eigen::Vector2d& a = path[i];
    const Eigen::Vector2d d = path[i + 1] - a;
    const double len2 = d.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((q - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (q - (a + s * d)).norm());
  }
  return std::hypot(best, p.z() - z);
}

void validate(const Scenario& sc) {
  if (sc.version != 1) throw ConfigError("unsupported scenario version");
  if (sc.duration <= 0.0) throw ConfigError("duration must be positive");
  if (sc.timestep <= 0.0) throw ConfigError("timestep must be positive");
  if (!(sc.smoothing_alpha > 0.0 && sc.smoothing_alpha <= 1.0)) {
    throw ConfigError("smoothing_alpha must lie in (0, 1]");
  }
  const int n = static_cast<int>(sc.nodes.size());
  if (n < min_active_count(sc.dimension)) throw ConfigError("too few nodes");
  for (int i = 0; i < n; ++i) {
    if (sc.nodes[i].id != i) throw ConfigError("node ids must be 0..n-1 in order");
    std::visit(
        [](const auto& traj) {
          using T = std::decay_t<decltype(traj)>;
          if constexpr (std::is_same_v<T, LineTrajectory>) {
            if (traj.speed <= 0.0) throw ConfigError("trajectory speed must be positive");
            if ((traj.to - traj.from).norm() <= 0.0) throw ConfigError("line endpoints coincide");
            if (traj.dwell < 0.0) throw ConfigError("dwell must be non-negative");
          } else if constexpr (std::is_same_v<T, RectangleTrajectory>) {
            if (traj.speed <= 0.0) throw ConfigError("trajectory speed must be positive");
            if (traj.corners.size() < 2) throw ConfigError("perimeter needs at least two corners");
            if (traj.dwell < 0.0) throw ConfigError("dwell must be non-negative");
          } else if constexpr (std::is_same_v<T, WaypointTrajectory>) {
            if (traj.points.empty()) throw ConfigError("waypoint list is empty");
            if (traj.points.size() > 1 && traj.speed <= 0.0) {
              throw ConfigError("trajectory speed must be positive");
            }
            if (traj.dwell < 0.0) throw ConfigError("dwell must be non-negative");
          }
        },
        sc.nodes[i].trajectory);
  }
  if (sc.focus < -1 || sc.focus >= n) throw ConfigError("focus node out of range");

  const auto& a = sc.allocation;
  if (a.pair_rate <= 0.0) throw ConfigError("pair_rate must be positive");
  if (a.min_frequency <= 0.0) throw ConfigError("min_frequency must be positive");
  if (a.hysteresis_margin < 0.0 || a.hysteresis_margin >= 1.0) {
    throw ConfigError("hysteresis_margin must lie in [0, 1)");
  }
  if (a.enumeration_budget == 0) throw ConfigError("enumeration_budget must be positive");
  const int k = effective_active_count(sc);
  if (k < min_active_count(sc.dimension) || k > n) {
    throw ConfigError("active count must lie between the dimension minimum and n");
  }
  if (cycle_frequency(k, a.pair_rate) < a.min_frequency) {
    throw ConfigError("pair rate cannot sustain min_frequency at the configured k");
  }
  if (sc.mode == Mode::TofOnly && k != n) {
    throw ConfigError("tof_only requires every node active (k = n)");
  }

  if (sc.medium.propagation_speed <= 0.0) throw ConfigError("propagation speed must be positive");
  if (sc.medium.ranging_noise_sigma < 0.0) throw ConfigError("noise sigma must be non-negative");
  if (sc.medium.loss_probability < 0.0 || sc.medium.loss_probability >= 1.0) {
    throw ConfigError("loss probability must lie in [0, 1)");
  }
  for (const auto& range : {sc.clocks.offset_range, sc.clocks.drift_range_ppm}) {
    if (range[0] > range[1]) throw ConfigError("clock range bounds out of order");
  }
  if (std::max(std::abs(sc.clocks.drift_range_ppm[0]), std::abs(sc.clocks.drift_range_ppm[1])) >
      kMaxAbsDriftPpm) {
    throw ConfigError("clock drift beyond the supported bound");
  }
  if (sc.protocol.response_turnaround < 0.0) throw ConfigError("turnaround must be non-negative");
  if (sc.protocol.ack_timeout <= 0.0) throw ConfigError("ack timeout must be positive");
  if (sc.protocol.max_retries < 0) throw ConfigError("max_retries must be non-negative");
  if (sc.protocol.role_change_slots < 0) throw ConfigError("role_change_slots must be non-negative");
}

NodeId resolve_focus(const Scenario& sc) {
  if (sc.focus >= 0) return sc.focus;
  for (const auto& node : sc.nodes) {
    if (!std::holds_alternative<StaticTrajectory>(node.trajectory)) return node.id;
  }
  return 0;
}

int effective_active_count(const Scenario& sc) {
  if (sc.allocation.k != 0) return sc.allocation.k;
  return choose_active_count(sc.allocation.min_frequency, sc.allocation.pair_rate,
                             static_cast<int>(sc.nodes.size()), sc.dimension);
}

WorldState make_world(const Scenario& sc) {
  WorldState world;
  world.positions.resize(sc.nodes.size());
  step_world(world, sc, 0.0);
  return world;
}

void step_world(WorldState& world, const Scenario& sc, double dt) {
  world.t += dt;
  for (std::size_t i = 0; i < sc.nodes.size(); ++i) {
    world.positions[i] = trajectory_position(sc.nodes[i].trajectory, sc.nodes[i].z, world.t);
  }
}

void write_metrics_csv(std::span<const MetricsRecord> records, std::ostream& out) {
  out << "time,node,mode,role,in_hull,raw_error,tracking_error,"
         "est_x,est_y,est_z,true_x,true_y,true_z\n";
  char line[320];
  for (const MetricsRecord& r : records) {
    std::snprintf(line, sizeof(line),
                  "%.6f,%d,%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.time, r.node,
                  to_string(r.mode), to_string(r.role), r.in_hull ? 1 : 0, r.raw_error,
                  r.tracking_error, r.estimate.x(), r.estimate.y(), r.estimate.z(), r.truth.x(),
                  r.truth.y(), r.truth.z());
    out << line;
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::vector<MetricsRecord> records;
  std::string line;
  if (!std::getline(in, line)) return records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 13) throw ConfigError("malformed metrics row: " + line);
    MetricsRecord r;
    r.time = std::stod(fields[0]);
    r.node = std::stoi(fields[1]);
    if (fields[2] == "tof_only") r.mode = Mode::TofOnly;
    else if (fields[2] == "tdoa_fixed") r.mode = Mode::TdoaFixed;
    else if (fields[2] == "dynamic") r.mode = Mode::Dynamic;
    else throw ConfigError("unknown mode in metrics row: " + fields[2]);
    if (fields[3] == "active") r.role = Role::Active;
    else if (fields[3] == "listener") r.role = Role::Listener;
    else throw ConfigError("unknown role in metrics row: " + fields[3]);
    r.in_hull = fields[4] == "1";
    r.raw_error = std::stod(fields[5]);
    r.tracking_error = std::stod(fields[6]);
    r.estimate = {std::stod(fields[7]), std::stod(fields[8]), std::stod(fields[9])};
    r.truth = {std::stod(fields[10]), std::stod(fields[11]), std::stod(fields[12])};
    records.push_back(r);
  }
  return records;
}

namespace {

struct EstimateStore {
  std::vector<Position> position;
  std::vector<Position> smoothed;
  std::vector<bool> valid;
};

FrameConvention frame_of(const std::vector<NodeId>& active_sorted) {
  return {active_sorted[0], active_sorted[1], active_sorted[2]};
}

NodeId spatial_sign_node_of(const std::vector<NodeId>& active_sorted, const FrameConvention& f) {
  for (NodeId id : active_sorted) {
    if (id != f.origin && id != f.axis && id != f.plane) return id;
  }
  return -1;
}

}  // namespace

RunResult run_scenario(const Scenario& sc) {
  validate(sc);
  const int n = static_cast<int>(sc.nodes.size());
  const int k = effective_active_count(sc);
  const bool planar = sc.dimension == Dimension::Planar;
  const double slot = 1.0 / sc.allocation.pair_rate;
  const int legs_per_pair = sc.protocol.double_sided ? 2 : 1;
  const bool noiseless = sc.medium.ranging_noise_sigma == 0.0 &&
                         sc.clocks.drift_range_ppm[0] == 0.0 &&
                         sc.clocks.drift_range_ppm[1] == 0.0;

  RunResult out;
  out.node_stats.resize(n);

  std::mt19937_64 seeder(sc.seed);
  std::vector<ClockModel> clocks(n);
  for (int i = 0; i < n; ++i) {
    std::uniform_real_distribution<double> offset(sc.clocks.offset_range[0],
                                                  sc.clocks.offset_range[1]);
    std::uniform_real_distribution<double> drift(sc.clocks.drift_range_ppm[0],
                                                 sc.clocks.drift_range_ppm[1]);
    clocks[i].offset = offset(seeder);
    clocks[i].drift_ppm = drift(seeder);
  }
  std::mt19937_64 proto_rng(seeder());

  std::map<NodeId, double> fixed_z;
  std::vector<std::vector<Eigen::Vector2d>> paths(n);
  for (int i = 0; i < n; ++i) {
    fixed_z[i] = sc.nodes[i].z;
    paths[i] = trajectory_path(sc.nodes[i].trajectory);
  }

  WorldState world = make_world(sc);
  auto world_at = [&](double t) { step_world(world, sc, t - world.t); };

  EstimateStore store;
  store.position.assign(n, Position::Zero());
  store.smoothed.assign(n, Position::Zero());
  store.valid.assign(n, false);

  AllocationConfig alloc_cfg = sc.allocation;
  alloc_cfg.k = k;

  MultilaterationOptions ml_opts;
  ml_opts.dimension = sc.dimension;
  ml_opts.fixed_z = fixed_z;

  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), 0);

  // Aligns one cycle's gauge-frame solve onto world coordinates through the
  // true poses of the frame nodes at the snapshot instant.
  auto align_to_world = [&](const MultilaterationResult& ml, const FrameConvention& frame,
                            NodeId sign_node) {
    GaugeTransform transform = GaugeTransform::from_reference(
        world.positions[frame.origin], world.positions[frame.axis], world.positions[frame.plane],
        sc.dimension);
    if (!planar && sign_node >= 0 && ml.estimates.count(sign_node)) {
      transform.resolve_mirror(ml.estimates.at(sign_node).position, world.positions[sign_node]);
    }
    for (const auto& [id, estimate] : ml.estimates) {
      store.position[id] = transform.to_reference(estimate.position);
      store.valid[id] = true;
      ++out.node_stats[id].estimate_updates;
    }
  };

  // Bootstrap: every node ranges with every node, one multilateration fixes
  // the initial positions. A failed solve restarts the bootstrap round.
  double t = 0.0;
  const FrameConvention boot_frame{0, 1, 2};
  bool booted = false;
  for (int attempt = 0; attempt < 3 && !booted; ++attempt) {
    world_at(t);
    ScheduleState schedule = make_schedule(all);
    std::vector<TofMeasurement> tofs;
    const std::size_t slots = schedule.pair_sequence.size();
    for (std::size_t s = 0; s < slots; ++s) {
      const auto [a, b] = current_pair(schedule);
      ExchangeContext ctx;
      ctx.positions = world.positions;
      ctx.clocks = clocks;
      ctx.medium = sc.medium;
      ctx.timing = sc.protocol;
      ctx.ack_sender = next_initiator(schedule);
      ctx.slot_time = t;
      ctx.rng = &proto_rng;
      ctx.log = &out.events;
      ExchangeResult res = run_twr_exchange(a, b, ctx);
      if (res.tof) tofs.push_back(*res.tof);
      advance_schedule(schedule, res.failed);
      t += slot;
    }
    out.failed_exchanges += schedule.failed_exchanges;
    const MultilaterationResult ml = multilateration(tofs, boot_frame, ml_opts);
    if (ml.ok && !ml.degenerate) {
      align_to_world(ml, boot_frame, spatial_sign_node_of(all, boot_frame));
      booted = true;
    }
  }
  if (!booted) {
    out.collapsed = true;
    out.collapse_reason = "bootstrap multilateration failed";
    out.end_time = t;
    return out;
  }
  out.init_end = t;
  store.smoothed = store.position;

  RoleAssignment current;
  if (sc.mode == Mode::TofOnly) {
    current.active = all;
    current.epoch = 0;
  } else {
    AllocationResult ar = allocate_roles(store.position, alloc_cfg, nullptr);
    current = std::move(ar.assignment);
    if (sc.record_cost_reports) out.cost_reports.push_back(std::move(ar.report));
  }
  out.roles.push_back(current);

  const int slots_per_cycle = k * (k - 1) / 2 * legs_per_pair;
  double last_emit = -std::numeric_limits<double>::infinity();
  int fail_streak = 0;

  while (t + slots_per_cycle * slot <= sc.duration + 1e-9 && !out.collapsed) {
    const double t_snapshot = t;
    world_at(t_snapshot);

    ScheduleState schedule = make_schedule(current.active);
    std::vector<TofMeasurement> tofs;
    std::vector<std::vector<TdoaMeasurement>> tdoa_by_listener(n);

    const std::size_t pairs = schedule.pair_sequence.size();
    for (std::size_t s = 0; s < pairs; ++s) {
      const auto [a, b] = current_pair(schedule);
      bool pair_failed = false;
      std::optional<TofMeasurement> forward, backward;
      for (int leg = 0; leg < legs_per_pair; ++leg) {
        ExchangeContext ctx;
        ctx.positions = world.positions;
        ctx.clocks = clocks;
        ctx.medium = sc.medium;
        ctx.timing = sc.protocol;
        ctx.listeners = current.listeners;
        ctx.ack_sender = leg + 1 < legs_per_pair ? b : next_initiator(schedule);
        ctx.slot_time = t;
        ctx.rng = &proto_rng;
        ctx.log = &out.events;
        ExchangeResult res =
            leg == 0 ? run_twr_exchange(a, b, ctx) : run_twr_exchange(b, a, ctx);
        pair_failed = pair_failed || res.failed;
        (leg == 0 ? forward : backward) = res.tof;
        for (TdoaMeasurement& m : res.tdoa) {
          ++out.node_stats[m.listener].tdoa_measurements;
          tdoa_by_listener[m.listener].push_back(m);
        }
        t += slot;
      }
      if (forward && backward) {
        TofMeasurement avg = *forward;
        avg.distance = 0.5 * (forward->distance + backward->distance);
        avg.clamped = forward->clamped || backward->clamped;
        tofs.push_back(avg);
      } else if (forward || backward) {
        tofs.push_back(forward ? *forward : *backward);
      }
      advance_schedule(schedule, pair_failed);
    }
    out.failed_exchanges += schedule.failed_exchanges;
    ++out.completed_cycles;
    out.events.append(t, current.active.front(), EventKind::Cycle, EventOutcome::Complete);

    if (noiseless) {
      for (const auto& bucket : tdoa_by_listener) {
        for (const TdoaMeasurement& m : bucket) {
          const double pair_distance =
              distance(world.positions[m.initiator], world.positions[m.responder]);
          if (std::abs(m.range_difference) > pair_distance + 1e-9) {
            out.collapsed = true;
            out.collapse_reason = "range-difference bound violated in a noiseless run";
          }
        }
      }
    }

    const FrameConvention frame = frame_of(current.active);
    const NodeId sign_node = spatial_sign_node_of(current.active, frame);
    MultilaterationOptions cycle_opts = ml_opts;
    bool warm = true;
    for (NodeId id : current.active) warm = warm && store.valid[id];
    if (warm) {
      GaugeTransform prev = GaugeTransform::from_reference(
          store.position[frame.origin], store.position[frame.axis], store.position[frame.plane],
          sc.dimension);
      for (NodeId id : current.active) {
        cycle_opts.initial[id] = prev.to_gauge(store.position[id]);
      }
    }
    const MultilaterationResult ml = multilateration(tofs, frame, cycle_opts);
    if (ml.ok && !ml.degenerate) {
      align_to_world(ml, frame, sign_node);
      fail_streak = 0;
    } else if (++fail_streak >= 10) {
      out.collapsed = true;
      out.collapse_reason = "active-set multilateration failed for 10 consecutive cycles";
    }

    std::map<NodeId, Position> anchors;
    for (NodeId id : current.active) anchors[id] = store.position[id];
    TdoaSolverOptions tdoa_opts;
    tdoa_opts.dimension = sc.dimension;
    for (NodeId l : current.listeners) {
      Position guess = store.position[l];
      guess.z() = sc.nodes[l].z;
      const PositionEstimate estimate =
          tdoa_ls_estimator(l, tdoa_by_listener[l], anchors, guess, tdoa_opts);
      if (estimate.valid) {
        store.position[l] = estimate.position;
        ++out.node_stats[l].estimate_updates;
      }
    }

    for (int i = 0; i < n; ++i) {
      store.smoothed[i] = sc.smoothing_alpha * store.position[i] +
                          (1.0 - sc.smoothing_alpha) * store.smoothed[i];
    }

    if (t_snapshot >= last_emit + sc.timestep - 1e-9) {
      last_emit = t_snapshot;
      std::vector<Position> active_truth;
      active_truth.reserve(current.active.size());
      for (NodeId id : current.active) active_truth.push_back(world.positions[id]);
      for (int i = 0; i < n; ++i) {
        MetricsRecord r;
        r.time = t_snapshot;
        r.node = i;
        r.mode = sc.mode;
        r.role = role_of(current, i);
        r.in_hull = convex_envelope_contains(active_truth, world.positions[i], sc.dimension);
        r.raw_error = distance(store.position[i], world.positions[i]);
        r.tracking_error = sc.tracking == TrackingReference::Path
                               ? path_distance(paths[i], sc.nodes[i].z, store.smoothed[i])
                               : distance(store.smoothed[i], world.positions[i]);
        r.estimate = store.position[i];
        r.truth = world.positions[i];
        out.records.push_back(r);
      }
    }

    out.cycles.push_back({current.epoch, t_snapshot, store.position, store.valid});

    if (sc.mode == Mode::Dynamic) {
      AllocationResult ar = allocate_roles(store.position, alloc_cfg, &current);
      if (sc.record_cost_reports) out.cost_reports.push_back(std::move(ar.report));
      const bool changed = ar.assignment.active != current.active;
      current = std::move(ar.assignment);
      if (changed) {
        ++out.role_changes;
        out.events.append(t, current.active.front(), EventKind::RoleChange, EventOutcome::Applied);
        t += sc.protocol.role_change_slots * slot;
      }
    } else {
      ++current.epoch;
    }
    out.roles.push_back(current);
  }

  out.end_time = t;
  return out;
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats stats;
  stats.count = values.size();
  if (values.empty()) return stats;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double h = (values.size() - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - lo;
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
  };
  stats.median = quantile(0.5);
  stats.q1 = quantile(0.25);
  stats.q3 = quantile(0.75);
  if (values.size() < 2) return stats;
  const double iqr = stats.q3 - stats.q1;
  const double lo_fence = stats.q1 - 1.5 * iqr;
  const double hi_fence = stats.q3 + 1.5 * iqr;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      stats.outliers.push_back(v);
      continue;
    }
    if (!stats.whisker_low) stats.whisker_low = v;
    stats.whisker_high = v;
  }
  return stats;
}

bool TimeWindows::contains(double t) const {
  auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                             [](double value, const auto& iv) { return value < iv.first; });
  if (it == intervals.begin()) return false;
  --it;
  return t <= it->second;
}

TimeWindows switch_windows(std::span<const MetricsRecord> records, NodeId focus,
                           double half_width) {
  std::vector<std::pair<double, Role>> trace;
  for (const MetricsRecord& r : records) {
    if (r.node == focus) trace.emplace_back(r.time, r.role);
  }
  TimeWindows windows;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].second != trace[i - 1].second) {
      windows.intervals.emplace_back(trace[i].first - half_width, trace[i].first + half_width);
    }
  }
  std::sort(windows.intervals.begin(), windows.intervals.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& iv : windows.intervals) {
    if (!merged.empty() && iv.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, iv.second);
    } else {
      merged.push_back(iv);
    }
  }
  windows.intervals = std::move(merged);
  return windows;
}

std::optional<SegmentSummary> summarize(std::span<const MetricsRecord> records, NodeId focus,
                                        Segment segment, const TimeWindows* windows) {
  std::vector<double> raw, tracking;
  for (const MetricsRecord& r : records) {
    if (r.node != focus) continue;
    if (segment == Segment::Switch && (windows == nullptr || !windows->contains(r.time))) continue;
    if (segment == Segment::HullExit && r.in_hull) continue;
    raw.push_back(r.raw_error);
    tracking.push_back(r.tracking_error);
  }
  if (raw.empty()) return std::nullopt;
  SegmentSummary summary;
  summary.count = raw.size();
  summary.raw_error = box_stats(std::move(raw));
  summary.tracking_error = box_stats(std::move(tracking));
  return summary;
}

}  // namespace uwb
