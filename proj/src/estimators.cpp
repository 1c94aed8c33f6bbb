#include "uwb/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uwb {

namespace {

struct LmOutcome {
  Eigen::VectorXd x;
  double cost = 0.0;
  bool converged = false;
};

// Damped Gauss-Newton with a scalar Levenberg term. Steps are accepted only
// when the squared-residual cost decreases, so the cost trace is monotone.
template <class EvalFn>
LmOutcome lm_minimize(Eigen::VectorXd x, EvalFn&& eval, const SolverOptions& opt) {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  eval(x, r, &J);
  double cost = r.squaredNorm();
  double lambda = opt.initial_lambda;
  bool converged = false;

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    const Eigen::VectorXd gradient = 2.0 * J.transpose() * r;
    if (gradient.lpNorm<Eigen::Infinity>() <= opt.gradient_tol) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd hessian = J.transpose() * J;
    bool stepped = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = hessian;
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd dx = damped.ldlt().solve(-0.5 * gradient);
      Eigen::VectorXd r_next;
      eval(x + dx, r_next, nullptr);
      const double cost_next = r_next.squaredNorm();
      if (cost_next < cost) {
        x += dx;
        cost = cost_next;
        lambda = std::max(lambda * 0.3, 1e-12);
        eval(x, r, &J);
        if (dx.lpNorm<Eigen::Infinity>() <= 1e-14) {
          converged = true;
        }
        stepped = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
    if (!stepped || converged) {
      // No descent direction left: either at a (local) minimum or stuck.
      converged = converged || cost <= 1e-24;
      break;
    }
  }
  return {std::move(x), cost, converged};
}

}  // namespace

void tdoa_residuals(const Position& p, std::span<const TdoaMeasurement> measurements,
                    const std::map<NodeId, Position>& anchors, Dimension dim,
                    Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian) {
  const int coords = dim == Dimension::Planar ? 2 : 3;
  std::vector<const TdoaMeasurement*> rows;
  rows.reserve(measurements.size());
  for (const auto& m : measurements) {
    if (anchors.count(m.initiator) && anchors.count(m.responder)) rows.push_back(&m);
  }
  residuals.resize(rows.size());
  if (jacobian) jacobian->setZero(static_cast<int>(rows.size()), coords);

  for (std::size_t idx = 0; idx < rows.size(); ++idx) {
    const TdoaMeasurement& m = *rows[idx];
    const Position& pi = anchors.at(m.initiator);
    const Position& pj = anchors.at(m.responder);
    const Eigen::Vector3d di = p - pi;
    const Eigen::Vector3d dj = p - pj;
    const double ni = di.norm();
    const double nj = dj.norm();
    residuals[idx] = m.range_difference - (nj - ni);
    if (!jacobian) continue;
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    if (nj > 1e-12) grad -= dj / nj;
    if (ni > 1e-12) grad += di / ni;
    for (int c = 0; c < coords; ++c) (*jacobian)(static_cast<int>(idx), c) = grad[c];
  }
}

PositionEstimate tdoa_ls_estimator(NodeId listener, std::span<const TdoaMeasurement> measurements,
                                   const std::map<NodeId, Position>& anchors,
                                   const Position& initial_guess, const TdoaSolverOptions& opts) {
  PositionEstimate estimate;
  estimate.node = listener;
  estimate.position = initial_guess;

  const bool planar = opts.dimension == Dimension::Planar;
  const int coords = planar ? 2 : 3;
  int usable = 0;
  for (const auto& m : measurements) {
    if (anchors.count(m.initiator) && anchors.count(m.responder)) ++usable;
  }
  if (usable < coords) return estimate;  // underdetermined, valid stays false

  const double fixed_z = initial_guess.z();
  auto to_position = [&](const Eigen::VectorXd& x) {
    return Position(x[0], x[1], planar ? fixed_z : x[2]);
  };
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    tdoa_residuals(to_position(x), measurements, anchors, opts.dimension, r, J);
  };

  Eigen::VectorXd x0(coords);
  x0[0] = initial_guess.x();
  x0[1] = initial_guess.y();
  if (!planar) x0[2] = initial_guess.z();

  const LmOutcome lm = lm_minimize(x0, eval, opts.solver);
  if (lm.converged) {
    estimate.position = to_position(lm.x);
    estimate.residual = std::sqrt(lm.cost / usable);
    estimate.valid = true;
  } else {
    // Non-convergence leaves the caller's last good position in place.
    Eigen::VectorXd r;
    eval(x0, r, nullptr);
    estimate.residual = std::sqrt(r.squaredNorm() / usable);
  }
  return estimate;
}

DisambiguationResult sign_disambiguate(std::map<NodeId, PositionEstimate> estimates,
                                       const FrameConvention& frame, Dimension dim,
                                       NodeId spatial_sign_node) {
  DisambiguationResult out{std::move(estimates), false};
  const auto plane_it = out.estimates.find(frame.plane);
  if (plane_it == out.estimates.end()) {
    out.ambiguous = true;
    return out;
  }
  const double y = plane_it->second.position.y();
  if (std::abs(y) <= kHullEpsilon) {
    out.ambiguous = true;
  } else if (y < 0.0) {
    for (auto& [id, e] : out.estimates) e.position.y() = -e.position.y();
  }
  if (dim == Dimension::Spatial && spatial_sign_node >= 0) {
    const auto sign_it = out.estimates.find(spatial_sign_node);
    if (sign_it == out.estimates.end()) {
      out.ambiguous = true;
      return out;
    }
    const double z = sign_it->second.position.z();
    if (std::abs(z) <= kHullEpsilon) {
      out.ambiguous = true;
    } else if (z < 0.0) {
      for (auto& [id, e] : out.estimates) e.position.z() = -e.position.z();
    }
  }
  return out;
}

namespace {

struct CoordIndex {
  int x = -1, y = -1, z = -1;
};

}  // namespace

MultilaterationResult multilateration(std::span<const TofMeasurement> ranges,
                                      const FrameConvention& frame,
                                      const MultilaterationOptions& opts) {
  MultilaterationResult out;
  const bool planar = opts.dimension == Dimension::Planar;

  std::vector<NodeId> nodes;
  nodes.reserve(ranges.size() * 2);
  for (const auto& m : ranges) {
    nodes.push_back(m.a);
    nodes.push_back(m.b);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto present = [&](NodeId id) {
    return std::binary_search(nodes.begin(), nodes.end(), id);
  };
  auto z_of = [&](NodeId id) {
    if (!planar) return 0.0;
    const auto it = opts.fixed_z.find(id);
    return it == opts.fixed_z.end() ? 0.0 : it->second;
  };

  // Two ranged nodes only pin the origin and the axis direction; the frame
  // places them directly with no least squares involved.
  if (nodes.size() == 2) {
    if (!present(frame.origin) || !present(frame.axis)) {
      out.error = "frame node without ranges";
      return out;
    }
    double sum = 0.0;
    for (const auto& m : ranges) sum += m.distance;
    double d = sum / static_cast<double>(ranges.size());
    if (planar) {
      const double dz = z_of(frame.origin) - z_of(frame.axis);
      d = std::sqrt(std::max(d * d - dz * dz, 0.0));
    }
    double rss = 0.0;
    for (const auto& m : ranges) rss += (m.distance - d) * (m.distance - d);
    const double rms = std::sqrt(rss / static_cast<double>(ranges.size()));
    for (NodeId id : nodes) {
      PositionEstimate e;
      e.node = id;
      e.position = Position(id == frame.axis ? d : 0.0, 0.0, z_of(id));
      e.residual = rms;
      e.valid = true;
      out.estimates[id] = e;
    }
    out.cost = rss;
    out.ok = true;
    return out;
  }

  const int min_nodes = planar ? 3 : 4;
  if (static_cast<int>(nodes.size()) < min_nodes) {
    out.error = "too few ranged nodes";
    return out;
  }
  if (!present(frame.origin) || !present(frame.axis) || !present(frame.plane)) {
    out.error = "frame node without ranges";
    return out;
  }

  // Mean measured range per pair, for the closed-form seed. In planar mode the
  // known height difference is removed so the seed lives in the xy plane.
  std::map<std::pair<NodeId, NodeId>, std::pair<double, int>> pair_sum;
  for (const auto& m : ranges) {
    auto key = std::minmax(m.a, m.b);
    auto& acc = pair_sum[{key.first, key.second}];
    acc.first += m.distance;
    ++acc.second;
  }
  auto seed_range = [&](NodeId a, NodeId b) -> std::optional<double> {
    auto key = std::minmax(a, b);
    const auto it = pair_sum.find({key.first, key.second});
    if (it == pair_sum.end()) return std::nullopt;
    double d = it->second.first / it->second.second;
    if (planar) {
      const double dz = z_of(a) - z_of(b);
      d = std::sqrt(std::max(d * d - dz * dz, 0.0));
    }
    return d;
  };

  std::map<NodeId, CoordIndex> layout;
  int unknowns = 0;
  for (NodeId id : nodes) {
    CoordIndex c;
    if (id == frame.origin) {
    } else if (id == frame.axis) {
      c.x = unknowns++;
    } else if (id == frame.plane) {
      c.x = unknowns++;
      c.y = unknowns++;
    } else {
      c.x = unknowns++;
      c.y = unknowns++;
      if (!planar) c.z = unknowns++;
    }
    layout[id] = c;
  }
  if (static_cast<int>(ranges.size()) < unknowns) {
    out.error = "insufficient ranges";
    return out;
  }

  auto assemble = [&](const Eigen::VectorXd& x, NodeId id) {
    const CoordIndex& c = layout[id];
    Position p(0.0, 0.0, z_of(id));
    if (c.x >= 0) p.x() = x[c.x];
    if (c.y >= 0) p.y() = x[c.y];
    if (c.z >= 0) p.z() = x[c.z];
    return p;
  };
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.resize(static_cast<int>(ranges.size()));
    if (J) J->setZero(static_cast<int>(ranges.size()), unknowns);
    for (std::size_t idx = 0; idx < ranges.size(); ++idx) {
      const TofMeasurement& m = ranges[idx];
      const Position pa = assemble(x, m.a);
      const Position pb = assemble(x, m.b);
      const Eigen::Vector3d diff = pa - pb;
      const double dist = diff.norm();
      r[static_cast<int>(idx)] = m.distance - dist;
      if (!J || dist <= 1e-12) continue;
      const Eigen::Vector3d grad = diff / dist;
      const CoordIndex& ca = layout[m.a];
      const CoordIndex& cb = layout[m.b];
      const int row = static_cast<int>(idx);
      if (ca.x >= 0) (*J)(row, ca.x) = -grad.x();
      if (ca.y >= 0) (*J)(row, ca.y) = -grad.y();
      if (ca.z >= 0) (*J)(row, ca.z) = -grad.z();
      if (cb.x >= 0) (*J)(row, cb.x) = grad.x();
      if (cb.y >= 0) (*J)(row, cb.y) = grad.y();
      if (cb.z >= 0) (*J)(row, cb.z) = grad.z();
    }
  };

  // Closed-form chain seed: axis from the origin range, plane node from two
  // circles, every other node from its origin/axis ranges with the y (and z)
  // sign picked against the plane-node range when one exists.
  auto closed_form_seed = [&]() -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(unknowns);
    const auto d_oa = seed_range(frame.origin, frame.axis);
    if (!d_oa || *d_oa <= kHullEpsilon) return std::nullopt;
    x[layout[frame.axis].x] = *d_oa;

    const auto d_op = seed_range(frame.origin, frame.plane);
    const auto d_ap = seed_range(frame.axis, frame.plane);
    if (!d_op || !d_ap) return std::nullopt;
    const double px = (*d_op * *d_op + *d_oa * *d_oa - *d_ap * *d_ap) / (2.0 * *d_oa);
    const double py = std::sqrt(std::max(*d_op * *d_op - px * px, 0.0));
    x[layout[frame.plane].x] = px;
    x[layout[frame.plane].y] = py;

    for (NodeId id : nodes) {
      if (id == frame.origin || id == frame.axis || id == frame.plane) continue;
      const auto d_o = seed_range(frame.origin, id);
      const auto d_a = seed_range(frame.axis, id);
      if (!d_o || !d_a) return std::nullopt;
      const double cx = (*d_o * *d_o + *d_oa * *d_oa - *d_a * *d_a) / (2.0 * *d_oa);
      const auto d_p = seed_range(frame.plane, id);
      const CoordIndex& c = layout[id];
      x[c.x] = cx;
      if (planar) {
        const double cy = std::sqrt(std::max(*d_o * *d_o - cx * cx, 0.0));
        double y = cy;
        if (d_p) {
          const double err_pos = std::abs(std::hypot(cx - px, cy - py) - *d_p);
          const double err_neg = std::abs(std::hypot(cx - px, -cy - py) - *d_p);
          if (err_neg < err_pos) y = -cy;
        }
        x[c.y] = y;
      } else {
        double cy = 0.0;
        if (d_p && py > kHullEpsilon) {
          cy = (*d_o * *d_o - *d_p * *d_p + px * px + py * py - 2.0 * cx * px) / (2.0 * py);
        }
        x[c.y] = cy;
        x[c.z] = std::sqrt(std::max(*d_o * *d_o - cx * cx - cy * cy, 0.0));
      }
    }
    return x;
  };

  std::optional<LmOutcome> best;
  if (const auto seed = closed_form_seed()) {
    best = lm_minimize(*seed, eval, opts.solver);
  }
  if (!opts.initial.empty()) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(unknowns);
    bool complete = true;
    for (NodeId id : nodes) {
      const auto it = opts.initial.find(id);
      if (it == opts.initial.end()) {
        if (id != frame.origin) complete = false;
        continue;
      }
      const CoordIndex& c = layout[id];
      if (c.x >= 0) x[c.x] = it->second.x();
      if (c.y >= 0) x[c.y] = it->second.y();
      if (c.z >= 0) x[c.z] = it->second.z();
    }
    if (complete) {
      LmOutcome warm = lm_minimize(x, eval, opts.solver);
      if (!best || warm.cost < best->cost) best = std::move(warm);
    }
  }
  if (!best) {
    out.error = "no usable initialization";
    return out;
  }

  Eigen::VectorXd solution = best->x;
  const double axis_x = solution[layout[frame.axis].x];
  if (std::abs(axis_x) <= kHullEpsilon) {
    out.degenerate = true;
    out.error = "origin/axis collapse";
    return out;
  }
  if (axis_x < 0.0) {
    // Mirror about the y axis; pairwise distances are unchanged.
    for (NodeId id : nodes) {
      const CoordIndex& c = layout[id];
      if (c.x >= 0) solution[c.x] = -solution[c.x];
    }
  }

  // Per-node residual: RMS over the range residuals the node participates in.
  Eigen::VectorXd final_r;
  eval(solution, final_r, nullptr);
  std::map<NodeId, std::pair<double, int>> node_residuals;
  for (std::size_t idx = 0; idx < ranges.size(); ++idx) {
    const double sq = final_r[static_cast<int>(idx)] * final_r[static_cast<int>(idx)];
    for (NodeId id : {ranges[idx].a, ranges[idx].b}) {
      auto& acc = node_residuals[id];
      acc.first += sq;
      ++acc.second;
    }
  }

  std::map<NodeId, PositionEstimate> estimates;
  for (NodeId id : nodes) {
    PositionEstimate e;
    e.node = id;
    e.position = assemble(solution, id);
    const auto& acc = node_residuals[id];
    e.residual = acc.second > 0 ? std::sqrt(acc.first / acc.second) : 0.0;
    e.valid = true;
    estimates[id] = e;
  }

  NodeId spatial_sign_node = -1;
  if (!planar) {
    for (NodeId id : nodes) {
      if (id != frame.origin && id != frame.axis && id != frame.plane) {
        spatial_sign_node = id;
        break;
      }
    }
  }
  DisambiguationResult fixed =
      sign_disambiguate(std::move(estimates), frame, opts.dimension, spatial_sign_node);
  out.estimates = std::move(fixed.estimates);
  out.degenerate = fixed.ambiguous;
  out.cost = best->cost;
  out.ok = true;
  return out;
}

GaugeTransform GaugeTransform::from_reference(const Position& origin_ref, const Position& axis_ref,
                                              const Position& plane_ref, Dimension dim) {
  GaugeTransform t;
  t.dim_ = dim;
  if (dim == Dimension::Planar) {
    Eigen::Vector2d ex = (axis_ref - origin_ref).head<2>();
    const double n = ex.norm();
    if (n <= kHullEpsilon) return t;
    ex /= n;
    const Eigen::Vector2d v = (plane_ref - origin_ref).head<2>();
    t.mirror_ = (ex.x() * v.y() - ex.y() * v.x()) >= 0.0 ? 1.0 : -1.0;
    t.rotation_.setZero();
    t.rotation_.col(0) = Eigen::Vector3d(ex.x(), ex.y(), 0.0);
    t.rotation_.col(1) = Eigen::Vector3d(-ex.y(), ex.x(), 0.0);
    t.rotation_.col(2) = Eigen::Vector3d(0.0, 0.0, 1.0);
    t.translation_ = Eigen::Vector3d(origin_ref.x(), origin_ref.y(), 0.0);
  } else {
    Eigen::Vector3d ex = axis_ref - origin_ref;
    const double n = ex.norm();
    if (n <= kHullEpsilon) return t;
    ex /= n;
    Eigen::Vector3d v = plane_ref - origin_ref;
    Eigen::Vector3d ey = v - v.dot(ex) * ex;
    const double ny = ey.norm();
    if (ny <= kHullEpsilon) return t;
    ey /= ny;
    t.rotation_.col(0) = ex;
    t.rotation_.col(1) = ey;
    t.rotation_.col(2) = ex.cross(ey);
    t.translation_ = origin_ref;
  }
  return t;
}

void GaugeTransform::resolve_mirror(const Position& gauge_point, const Position& reference_point) {
  const double keep = mirror_;
  mirror_ = 1.0;
  const double err_pos = (to_reference(gauge_point) - reference_point).norm();
  mirror_ = -1.0;
  const double err_neg = (to_reference(gauge_point) - reference_point).norm();
  mirror_ = err_neg < err_pos ? -1.0 : (err_pos < err_neg ? 1.0 : keep);
}

Position GaugeTransform::to_reference(const Position& gauge_point) const {
  Position m = gauge_point;
  if (dim_ == Dimension::Planar) {
    m.y() *= mirror_;
  } else {
    m.z() *= mirror_;
  }
  return translation_ + rotation_ * m;
}

Position GaugeTransform::to_gauge(const Position& reference_point) const {
  Position m = rotation_.transpose() * (reference_point - translation_);
  if (dim_ == Dimension::Planar) {
    m.y() *= mirror_;
  } else {
    m.z() *= mirror_;
  }
  return m;
}

}  // namespace uwb
