#pragma once

#include "uwb/core.hpp"

#include <map>
#include <optional>

namespace uwb {

/// Gauge fixing for the relative frame: origin_node pinned to the origin,
/// axis_node on the positive x axis, plane_node on the positive-y side.
/// In spatial mode a fourth designated node resolves the z reflection.
struct FrameConvention {
  NodeId origin = -1;
  NodeId axis = -1;
  NodeId plane = -1;
};

struct PositionEstimate {
  NodeId node = -1;
  Position position = Position::Zero();
  double residual = 0.0;  // m, RMS over the fit residuals touching this node
  bool valid = false;
};

struct SolverOptions {
  int max_iters = 100;
  double gradient_tol = 1e-10;
  double initial_lambda = 1e-4;
};

struct MultilaterationOptions {
  Dimension dimension = Dimension::Planar;
  std::map<NodeId, double> fixed_z;       // planar mode: known height per node
  std::map<NodeId, Position> initial;     // optional warm start, gauge frame
  SolverOptions solver;
};

struct MultilaterationResult {
  std::map<NodeId, PositionEstimate> estimates;
  bool ok = false;
  bool degenerate = false;  // reflection could not be resolved
  double cost = 0.0;        // sum of squared range residuals, m^2
  std::string error;
};

/// Joint nonlinear least squares over pairwise ranges, solved in the gauge of
/// the frame convention. Requires the origin/axis range and enough pairs to
/// determine every free coordinate.
MultilaterationResult multilateration(std::span<const TofMeasurement> ranges,
                                      const FrameConvention& frame,
                                      const MultilaterationOptions& opts = {});

/// Reflects estimates across the x axis (and xy plane in spatial mode) so that
/// plane_node lands on positive y. Pairwise distances are invariant under the
/// reflection, so the fit cost is unchanged.
struct DisambiguationResult {
  std::map<NodeId, PositionEstimate> estimates;
  bool ambiguous = false;  // plane_node within kHullEpsilon of the axis
};

DisambiguationResult sign_disambiguate(std::map<NodeId, PositionEstimate> estimates,
                                       const FrameConvention& frame,
                                       Dimension dim = Dimension::Planar,
                                       NodeId spatial_sign_node = -1);

struct TdoaSolverOptions {
  Dimension dimension = Dimension::Planar;
  SolverOptions solver;
};

/// Residuals and Jacobian of the range-difference fit at p: one row per
/// measurement, r = rd - (|p - p_j| - |p - p_i|). The Jacobian covers the free
/// coordinates only (x, y in planar mode).
void tdoa_residuals(const Position& p, std::span<const TdoaMeasurement> measurements,
                    const std::map<NodeId, Position>& anchors, Dimension dim,
                    Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian);

/// Position of a passive listener from its range differences to pairs of
/// anchors, by damped Gauss-Newton from initial_guess. In planar mode the z
/// coordinate stays at initial_guess.z(). valid is false on non-convergence;
/// the caller decides whether to keep an older estimate instead.
PositionEstimate tdoa_ls_estimator(NodeId listener, std::span<const TdoaMeasurement> measurements,
                                   const std::map<NodeId, Position>& anchors,
                                   const Position& initial_guess,
                                   const TdoaSolverOptions& opts = {});

/// Rigid map taking gauge-frame coordinates onto the frame nodes' reference
/// positions (estimates from an earlier epoch, or survey truth in tests).
/// Built from where the three frame nodes actually sit; reflection follows the
/// side plane_node occupies in the reference.
class GaugeTransform {
 public:
  static GaugeTransform from_reference(const Position& origin_ref, const Position& axis_ref,
                                       const Position& plane_ref, Dimension dim);

  /// Picks the reflection that brings gauge_point closest to reference_point.
  /// Needed in spatial mode, where three reference points leave the
  /// handedness open; harmless to call in planar mode.
  void resolve_mirror(const Position& gauge_point, const Position& reference_point);

  Position to_reference(const Position& gauge_point) const;
  Position to_gauge(const Position& reference_point) const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();  // gauge -> reference, after mirror
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
  double mirror_ = 1.0;  // y sign flip applied in gauge coordinates
  Dimension dim_ = Dimension::Planar;
};

}  // namespace uwb
