#include "uwb/core.hpp"

#include <algorithm>
#include <cmath>

namespace uwb {

const char* to_string(Role role) {
  return role == Role::Active ? "active" : "listener";
}

bool is_partition(const RoleAssignment& assignment, int node_count) {
  if (static_cast<int>(assignment.active.size() + assignment.listeners.size()) != node_count) {
    return false;
  }
  std::vector<bool> seen(node_count, false);
  for (const auto* group : {&assignment.active, &assignment.listeners}) {
    if (!std::is_sorted(group->begin(), group->end())) return false;
    for (NodeId id : *group) {
      if (id < 0 || id >= node_count || seen[id]) return false;
      seen[id] = true;
    }
  }
  return true;
}

Role role_of(const RoleAssignment& assignment, NodeId id) {
  return std::binary_search(assignment.active.begin(), assignment.active.end(), id)
             ? Role::Active
             : Role::Listener;
}

namespace {

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Monotone-chain convex hull, counter-clockwise, strict turns only.
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a == b; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * n);
  int h = 0;
  for (int i = 0; i < n; ++i) {
    while (h >= 2 && cross2(hull[h - 2], hull[h - 1], pts[i]) <= 0.0) --h;
    hull[h++] = pts[i];
  }
  for (int i = n - 2, lower = h + 1; i >= 0; --i) {
    while (h >= lower && cross2(hull[h - 2], hull[h - 1], pts[i]) <= 0.0) --h;
    hull[h++] = pts[i];
  }
  hull.resize(h - 1);
  return hull;
}

HullQuery hull_contains_2d(std::span<const Position> anchors, const Position& p, double eps) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(anchors.size());
  for (const auto& a : anchors) pts.emplace_back(a.x(), a.y());

  // Degenerate when every anchor lies within eps of the widest-separated pair's line.
  double best = -1.0;
  Eigen::Vector2d u = Eigen::Vector2d::Zero(), v = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).norm();
      if (d > best) {
        best = d;
        u = pts[i];
        v = pts[j];
      }
    }
  }
  if (best <= eps) return {false, true};  // all anchors effectively coincident
  const Eigen::Vector2d dir = (v - u).normalized();
  double max_off = 0.0;
  for (const auto& q : pts) {
    const Eigen::Vector2d r = q - u;
    max_off = std::max(max_off, std::abs(dir.x() * r.y() - dir.y() * r.x()));
  }
  if (max_off <= eps) return {false, true};

  const auto hull = convex_hull_2d(std::move(pts));
  const Eigen::Vector2d q(p.x(), p.y());
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Eigen::Vector2d& a = hull[i];
    const Eigen::Vector2d& b = hull[(i + 1) % hull.size()];
    const Eigen::Vector2d e = b - a;
    const double len = e.norm();
    const double signed_dist = (e.x() * (q.y() - a.y()) - e.y() * (q.x() - a.x())) / len;
    if (signed_dist < -eps) return {false, false};
  }
  return {true, false};
}

HullQuery hull_contains_3d(std::span<const Position> anchors, const Position& p, double eps) {
  const int n = static_cast<int>(anchors.size());

  // Coplanarity: fit a plane through the widest triangle and test offsets.
  double best_area = -1.0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero(), base = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        const Eigen::Vector3d cr = (anchors[j] - anchors[i]).cross(anchors[k] - anchors[i]);
        if (cr.norm() > best_area) {
          best_area = cr.norm();
          normal = cr;
          base = anchors[i];
        }
      }
    }
  }
  if (best_area <= eps) return {false, true};
  const Eigen::Vector3d un = normal.normalized();
  double max_off = 0.0;
  for (const auto& a : anchors) max_off = std::max(max_off, std::abs(un.dot(a - base)));
  if (max_off <= eps) return {false, true};

  // Every supporting plane of the hull must keep p on its inner side.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        const Eigen::Vector3d cr = (anchors[j] - anchors[i]).cross(anchors[k] - anchors[i]);
        if (cr.norm() <= eps) continue;
        const Eigen::Vector3d nf = cr.normalized();
        double lo = 0.0, hi = 0.0;
        for (int m = 0; m < n; ++m) {
          const double s = nf.dot(anchors[m] - anchors[i]);
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
        const double sp = nf.dot(p - anchors[i]);
        if (hi <= eps && sp > eps) return {false, false};   // face with outward +nf
        if (lo >= -eps && sp < -eps) return {false, false};  // face with outward -nf
      }
    }
  }
  return {true, false};
}

}  // namespace

HullQuery hull_contains(std::span<const Position> anchors, const Position& p, Dimension dim,
                        double eps) {
  if (anchors.size() < 3) return {false, true};
  if (dim == Dimension::Planar) return hull_contains_2d(anchors, p, eps);
  if (anchors.size() < 4) return {false, true};
  return hull_contains_3d(anchors, p, eps);
}

}  // namespace uwb
