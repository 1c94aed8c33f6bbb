#include "doctest.h"

#include <random>

#include "uwb/core.hpp"

using namespace uwb;

TEST_CASE("distance matches hand values") {
  CHECK(distance(Position(0, 0, 0), Position(0, 0, 0)) == 0.0);
  CHECK(distance(Position(0, 0, 0), Position(3, 4, 0)) == doctest::Approx(5.0));
  CHECK(distance(Position(1, 1, 0), Position(4, 0, 0)) == doctest::Approx(std::sqrt(10.0)));
}

TEST_CASE("distance is symmetric and accepts expressions") {
  const Position a(1.5, -2.0, 0.25), b(-3.0, 4.0, 1.0);
  CHECK(distance(a, b) == doctest::Approx(distance(b, a)));
  CHECK(distance(a + b, b) == doctest::Approx((a).norm()));
  CHECK(distance(2.0 * a, a) == doctest::Approx(a.norm()));
}

TEST_CASE("distance triangle inequality on random triples") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Position a(coord(rng), coord(rng), coord(rng));
    const Position b(coord(rng), coord(rng), coord(rng));
    const Position c(coord(rng), coord(rng), coord(rng));
    CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12);
  }
}

TEST_CASE("clock local_time is strictly monotone at the drift bound") {
  for (double drift : {-kMaxAbsDriftPpm, -1.0, 0.0, 1.0, kMaxAbsDriftPpm}) {
    const ClockModel clock{0.35, drift};
    double prev = clock.local_time(0.0);
    for (double t = 1e-9; t < 1e6; t *= 10.0) {
      const double now = clock.local_time(t);
      CHECK(now > prev);
      prev = now;
    }
  }
}

TEST_CASE("clock offset cancels in same-clock differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> offset(-100.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const ClockModel with_offset{offset(rng), 0.0};
    const ClockModel no_offset{0.0, 0.0};
    const double t0 = 1000.0, dt = 3.7e-7;
    CHECK(with_offset.local_time(t0 + dt) - with_offset.local_time(t0) ==
          doctest::Approx(no_offset.local_time(t0 + dt) - no_offset.local_time(t0))
              .epsilon(1e-12));
  }
}

TEST_CASE("clock local_duration applies drift only") {
  const ClockModel clock{123.0, 20.0};
  CHECK(clock.local_duration(1.0) == doctest::Approx(1.0 + 20e-6).epsilon(1e-15));
  CHECK(clock.local_duration(0.0) == 0.0);
}

TEST_CASE("role assignment partition checks") {
  RoleAssignment a;
  a.active = {0, 2, 3};
  a.listeners = {1, 4};
  CHECK(is_partition(a, 5));
  CHECK(role_of(a, 0) == Role::Active);
  CHECK(role_of(a, 1) == Role::Listener);
  CHECK(role_of(a, 4) == Role::Listener);

  SUBCASE("wrong total") { CHECK_FALSE(is_partition(a, 6)); }
  SUBCASE("duplicate across groups") {
    a.listeners = {1, 3};
    CHECK_FALSE(is_partition(a, 5));
  }
  SUBCASE("duplicate within a group") {
    a.active = {0, 2, 2};
    a.listeners = {1, 3, 4};
    CHECK_FALSE(is_partition(a, 6));
  }
  SUBCASE("id out of range") {
    a.listeners = {1, 5};
    CHECK_FALSE(is_partition(a, 5));
  }
}

TEST_CASE("minimum active count per dimension") {
  CHECK(min_active_count(Dimension::Planar) == 3);
  CHECK(min_active_count(Dimension::Spatial) == 4);
}

TEST_CASE("planar hull membership on the worked square") {
  const std::vector<Position> square = {
      {0, 0, 0}, {4, 0, 0}, {4, 3, 0}, {0, 3, 0}};
  CHECK(convex_envelope_contains(square, Position(2, 1.5, 0), Dimension::Planar));
  CHECK_FALSE(convex_envelope_contains(square, Position(5, 5, 0), Dimension::Planar));
  // Boundary point: on the x=4 edge, inside by the half-plane test.
  CHECK(convex_envelope_contains(square, Position(4, 1.5, 0), Dimension::Planar));
  CHECK(convex_envelope_contains(square, Position(0, 0, 0), Dimension::Planar));
  CHECK_FALSE(convex_envelope_contains(square, Position(4.0 + 1e-6, 1.5, 0), Dimension::Planar));
}

TEST_CASE("planar hull ignores z coordinates") {
  const std::vector<Position> square = {
      {0, 0, 1.0}, {4, 0, -2.0}, {4, 3, 0.5}, {0, 3, 3.0}};
  CHECK(convex_envelope_contains(square, Position(2, 1.5, 99.0), Dimension::Planar));
}

TEST_CASE("collinear anchors are degenerate, not outside") {
  const std::vector<Position> line = {{0, 0, 0}, {1, 1, 0}, {2, 2, 0}, {3, 3, 0}};
  const HullQuery q = hull_contains(line, Position(1.5, 1.5, 0), Dimension::Planar);
  CHECK(q.degenerate);
  CHECK_FALSE(convex_envelope_contains(line, Position(1.5, 1.5, 0), Dimension::Planar));
}

TEST_CASE("fewer than three anchors is degenerate") {
  const std::vector<Position> two = {{0, 0, 0}, {4, 0, 0}};
  CHECK(hull_contains(two, Position(2, 0, 0), Dimension::Planar).degenerate);
}

TEST_CASE("spatial hull membership on a tetrahedron") {
  const std::vector<Position> tetra = {
      {0, 0, 0}, {4, 0, 0}, {2, 4, 0}, {2, 1.5, 3}};
  CHECK(convex_envelope_contains(tetra, Position(2, 1.5, 1.0), Dimension::Spatial));
  CHECK(convex_envelope_contains(tetra, Position(2, 1.5, 0), Dimension::Spatial));
  CHECK_FALSE(convex_envelope_contains(tetra, Position(2, 1.5, 3.1), Dimension::Spatial));
  CHECK_FALSE(convex_envelope_contains(tetra, Position(-1, 0, 0.5), Dimension::Spatial));
}

TEST_CASE("coplanar anchors are degenerate in spatial mode") {
  const std::vector<Position> flat = {{0, 0, 1}, {4, 0, 1}, {4, 3, 1}, {0, 3, 1}};
  CHECK(hull_contains(flat, Position(2, 1.5, 1), Dimension::Spatial).degenerate);
}

TEST_CASE("hull membership agrees with a rejection-sampling oracle") {
  // Oracle: p is inside the hull iff it is a convex combination of anchors.
  // Check the cheap direction — every sampled convex combination must be
  // reported inside, and points pushed past the farthest anchor outside.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Position> anchors;
    for (int i = 0; i < 5; ++i) anchors.push_back({coord(rng), coord(rng), 0.0});
    const HullQuery probe = hull_contains(anchors, anchors[0], Dimension::Planar);
    if (probe.degenerate) continue;
    Position centroid = Position::Zero();
    for (const auto& a : anchors) centroid += a / anchors.size();
    for (int inner = 0; inner < 20; ++inner) {
      Eigen::VectorXd w(5);
      for (int i = 0; i < 5; ++i) w[i] = unit(rng);
      w /= w.sum();
      Position p = Position::Zero();
      for (int i = 0; i < 5; ++i) p += w[i] * anchors[i];
      CHECK(convex_envelope_contains(anchors, p, Dimension::Planar));
      // Push far beyond the hull through the same direction.
      const Position q = centroid + 4.0 * (p - centroid) + Position(30.0, 30.0, 0.0);
      CHECK_FALSE(convex_envelope_contains(anchors, q, Dimension::Planar));
    }
  }
}

TEST_CASE("role names") {
  CHECK(std::string(to_string(Role::Active)) == "active");
  CHECK(std::string(to_string(Role::Listener)) == "listener");
}
