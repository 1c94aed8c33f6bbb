#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "uwb/protocol.hpp"

using namespace uwb;

namespace {

constexpr double kC = kSpeedOfLight;

struct TestWorld {
  std::vector<Position> positions;
  std::vector<ClockModel> clocks;
  std::vector<NodeId> listeners;
  MediumModel medium;
  ProtocolTiming timing;
  std::mt19937_64 rng{1};
  EventLog log;

  explicit TestWorld(std::vector<Position> pos) : positions(std::move(pos)) {
    clocks.resize(positions.size());
  }

  ExchangeResult exchange(NodeId initiator, NodeId responder, NodeId ack_sender = -1,
                          double slot_time = 0.0) {
    ExchangeContext ctx;
    ctx.positions = positions;
    ctx.clocks = clocks;
    ctx.medium = medium;
    ctx.timing = timing;
    ctx.listeners = listeners;
    ctx.ack_sender = ack_sender;
    ctx.slot_time = slot_time;
    ctx.rng = &rng;
    ctx.log = &log;
    return run_twr_exchange(initiator, responder, ctx);
  }
};

int count_events(const EventLog& log, EventKind kind, EventOutcome outcome) {
  int count = 0;
  for (const Event& e : log.events()) {
    if (e.kind == kind && e.outcome == outcome) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("time of flight from direct substitution") {
  ExchangeRecord rec;
  rec.t_init = 1000e-9;
  rec.t_resp = 400e-9;
  const TofResult tof = compute_tof(rec);
  CHECK(tof.tof == doctest::Approx(300e-9).epsilon(1e-12));
  CHECK_FALSE(tof.clamped);

  rec.t_resp = rec.t_init;
  CHECK(compute_tof(rec).tof == 0.0);

  rec.t_resp = rec.t_init + 1e-9;  // noise pushed the difference negative
  const TofResult clamped = compute_tof(rec);
  CHECK(clamped.tof == 0.0);
  CHECK(clamped.clamped);
}

TEST_CASE("time difference of arrival from direct substitution") {
  ExchangeRecord rec;
  rec.t_resp = 400e-9;
  rec.listeners.push_back({7, 900e-9, true});
  const auto tdoa = compute_tdoa(rec, 7, 300e-9);
  REQUIRE(tdoa.has_value());
  CHECK(*tdoa == doctest::Approx(200e-9).epsilon(1e-12));
  CHECK_FALSE(compute_tdoa(rec, 8, 300e-9).has_value());
}

TEST_CASE("cycle frequency arithmetic") {
  CHECK(cycle_frequency(4, 60.0) == doctest::Approx(10.0));
  CHECK(cycle_frequency(2, 60.0) == doctest::Approx(60.0));
  CHECK(cycle_frequency(5, 100.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(cycle_frequency(1, 60.0), ConfigError);
  CHECK_THROWS_AS(cycle_frequency(4, 0.0), ConfigError);
}

TEST_CASE("schedule enumerates pairs round robin") {
  const std::vector<NodeId> active = {0, 2, 5, 7};
  ScheduleState state = make_schedule(active);
  REQUIRE(state.pair_sequence.size() == 6);
  CHECK(state.pair_sequence.front() == std::pair<NodeId, NodeId>{0, 2});
  CHECK(state.pair_sequence.back() == std::pair<NodeId, NodeId>{5, 7});
  CHECK(next_initiator(state) == 0);  // pair (0,5) is next

  for (int i = 0; i < 5; ++i) CHECK_FALSE(advance_schedule(state, false));
  CHECK(advance_schedule(state, false));  // wrap = cycle complete
  CHECK(state.cursor == 0);
  CHECK(state.completed_cycles == 1);

  CHECK_FALSE(advance_schedule(state, true));  // failures still advance
  CHECK(state.cursor == 1);
  CHECK(state.failed_exchanges == 1);
}

TEST_CASE("initiator duration for a 30 m exchange") {
  TestWorld world({{0, 0, 0}, {30, 0, 0}});
  const ExchangeResult res = world.exchange(0, 1);
  REQUIRE(res.tof.has_value());
  // 2 * 30 / c + 400 ns, frozen against independent arithmetic.
  CHECK(res.record.t_init * 1e9 == doctest::Approx(600.13845711889585).epsilon(1e-12));
  CHECK(res.record.t_resp == doctest::Approx(400e-9).epsilon(1e-15));
  CHECK(res.record.t_init > res.record.t_resp);
  CHECK(res.tof->distance == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("co-located nodes give equal durations") {
  TestWorld world({{5, 5, 0}, {5, 5, 0}});
  const ExchangeResult res = world.exchange(0, 1);
  CHECK(res.record.t_init == res.record.t_resp);
  CHECK(res.tof->distance == 0.0);
}

TEST_CASE("certain loss exhausts the retry budget") {
  TestWorld world({{0, 0, 0}, {10, 0, 0}});
  world.medium.loss_probability = 1.0;
  const ExchangeResult res = world.exchange(0, 1);
  CHECK(res.failed);
  CHECK_FALSE(res.tof.has_value());
  CHECK(count_events(world.log, EventKind::Response, EventOutcome::Timeout) ==
        world.timing.max_retries + 1);
  CHECK(count_events(world.log, EventKind::Exchange, EventOutcome::Failed) == 1);
}

TEST_CASE("clock offsets cancel exactly") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-40.0, 40.0);
  std::uniform_real_distribution<double> offset(-100.0, 100.0);
  for (int trial = 0; trial < 300; ++trial) {
    TestWorld world({{coord(rng), coord(rng), 0}, {coord(rng), coord(rng), 0}});
    world.clocks[0] = {offset(rng), 0.0};
    world.clocks[1] = {offset(rng), 0.0};
    const double truth = distance(world.positions[0], world.positions[1]);
    // Slot time far into the run must not cost precision either.
    const ExchangeResult res = world.exchange(0, 1, -1, 1e5);
    REQUIRE(res.tof.has_value());
    CHECK(std::abs(res.tof->distance - truth) <= 1e-9);
  }
}

TEST_CASE("range difference matches geometry exactly") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coord(-40.0, 40.0);
  std::uniform_real_distribution<double> offset(-50.0, 50.0);
  for (int trial = 0; trial < 300; ++trial) {
    TestWorld world({{coord(rng), coord(rng), 0},
                     {coord(rng), coord(rng), 0},
                     {coord(rng), coord(rng), 0}});
    for (auto& c : world.clocks) c = {offset(rng), 0.0};
    world.listeners = {2};
    const ExchangeResult res = world.exchange(0, 1);
    REQUIRE(res.tdoa.size() == 1);
    const double want = distance(world.positions[2], world.positions[1]) -
                        distance(world.positions[2], world.positions[0]);
    CHECK(std::abs(res.tdoa[0].range_difference - want) <= 1e-9);
  }
}

TEST_CASE("worked range-difference example") {
  TestWorld world({{0, 0, 0}, {4, 0, 0}, {1, 1, 0}});
  world.listeners = {2};
  const ExchangeResult res = world.exchange(0, 1);
  REQUIRE(res.tdoa.size() == 1);
  CHECK(res.tdoa[0].range_difference ==
        doctest::Approx(std::sqrt(10.0) - std::sqrt(2.0)).epsilon(1e-12));
  CHECK(res.tdoa[0].listener == 2);
  CHECK(res.tdoa[0].initiator == 0);
  CHECK(res.tdoa[0].responder == 1);
}

TEST_CASE("equidistant listener sees zero range difference") {
  TestWorld world({{0, 0, 0}, {4, 0, 0}, {2, 1.5, 0}});
  world.listeners = {2};
  const ExchangeResult res = world.exchange(0, 1);
  REQUIRE(res.tdoa.size() == 1);
  CHECK(std::abs(res.tdoa[0].range_difference) <= 1e-12);
}

TEST_CASE("drift error follows the closed-form prediction") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coord(-30.0, 30.0);
  std::uniform_real_distribution<double> drift(-kMaxAbsDriftPpm, kMaxAbsDriftPpm);
  const double tau = 400e-9;
  for (int trial = 0; trial < 200; ++trial) {
    TestWorld world({{coord(rng), coord(rng), 0}, {coord(rng), coord(rng), 0}});
    const double di = drift(rng), dr = drift(rng);
    world.clocks[0] = {3.0, di};
    world.clocks[1] = {-7.0, dr};
    const double truth = distance(world.positions[0], world.positions[1]);
    const ExchangeResult res = world.exchange(0, 1);
    REQUIRE(res.tof.has_value());
    const double err = res.tof->distance - truth;
    const double predicted = di * 1e-6 * truth + kC * tau * (di - dr) * 1e-6 / 2.0;
    CHECK(err == doctest::Approx(predicted).epsilon(1e-9));
    const double bound = kMaxAbsDriftPpm * 1e-6 * (truth + kC * tau) + 1e-9;
    CHECK(std::abs(err) <= bound);
  }
}

TEST_CASE("durations agree with an absolute-timestamp reconstruction") {
  // Independent oracle: capture each frame's absolute local time through
  // local_time() and difference those, instead of the production duration
  // algebra. Offsets and drifts included.
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> coord(-25.0, 25.0);
  std::uniform_real_distribution<double> offset(-10.0, 10.0);
  std::uniform_real_distribution<double> drift(-50.0, 50.0);
  const double t0 = 2.5;
  for (int trial = 0; trial < 100; ++trial) {
    TestWorld world({{coord(rng), coord(rng), 0},
                     {coord(rng), coord(rng), 0},
                     {coord(rng), coord(rng), 0}});
    for (auto& c : world.clocks) c = {offset(rng), drift(rng)};
    world.listeners = {2};
    const double tau = world.timing.response_turnaround;
    const ExchangeResult res = world.exchange(0, 1, -1, t0);

    const double f01 = distance(world.positions[0], world.positions[1]) / kC;
    const double f02 = distance(world.positions[0], world.positions[2]) / kC;
    const double f12 = distance(world.positions[1], world.positions[2]) / kC;
    const ClockModel &ci = world.clocks[0], &cr = world.clocks[1], &cl = world.clocks[2];
    const double t_init_abs = ci.local_time(t0 + 2 * f01 + tau) - ci.local_time(t0);
    const double t_resp_abs = cr.local_time(t0 + f01 + tau) - cr.local_time(t0 + f01);
    const double t_list_abs = cl.local_time(t0 + f01 + tau + f12) - cl.local_time(t0 + f02);

    CHECK(res.record.t_init == doctest::Approx(t_init_abs).epsilon(1e-9));
    CHECK(res.record.t_resp == doctest::Approx(t_resp_abs).epsilon(1e-9));
    REQUIRE(res.record.listeners.size() == 1);
    CHECK(res.record.listeners[0].t_list == doctest::Approx(t_list_abs).epsilon(1e-9));
  }
}

TEST_CASE("capture noise maps to the documented range error spread") {
  TestWorld world({{0, 0, 0}, {20, 0, 0}, {8, 6, 0}});
  world.medium.ranging_noise_sigma = 0.05;
  world.listeners = {2};
  const double rd_truth = distance(world.positions[2], world.positions[1]) -
                          distance(world.positions[2], world.positions[0]);
  const int n = 4000;
  double sum = 0.0, sum_sq = 0.0, rd_sum = 0.0, rd_sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const ExchangeResult res = world.exchange(0, 1);
    const double err = res.tof->distance - 20.0;
    sum += err;
    sum_sq += err * err;
    const double rd_err = res.tdoa[0].range_difference - rd_truth;
    rd_sum += rd_err;
    rd_sum_sq += rd_err * rd_err;
  }
  const double std_tof = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  const double std_rd = std::sqrt(rd_sum_sq / n - (rd_sum / n) * (rd_sum / n));
  CHECK(std::abs(sum / n) < 0.005);
  // Two independent capture-noise draws enter a two-way range; the /2 in the
  // flight-time estimate makes the range spread equal sigma itself.
  CHECK(std_tof == doctest::Approx(0.05).epsilon(0.06));
  // A range difference stacks three independent captures.
  CHECK(std_rd == doctest::Approx(0.05 * std::sqrt(3.0)).epsilon(0.06));
}

TEST_CASE("listeners never transmit and their count does not matter") {
  for (int listener_count : {1, 10, 100}) {
    TestWorld world({{0, 0, 0}, {25, 0, 0}, {12, 9, 0}});
    world.medium.ranging_noise_sigma = 0.1;
    for (int i = 0; i < listener_count; ++i) {
      world.positions.push_back({2.0 + i % 7, 3.0 + i % 5, 0});
      world.clocks.push_back({0.1 * i, 0.0});
      world.listeners.push_back(3 + i);
    }
    const int exchanges = 40;
    std::vector<int> per_listener(world.positions.size(), 0);
    for (int i = 0; i < exchanges; ++i) {
      const ExchangeResult res = world.exchange(0, 1, 2);
      for (const auto& m : res.tdoa) ++per_listener[m.listener];
    }
    for (NodeId l : world.listeners) CHECK(per_listener[l] == exchanges);
    for (const Event& e : world.log.events()) {
      if (e.outcome == EventOutcome::Sent) {
        CHECK(std::find(world.listeners.begin(), world.listeners.end(), e.node) ==
              world.listeners.end());
      }
    }
  }
}

TEST_CASE("a lost acknowledgement retransmits the data frame") {
  // Hunt a seed where the poll/response leg survives but exactly one ack
  // times out; the exchange must then carry one extra data transmission.
  bool found = false;
  for (std::uint64_t seed = 0; seed < 2000 && !found; ++seed) {
    TestWorld world({{0, 0, 0}, {15, 0, 0}, {7, 5, 0}});
    world.medium.loss_probability = 0.3;
    world.rng.seed(seed);
    const ExchangeResult res = world.exchange(0, 1, 2);
    if (res.failed || !res.record.complete) continue;
    if (count_events(world.log, EventKind::Ack, EventOutcome::Timeout) != 1) continue;
    CHECK(count_events(world.log, EventKind::Data, EventOutcome::Sent) == 2);
    CHECK(count_events(world.log, EventKind::Ack, EventOutcome::Sent) >= 1);
    found = true;
  }
  CHECK(found);
}

TEST_CASE("a listener missing the data frame yields no measurement") {
  // With loss present, some exchanges complete while a listener missed every
  // data copy; those must produce captures without measurements, never a
  // fabricated range difference.
  int complete_without_measurement = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    TestWorld world({{0, 0, 0}, {15, 0, 0}, {7, 5, 0}});
    world.medium.loss_probability = 0.45;
    world.timing.max_retries = 0;
    world.rng.seed(seed);
    world.listeners = {2};
    const ExchangeResult res = world.exchange(0, 1, -1);
    if (res.failed) {
      CHECK(res.tdoa.empty());
      continue;
    }
    for (const auto& capture : res.record.listeners) {
      if (!capture.has_data) ++complete_without_measurement;
    }
    CHECK(res.tdoa.size() <= 1);
  }
  CHECK(complete_without_measurement > 0);
}

TEST_CASE("event log serializes one json object per line") {
  TestWorld world({{0, 0, 0}, {10, 0, 0}});
  world.exchange(0, 1);
  std::ostringstream out;
  world.log.write_ndjson(out);
  const std::string text = out.str();
  CHECK(text.find(R"("kind":"poll","outcome":"sent")") != std::string::npos);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == static_cast<int>(world.log.events().size()));
}
