#pragma once

#include "uwb/core.hpp"

#include <optional>
#include <ostream>
#include <random>
#include <utility>

namespace uwb {

/// Shared radio medium. Noise is injected on timestamp captures as additive
/// Gaussian with sigma = ranging_noise_sigma / propagation_speed, which makes
/// the two-way range error standard deviation equal ranging_noise_sigma.
struct MediumModel {
  double propagation_speed = kSpeedOfLight;  // m/s
  double ranging_noise_sigma = 0.0;          // m
  double loss_probability = 0.0;             // per message per receiver
};

struct ProtocolTiming {
  double response_turnaround = 400e-9;  // s, reply processing delay at a node
  double ack_timeout = 50e-6;           // s, wait before a retransmission
  int max_retries = 3;                  // extra transmissions per exchange
  bool double_sided = false;            // average two mirrored exchanges per pair
  int role_change_slots = 1;            // message slots consumed by a role broadcast
};

enum class EventKind : std::uint8_t {
  Poll,
  Response,
  Data,
  Ack,
  Exchange,
  Cycle,
  RoleChange,
};

enum class EventOutcome : std::uint8_t {
  Sent,
  Lost,     // delivery miss, attributed to the receiver
  Timeout,
  Failed,
  Complete,
  Applied,
};

const char* to_string(EventKind kind);
const char* to_string(EventOutcome outcome);

struct Event {
  double t = 0.0;
  NodeId node = -1;
  EventKind kind = EventKind::Poll;
  EventOutcome outcome = EventOutcome::Sent;
};

/// Append-only transmission/outcome trace. Transmissions are the Sent entries;
/// passive listeners must never appear in one.
class EventLog {
 public:
  void append(double t, NodeId node, EventKind kind, EventOutcome outcome) {
    events_.push_back({t, node, kind, outcome});
  }
  const std::vector<Event>& events() const { return events_; }
  void write_ndjson(std::ostream& out) const;

 private:
  std::vector<Event> events_;
};

/// Local-clock durations observed during one poll/response/data exchange.
/// t_init spans poll emission to response reception at the initiator; t_resp is
/// the responder's turnaround; each listener's t_list spans its poll reception
/// to its response reception. All are durations on a single clock, so clock
/// offsets never enter.
struct ListenerCapture {
  NodeId listener = -1;
  double t_list = 0.0;
  bool has_data = false;  // caught the data frame carrying the measured range
};

struct ExchangeRecord {
  NodeId initiator = -1;
  NodeId responder = -1;
  double t_init = 0.0;  // s
  double t_resp = 0.0;  // s
  std::vector<ListenerCapture> listeners;
  double slot_time = 0.0;  // s, simulation time of the slot start
  bool complete = false;
  int retries = 0;
};

struct TofResult {
  double tof = 0.0;  // s
  bool clamped = false;
};

/// Single-sided two-way time of flight: (t_init - t_resp) / 2, clamped at zero.
TofResult compute_tof(const ExchangeRecord& record);

/// Listener time-difference of arrival: t_list - t_resp - tof. Empty when the
/// listener holds no capture for this exchange.
std::optional<double> compute_tdoa(const ExchangeRecord& record, NodeId listener, double tof);

/// Full-cycle update rate for k active nodes ranging pairwise at pair_rate
/// exchanges per second: pair_rate / C(k, 2).
double cycle_frequency(int active_count, double pair_rate);

/// Round-robin over every unordered pair of the active set, one pair per slot.
/// The cursor advances regardless of the exchange outcome, so a lossy medium
/// can never stall the schedule.
struct ScheduleState {
  std::vector<std::pair<NodeId, NodeId>> pair_sequence;
  std::size_t cursor = 0;
  std::int64_t completed_cycles = 0;
  std::int64_t failed_exchanges = 0;
};

ScheduleState make_schedule(std::span<const NodeId> active_sorted);

/// Next pair to range, and the node that acknowledges the current exchange
/// (the initiator of the following pair).
std::pair<NodeId, NodeId> current_pair(const ScheduleState& state);
NodeId next_initiator(const ScheduleState& state);

/// Advances the cursor; returns true when a full cycle just completed.
bool advance_schedule(ScheduleState& state, bool exchange_failed);

struct ExchangeContext {
  std::span<const Position> positions;  // indexed by NodeId, snapshot geometry
  std::span<const ClockModel> clocks;   // indexed by NodeId
  MediumModel medium;
  ProtocolTiming timing;
  std::span<const NodeId> listeners;  // sorted; passive receivers for this slot
  NodeId ack_sender = -1;             // next initiator; -1 suppresses the ack leg
  double slot_time = 0.0;
  std::mt19937_64* rng = nullptr;
  EventLog* log = nullptr;  // optional
};

struct ExchangeResult {
  ExchangeRecord record;
  std::optional<TofMeasurement> tof;
  std::vector<TdoaMeasurement> tdoa;
  bool failed = false;  // poll/response never completed within the retry budget
};

/// Simulates one ranging slot: poll, response, data, ack, with per-receiver
/// message loss and bounded retransmission. Produces the initiator's range
/// measurement and one range-difference measurement per listener that captured
/// poll, response, and data frames.
ExchangeResult run_twr_exchange(NodeId initiator, NodeId responder, const ExchangeContext& ctx);

}  // namespace uwb
