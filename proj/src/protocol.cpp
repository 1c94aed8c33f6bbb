#include "uwb/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace uwb {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Poll: return "poll";
    case EventKind::Response: return "response";
    case EventKind::Data: return "data";
    case EventKind::Ack: return "ack";
    case EventKind::Exchange: return "exchange";
    case EventKind::Cycle: return "cycle";
    case EventKind::RoleChange: return "role_change";
  }
  return "?";
}

const char* to_string(EventOutcome outcome) {
  switch (outcome) {
    case EventOutcome::Sent: return "sent";
    case EventOutcome::Lost: return "lost";
    case EventOutcome::Timeout: return "timeout";
    case EventOutcome::Failed: return "failed";
    case EventOutcome::Complete: return "complete";
    case EventOutcome::Applied: return "applied";
  }
  return "?";
}

void EventLog::write_ndjson(std::ostream& out) const {
  char line[160];
  for (const Event& e : events_) {
    std::snprintf(line, sizeof(line), R"({"t":%.9f,"node":%d,"kind":"%s","outcome":"%s"})",
                  e.t, e.node, to_string(e.kind), to_string(e.outcome));
    out << line << '\n';
  }
}

TofResult compute_tof(const ExchangeRecord& record) {
  const double tof = 0.5 * (record.t_init - record.t_resp);
  if (tof < 0.0) return {0.0, true};
  return {tof, false};
}

std::optional<double> compute_tdoa(const ExchangeRecord& record, NodeId listener, double tof) {
  const auto it = std::find_if(record.listeners.begin(), record.listeners.end(),
                               [listener](const ListenerCapture& c) { return c.listener == listener; });
  if (it == record.listeners.end()) return std::nullopt;
  return it->t_list - record.t_resp - tof;
}

double cycle_frequency(int active_count, double pair_rate) {
  if (active_count < 2) throw ConfigError("cycle frequency needs at least two active nodes");
  if (pair_rate <= 0.0) throw ConfigError("pair rate must be positive");
  return pair_rate / (active_count * (active_count - 1) / 2);
}

ScheduleState make_schedule(std::span<const NodeId> active_sorted) {
  if (active_sorted.size() < 2) throw ConfigError("schedule needs at least two active nodes");
  ScheduleState state;
  for (std::size_t i = 0; i < active_sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < active_sorted.size(); ++j) {
      state.pair_sequence.emplace_back(active_sorted[i], active_sorted[j]);
    }
  }
  return state;
}

std::pair<NodeId, NodeId> current_pair(const ScheduleState& state) {
  return state.pair_sequence[state.cursor];
}

NodeId next_initiator(const ScheduleState& state) {
  return state.pair_sequence[(state.cursor + 1) % state.pair_sequence.size()].first;
}

bool advance_schedule(ScheduleState& state, bool exchange_failed) {
  if (exchange_failed) ++state.failed_exchanges;
  state.cursor = (state.cursor + 1) % state.pair_sequence.size();
  if (state.cursor == 0) {
    ++state.completed_cycles;
    return true;
  }
  return false;
}

namespace {

struct ListenerState {
  NodeId id = -1;
  bool got_poll = false;
  bool captured = false;  // poll and response heard on the completing attempt
  bool got_data = false;
  double poll_noise = 0.0;    // s
  double t_list_true = 0.0;   // s, interval between its two receptions
  double stamp_noise = 0.0;   // s, net capture noise on the interval
};

}  // namespace

ExchangeResult run_twr_exchange(NodeId initiator, NodeId responder, const ExchangeContext& ctx) {
  const double speed = ctx.medium.propagation_speed;
  const double sigma_t = ctx.medium.ranging_noise_sigma / speed;
  const double tau = ctx.timing.response_turnaround;
  std::normal_distribution<double> capture_noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto noisy = [&]() { return sigma_t > 0.0 ? sigma_t * capture_noise(*ctx.rng) : 0.0; };
  auto delivered = [&]() {
    return ctx.medium.loss_probability <= 0.0 || unit(*ctx.rng) >= ctx.medium.loss_probability;
  };
  auto log = [&](double t, NodeId node, EventKind kind, EventOutcome outcome) {
    if (ctx.log) ctx.log->append(t, node, kind, outcome);
  };

  const Position& pi = ctx.positions[initiator];
  const Position& pr = ctx.positions[responder];
  const double d_ir = distance(pi, pr);
  const double flight_ir = d_ir / speed;

  ExchangeResult result;
  ExchangeRecord& rec = result.record;
  rec.initiator = initiator;
  rec.responder = responder;
  rec.slot_time = ctx.slot_time;

  std::vector<ListenerState> listeners;
  listeners.reserve(ctx.listeners.size());
  for (NodeId l : ctx.listeners) listeners.push_back({l});

  int retries = 0;
  bool ranging_done = false;
  double response_rx_time = 0.0;  // simulation time the initiator saw the response

  // Poll/response phase. A miss at either end times the initiator out and the
  // attempt restarts from the poll; every restart consumes one retry. Listener
  // captures are kept only for the attempt that completes the exchange.
  while (!ranging_done) {
    const double t0 = ctx.slot_time + retries * ctx.timing.ack_timeout;
    for (auto& l : listeners) l.got_poll = l.captured = false;

    log(t0, initiator, EventKind::Poll, EventOutcome::Sent);
    const double poll_tx_noise = noisy();
    const bool responder_got_poll = delivered();
    double responder_poll_noise = 0.0;
    if (responder_got_poll) {
      responder_poll_noise = noisy();
    } else {
      log(t0 + flight_ir, responder, EventKind::Poll, EventOutcome::Lost);
    }
    for (auto& l : listeners) {
      if ((l.got_poll = delivered())) l.poll_noise = noisy();
    }

    if (responder_got_poll) {
      const double t_response_tx = t0 + flight_ir + tau;
      log(t_response_tx, responder, EventKind::Response, EventOutcome::Sent);
      const double responder_tx_noise = noisy();
      const bool initiator_got_response = delivered();
      double response_rx_noise = 0.0;
      if (initiator_got_response) {
        response_rx_noise = noisy();
      } else {
        log(t_response_tx + flight_ir, initiator, EventKind::Response, EventOutcome::Lost);
      }
      for (auto& l : listeners) {
        if (!delivered()) continue;
        const double noise = noisy();
        if (!l.got_poll) continue;
        const Position& pl = ctx.positions[l.id];
        l.captured = true;
        l.t_list_true = flight_ir + tau + (distance(pr, pl) - distance(pi, pl)) / speed;
        l.stamp_noise = noise - l.poll_noise;
      }
      if (initiator_got_response) {
        rec.t_init = ctx.clocks[initiator].local_duration(2.0 * flight_ir + tau) +
                     response_rx_noise - poll_tx_noise;
        rec.t_resp = ctx.clocks[responder].local_duration(tau) + responder_tx_noise -
                     responder_poll_noise;
        response_rx_time = t_response_tx + flight_ir;
        ranging_done = true;
        for (const auto& l : listeners) {
          if (l.captured) {
            rec.listeners.push_back(
                {l.id, ctx.clocks[l.id].local_duration(l.t_list_true) + l.stamp_noise, false});
          }
        }
        break;
      }
    }

    log(t0 + ctx.timing.ack_timeout, initiator, EventKind::Response, EventOutcome::Timeout);
    if (++retries > ctx.timing.max_retries) {
      rec.retries = retries - 1;
      result.failed = true;
      log(ctx.slot_time, initiator, EventKind::Exchange, EventOutcome::Failed);
      return result;
    }
  }

  const TofResult tof = compute_tof(rec);
  result.tof = TofMeasurement{initiator, responder, tof.tof * speed, ctx.slot_time, tof.clamped};

  // Data/ack handoff. The acknowledgement comes from the next scheduled
  // initiator; until it lands the data frame is retransmitted, giving
  // listeners repeated chances to catch the measured range.
  bool handoff_done = ctx.ack_sender < 0 || ctx.ack_sender == initiator;
  double t_data_tx = response_rx_time + tau;
  while (true) {
    log(t_data_tx, initiator, EventKind::Data, EventOutcome::Sent);
    bool ack_sender_got_data = false;
    if (!handoff_done) {
      ack_sender_got_data = delivered();
      if (!ack_sender_got_data) {
        log(t_data_tx + distance(pi, ctx.positions[ctx.ack_sender]) / speed, ctx.ack_sender,
            EventKind::Data, EventOutcome::Lost);
      }
    }
    for (auto& l : listeners) {
      if (!l.got_data && delivered()) l.got_data = true;
    }
    if (handoff_done) break;

    if (ack_sender_got_data) {
      const double flight_an = distance(pi, ctx.positions[ctx.ack_sender]) / speed;
      const double t_ack_tx = t_data_tx + flight_an + tau;
      log(t_ack_tx, ctx.ack_sender, EventKind::Ack, EventOutcome::Sent);
      if (delivered()) {
        handoff_done = true;
        break;
      }
      log(t_ack_tx + flight_an, initiator, EventKind::Ack, EventOutcome::Lost);
    }
    log(t_data_tx + ctx.timing.ack_timeout, initiator, EventKind::Ack, EventOutcome::Timeout);
    if (++retries > ctx.timing.max_retries) {
      log(ctx.slot_time, initiator, EventKind::Data, EventOutcome::Failed);
      break;
    }
    t_data_tx += ctx.timing.ack_timeout;
  }

  rec.retries = retries;
  rec.complete = handoff_done;

  for (const auto& l : listeners) {
    if (!l.got_data) continue;
    auto it = std::find_if(rec.listeners.begin(), rec.listeners.end(),
                           [&](const ListenerCapture& c) { return c.listener == l.id; });
    if (it == rec.listeners.end()) continue;
    it->has_data = true;
    const auto tdoa = compute_tdoa(rec, l.id, tof.tof);
    result.tdoa.push_back({l.id, initiator, responder, *tdoa * speed, ctx.slot_time});
  }
  return result;
}

}  // namespace uwb
