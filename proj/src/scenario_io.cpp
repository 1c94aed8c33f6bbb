#include "uwb/scenario_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace uwb {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path.empty() ? what : path + ": " + what);
}

void reject_unknown_keys(const json& j, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* name : allowed) known = known || key == name;
    if (!known) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

Eigen::Vector2d point_at(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected [x, y]");
  return {number_at(j[0], path + "[0]"), number_at(j[1], path + "[1]")};
}

std::vector<Eigen::Vector2d> point_list_at(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of [x, y] points");
  std::vector<Eigen::Vector2d> points;
  for (std::size_t i = 0; i < j.size(); ++i) {
    points.push_back(point_at(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return points;
}

template <typename T>
void read_field(const json& j, const std::string& path, const char* key, T& value) {
  if (!j.contains(key)) return;
  const json& field = j.at(key);
  const std::string field_path = path.empty() ? key : path + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!field.is_boolean()) fail(field_path, "expected a boolean");
    value = field.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!field.is_string()) fail(field_path, "expected a string");
    value = field.get<std::string>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!field.is_number_integer()) fail(field_path, "expected an integer");
    value = field.get<T>();
  } else {
    if (!field.is_number()) fail(field_path, "expected a number");
    value = field.get<double>();
  }
}

void read_range(const json& j, const std::string& path, const char* key,
                std::array<double, 2>& range) {
  if (!j.contains(key)) return;
  const json& field = j.at(key);
  const std::string field_path = path + "." + key;
  if (!field.is_array() || field.size() != 2) fail(field_path, "expected [low, high]");
  range = {number_at(field[0], field_path + "[0]"), number_at(field[1], field_path + "[1]")};
}

Trajectory parse_trajectory(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a trajectory object");
  std::string type;
  read_field(j, path, "type", type);
  if (type.empty()) fail(path + ".type", "missing trajectory type");
  if (type == "static") {
    reject_unknown_keys(j, path, {"type", "at"});
    if (!j.contains("at")) fail(path + ".at", "missing point");
    return StaticTrajectory{point_at(j.at("at"), path + ".at")};
  }
  if (type == "line") {
    reject_unknown_keys(j, path, {"type", "from", "to", "speed", "dwell"});
    if (!j.contains("from") || !j.contains("to")) fail(path, "line needs from and to");
    LineTrajectory line;
    line.from = point_at(j.at("from"), path + ".from");
    line.to = point_at(j.at("to"), path + ".to");
    read_field(j, path, "speed", line.speed);
    read_field(j, path, "dwell", line.dwell);
    return line;
  }
  if (type == "rectangle") {
    reject_unknown_keys(j, path, {"type", "corners", "speed", "dwell"});
    if (!j.contains("corners")) fail(path + ".corners", "missing corner list");
    RectangleTrajectory rect;
    rect.corners = point_list_at(j.at("corners"), path + ".corners");
    read_field(j, path, "speed", rect.speed);
    read_field(j, path, "dwell", rect.dwell);
    return rect;
  }
  if (type == "waypoints") {
    reject_unknown_keys(j, path, {"type", "points", "speed", "dwell"});
    if (!j.contains("points")) fail(path + ".points", "missing point list");
    WaypointTrajectory way;
    way.points = point_list_at(j.at("points"), path + ".points");
    read_field(j, path, "speed", way.speed);
    read_field(j, path, "dwell", way.dwell);
    return way;
  }
  fail(path + ".type", "unknown trajectory type: " + type);
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario root must be a JSON object");
  reject_unknown_keys(j, "",
                      {"version", "name", "mode", "dimension", "duration", "timestep", "seed",
                       "focus", "smoothing_alpha", "tracking", "nodes", "allocation", "medium",
                       "clocks", "protocol", "record_cost_reports"});
  if (!j.contains("version")) throw ConfigError("version: required field is missing");
  Scenario sc;
  read_field(j, "", "version", sc.version);
  read_field(j, "", "name", sc.name);
  read_field(j, "", "duration", sc.duration);
  read_field(j, "", "timestep", sc.timestep);
  read_field(j, "", "seed", sc.seed);
  read_field(j, "", "focus", sc.focus);
  read_field(j, "", "smoothing_alpha", sc.smoothing_alpha);
  read_field(j, "", "record_cost_reports", sc.record_cost_reports);

  std::string text;
  read_field(j, "", "mode", text);
  if (!text.empty()) {
    if (text == "tof_only") sc.mode = Mode::TofOnly;
    else if (text == "tdoa_fixed") sc.mode = Mode::TdoaFixed;
    else if (text == "dynamic") sc.mode = Mode::Dynamic;
    else fail("mode", "unknown mode: " + text);
  }
  text.clear();
  read_field(j, "", "dimension", text);
  if (!text.empty()) {
    if (text == "planar") sc.dimension = Dimension::Planar;
    else if (text == "spatial") sc.dimension = Dimension::Spatial;
    else fail("dimension", "unknown dimension: " + text);
  }
  text.clear();
  read_field(j, "", "tracking", text);
  if (!text.empty()) {
    if (text == "path") sc.tracking = TrackingReference::Path;
    else if (text == "setpoint") sc.tracking = TrackingReference::Setpoint;
    else fail("tracking", "unknown tracking reference: " + text);
  }

  if (!j.contains("nodes") || !j.at("nodes").is_array()) {
    throw ConfigError("nodes: required array is missing");
  }
  const json& nodes = j.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const json& node_json = nodes[i];
    if (!node_json.is_object()) fail(path, "expected a node object");
    reject_unknown_keys(node_json, path, {"id", "z", "trajectory"});
    NodeSpec node;
    node.id = static_cast<NodeId>(i);
    read_field(node_json, path, "id", node.id);
    read_field(node_json, path, "z", node.z);
    if (!node_json.contains("trajectory")) fail(path + ".trajectory", "missing trajectory");
    node.trajectory = parse_trajectory(node_json.at("trajectory"), path + ".trajectory");
    sc.nodes.push_back(std::move(node));
  }

  if (j.contains("allocation")) {
    const json& a = j.at("allocation");
    reject_unknown_keys(a, "allocation",
                        {"k", "min_frequency", "pair_rate", "hysteresis_margin",
                         "enumeration_budget"});
    read_field(a, "allocation", "k", sc.allocation.k);
    read_field(a, "allocation", "min_frequency", sc.allocation.min_frequency);
    read_field(a, "allocation", "pair_rate", sc.allocation.pair_rate);
    read_field(a, "allocation", "hysteresis_margin", sc.allocation.hysteresis_margin);
    read_field(a, "allocation", "enumeration_budget", sc.allocation.enumeration_budget);
  }
  if (j.contains("medium")) {
    const json& m = j.at("medium");
    reject_unknown_keys(m, "medium",
                        {"propagation_speed", "ranging_noise_sigma", "loss_probability"});
    read_field(m, "medium", "propagation_speed", sc.medium.propagation_speed);
    read_field(m, "medium", "ranging_noise_sigma", sc.medium.ranging_noise_sigma);
    read_field(m, "medium", "loss_probability", sc.medium.loss_probability);
  }
  if (j.contains("clocks")) {
    const json& c = j.at("clocks");
    reject_unknown_keys(c, "clocks", {"offset_range", "drift_range_ppm"});
    read_range(c, "clocks", "offset_range", sc.clocks.offset_range);
    read_range(c, "clocks", "drift_range_ppm", sc.clocks.drift_range_ppm);
  }
  if (j.contains("protocol")) {
    const json& p = j.at("protocol");
    reject_unknown_keys(p, "protocol",
                        {"response_turnaround", "ack_timeout", "max_retries", "double_sided",
                         "role_change_slots"});
    read_field(p, "protocol", "response_turnaround", sc.protocol.response_turnaround);
    read_field(p, "protocol", "ack_timeout", sc.protocol.ack_timeout);
    read_field(p, "protocol", "max_retries", sc.protocol.max_retries);
    read_field(p, "protocol", "double_sided", sc.protocol.double_sided);
    read_field(p, "protocol", "role_change_slots", sc.protocol.role_change_slots);
  }
  return sc;
}

// Splits "nodes[2].trajectory.speed" into object keys and array indices and
// returns a pointer to the (created-on-demand) target slot.
json* resolve_path(json& root, const std::string& path) {
  json* cursor = &root;
  std::size_t pos = 0;
  while (pos < path.size()) {
    std::size_t end = path.find_first_of(".[", pos);
    if (end == std::string::npos) end = path.size();
    const std::string key = path.substr(pos, end - pos);
    if (!key.empty()) {
      if (!cursor->is_object() && !cursor->is_null()) {
        throw ConfigError("override path '" + path + "' descends into a non-object");
      }
      cursor = &(*cursor)[key];
    }
    pos = end;
    while (pos < path.size() && path[pos] == '[') {
      const std::size_t close = path.find(']', pos);
      if (close == std::string::npos) throw ConfigError("unclosed '[' in override: " + path);
      const std::string index_text = path.substr(pos + 1, close - pos - 1);
      std::size_t parsed = 0;
      int index = 0;
      try {
        index = std::stoi(index_text, &parsed);
      } catch (const std::exception&) {
        parsed = 0;
      }
      if (parsed != index_text.size() || index < 0) {
        throw ConfigError("bad array index in override: " + path);
      }
      if (!cursor->is_array() && !cursor->is_null()) {
        throw ConfigError("override path '" + path + "' indexes a non-array");
      }
      cursor = &(*cursor)[static_cast<std::size_t>(index)];
      pos = close + 1;
    }
    if (pos < path.size() && path[pos] == '.') ++pos;
  }
  return cursor;
}

void apply_override(json& root, const std::string& entry) {
  const std::size_t eq = entry.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like path=value: " + entry);
  }
  const std::string path = entry.substr(0, eq);
  const std::string value_text = entry.substr(eq + 1);
  json value = json::parse(value_text, nullptr, false);
  if (value.is_discarded()) value = value_text;  // bare strings need no quotes
  *resolve_path(root, path) = std::move(value);
}

json parse_with_location(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; recover line and column for the message.
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream message;
    message << "JSON parse error at line " << line << ", column " << column;
    throw ConfigError(message.str());
  }
}

json point_json(const Eigen::Vector2d& p) { return json::array({p.x(), p.y()}); }

json trajectory_json(const Trajectory& trajectory) {
  return std::visit(
      [](const auto& traj) -> json {
        using T = std::decay_t<decltype(traj)>;
        if constexpr (std::is_same_v<T, StaticTrajectory>) {
          return {{"type", "static"}, {"at", point_json(traj.at)}};
        } else if constexpr (std::is_same_v<T, LineTrajectory>) {
          return {{"type", "line"},   {"from", point_json(traj.from)},
                  {"to", point_json(traj.to)}, {"speed", traj.speed},
                  {"dwell", traj.dwell}};
        } else if constexpr (std::is_same_v<T, RectangleTrajectory>) {
          json corners = json::array();
          for (const auto& c : traj.corners) corners.push_back(point_json(c));
          return {{"type", "rectangle"}, {"corners", corners}, {"speed", traj.speed},
                  {"dwell", traj.dwell}};
        } else {
          json points = json::array();
          for (const auto& p : traj.points) points.push_back(point_json(p));
          return {{"type", "waypoints"}, {"points", points}, {"speed", traj.speed},
                  {"dwell", traj.dwell}};
        }
      },
      trajectory);
}

}  // namespace

Scenario parse_scenario_text(const std::string& text, const std::vector<std::string>& overrides) {
  json j = parse_with_location(text);
  for (const std::string& entry : overrides) apply_override(j, entry);
  return scenario_from_json(j);
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str(), overrides);
}

std::string scenario_to_json(const Scenario& sc) {
  json nodes = json::array();
  for (const NodeSpec& node : sc.nodes) {
    nodes.push_back(
        {{"id", node.id}, {"z", node.z}, {"trajectory", trajectory_json(node.trajectory)}});
  }
  const json j = {
      {"version", sc.version},
      {"name", sc.name},
      {"mode", to_string(sc.mode)},
      {"dimension", sc.dimension == Dimension::Planar ? "planar" : "spatial"},
      {"duration", sc.duration},
      {"timestep", sc.timestep},
      {"seed", sc.seed},
      {"focus", sc.focus},
      {"smoothing_alpha", sc.smoothing_alpha},
      {"tracking", sc.tracking == TrackingReference::Path ? "path" : "setpoint"},
      {"record_cost_reports", sc.record_cost_reports},
      {"nodes", nodes},
      {"allocation",
       {{"k", sc.allocation.k},
        {"min_frequency", sc.allocation.min_frequency},
        {"pair_rate", sc.allocation.pair_rate},
        {"hysteresis_margin", sc.allocation.hysteresis_margin},
        {"enumeration_budget", sc.allocation.enumeration_budget}}},
      {"medium",
       {{"propagation_speed", sc.medium.propagation_speed},
        {"ranging_noise_sigma", sc.medium.ranging_noise_sigma},
        {"loss_probability", sc.medium.loss_probability}}},
      {"clocks",
       {{"offset_range", {sc.clocks.offset_range[0], sc.clocks.offset_range[1]}},
        {"drift_range_ppm", {sc.clocks.drift_range_ppm[0], sc.clocks.drift_range_ppm[1]}}}},
      {"protocol",
       {{"response_turnaround", sc.protocol.response_turnaround},
        {"ack_timeout", sc.protocol.ack_timeout},
        {"max_retries", sc.protocol.max_retries},
        {"double_sided", sc.protocol.double_sided},
        {"role_change_slots", sc.protocol.role_change_slots}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace uwb
