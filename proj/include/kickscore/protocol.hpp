#pragma once

// Console protocol: newline-delimited JSON objects over TCP.
//
// Engine to console (every message carries "seq"):
//   ScoreEvent    {event_id, athlete, label, display, points, confidence, zone, status, t, reason, resolved}
//   Referral      {event_id, athlete, ai_label, provisional_points, confidence, zone, t, top3: [{label, score}]}
//   MatchSnapshot {scores: [blue, red], names, mode, round}
//   HelloAck      {role}
//   Error         {code, message}
// Console to engine:
//   Hello         {role: "Viewer" | "Referee", token}
//   Resolution    {event_id, resolution: "AcceptAI" | "OverrideLabel" | "NoScore", label}
//   ModeChange    {mode: "Proposed" | "CurrentWT"}
// Unknown fields are ignored.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "kickscore/error.hpp"
#include "kickscore/scoring.hpp"

namespace kickscore::protocol {

using nlohmann::json;

enum class Role : std::uint8_t { Viewer, Referee };

constexpr std::string_view to_string(Role r) noexcept { return r == Role::Referee ? "Referee" : "Viewer"; }

inline json score_event(const scoring::LogEntry& e) {
  const auto& d = e.decision;
  json j{{"type", "ScoreEvent"},
         {"event_id", d.event_id},
         {"athlete", d.athlete_id},
         {"label", std::string(to_string(d.label))},
         {"display", std::string(display_name(d.label))},
         {"points", e.awarded()},
         {"confidence", d.confidence},
         {"zone", std::string(to_string(d.zone))},
         {"status", std::string(to_string(d.status))},
         {"t", static_cast<double>(d.event_us) * 1e-6},
         {"reason", d.reason},
         {"resolved", e.resolution.has_value()}};
  if (e.resolution) {
    const auto& r = *e.resolution;
    j["resolution"] = std::string(to_string(r.resolution.kind));
    if (r.resolution.kind == scoring::ResolutionKind::OverrideLabel) {
      j["label"] = std::string(to_string(r.resolution.label));
      j["display"] = std::string(display_name(r.resolution.label));
    }
  }
  return j;
}

inline json referral(const scoring::ScoreDecision& d) {
  json top = json::array();
  for (const auto& s : d.top3) top.push_back({{"label", std::string(to_string(s.label))}, {"score", s.score}});
  return {{"type", "Referral"},
          {"event_id", d.event_id},
          {"athlete", d.athlete_id},
          {"ai_label", std::string(to_string(d.label))},
          {"provisional_points", d.provisional_points},
          {"confidence", d.confidence},
          {"zone", std::string(to_string(d.zone))},
          {"t", static_cast<double>(d.event_us) * 1e-6},
          {"top3", top}};
}

inline json snapshot(const scoring::MatchState& m) {
  const auto& a = m.athletes();
  return {{"type", "MatchSnapshot"},
          {"scores", {a[0].score, a[1].score}},
          {"names", {a[0].name, a[1].name}},
          {"mode", std::string(to_string(m.mode()))},
          {"round", m.round()},
          {"events", m.log().size()}};
}

inline json error_message(ErrorCode code, const std::string& message) {
  return {{"type", "Error"}, {"code", std::string(to_string(code))}, {"message", message}};
}

inline std::string line(json j, std::uint64_t seq) {
  j["seq"] = seq;
  return j.dump() + "\n";
}

// ---------------------------------------------------------------------------
// Inbound

struct Hello {
  Role role = Role::Viewer;
  std::string token;
};
struct ResolutionMsg {
  std::uint64_t event_id = 0;
  scoring::Resolution resolution;
};
struct ModeChange {
  scoring::RubricMode mode = scoring::RubricMode::Proposed;
};

using Inbound = std::variant<Hello, ResolutionMsg, ModeChange>;

/// Throws InvalidConfig on malformed or unknown messages.
inline Inbound parse_inbound(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw Error(ErrorCode::InvalidConfig, "message needs a string \"type\"");
  const auto type = j["type"].get<std::string>();
  try {
    if (type == "Hello") {
      Hello h;
      const auto role = j.value("role", std::string("Viewer"));
      if (role == "Referee") h.role = Role::Referee;
      else if (role != "Viewer") throw Error(ErrorCode::InvalidConfig, "unknown role " + role);
      h.token = j.value("token", std::string());
      return h;
    }
    if (type == "Resolution") {
      ResolutionMsg r;
      r.event_id = j.at("event_id").get<std::uint64_t>();
      const auto kind = j.at("resolution").get<std::string>();
      if (kind == "AcceptAI") r.resolution.kind = scoring::ResolutionKind::AcceptAI;
      else if (kind == "NoScore") r.resolution.kind = scoring::ResolutionKind::NoScore;
      else if (kind == "OverrideLabel") {
        r.resolution.kind = scoring::ResolutionKind::OverrideLabel;
        const auto l = label_from_string(j.at("label").get<std::string>());
        if (!l) throw Error(ErrorCode::InvalidConfig, "unknown label " + j["label"].get<std::string>());
        r.resolution.label = *l;
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown resolution " + kind);
      }
      return r;
    }
    if (type == "ModeChange") {
      const auto m = scoring::mode_from_string(j.at("mode").get<std::string>());
      if (!m) throw Error(ErrorCode::InvalidConfig, "unknown mode " + j["mode"].get<std::string>());
      return ModeChange{*m};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, type + ": " + e.what());
  }
  throw Error(ErrorCode::InvalidConfig, "unknown message type " + type);
}

inline std::string hello(Role role, const std::string& token = {}) {
  json j{{"type", "Hello"}, {"role", std::string(to_string(role))}};
  if (!token.empty()) j["token"] = token;
  return j.dump() + "\n";
}

inline std::string resolution(std::uint64_t event_id, const scoring::Resolution& r) {
  json j{{"type", "Resolution"}, {"event_id", event_id}, {"resolution", std::string(to_string(r.kind))}};
  if (r.kind == scoring::ResolutionKind::OverrideLabel) j["label"] = std::string(to_string(r.label));
  return j.dump() + "\n";
}

inline std::string mode_change(scoring::RubricMode m) {
  return json{{"type", "ModeChange"}, {"mode", std::string(to_string(m))}}.dump() + "\n";
}

}  // namespace kickscore::protocol
