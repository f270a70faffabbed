#pragma once

// Point decisions: contact validation, rubric lookup under the two rubric
// modes, the low-confidence referral path, and the running match state.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kickscore/error.hpp"
#include "kickscore/features.hpp"
#include "kickscore/labels.hpp"
#include "kickscore/segmentation.hpp"
#include "kickscore/svm.hpp"

namespace kickscore::scoring {

enum class RubricMode : std::uint8_t { Proposed, CurrentWT };

constexpr std::string_view to_string(RubricMode m) noexcept {
  return m == RubricMode::Proposed ? "Proposed" : "CurrentWT";
}

inline std::optional<RubricMode> mode_from_string(std::string_view s) noexcept {
  if (s == "Proposed") return RubricMode::Proposed;
  if (s == "CurrentWT") return RubricMode::CurrentWT;
  return std::nullopt;
}

struct RubricTable {
  /// Technique-keyed points, indexed by TechniqueLabel.
  std::array<int, kLabelCount> proposed{0, 0, 2, 1, 3, 4, 1, 2, 1, 2, 4, 5, 0};
  int wt_body = 2;
  int wt_head = 3;
  int wt_turning_body = 4;
  int wt_turning_head = 5;
  std::vector<TechniqueLabel> wt_turning{TechniqueLabel::BackKick, TechniqueLabel::TornadoKick};

  int proposed_points(TechniqueLabel l) const noexcept { return proposed[index_of(l)]; }

  bool is_turning(TechniqueLabel l) const noexcept {
    return std::find(wt_turning.begin(), wt_turning.end(), l) != wt_turning.end();
  }

  int current_wt_points(TechniqueLabel l, Zone z) const noexcept {
    const bool head = z == Zone::Head;
    if (is_turning(l)) return head ? wt_turning_head : wt_turning_body;
    return head ? wt_head : wt_body;
  }

  /// Zone-only value under CurrentWT, attached to referrals as a provisional score.
  int zone_value(Zone z) const noexcept { return z == Zone::Head ? wt_head : wt_body; }

  int points(TechniqueLabel l, Zone z, RubricMode mode) const noexcept {
    if (l == TechniqueLabel::NoValidKick) return 0;
    return mode == RubricMode::Proposed ? proposed_points(l) : current_wt_points(l, z);
  }

  void validate() const {
    for (int p : proposed)
      if (p < 0) throw Error(ErrorCode::InvalidConfig, "rubric points must be >= 0");
    if (wt_body < 0 || wt_head < 0 || wt_turning_body < 0 || wt_turning_head < 0)
      throw Error(ErrorCode::InvalidConfig, "rubric points must be >= 0");
  }
};

inline nlohmann::json rubric_to_json(const RubricTable& t) {
  nlohmann::json j;
  for (auto l : kAllLabels) j["proposed"][std::string(to_string(l))] = t.proposed_points(l);
  j["current_wt"] = {{"body", t.wt_body},
                     {"head", t.wt_head},
                     {"turning_body", t.wt_turning_body},
                     {"turning_head", t.wt_turning_head}};
  auto& turning = j["current_wt"]["turning"] = nlohmann::json::array();
  for (auto l : t.wt_turning) turning.push_back(std::string(to_string(l)));
  return j;
}

/// Every label must be present in "proposed"; unknown keys are rejected.
inline RubricTable rubric_from_json(const nlohmann::json& j) {
  RubricTable t;
  try {
    const auto& p = j.at("proposed");
    std::array<bool, kLabelCount> seen{};
    for (auto it = p.begin(); it != p.end(); ++it) {
      const auto l = label_from_string(it.key());
      if (!l) throw Error(ErrorCode::InvalidConfig, "unknown label in rubric: " + it.key());
      t.proposed[index_of(*l)] = it.value().get<int>();
      seen[index_of(*l)] = true;
    }
    for (auto l : kAllLabels)
      if (!seen[index_of(l)])
        throw Error(ErrorCode::InvalidConfig, "rubric missing label " + std::string(to_string(l)));
    const auto& w = j.at("current_wt");
    t.wt_body = w.at("body").get<int>();
    t.wt_head = w.at("head").get<int>();
    t.wt_turning_body = w.at("turning_body").get<int>();
    t.wt_turning_head = w.at("turning_head").get<int>();
    t.wt_turning.clear();
    for (const auto& s : w.at("turning")) {
      const auto l = label_from_string(s.get<std::string>());
      if (!l) throw Error(ErrorCode::InvalidConfig, "unknown turning label " + s.get<std::string>());
      t.wt_turning.push_back(*l);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("rubric: ") + e.what());
  }
  t.validate();
  return t;
}

inline RubricTable load_rubric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return rubric_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

struct ScoringConfig {
  double min_valid_force_n = 50.0;
  bool force_bonus_enabled = false;
  double force_bonus_factor = 3.0;
  double confidence_floor = 0.70;

  void validate() const {
    if (!(min_valid_force_n >= 0)) throw Error(ErrorCode::InvalidConfig, "min_valid_force_n must be >= 0");
    if (!(force_bonus_factor > 1)) throw Error(ErrorCode::InvalidConfig, "force_bonus_factor must be > 1");
    if (!(confidence_floor > 0 && confidence_floor < 1))
      throw Error(ErrorCode::InvalidConfig, "confidence_floor must be in (0, 1)");
  }
};

struct Validity {
  bool valid = false;
  Zone zone = Zone::None;
  std::string reason;
};

inline Validity validate_contact(const KickEventWindow& w, const ScoringConfig& cfg) {
  if (!w.contact_present) return {false, Zone::None, "no contact"};
  const Zone zone = window_zone(w.window.contact_events);
  if (zone == Zone::None) return {false, Zone::None, "no contact"};
  if (w.impact_peak_n < cfg.min_valid_force_n) return {false, zone, "below force threshold"};
  return {true, zone, ""};
}

enum class DecisionStatus : std::uint8_t { Scored, NoScore, ReferralToReferee };

constexpr std::string_view to_string(DecisionStatus s) noexcept {
  switch (s) {
    case DecisionStatus::Scored: return "Scored";
    case DecisionStatus::NoScore: return "NoScore";
    case DecisionStatus::ReferralToReferee: return "ReferralToReferee";
  }
  return "?";
}

struct ScoreDecision {
  std::uint64_t event_id = 0;
  std::uint8_t athlete_id = 0;
  std::int64_t event_us = 0;
  TechniqueLabel label = TechniqueLabel::NoValidKick;
  Zone zone = Zone::None;
  int points = 0;
  double confidence = 0.0;
  double impact_n = 0.0;
  RubricMode mode = RubricMode::Proposed;
  DecisionStatus status = DecisionStatus::NoScore;
  std::string reason;
  /// CurrentWT zone value offered to the referee; only set on referrals.
  int provisional_points = 0;
  /// Top alternatives for referrals, highest first.
  std::vector<svm::LabelScore> top3;
};

inline int bonus_points(double force_n, const ScoringConfig& cfg) noexcept {
  return cfg.force_bonus_enabled && force_n >= cfg.force_bonus_factor * cfg.min_valid_force_n ? 1 : 0;
}

inline ScoreDecision decide_score(const svm::Prediction& prediction, const Validity& validity, double force_n,
                                  RubricMode mode, const ScoringConfig& cfg, const RubricTable& rubric = {}) {
  ScoreDecision d;
  d.label = prediction.label;
  d.confidence = prediction.confidence;
  d.zone = validity.zone;
  d.impact_n = force_n;
  d.mode = mode;
  if (!validity.valid) {
    d.status = DecisionStatus::NoScore;
    d.reason = validity.reason;
    return d;
  }
  if (prediction.confidence < cfg.confidence_floor) {
    d.status = DecisionStatus::ReferralToReferee;
    d.reason = "low confidence";
    d.provisional_points = rubric.zone_value(validity.zone);
    d.top3 = prediction.top(3);
    return d;
  }
  if (prediction.label == TechniqueLabel::NoValidKick) {
    d.status = DecisionStatus::NoScore;
    d.reason = "no valid kick";
    return d;
  }
  d.status = DecisionStatus::Scored;
  d.points = rubric.points(prediction.label, validity.zone, mode) + bonus_points(force_n, cfg);
  return d;
}

// ---------------------------------------------------------------------------
// Match state

enum class ResolutionKind : std::uint8_t { AcceptAI, OverrideLabel, NoScore };

constexpr std::string_view to_string(ResolutionKind k) noexcept {
  switch (k) {
    case ResolutionKind::AcceptAI: return "AcceptAI";
    case ResolutionKind::OverrideLabel: return "OverrideLabel";
    case ResolutionKind::NoScore: return "NoScore";
  }
  return "?";
}

struct Resolution {
  ResolutionKind kind = ResolutionKind::AcceptAI;
  TechniqueLabel label = TechniqueLabel::NoValidKick;  // OverrideLabel only
};

struct ResolutionRecord {
  Resolution resolution;
  std::string resolver;
  DecisionStatus prior_status = DecisionStatus::ReferralToReferee;
  TechniqueLabel prior_label = TechniqueLabel::NoValidKick;
  int points = 0;
};

struct LogEntry {
  ScoreDecision decision;
  std::optional<ResolutionRecord> resolution;

  int awarded() const noexcept {
    if (resolution) return resolution->points;
    return decision.status == DecisionStatus::Scored ? decision.points : 0;
  }
};

struct Athlete {
  std::uint8_t id = 0;
  std::string name;
  int score = 0;
};

class MatchState {
 public:
  MatchState(RubricMode mode = RubricMode::Proposed, RubricTable rubric = {}, ScoringConfig cfg = {})
      : mode_(mode), rubric_(std::move(rubric)), cfg_(cfg) {
    athletes_[0] = {0, "Blue", 0};
    athletes_[1] = {1, "Red", 0};
  }

  RubricMode mode() const noexcept { return mode_; }
  void set_mode(RubricMode m) noexcept { mode_ = m; }
  int round() const noexcept { return round_; }
  void set_round(int r) noexcept { round_ = r; }
  const RubricTable& rubric() const noexcept { return rubric_; }
  const ScoringConfig& config() const noexcept { return cfg_; }
  const std::array<Athlete, 2>& athletes() const noexcept { return athletes_; }
  const std::vector<LogEntry>& log() const noexcept { return log_; }
  void set_name(std::uint8_t athlete, std::string name) { athletes_.at(athlete).name = std::move(name); }

  /// Appends a decision, assigning the next event id. Returns the logged entry.
  const LogEntry& record(ScoreDecision d) {
    d.event_id = log_.size() + 1;
    log_.push_back({std::move(d), std::nullopt});
    const auto& e = log_.back();
    if (e.decision.athlete_id < athletes_.size()) athletes_[e.decision.athlete_id].score += e.awarded();
    return e;
  }

  const LogEntry& resolve(std::uint64_t event_id, const Resolution& r, const std::string& resolver) {
    if (event_id == 0 || event_id > log_.size())
      throw Error(ErrorCode::UnknownEvent, "event " + std::to_string(event_id));
    auto& e = log_[event_id - 1];
    if (e.resolution) throw Error(ErrorCode::AlreadyResolved, "event " + std::to_string(event_id));
    if (e.decision.status != DecisionStatus::ReferralToReferee)
      throw Error(ErrorCode::NotReferred, "event " + std::to_string(event_id) + " was not referred");
    ResolutionRecord rec{r, resolver, e.decision.status, e.decision.label, 0};
    const auto& d = e.decision;
    switch (r.kind) {
      case ResolutionKind::AcceptAI:
        rec.points = rubric_.points(d.label, d.zone, d.mode) + bonus_points(d.impact_n, cfg_);
        break;
      case ResolutionKind::OverrideLabel:
        rec.points = r.label == TechniqueLabel::NoValidKick
                         ? 0
                         : rubric_.points(r.label, d.zone, d.mode) + bonus_points(d.impact_n, cfg_);
        break;
      case ResolutionKind::NoScore: rec.points = 0; break;
    }
    e.resolution = rec;
    if (d.athlete_id < athletes_.size()) athletes_[d.athlete_id].score += rec.points;
    return e;
  }

  /// Totals recomputed from the log.
  std::array<int, 2> replay_totals() const noexcept {
    std::array<int, 2> t{};
    for (const auto& e : log_)
      if (e.decision.athlete_id < 2) t[e.decision.athlete_id] += e.awarded();
    return t;
  }

 private:
  RubricMode mode_;
  RubricTable rubric_;
  ScoringConfig cfg_;
  int round_ = 1;
  std::array<Athlete, 2> athletes_;
  std::vector<LogEntry> log_;
};

/// Functional form: returns the updated state.
inline MatchState apply_referee_resolution(MatchState match, std::uint64_t event_id, const Resolution& r,
                                           const std::string& resolver = "referee") {
  match.resolve(event_id, r, resolver);
  return match;
}

}  // namespace kickscore::scoring
