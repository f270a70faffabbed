#include <gtest/gtest.h>

#include "kickscore/protocol.hpp"

using namespace kickscore;
using namespace kickscore::protocol;
using scoring::DecisionStatus;
using scoring::ResolutionKind;

namespace {

scoring::ScoreDecision referred() {
  scoring::ScoreDecision d;
  d.event_id = 4;
  d.athlete_id = 1;
  d.event_us = 2'500'000;
  d.label = TechniqueLabel::RoundhouseBack;
  d.zone = Zone::Trunk;
  d.confidence = 0.65;
  d.status = DecisionStatus::ReferralToReferee;
  d.provisional_points = 2;
  d.top3 = {{TechniqueLabel::RoundhouseBack, 0.65}, {TechniqueLabel::RoundhouseFront, 0.2}, {TechniqueLabel::SideKickBack, 0.1}};
  return d;
}

}  // namespace

TEST(Protocol, ScoreEventFields) {
  scoring::LogEntry e{referred(), std::nullopt};
  auto j = score_event(e);
  EXPECT_EQ(j["type"], "ScoreEvent");
  EXPECT_EQ(j["event_id"], 4);
  EXPECT_EQ(j["athlete"], 1);
  EXPECT_EQ(j["label"], "RoundhouseBack");
  EXPECT_EQ(j["points"], 0);
  EXPECT_EQ(j["status"], "ReferralToReferee");
  EXPECT_DOUBLE_EQ(j["t"].get<double>(), 2.5);
  EXPECT_FALSE(j["resolved"].get<bool>());

  e.resolution = scoring::ResolutionRecord{{ResolutionKind::OverrideLabel, TechniqueLabel::SideKickFront}, "r",
                                           DecisionStatus::ReferralToReferee, TechniqueLabel::RoundhouseBack, 1};
  j = score_event(e);
  EXPECT_EQ(j["points"], 1);
  EXPECT_EQ(j["label"], "SideKickFront");
  EXPECT_EQ(j["resolution"], "OverrideLabel");
  EXPECT_TRUE(j["resolved"].get<bool>());
}

TEST(Protocol, ReferralAndSnapshot) {
  const auto r = referral(referred());
  EXPECT_EQ(r["type"], "Referral");
  EXPECT_EQ(r["ai_label"], "RoundhouseBack");
  EXPECT_EQ(r["provisional_points"], 2);
  ASSERT_EQ(r["top3"].size(), 3U);
  EXPECT_EQ(r["top3"][1]["label"], "RoundhouseFront");

  scoring::MatchState m(scoring::RubricMode::CurrentWT);
  m.set_round(2);
  const auto s = snapshot(m);
  EXPECT_EQ(s["scores"], nlohmann::json::array({0, 0}));
  EXPECT_EQ(s["mode"], "CurrentWT");
  EXPECT_EQ(s["round"], 2);
}

TEST(Protocol, LineCarriesSeq) {
  const auto text = line(error_message(ErrorCode::UnknownEvent, "event 9"), 17);
  ASSERT_EQ(text.back(), '\n');
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["seq"], 17);
  EXPECT_EQ(j["code"], "UnknownEvent");
}

TEST(Protocol, ClientBuildersRoundTrip) {
  auto h = std::get<Hello>(parse_inbound(hello(Role::Referee, "s3cret")));
  EXPECT_EQ(h.role, Role::Referee);
  EXPECT_EQ(h.token, "s3cret");
  EXPECT_EQ(std::get<Hello>(parse_inbound(hello(Role::Viewer))).role, Role::Viewer);

  auto r = std::get<ResolutionMsg>(parse_inbound(resolution(7, {ResolutionKind::OverrideLabel, TechniqueLabel::AxeKickBack})));
  EXPECT_EQ(r.event_id, 7U);
  EXPECT_EQ(r.resolution.kind, ResolutionKind::OverrideLabel);
  EXPECT_EQ(r.resolution.label, TechniqueLabel::AxeKickBack);
  r = std::get<ResolutionMsg>(parse_inbound(resolution(8, {ResolutionKind::NoScore, {}})));
  EXPECT_EQ(r.resolution.kind, ResolutionKind::NoScore);

  EXPECT_EQ(std::get<ModeChange>(parse_inbound(mode_change(scoring::RubricMode::CurrentWT))).mode,
            scoring::RubricMode::CurrentWT);
}

TEST(Protocol, UnknownFieldsIgnored) {
  const auto m = parse_inbound(R"({"type":"ModeChange","mode":"Proposed","extra":{"x":1}})");
  EXPECT_EQ(std::get<ModeChange>(m).mode, scoring::RubricMode::Proposed);
}

TEST(Protocol, MalformedRejected) {
  for (const char* bad : {"not json", "[]", R"({"type":1})", R"({"type":"Bogus"})",
                          R"({"type":"Resolution","resolution":"AcceptAI"})",
                          R"({"type":"Resolution","event_id":1,"resolution":"Maybe"})",
                          R"({"type":"Resolution","event_id":1,"resolution":"OverrideLabel","label":"Punch"})",
                          R"({"type":"ModeChange","mode":"Olympic"})", R"({"type":"Hello","role":"Admin"})"}) {
    try {
      parse_inbound(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidConfig) << bad;
    }
  }
}
