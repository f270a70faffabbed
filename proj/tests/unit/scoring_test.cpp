#include <gtest/gtest.h>

#include <fstream>

#include "kickscore/scoring.hpp"
#include "test_support.hpp"

using namespace kickscore;
using namespace kickscore::scoring;
using L = TechniqueLabel;

namespace {

svm::Prediction pred(L label, double confidence) {
  svm::Prediction p;
  p.label = label;
  p.confidence = confidence;
  const double rest = (1.0 - confidence) / (kLabelCount - 1);
  for (auto l : kAllLabels) p.scores.push_back({l, l == label ? confidence : rest});
  return p;
}

const Validity kTrunk{true, Zone::Trunk, ""};
const Validity kHead{true, Zone::Head, ""};

KickEventWindow contact_window(std::uint8_t zone_mask, double force) {
  KickEventWindow w;
  if (zone_mask) w.window.contact_events.push_back({0, {zone_mask, foot_bits::Instep}});
  w.contact_present = zone_mask != 0;
  w.impact_peak_n = force;
  return w;
}

}  // namespace

TEST(Rubric, ProposedTableExact) {
  const RubricTable t;
  const std::map<L, int> expected{{L::MonkeyKick, 0},      {L::FishKick, 0},      {L::ScorpionKick, 2},
                                  {L::TwistKickFront, 1},  {L::AxeKickFront, 3},  {L::AxeKickBack, 4},
                                  {L::SideKickFront, 1},   {L::SideKickBack, 2},  {L::RoundhouseFront, 1},
                                  {L::RoundhouseBack, 2},  {L::BackKick, 4},      {L::TornadoKick, 5},
                                  {L::NoValidKick, 0}};
  ASSERT_EQ(expected.size(), kLabelCount);
  for (auto [l, p] : expected) {
    EXPECT_EQ(t.proposed_points(l), p) << to_string(l);
    for (Zone z : {Zone::Trunk, Zone::Head}) EXPECT_EQ(t.points(l, z, RubricMode::Proposed), p);
  }
}

TEST(Rubric, CurrentWtTableExact) {
  const RubricTable t;
  for (auto l : kRubricLabels) {
    const bool turning = l == L::BackKick || l == L::TornadoKick;
    EXPECT_EQ(t.points(l, Zone::Trunk, RubricMode::CurrentWT), turning ? 4 : 2) << to_string(l);
    EXPECT_EQ(t.points(l, Zone::Head, RubricMode::CurrentWT), turning ? 5 : 3) << to_string(l);
    EXPECT_GT(t.points(l, Zone::Head, RubricMode::CurrentWT), t.points(l, Zone::Trunk, RubricMode::CurrentWT));
  }
  EXPECT_EQ(t.wt_turning_body - t.wt_body, 2);
  EXPECT_EQ(t.wt_turning_head - t.wt_head, 2);
  EXPECT_EQ(t.points(L::NoValidKick, Zone::Head, RubricMode::CurrentWT), 0);
}

TEST(Rubric, ShippedConfigEqualsDefaults) {
  const auto t = load_rubric(std::string(KICKSCORE_CONFIG_DIR) + "/rubric.json");
  EXPECT_EQ(rubric_to_json(t), rubric_to_json(RubricTable{}));
}

TEST(Rubric, JsonValidation) {
  auto j = rubric_to_json(RubricTable{});
  EXPECT_EQ(rubric_to_json(rubric_from_json(j)), j);
  auto missing = j;
  missing["proposed"].erase("TornadoKick");
  EXPECT_THROW(rubric_from_json(missing), Error);
  auto unknown = j;
  unknown["proposed"]["Punch"] = 1;
  EXPECT_THROW(rubric_from_json(unknown), Error);
  auto negative = j;
  negative["current_wt"]["head"] = -1;
  EXPECT_THROW(rubric_from_json(negative), Error);
}

TEST(Scoring, ValidateContact) {
  const ScoringConfig cfg;
  auto v = validate_contact(contact_window(zone_bits::TrunkFront, 300), cfg);
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.zone, Zone::Trunk);
  v = validate_contact(contact_window(0, 300), cfg);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reason, "no contact");
  v = validate_contact(contact_window(zone_bits::TrunkFront, 30), cfg);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reason, "below force threshold");
  v = validate_contact(contact_window(zone_bits::TrunkLeft | zone_bits::Head, 60), cfg);
  EXPECT_EQ(v.zone, Zone::Head);
}

TEST(Scoring, WorkedExamples) {
  const ScoringConfig cfg;
  auto d = decide_score(pred(L::BackKick, 0.95), kTrunk, 300, RubricMode::Proposed, cfg);
  EXPECT_EQ(d.status, DecisionStatus::Scored);
  EXPECT_EQ(d.points, 4);

  d = decide_score(pred(L::MonkeyKick, 0.99), kTrunk, 300, RubricMode::Proposed, cfg);
  EXPECT_EQ(d.status, DecisionStatus::Scored);
  EXPECT_EQ(d.points, 0);

  d = decide_score(pred(L::TornadoKick, 0.90), kHead, 300, RubricMode::CurrentWT, cfg);
  EXPECT_EQ(d.status, DecisionStatus::Scored);
  EXPECT_EQ(d.points, 5);

  d = decide_score(pred(L::RoundhouseBack, 0.65), kTrunk, 300, RubricMode::Proposed, cfg);
  EXPECT_EQ(d.status, DecisionStatus::ReferralToReferee);
  EXPECT_EQ(d.points, 0);
  EXPECT_EQ(d.provisional_points, 2);
  ASSERT_EQ(d.top3.size(), 3U);
  EXPECT_EQ(d.top3[0].label, L::RoundhouseBack);
}

TEST(Scoring, InvalidAndNoValidKick) {
  const ScoringConfig cfg;
  auto d = decide_score(pred(L::BackKick, 0.99), {false, Zone::None, "no contact"}, 0, RubricMode::Proposed, cfg);
  EXPECT_EQ(d.status, DecisionStatus::NoScore);
  EXPECT_EQ(d.reason, "no contact");
  d = decide_score(pred(L::NoValidKick, 0.99), kTrunk, 300, RubricMode::CurrentWT, cfg);
  EXPECT_EQ(d.status, DecisionStatus::NoScore);
  EXPECT_EQ(d.points, 0);
  d = decide_score(pred(L::BackKick, 0.30), kHead, 300, RubricMode::Proposed, cfg);
  EXPECT_EQ(d.provisional_points, 3);
}

TEST(Scoring, ForceBonus) {
  ScoringConfig cfg;
  cfg.force_bonus_enabled = true;
  EXPECT_EQ(decide_score(pred(L::BackKick, 0.95), kTrunk, 150, RubricMode::Proposed, cfg).points, 5);
  EXPECT_EQ(decide_score(pred(L::BackKick, 0.95), kTrunk, 149, RubricMode::Proposed, cfg).points, 4);
}

TEST(Scoring, PointsIndependentOfForceWithoutBonus) {
  const ScoringConfig cfg;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> force(50, 5000), conf(0.7, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto l = kAllLabels[rng() % kLabelCount];
    const auto mode = rng() % 2 ? RubricMode::Proposed : RubricMode::CurrentWT;
    const auto& v = rng() % 2 ? kTrunk : kHead;
    const auto p = pred(l, conf(rng));
    const auto base = decide_score(p, v, 50, mode, cfg);
    const auto scaled = decide_score(p, v, force(rng), mode, cfg);
    EXPECT_EQ(base.points, scaled.points);
    EXPECT_EQ(base.status, scaled.status);
  }
}

TEST(Scoring, ConfigValidation) {
  ScoringConfig c;
  c.force_bonus_factor = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.confidence_floor = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(MatchState, ResolutionArithmetic) {
  MatchState m;
  const ScoringConfig cfg;
  auto referred = decide_score(pred(L::RoundhouseBack, 0.65), kTrunk, 300, RubricMode::Proposed, cfg);
  referred.athlete_id = 0;
  const auto id1 = m.record(referred).decision.event_id;
  const auto id2 = m.record(referred).decision.event_id;
  const auto id3 = m.record(referred).decision.event_id;
  EXPECT_EQ(m.athletes()[0].score, 0);

  m.resolve(id1, {ResolutionKind::AcceptAI, {}}, "ref");
  EXPECT_EQ(m.athletes()[0].score, 2);
  m.resolve(id2, {ResolutionKind::OverrideLabel, L::SideKickFront}, "ref");
  EXPECT_EQ(m.athletes()[0].score, 3);
  const auto& e = m.resolve(id3, {ResolutionKind::NoScore, {}}, "ref");
  EXPECT_EQ(e.resolution->resolver, "ref");
  EXPECT_EQ(e.resolution->prior_label, L::RoundhouseBack);
  EXPECT_EQ(m.athletes()[0].score, 3);

  auto code = [&](auto fn) {
    try {
      fn();
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code([&] { m.resolve(id1, {}, "ref"); }), ErrorCode::AlreadyResolved);
  EXPECT_EQ(code([&] { m.resolve(99, {}, "ref"); }), ErrorCode::UnknownEvent);
  EXPECT_EQ(code([&] { m.resolve(0, {}, "ref"); }), ErrorCode::UnknownEvent);
  const auto scored = m.record(decide_score(pred(L::BackKick, 0.9), kTrunk, 300, RubricMode::Proposed, cfg));
  EXPECT_EQ(code([&] { m.resolve(scored.decision.event_id, {}, "ref"); }), ErrorCode::NotReferred);
  EXPECT_EQ(m.athletes()[0].score, 7);
}

TEST(MatchState, FunctionalResolutionLeavesInputUntouched) {
  MatchState m;
  auto d = decide_score(pred(L::RoundhouseBack, 0.65), kTrunk, 300, RubricMode::Proposed, {});
  d.athlete_id = 1;
  m.record(d);
  const auto after = apply_referee_resolution(m, 1, {ResolutionKind::AcceptAI, {}});
  EXPECT_EQ(after.athletes()[1].score, 2);
  EXPECT_EQ(m.athletes()[1].score, 0);
  EXPECT_FALSE(m.log()[0].resolution);
}

TEST(MatchState, ReplayTotalsMatchRunningScores) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> conf(0.4, 1.0);
  MatchState m;
  for (int i = 0; i < 300; ++i) {
    const auto l = kAllLabels[rng() % kLabelCount];
    const bool valid = rng() % 5 != 0;
    auto d = decide_score(pred(l, conf(rng)), valid ? kTrunk : Validity{false, Zone::None, "no contact"}, 200,
                          rng() % 2 ? RubricMode::Proposed : RubricMode::CurrentWT, {});
    d.athlete_id = static_cast<std::uint8_t>(rng() % 2);
    const auto id = m.record(d).decision.event_id;
    if (d.status == DecisionStatus::ReferralToReferee && rng() % 2)
      m.resolve(id, {static_cast<ResolutionKind>(rng() % 3), kRubricLabels[rng() % 12]}, "r");
    const auto totals = m.replay_totals();
    ASSERT_EQ(totals[0], m.athletes()[0].score);
    ASSERT_EQ(totals[1], m.athletes()[1].score);
  }
  for (const auto& e : m.log())
    if (e.decision.status == DecisionStatus::NoScore) EXPECT_EQ(e.awarded(), 0);
}
