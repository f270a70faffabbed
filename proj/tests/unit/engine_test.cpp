#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "kickscore/engine.hpp"
#include "kickscore/model_io.hpp"
#include "test_support.hpp"

using namespace kickscore;
using scoring::DecisionStatus;

namespace {

std::shared_ptr<const svm::TechniqueModel> model() {
  static const auto m = std::make_shared<const svm::TechniqueModel>(*kstest::small_model());
  return m;
}

const synth::GeneratedStream& match_stream() {
  static const auto g = [] {
    synth::SynthConfig cfg;
    cfg.rng_seed = 21;
    return synth::generate_match_script(synth::random_script(20, 180, synth::default_templates(), 21),
                                        synth::default_templates(), cfg);
  }();
  return g;
}

const synth::Annotation* nearest(const std::vector<synth::Annotation>& anns, std::uint8_t athlete, std::int64_t t) {
  const synth::Annotation* best = nullptr;
  for (const auto& a : anns)
    if (a.athlete_id == athlete && (!best || std::llabs(a.impact_us - t) < std::llabs(best->impact_us - t))) best = &a;
  return best;
}

}  // namespace

TEST(Engine, EmptyStreamCleanShutdown) {
  const auto r = run_pipeline({}, PipelineConfig{}, model());
  EXPECT_TRUE(r.decisions.empty());
  EXPECT_TRUE(r.decision_log.empty());
  EXPECT_EQ(r.counters.frames_accepted, 0U);
  EXPECT_EQ(r.totals, (std::array<int, 2>{0, 0}));
}

TEST(Engine, ScriptedMatchLabels) {
  const auto& g = match_stream();
  const auto r = run_pipeline(g.frames, PipelineConfig{}, model());
  ASSERT_EQ(r.decisions.size(), 20U);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < r.decisions.size(); ++i) {
    const auto& d = r.decisions[i];
    EXPECT_EQ(d.event_id, i + 1);
    if (i > 0) EXPECT_LE(r.decisions[i - 1].event_us, d.event_us);
    const auto* a = nearest(g.annotations, d.athlete_id, d.event_us);
    ASSERT_NE(a, nullptr);
    EXPECT_LE(std::llabs(a->impact_us - d.event_us), 10'000);
    correct += d.label == a->label;
  }
  EXPECT_GE(correct, 19U);
  EXPECT_EQ(r.counters.windows, 20U);
  EXPECT_EQ(r.counters.classification_failures, 0U);
  EXPECT_LT(r.processing.p99_ms, 50.0);
}

TEST(Engine, ReplayIsDeterministic) {
  const auto& g = match_stream();
  const auto a = run_pipeline(g.frames, PipelineConfig{}, model());
  // Different batching must not change the log.
  Engine e(PipelineConfig{}, model());
  std::size_t i = 0, step = 1;
  while (i < g.frames.size()) {
    const auto n = std::min(step, g.frames.size() - i);
    e.ingest_frames(std::span(g.frames).subspan(i, n));
    i += n;
    step = step * 3 % 1999 + 1;
  }
  e.finish();
  EXPECT_EQ(e.decision_log(), a.decision_log);
  EXPECT_EQ(run_pipeline(g.frames, PipelineConfig{}, model()).decision_log, a.decision_log);
}

TEST(Engine, ByteIngestCountsCorruptFrames) {
  const auto g = synth::generate_kick(synth::default_templates()[10], synth::SynthConfig{}, 500'000, 1);
  auto bytes = wire::encode_log({}, g.frames);
  std::vector<std::uint8_t> body(bytes.begin() + wire::kLogHeaderSize, bytes.end());
  body[40 * 10 + 20] ^= 0x01;
  Engine e(PipelineConfig{}, model());
  // Odd chunk sizes exercise the partial-frame carry.
  for (std::size_t i = 0; i < body.size(); i += 37)
    e.ingest_bytes(std::span(body).subspan(i, std::min<std::size_t>(37, body.size() - i)));
  e.finish();
  const auto c = e.counters();
  EXPECT_EQ(c.frames_corrupt, 1U);
  EXPECT_EQ(c.frames_accepted, g.frames.size() - 1);
  const auto d = e.decisions();
  ASSERT_EQ(d.size(), 1U);
  EXPECT_EQ(d[0].athlete_id, 1);
  EXPECT_EQ(d[0].label, TechniqueLabel::BackKick);
}

TEST(Engine, RejectsUnknownAthleteAndDisorder) {
  Engine e(PipelineConfig{}, model());
  std::vector<SensorFrame> f{kstest::impact(5, Channel::TrunkImpact, 1, 0), kstest::impact(0, Channel::TrunkImpact, 10, 0),
                             kstest::impact(0, Channel::TrunkImpact, 10, 0)};
  e.ingest_frames(f);
  e.finish();
  const auto c = e.counters();
  EXPECT_EQ(c.frames_unknown_athlete, 1U);
  EXPECT_EQ(c.frames_out_of_order, 1U);
  EXPECT_EQ(c.frames_accepted, 1U);
  EXPECT_THROW(e.ingest_frames(f), Error);
}

TEST(Engine, MotionOnlyIsNoScore) {
  synth::SynthConfig cfg;
  cfg.miss_probability = 1.0;
  const auto g = synth::generate_kick(synth::default_templates()[9], cfg);
  const auto r = run_pipeline(g.frames, PipelineConfig{}, model());
  ASSERT_EQ(r.decisions.size(), 1U);
  EXPECT_EQ(r.decisions[0].status, DecisionStatus::NoScore);
  EXPECT_EQ(r.decisions[0].reason, "motion only");
  EXPECT_EQ(r.totals[0], 0);
}

TEST(Engine, ClassificationFailureDegradesToReferral) {
  auto bad = std::make_shared<svm::TechniqueModel>(*kstest::small_model());
  std::get<svm::SvmModel>(*bad).schema_version = 9;
  const auto g = synth::generate_kick(synth::default_templates()[10], synth::SynthConfig{});
  const auto r = run_pipeline(g.frames, PipelineConfig{}, bad);
  ASSERT_EQ(r.decisions.size(), 1U);
  EXPECT_EQ(r.decisions[0].status, DecisionStatus::ReferralToReferee);
  EXPECT_EQ(r.decisions[0].provisional_points, 2);
  EXPECT_EQ(r.counters.classification_failures, 1U);
}

TEST(Engine, ListenersAndCommands) {
  PipelineConfig cfg;
  cfg.scoring.confidence_floor = 0.999999;  // refer nearly everything
  Engine e(cfg, model());
  std::vector<std::string> lines;
  std::mutex m;
  e.subscribe([&](const std::string& l) {
    std::lock_guard lk(m);
    lines.push_back(l);
  });
  const auto g = synth::generate_kick(synth::default_templates()[9], synth::SynthConfig{});
  e.ingest_frames(g.frames);
  e.finish();
  const auto d = e.decisions();
  ASSERT_EQ(d.size(), 1U);
  ASSERT_EQ(d[0].status, DecisionStatus::ReferralToReferee);
  {
    std::lock_guard lk(m);
    ASSERT_EQ(lines.size(), 4U);  // snapshot, ScoreEvent, Referral, snapshot
    EXPECT_EQ(nlohmann::json::parse(lines[0])["seq"], 0);
    EXPECT_EQ(nlohmann::json::parse(lines[1])["type"], "ScoreEvent");
    EXPECT_EQ(nlohmann::json::parse(lines[2])["type"], "Referral");
    EXPECT_EQ(nlohmann::json::parse(lines[3])["seq"], 3);
  }

  auto bad = e.submit(protocol::ResolutionMsg{42, {}}).get();
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.code, ErrorCode::UnknownEvent);
  EXPECT_EQ(e.seq(), 3U);

  const auto ok = e.submit(protocol::ResolutionMsg{1, {scoring::ResolutionKind::OverrideLabel, TechniqueLabel::BackKick}}, "ref").get();
  EXPECT_TRUE(ok.ok);
  EXPECT_EQ(e.snapshot().athletes()[0].score, 4);
  EXPECT_EQ(e.submit(protocol::ResolutionMsg{1, {}}).get().code, ErrorCode::AlreadyResolved);
  EXPECT_TRUE(e.submit(protocol::ModeChange{scoring::RubricMode::CurrentWT}).get().ok);
  EXPECT_EQ(e.snapshot().mode(), scoring::RubricMode::CurrentWT);
  const auto log = e.decision_log();
  EXPECT_NE(log.find("\"resolution_for\":1"), std::string::npos);
  std::lock_guard lk(m);
  EXPECT_EQ(nlohmann::json::parse(lines.back())["seq"], e.seq());
}

TEST(Engine, ConfigFileAndModelLoading) {
  const auto cfg = load_pipeline_config(std::string(KICKSCORE_CONFIG_DIR) + "/kickscore.json");
  EXPECT_EQ(cfg.latency_budget_ms, 50.0);
  EXPECT_EQ(cfg.segmenter.refractory_s, 0.25);
  EXPECT_EQ(cfg.names[1], "Red");
  EXPECT_NE(cfg.model_path.find("models/kickscore.ksmdl"), std::string::npos);

  PipelineConfig missing;
  missing.model_path = "/nonexistent.ksmdl";
  try {
    load_pipeline_model(missing);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ModelLoadFailure);
  }
  const auto path = (std::filesystem::temp_directory_path() / "kickscore_engine_test.ksmdl").string();
  svm::save_model(*model(), path);
  PipelineConfig good;
  good.model_path = path;
  EXPECT_NO_THROW(load_pipeline_model(good));
  std::filesystem::remove(path);

  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"stance":["Sideways"]})")), Error);
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"latency_budget_ms":0})")), Error);
}

TEST(Engine, LatencySummary) {
  const auto s = summarize_latency({5, 1, 3, 2, 4});
  EXPECT_EQ(s.count, 5U);
  EXPECT_EQ(s.max_ms, 5.0);
  EXPECT_GE(s.p99_ms, s.p50_ms);
  EXPECT_EQ(summarize_latency({}).count, 0U);
}
