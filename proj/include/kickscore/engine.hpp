#pragma once

// End-to-end engine. Frames are routed to one processing lane per athlete
// (segment, extract, classify, validate); lanes hand classified events to a
// single sequencer thread that owns the match state, scores events in
// (trigger time, athlete) order and publishes console messages.
//
// Lanes report a lower bound on the trigger time of anything they may still
// emit; the sequencer only releases events below the minimum bound over both
// lanes, which makes the decision order independent of thread timing.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kickscore/features.hpp"
#include "kickscore/model_io.hpp"
#include "kickscore/protocol.hpp"
#include "kickscore/scoring.hpp"
#include "kickscore/segmentation.hpp"
#include "kickscore/svm.hpp"
#include "kickscore/wire.hpp"

namespace kickscore {

inline constexpr std::size_t kAthleteCount = 2;

struct PipelineConfig {
  std::string model_path;
  scoring::RubricMode mode = scoring::RubricMode::Proposed;
  SegmenterConfig segmenter;
  scoring::ScoringConfig scoring;
  scoring::RubricTable rubric;
  std::array<Stance, kAthleteCount> stance{Stance::LeftForward, Stance::LeftForward};
  std::array<std::string, kAthleteCount> names{"Blue", "Red"};
  double latency_budget_ms = 50.0;

  void validate() const {
    segmenter.validate();
    scoring.validate();
    rubric.validate();
    if (!(latency_budget_ms > 0)) throw Error(ErrorCode::InvalidConfig, "latency_budget_ms must be > 0");
  }
};

inline Stance stance_from_string(const std::string& s) {
  if (s == "LeftForward") return Stance::LeftForward;
  if (s == "RightForward") return Stance::RightForward;
  throw Error(ErrorCode::InvalidConfig, "unknown stance " + s);
}

/// Reads the JSON engine config. Relative paths resolve against the file's directory.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".") {
  PipelineConfig c;
  const auto resolve = [&](const std::string& p) {
    if (p.empty() || p.front() == '/') return p;
    return base_dir + "/" + p;
  };
  try {
    if (j.contains("model_path")) c.model_path = resolve(j["model_path"].get<std::string>());
    if (j.contains("rubric_mode")) {
      const auto m = scoring::mode_from_string(j["rubric_mode"].get<std::string>());
      if (!m) throw Error(ErrorCode::InvalidConfig, "unknown rubric_mode");
      c.mode = *m;
    }
    if (j.contains("rubric_path")) c.rubric = scoring::load_rubric(resolve(j["rubric_path"].get<std::string>()));
    if (j.contains("segmenter")) {
      const auto& s = j["segmenter"];
      c.segmenter.force_trigger_n = s.value("force_trigger_n", c.segmenter.force_trigger_n);
      c.segmenter.accel_trigger_ms2 = s.value("accel_trigger_ms2", c.segmenter.accel_trigger_ms2);
      c.segmenter.window_pre_s = s.value("window_pre_s", c.segmenter.window_pre_s);
      c.segmenter.window_post_s = s.value("window_post_s", c.segmenter.window_post_s);
      c.segmenter.refractory_s = s.value("refractory_s", c.segmenter.refractory_s);
      c.segmenter.hysteresis_ratio = s.value("hysteresis_ratio", c.segmenter.hysteresis_ratio);
      c.segmenter.sample_rate_hz = s.value("sample_rate_hz", c.segmenter.sample_rate_hz);
    }
    if (j.contains("scoring")) {
      const auto& s = j["scoring"];
      c.scoring.min_valid_force_n = s.value("min_valid_force_n", c.scoring.min_valid_force_n);
      c.scoring.force_bonus_enabled = s.value("force_bonus_enabled", c.scoring.force_bonus_enabled);
      c.scoring.force_bonus_factor = s.value("force_bonus_factor", c.scoring.force_bonus_factor);
      c.scoring.confidence_floor = s.value("confidence_floor", c.scoring.confidence_floor);
    }
    if (j.contains("stance"))
      for (std::size_t a = 0; a < kAthleteCount && a < j["stance"].size(); ++a)
        c.stance[a] = stance_from_string(j["stance"][a].get<std::string>());
    if (j.contains("names"))
      for (std::size_t a = 0; a < kAthleteCount && a < j["names"].size(); ++a)
        c.names[a] = j["names"][a].get<std::string>();
    c.latency_budget_ms = j.value("latency_budget_ms", c.latency_budget_ms);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("engine config: ") + e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  const auto slash = path.find_last_of('/');
  return pipeline_config_from_json(j, slash == std::string::npos ? "." : path.substr(0, slash));
}

/// Loads the model named by the config, mapping any failure to ModelLoadFailure.
inline std::shared_ptr<const svm::TechniqueModel> load_pipeline_model(const PipelineConfig& cfg) {
  try {
    auto m = std::make_shared<const svm::TechniqueModel>(svm::load_model(cfg.model_path));
    for (const auto& member : std::holds_alternative<svm::SvmModel>(*m)
                                  ? std::vector<svm::SvmModel>{std::get<svm::SvmModel>(*m)}
                                  : std::get<svm::EnsembleModel>(*m).members)
      if (member.schema_version != kFeatureSchemaVersion)
        throw Error(ErrorCode::SchemaMismatch, "model schema version");
    return m;
  } catch (const Error& e) {
    throw Error(ErrorCode::ModelLoadFailure, cfg.model_path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

template <typename T>
class BlockingQueue {
 public:
  void push(T v) {
    {
      std::lock_guard lk(m_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }
  std::optional<T> pop() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }
  void close() {
    {
      std::lock_guard lk(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

struct LatencyStats {
  std::size_t count = 0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

inline LatencyStats summarize_latency(std::vector<double> ms) {
  LatencyStats s;
  s.count = ms.size();
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  const auto q = [&](double p) {
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(ms.size()))) - 1;
    return ms[std::min(idx, ms.size() - 1)];
  };
  s.p50_ms = q(0.50);
  s.p99_ms = q(0.99);
  s.max_ms = ms.back();
  return s;
}

struct EngineCounters {
  std::size_t frames_accepted = 0;
  std::size_t frames_corrupt = 0;
  std::size_t frames_out_of_order = 0;
  std::size_t frames_unknown_athlete = 0;
  std::size_t windows = 0;
  std::size_t decisions = 0;
  std::size_t classification_failures = 0;
};

inline nlohmann::json decision_to_json(const scoring::LogEntry& e) {
  const auto& d = e.decision;
  nlohmann::json j{{"event_id", d.event_id},
                   {"athlete", d.athlete_id},
                   {"t_us", d.event_us},
                   {"label", std::string(to_string(d.label))},
                   {"zone", std::string(to_string(d.zone))},
                   {"points", d.points},
                   {"confidence", d.confidence},
                   {"impact_n", d.impact_n},
                   {"mode", std::string(to_string(d.mode))},
                   {"status", std::string(to_string(d.status))},
                   {"reason", d.reason}};
  if (d.status == scoring::DecisionStatus::ReferralToReferee) j["provisional_points"] = d.provisional_points;
  return j;
}

class Engine {
 public:
  using Listener = std::function<void(const std::string& line)>;

  struct CommandResult {
    bool ok = true;
    ErrorCode code = ErrorCode::InvalidConfig;
    std::string message;
  };

  Engine(PipelineConfig cfg, std::shared_ptr<const svm::TechniqueModel> model)
      : cfg_(std::move(cfg)), model_(std::move(model)), match_(cfg_.mode, cfg_.rubric, cfg_.scoring) {
    cfg_.validate();
    if (!model_) throw Error(ErrorCode::ModelLoadFailure, "no model");
    for (std::size_t a = 0; a < kAthleteCount; ++a) match_.set_name(static_cast<std::uint8_t>(a), cfg_.names[a]);
    for (std::size_t a = 0; a < kAthleteCount; ++a)
      lanes_[a].thread = std::thread([this, a] { lane_main(static_cast<std::uint8_t>(a)); });
    sequencer_ = std::thread([this] { sequencer_main(); });
  }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  ~Engine() {
    finish();
    seq_in_.push(Stop{});
    seq_in_.close();
    if (sequencer_.joinable()) sequencer_.join();
  }

  const PipelineConfig& config() const noexcept { return cfg_; }

  /// Decodes a byte stream of 40-byte frames (partial frames are carried over).
  void ingest_bytes(std::span<const std::uint8_t> bytes) {
    std::array<std::vector<SensorFrame>, kAthleteCount> batches;
    std::size_t i = 0;
    if (!carry_.empty()) {
      const std::size_t need = wire::kFrameSize - carry_.size();
      const std::size_t take = std::min(need, bytes.size());
      carry_.insert(carry_.end(), bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(take));
      i = take;
      if (carry_.size() < wire::kFrameSize) return;
      decode_into(carry_, batches);
      carry_.clear();
    }
    for (; i + wire::kFrameSize <= bytes.size(); i += wire::kFrameSize)
      decode_into(bytes.subspan(i, wire::kFrameSize), batches);
    carry_.assign(bytes.begin() + static_cast<std::ptrdiff_t>(i), bytes.end());
    dispatch(batches);
  }

  void ingest_frames(std::span<const SensorFrame> frames) {
    std::array<std::vector<SensorFrame>, kAthleteCount> batches;
    for (const auto& f : frames) route(f, batches);
    dispatch(batches);
  }

  /// Ends the input stream: flushes the lanes and waits until every event
  /// has been scored. Console commands are still served afterwards.
  void finish() {
    if (finished_.exchange(true)) return;
    if (!carry_.empty()) {
      std::lock_guard lk(counter_mutex_);
      ++counters_.frames_corrupt;
      carry_.clear();
    }
    for (auto& lane : lanes_) {
      lane.in.push(LaneFlush{});
      lane.in.close();
    }
    for (auto& lane : lanes_)
      if (lane.thread.joinable()) lane.thread.join();
    std::promise<void> done;
    auto f = done.get_future();
    seq_in_.push(Barrier{std::move(done)});
    f.wait();
  }

  /// Registers a listener; it first receives a snapshot, then every broadcast.
  /// Listeners run on the sequencer thread and must not block.
  std::uint64_t subscribe(Listener l) {
    std::lock_guard lk(publish_mutex_);
    const auto id = ++next_listener_;
    l(protocol::line(protocol::snapshot(match_), seq_));
    listeners_.emplace(id, std::move(l));
    return id;
  }

  void unsubscribe(std::uint64_t id) {
    std::lock_guard lk(publish_mutex_);
    listeners_.erase(id);
  }

  /// Current sequence number (last broadcast).
  std::uint64_t seq() const {
    std::lock_guard lk(publish_mutex_);
    return seq_;
  }

  std::future<CommandResult> submit(protocol::Inbound cmd, std::string resolver = "referee") {
    auto p = std::make_shared<std::promise<CommandResult>>();
    auto f = p->get_future();
    submit(std::move(cmd), std::move(resolver), [p](const CommandResult& r) { p->set_value(r); });
    return f;
  }

  /// `done` runs on the sequencer thread once the command has been applied.
  void submit(protocol::Inbound cmd, std::string resolver, std::function<void(const CommandResult&)> done) {
    seq_in_.push(Command{std::move(cmd), std::move(resolver), std::move(done)});
  }

  scoring::MatchState snapshot() const {
    std::lock_guard lk(publish_mutex_);
    return match_;
  }

  std::vector<scoring::ScoreDecision> decisions() const {
    std::lock_guard lk(publish_mutex_);
    std::vector<scoring::ScoreDecision> out;
    for (const auto& e : match_.log()) out.push_back(e.decision);
    return out;
  }

  /// JSON lines: one per decision, then one per referee resolution, in order.
  std::string decision_log() const {
    std::lock_guard lk(publish_mutex_);
    return log_;
  }

  EngineCounters counters() const {
    std::lock_guard lk(counter_mutex_);
    return counters_;
  }

  /// Per-event feature extraction + classification time.
  LatencyStats processing_latency() const {
    std::lock_guard lk(counter_mutex_);
    return summarize_latency(processing_ms_);
  }

  /// From the window becoming available to its decision being published.
  LatencyStats emission_latency() const {
    std::lock_guard lk(counter_mutex_);
    return summarize_latency(emission_ms_);
  }

 private:
  using Clock = std::chrono::steady_clock;

  struct LaneFlush {};
  using LaneItem = std::variant<std::vector<SensorFrame>, LaneFlush>;

  struct Lane {
    BlockingQueue<LaneItem> in;
    std::thread thread;
  };

  struct LaneEvent {
    std::uint8_t athlete = 0;
    std::int64_t trigger_us = 0;
    TriggerKind kind = TriggerKind::Impact;
    scoring::Validity validity;
    double force_n = 0.0;
    std::optional<svm::Prediction> prediction;
    std::string failure;
    Clock::time_point ready;
  };
  struct LaneProgress {
    std::uint8_t athlete = 0;
    std::int64_t bound = INT64_MIN;
  };
  struct Command {
    protocol::Inbound cmd;
    std::string resolver;
    std::function<void(const CommandResult&)> done;
  };
  struct Barrier {
    std::promise<void> done;
  };
  struct Stop {};
  using SeqItem = std::variant<LaneEvent, LaneProgress, Command, Barrier, Stop>;

  void decode_into(std::span<const std::uint8_t> b, std::array<std::vector<SensorFrame>, kAthleteCount>& batches) {
    try {
      route(wire::decode_frame(b), batches);
    } catch (const Error&) {
      std::lock_guard lk(counter_mutex_);
      ++counters_.frames_corrupt;
    }
  }

  void route(const SensorFrame& f, std::array<std::vector<SensorFrame>, kAthleteCount>& batches) {
    std::lock_guard lk(counter_mutex_);
    if (f.athlete_id >= kAthleteCount) {
      ++counters_.frames_unknown_athlete;
      return;
    }
    if (!payload_matches_channel(f)) {
      ++counters_.frames_corrupt;
      return;
    }
    auto& last = last_ts_[f.athlete_id][index_of(f.channel)];
    if (last && f.timestamp_us <= *last) {
      ++counters_.frames_out_of_order;
      return;
    }
    last = f.timestamp_us;
    ++counters_.frames_accepted;
    batches[f.athlete_id].push_back(f);
  }

  void dispatch(std::array<std::vector<SensorFrame>, kAthleteCount>& batches) {
    if (finished_) throw Error(ErrorCode::InvalidConfig, "ingest after finish");
    for (std::size_t a = 0; a < kAthleteCount; ++a)
      if (!batches[a].empty()) lanes_[a].in.push(std::move(batches[a]));
  }

  void lane_main(std::uint8_t athlete) {
    Segmenter seg(cfg_.segmenter, athlete);
    while (auto item = lanes_[athlete].in.pop()) {
      if (auto* frames = std::get_if<std::vector<SensorFrame>>(&*item)) {
        for (auto& w : seg.push_frames(*frames)) process_window(w);
        seq_in_.push(LaneProgress{athlete, seg.pending_bound()});
      } else {
        for (auto& w : seg.flush()) process_window(w);
        seq_in_.push(LaneProgress{athlete, INT64_MAX});
      }
    }
  }

  void process_window(const KickEventWindow& w) {
    LaneEvent ev;
    ev.ready = Clock::now();
    ev.athlete = w.athlete_id;
    ev.trigger_us = w.trigger_us;
    ev.kind = w.trigger_kind;
    ev.force_n = w.impact_peak_n;
    ev.validity = scoring::validate_contact(w, cfg_.scoring);
    try {
      const auto v = extract_features(w, cfg_.stance[w.athlete_id]);
      ev.prediction = svm::predict(*model_, v);
    } catch (const std::exception& e) {
      ev.failure = e.what();
    }
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - ev.ready).count();
    {
      std::lock_guard lk(counter_mutex_);
      ++counters_.windows;
      if (!ev.failure.empty()) ++counters_.classification_failures;
      processing_ms_.push_back(ms);
    }
    seq_in_.push(std::move(ev));
  }

  void sequencer_main() {
    std::array<std::int64_t, kAthleteCount> progress;
    progress.fill(INT64_MIN);
    const auto key_less = [](const LaneEvent& a, const LaneEvent& b) {
      return std::pair(a.trigger_us, a.athlete) < std::pair(b.trigger_us, b.athlete);
    };
    std::vector<LaneEvent> pending;
    while (auto item = seq_in_.pop()) {
      if (auto* ev = std::get_if<LaneEvent>(&*item)) {
        pending.insert(std::upper_bound(pending.begin(), pending.end(), *ev, key_less), std::move(*ev));
      } else if (auto* p = std::get_if<LaneProgress>(&*item)) {
        progress[p->athlete] = p->bound;
        const auto bound = *std::min_element(progress.begin(), progress.end());
        std::size_t n = 0;
        while (n < pending.size() && (pending[n].trigger_us < bound || bound == INT64_MAX)) score_event(pending[n++]);
        pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(n));
      } else if (auto* c = std::get_if<Command>(&*item)) {
        c->done(run_command(c->cmd, c->resolver));
      } else if (auto* b = std::get_if<Barrier>(&*item)) {
        b->done.set_value();
      } else {
        break;
      }
    }
  }

  void score_event(const LaneEvent& ev) {
    scoring::ScoreDecision d;
    std::lock_guard lk(publish_mutex_);
    if (!ev.failure.empty()) {
      d.confidence = 0.0;
      d.zone = ev.validity.zone;
      d.impact_n = ev.force_n;
      d.mode = match_.mode();
      if (ev.validity.valid) {
        d.status = scoring::DecisionStatus::ReferralToReferee;
        d.provisional_points = match_.rubric().zone_value(ev.validity.zone);
      } else {
        d.status = scoring::DecisionStatus::NoScore;
      }
      d.reason = "classification failed: " + ev.failure;
    } else {
      auto validity = ev.validity;
      if (ev.kind == TriggerKind::MotionOnly) validity = {false, ev.validity.zone, "motion only"};
      d = scoring::decide_score(*ev.prediction, validity, ev.force_n, match_.mode(), match_.config(), match_.rubric());
    }
    d.athlete_id = ev.athlete;
    d.event_us = ev.trigger_us;
    const auto& entry = match_.record(std::move(d));
    log_ += decision_to_json(entry).dump() + "\n";
    broadcast(protocol::score_event(entry));
    if (entry.decision.status == scoring::DecisionStatus::ReferralToReferee)
      broadcast(protocol::referral(entry.decision));
    broadcast(protocol::snapshot(match_));
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - ev.ready).count();
    std::lock_guard clk(counter_mutex_);
    ++counters_.decisions;
    emission_ms_.push_back(ms);
  }

  CommandResult run_command(const protocol::Inbound& cmd, const std::string& resolver) {
    std::lock_guard lk(publish_mutex_);
    try {
      if (const auto* r = std::get_if<protocol::ResolutionMsg>(&cmd)) {
        const auto& entry = match_.resolve(r->event_id, r->resolution, resolver);
        nlohmann::json j{{"resolution_for", r->event_id},
                         {"resolution", std::string(to_string(r->resolution.kind))},
                         {"resolver", resolver},
                         {"points", entry.resolution->points}};
        if (r->resolution.kind == scoring::ResolutionKind::OverrideLabel)
          j["label"] = std::string(to_string(r->resolution.label));
        log_ += j.dump() + "\n";
        broadcast(protocol::score_event(entry));
        broadcast(protocol::snapshot(match_));
      } else if (const auto* m = std::get_if<protocol::ModeChange>(&cmd)) {
        match_.set_mode(m->mode);
        broadcast(protocol::snapshot(match_));
      } else {
        return {false, ErrorCode::InvalidConfig, "Hello is handled by the connection"};
      }
    } catch (const Error& e) {
      return {false, e.code(), e.detail()};
    }
    return {};
  }

  // Caller holds publish_mutex_.
  void broadcast(const nlohmann::json& j) {
    const auto text = protocol::line(j, ++seq_);
    for (auto& [id, l] : listeners_) l(text);
  }

  PipelineConfig cfg_;
  std::shared_ptr<const svm::TechniqueModel> model_;

  std::array<Lane, kAthleteCount> lanes_;
  BlockingQueue<SeqItem> seq_in_;
  std::thread sequencer_;
  std::atomic<bool> finished_{false};

  std::vector<std::uint8_t> carry_;
  std::array<std::array<std::optional<std::uint64_t>, kChannelCount>, kAthleteCount> last_ts_{};

  mutable std::mutex publish_mutex_;
  scoring::MatchState match_;
  std::string log_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_listener_ = 0;
  std::map<std::uint64_t, Listener> listeners_;

  mutable std::mutex counter_mutex_;
  EngineCounters counters_;
  std::vector<double> processing_ms_;
  std::vector<double> emission_ms_;
};

struct PipelineResult {
  std::vector<scoring::ScoreDecision> decisions;
  std::string decision_log;
  EngineCounters counters;
  LatencyStats processing;
  LatencyStats emission;
  std::array<int, 2> totals{};
};

/// Runs a complete frame stream through a fresh engine.
inline PipelineResult run_pipeline(std::span<const SensorFrame> frames, const PipelineConfig& cfg,
                                   std::shared_ptr<const svm::TechniqueModel> model) {
  Engine engine(cfg, std::move(model));
  constexpr std::size_t kBatch = 240;
  for (std::size_t i = 0; i < frames.size(); i += kBatch)
    engine.ingest_frames(frames.subspan(i, std::min(kBatch, frames.size() - i)));
  engine.finish();
  PipelineResult r;
  r.decisions = engine.decisions();
  r.decision_log = engine.decision_log();
  r.counters = engine.counters();
  r.processing = engine.processing_latency();
  r.emission = engine.emission_latency();
  const auto snap = engine.snapshot();
  r.totals = {snap.athletes()[0].score, snap.athletes()[1].score};
  return r;
}

}  // namespace kickscore
