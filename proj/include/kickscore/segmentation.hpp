#pragma once

// Online kick-event segmentation for one athlete.
//
// Two rising-edge triggers run on the raw frames: impact force on either
// protector channel, and accel magnitude on either foot. A motion trigger is
// held as a candidate for window_post_s; an impact inside that interval
// replaces it, otherwise it is emitted as MotionOnly. Every accepted trigger
// starts a refractory period that suppresses further triggers.
//
// Trigger logic only consumes crossings at or below the watermark (the
// minimum latest timestamp over the continuous channels), so the output does
// not depend on how the stream is split into batches.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "kickscore/align.hpp"
#include "kickscore/error.hpp"
#include "kickscore/sensor.hpp"

namespace kickscore {

struct SegmenterConfig {
  double force_trigger_n = 50.0;
  double accel_trigger_ms2 = 60.0;
  double window_pre_s = 0.30;
  double window_post_s = 0.20;
  double refractory_s = 0.25;
  double hysteresis_ratio = 0.8;
  double sample_rate_hz = kDefaultSampleRateHz;

  void validate() const {
    if (!(force_trigger_n > 0 && accel_trigger_ms2 > 0 && window_pre_s > 0 && window_post_s > 0 &&
          refractory_s > 0))
      throw Error(ErrorCode::InvalidConfig, "segmenter thresholds and durations must be positive");
    if (!(hysteresis_ratio > 0 && hysteresis_ratio < 1))
      throw Error(ErrorCode::InvalidConfig, "hysteresis_ratio must be in (0, 1)");
    if (!(sample_rate_hz >= 50 && sample_rate_hz <= 2000))
      throw Error(ErrorCode::InvalidConfig, "sample_rate_hz must be in [50, 2000]");
  }
};

enum class TriggerKind : std::uint8_t { Impact, MotionOnly };

constexpr std::string_view to_string(TriggerKind k) noexcept {
  return k == TriggerKind::Impact ? "Impact" : "MotionOnly";
}

struct KickEventWindow {
  std::uint8_t athlete_id = 0;
  TriggerKind trigger_kind = TriggerKind::Impact;
  std::int64_t trigger_us = 0;
  SyncedWindow window;
  bool contact_present = false;
  double impact_peak_n = 0.0;
  /// Set by flush() when trailing samples were held rather than observed.
  bool padded = false;
};

class Segmenter {
 public:
  explicit Segmenter(SegmenterConfig config = {}, std::uint8_t athlete_id = 0)
      : config_(config), athlete_id_(athlete_id) {
    config_.validate();
    pre_us_ = seconds_to_us(config_.window_pre_s);
    post_us_ = seconds_to_us(config_.window_post_s);
    refractory_us_ = seconds_to_us(config_.refractory_s);
    horizon_us_ = pre_us_ + post_us_ + refractory_us_ + 100'000;
  }

  const SegmenterConfig& config() const noexcept { return config_; }
  std::uint8_t athlete_id() const noexcept { return athlete_id_; }
  std::size_t ignored_frames() const noexcept { return ignored_; }

  /// Lower bound on the trigger time of any window not yet returned.
  std::int64_t pending_bound() const {
    const auto wm = watermark();
    if (!wm) return INT64_MIN;
    std::int64_t b = *wm + 1;
    if (candidate_) b = std::min(b, candidate_->time_us);
    if (!scheduled_.empty()) b = std::min(b, scheduled_.front().time_us);
    if (!crossings_.empty()) b = std::min(b, crossings_.front().time_us);
    return b;
  }

  std::vector<KickEventWindow> push_frames(std::span<const SensorFrame> frames) {
    std::vector<KickEventWindow> out;
    for (const auto& f : frames) push_one(f, out);
    return out;
  }

  std::vector<KickEventWindow> push(const SensorFrame& frame) {
    std::vector<KickEventWindow> out;
    push_one(frame, out);
    return out;
  }

  /// End of stream: resolves any pending candidate and emits every scheduled
  /// window, holding the last sample where trailing data is missing.
  std::vector<KickEventWindow> flush() {
    std::vector<KickEventWindow> out;
    process_crossings(std::nullopt);
    if (candidate_) {
      scheduled_.push_back(*candidate_);
      candidate_.reset();
    }
    if (!have_all_channels()) {
      scheduled_.clear();
      return out;
    }
    for (const auto& trig : scheduled_) {
      auto w = build_window(trig);
      const auto wm = watermark();
      w.padded = !wm || *wm < trig.time_us + post_us_;
      out.push_back(std::move(w));
    }
    scheduled_.clear();
    return out;
  }

 private:
  struct Crossing {
    std::int64_t time_us;
    TriggerKind kind;
  };
  struct EdgeDetector {
    bool armed = true;
    // Returns true on a rising crossing of `threshold`; re-arms below `rearm`.
    bool update(double value, double threshold, double rearm) {
      if (armed && value >= threshold) {
        armed = false;
        return true;
      }
      if (!armed && value < rearm) armed = true;
      return false;
    }
  };

  static std::int64_t seconds_to_us(double s) { return std::llround(s * 1e6); }

  void push_one(const SensorFrame& f, std::vector<KickEventWindow>& out) {
    if (f.athlete_id != athlete_id_) {
      ++ignored_;
      return;
    }
    auto& buf = buffers_[index_of(f.channel)];
    if (!buf.empty() && f.timestamp_us <= buf.back().timestamp_us) {
      ++ignored_;
      return;
    }
    buf.push_back(f);
    const auto t = static_cast<std::int64_t>(f.timestamp_us);

    if (is_impact(f.channel)) {
      const double force = std::get<ImpactSample>(f.payload).force;
      auto& det = edges_[index_of(f.channel)];
      if (det.update(force, config_.force_trigger_n, config_.hysteresis_ratio * config_.force_trigger_n))
        insert_crossing({t, TriggerKind::Impact});
    } else if (f.channel == Channel::FootImuLeft || f.channel == Channel::FootImuRight) {
      const double a = magnitude(std::get<ImuSample>(f.payload).accel);
      auto& det = edges_[index_of(f.channel)];
      if (det.update(a, config_.accel_trigger_ms2, config_.hysteresis_ratio * config_.accel_trigger_ms2))
        insert_crossing({t, TriggerKind::MotionOnly});
    }

    if (f.channel == Channel::ContactMask) return;
    const auto wm = watermark();
    if (!wm) return;
    process_crossings(*wm);
    emit_ready(*wm, out);
    prune(*wm);
  }

  void insert_crossing(Crossing c) {
    // Sorted by time; impacts before motion at equal times.
    auto pos = std::upper_bound(crossings_.begin(), crossings_.end(), c,
                                [](const Crossing& a, const Crossing& b) {
                                  if (a.time_us != b.time_us) return a.time_us < b.time_us;
                                  return a.kind < b.kind;
                                });
    crossings_.insert(pos, c);
  }

  bool have_all_channels() const {
    for (Channel c : kAllChannels)
      if (c != Channel::ContactMask && buffers_[index_of(c)].empty()) return false;
    return true;
  }

  std::optional<std::int64_t> watermark() const {
    std::optional<std::int64_t> wm;
    for (Channel c : kAllChannels) {
      if (c == Channel::ContactMask) continue;
      const auto& buf = buffers_[index_of(c)];
      if (buf.empty()) return std::nullopt;
      const auto t = static_cast<std::int64_t>(buf.back().timestamp_us);
      wm = wm ? std::min(*wm, t) : t;
    }
    return wm;
  }

  // Consumes crossings up to `limit` (all of them when nullopt).
  void process_crossings(std::optional<std::int64_t> limit) {
    while (!crossings_.empty() && (!limit || crossings_.front().time_us <= *limit)) {
      const Crossing c = crossings_.front();
      crossings_.pop_front();
      if (candidate_ && c.time_us > candidate_->time_us + post_us_) finalize_candidate();
      if (c.kind == TriggerKind::Impact) {
        if (candidate_ && c.time_us <= candidate_->time_us + post_us_) {
          candidate_.reset();
          scheduled_.push_back(c);
          refractory_until_ = c.time_us + refractory_us_;
          continue;
        }
        if (c.time_us < refractory_until_) continue;
        scheduled_.push_back(c);
        refractory_until_ = c.time_us + refractory_us_;
      } else {
        if (c.time_us < refractory_until_ || candidate_) continue;
        candidate_ = c;
        refractory_until_ = c.time_us + refractory_us_;
      }
    }
    if (limit && candidate_ && *limit >= candidate_->time_us + post_us_) finalize_candidate();
  }

  void finalize_candidate() {
    scheduled_.push_back(*candidate_);
    candidate_.reset();
  }

  void emit_ready(std::int64_t wm, std::vector<KickEventWindow>& out) {
    // Strictly past the window end, so a contact frame stamped at the end
    // tick has already arrived.
    while (!scheduled_.empty() && wm > scheduled_.front().time_us + post_us_) {
      out.push_back(build_window(scheduled_.front()));
      scheduled_.erase(scheduled_.begin());
    }
  }

  KickEventWindow build_window(const Crossing& trig) const {
    const TimeSpan span{trig.time_us - pre_us_, trig.time_us + post_us_};
    ChannelFrames frames;
    for (Channel c : kAllChannels) {
      const auto& buf = buffers_[index_of(c)];
      auto& dst = frames[index_of(c)];
      for (std::size_t i = 0; i < buf.size(); ++i) {
        const auto t = static_cast<std::int64_t>(buf[i].timestamp_us);
        const bool next_before = i + 1 < buf.size() &&
                                 static_cast<std::int64_t>(buf[i + 1].timestamp_us) <= span.start_us;
        if (next_before) continue;
        dst.push_back(buf[i]);
        if (t >= span.end_us) break;
      }
    }
    KickEventWindow w;
    w.athlete_id = athlete_id_;
    w.trigger_kind = trig.kind;
    w.trigger_us = trig.time_us;
    w.window = align_streams(frames, config_.sample_rate_hz, span);
    w.contact_present = !w.window.contact_events.empty();
    w.impact_peak_n = w.window.impact_peak.force;
    return w;
  }

  void prune(std::int64_t wm) {
    std::int64_t keep_from = wm - horizon_us_;
    if (candidate_) keep_from = std::min(keep_from, candidate_->time_us - pre_us_);
    if (!scheduled_.empty()) keep_from = std::min(keep_from, scheduled_.front().time_us - pre_us_);
    for (auto& buf : buffers_) {
      while (buf.size() >= 2 && static_cast<std::int64_t>(buf[1].timestamp_us) <= keep_from)
        buf.pop_front();
    }
  }

  SegmenterConfig config_;
  std::uint8_t athlete_id_;
  std::int64_t pre_us_ = 0;
  std::int64_t post_us_ = 0;
  std::int64_t refractory_us_ = 0;
  std::int64_t horizon_us_ = 0;

  std::array<std::deque<SensorFrame>, kChannelCount> buffers_;
  std::array<EdgeDetector, kChannelCount> edges_;
  std::deque<Crossing> crossings_;
  std::optional<Crossing> candidate_;
  std::vector<Crossing> scheduled_;
  std::int64_t refractory_until_ = INT64_MIN;
  std::size_t ignored_ = 0;
};

}  // namespace kickscore
