#pragma once

// Multi-stream time alignment onto a uniform sample grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "kickscore/error.hpp"
#include "kickscore/sensor.hpp"

namespace kickscore {

inline constexpr double kDefaultSampleRateHz = 200.0;

/// Resampled IMU reading in double precision.
struct ImuPoint {
  std::array<double, 3> accel{};
  std::array<double, 3> gyro{};
};

struct TimedContact {
  std::int64_t timestamp_us = 0;
  ContactSample contact;
};

struct ImpactPeak {
  std::int64_t timestamp_us = 0;
  double force = 0.0;
  Channel channel = Channel::TrunkImpact;
};

/// Signed span so windows may start before the session clock's zero.
struct TimeSpan {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
};

struct SyncedWindow {
  std::uint8_t athlete_id = 0;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  double sample_rate_hz = kDefaultSampleRateHz;
  std::vector<ImuPoint> foot_left;
  std::vector<ImuPoint> foot_right;
  std::vector<ImuPoint> trunk;
  std::vector<double> trunk_force;
  std::vector<double> head_force;
  std::vector<TimedContact> contact_events;
  ImpactPeak impact_peak;

  std::size_t size() const noexcept { return foot_left.size(); }
  double dt() const noexcept { return 1.0 / sample_rate_hz; }
  /// Grid time of sample k, microseconds on the session clock.
  double time_us(std::size_t k) const noexcept {
    return static_cast<double>(start_us) + static_cast<double>(k) * 1e6 / sample_rate_hz;
  }
};

/// Per-channel frame lists, indexed by index_of(Channel).
using ChannelFrames = std::array<std::vector<SensorFrame>, kChannelCount>;

inline std::size_t grid_length(TimeSpan span, double rate_hz) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(span.end_us - span.start_us) * rate_hz / 1e6));
}

namespace detail {

inline void check_monotonic(const std::vector<SensorFrame>& frames, Channel c) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].timestamp_us <= frames[i - 1].timestamp_us)
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  std::string(to_string(c)) + " frame " + std::to_string(i));
  }
}

// Piecewise-linear interpolation with nearest-endpoint hold. `value(i)` reads
// component data of frame i; grid times must be non-decreasing.
template <typename Out, typename Read>
std::vector<Out> resample(const std::vector<SensorFrame>& frames, std::size_t n, double t0_us,
                          double step_us, Read value) {
  std::vector<Out> out(n);
  std::size_t j = 0;
  const double first = static_cast<double>(frames.front().timestamp_us);
  const double last = static_cast<double>(frames.back().timestamp_us);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0_us + static_cast<double>(k) * step_us;
    if (t <= first) {
      out[k] = value(0, 0, 0.0);
      continue;
    }
    if (t >= last) {
      out[k] = value(frames.size() - 1, frames.size() - 1, 0.0);
      continue;
    }
    while (j + 1 < frames.size() && static_cast<double>(frames[j + 1].timestamp_us) <= t) ++j;
    const double ta = static_cast<double>(frames[j].timestamp_us);
    const double tb = static_cast<double>(frames[j + 1].timestamp_us);
    out[k] = value(j, j + 1, (t - ta) / (tb - ta));
  }
  return out;
}

inline std::vector<ImuPoint> resample_imu(const std::vector<SensorFrame>& frames, std::size_t n,
                                          double t0_us, double step_us) {
  return resample<ImuPoint>(frames, n, t0_us, step_us,
                            [&](std::size_t a, std::size_t b, double w) {
                              const auto& sa = std::get<ImuSample>(frames[a].payload);
                              const auto& sb = std::get<ImuSample>(frames[b].payload);
                              ImuPoint p;
                              for (int i = 0; i < 3; ++i) {
                                p.accel[i] = w == 0.0 ? double(sa.accel[i])
                                                      : sa.accel[i] + w * (double(sb.accel[i]) - sa.accel[i]);
                                p.gyro[i] = w == 0.0 ? double(sa.gyro[i])
                                                     : sa.gyro[i] + w * (double(sb.gyro[i]) - sa.gyro[i]);
                              }
                              return p;
                            });
}

inline std::vector<double> resample_force(const std::vector<SensorFrame>& frames, std::size_t n,
                                          double t0_us, double step_us) {
  return resample<double>(frames, n, t0_us, step_us, [&](std::size_t a, std::size_t b, double w) {
    const double fa = std::get<ImpactSample>(frames[a].payload).force;
    const double fb = std::get<ImpactSample>(frames[b].payload).force;
    return w == 0.0 ? fa : fa + w * (fb - fa);
  });
}

}  // namespace detail

/// Resamples every continuous channel onto a shared grid of
/// round((end - start) * rate / 1e6) samples starting at span.start_us.
/// Contact frames inside the span pass through untouched; impact_peak is the
/// largest raw force sample inside the span on either impact channel.
inline SyncedWindow align_streams(const ChannelFrames& frames, double rate_hz, TimeSpan span) {
  if (span.start_us >= span.end_us)
    throw Error(ErrorCode::InvalidSpan,
                std::to_string(span.start_us) + " >= " + std::to_string(span.end_us));
  if (!(rate_hz >= 50.0 && rate_hz <= 2000.0))
    throw Error(ErrorCode::InvalidConfig, "rate_hz must be in [50, 2000]");
  for (Channel c : kAllChannels) {
    const auto& list = frames[index_of(c)];
    if (c != Channel::ContactMask && list.empty())
      throw Error(ErrorCode::EmptyChannel, std::string(to_string(c)));
    detail::check_monotonic(list, c);
  }

  SyncedWindow w;
  w.athlete_id = frames[index_of(Channel::FootImuLeft)].front().athlete_id;
  w.start_us = span.start_us;
  w.end_us = span.end_us;
  w.sample_rate_hz = rate_hz;
  const std::size_t n = grid_length(span, rate_hz);
  const double t0 = static_cast<double>(span.start_us);
  const double step = 1e6 / rate_hz;
  w.foot_left = detail::resample_imu(frames[index_of(Channel::FootImuLeft)], n, t0, step);
  w.foot_right = detail::resample_imu(frames[index_of(Channel::FootImuRight)], n, t0, step);
  w.trunk = detail::resample_imu(frames[index_of(Channel::TrunkImu)], n, t0, step);
  w.trunk_force = detail::resample_force(frames[index_of(Channel::TrunkImpact)], n, t0, step);
  w.head_force = detail::resample_force(frames[index_of(Channel::HeadImpact)], n, t0, step);

  const auto inside = [&](std::uint64_t ts) {
    const auto t = static_cast<std::int64_t>(ts);
    return t >= span.start_us && t <= span.end_us;
  };
  for (const auto& f : frames[index_of(Channel::ContactMask)]) {
    if (inside(f.timestamp_us))
      w.contact_events.push_back({static_cast<std::int64_t>(f.timestamp_us),
                                  std::get<ContactSample>(f.payload)});
  }
  w.impact_peak = {span.start_us, 0.0, Channel::TrunkImpact};
  for (Channel c : {Channel::TrunkImpact, Channel::HeadImpact}) {
    for (const auto& f : frames[index_of(c)]) {
      if (!inside(f.timestamp_us)) continue;
      const double force = std::get<ImpactSample>(f.payload).force;
      if (force > w.impact_peak.force)
        w.impact_peak = {static_cast<std::int64_t>(f.timestamp_us), force, c};
    }
  }
  return w;
}

/// Rejects frames that break per-(athlete, channel) timestamp monotonicity.
class MonotonicGuard {
 public:
  /// Returns false (and counts) when the frame is out of order.
  bool accept(const SensorFrame& f) {
    auto& last = last_[{f.athlete_id, index_of(f.channel)}];
    if (last.seen && f.timestamp_us <= last.ts) {
      ++rejected_;
      return false;
    }
    last = {true, f.timestamp_us};
    return true;
  }

  /// Throwing variant for callers that treat disorder as a hard error.
  void require(const SensorFrame& f) {
    if (!accept(f))
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  "athlete " + std::to_string(f.athlete_id) + " " + std::string(to_string(f.channel)));
  }

  std::size_t rejected() const noexcept { return rejected_; }

 private:
  struct Last {
    bool seen = false;
    std::uint64_t ts = 0;
  };
  std::map<std::pair<std::uint8_t, std::size_t>, Last> last_;
  std::size_t rejected_ = 0;
};

}  // namespace kickscore
