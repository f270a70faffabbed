#pragma once

// Fixed-order 22-feature summary of a kick event window, plus z-score
// standardization. The order below is a frozen contract: model files index
// into it. Bump kFeatureSchemaVersion on any change.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "kickscore/error.hpp"
#include "kickscore/segmentation.hpp"

namespace kickscore {

inline constexpr std::size_t kFeatureCount = 22;
inline constexpr std::uint16_t kFeatureSchemaVersion = 1;

using FeatureVector = std::array<double, kFeatureCount>;

namespace feature {
enum Index : std::size_t {
  KickDuration = 0,
  TimeToPeakAccel = 1,
  PeakAccelX = 2,
  PeakAccelY = 3,
  PeakAccelZ = 4,
  PeakResultantAccel = 5,
  PeakTrunkYawRate = 6,
  TotalTrunkYawDeg = 7,
  Rotation360 = 8,
  ImpactPeak = 9,
  ImpactToPeakLag = 10,
  MeanAccelX = 11,
  MeanAccelY = 12,
  MeanAccelZ = 13,
  KurtosisAccelX = 14,
  KurtosisAccelY = 15,
  KurtosisAccelZ = 16,
  AccelPeakCount = 17,
  DominantFrequency = 18,
  FootPartCode = 19,
  ZoneCode = 20,
  KickingLeg = 21,
};
}  // namespace feature

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "kick_duration_s",      "time_to_peak_accel_s", "peak_abs_accel_x",    "peak_abs_accel_y",
    "peak_abs_accel_z",     "peak_resultant_accel", "peak_abs_trunk_yaw_rate",
    "total_trunk_yaw_deg",  "rotation_ge_360",      "impact_peak_n",       "impact_to_peak_accel_lag_s",
    "mean_accel_x",         "mean_accel_y",         "mean_accel_z",        "kurtosis_accel_x",
    "kurtosis_accel_y",     "kurtosis_accel_z",     "accel_peak_count",    "dominant_frequency_hz",
    "foot_part_code",       "zone_code",            "kicking_leg"};

/// Which foot leads in the athlete's fighting stance for the round.
enum class Stance : std::uint8_t { LeftForward, RightForward };

enum class Zone : std::uint8_t { None = 0, Trunk = 1, Head = 2 };

constexpr std::string_view to_string(Zone z) noexcept {
  switch (z) {
    case Zone::None: return "None";
    case Zone::Trunk: return "Trunk";
    case Zone::Head: return "Head";
  }
  return "?";
}

/// Head dominates when both head and trunk bits are set.
constexpr Zone zone_from_mask(std::uint8_t zone_mask) noexcept {
  if (zone_mask & zone_bits::Head) return Zone::Head;
  if (zone_mask & zone_bits::TrunkAny) return Zone::Trunk;
  return Zone::None;
}

/// 0 none, 1 toes, 2 instep, 3 heel; the lowest set bit wins.
constexpr int foot_part_code(std::uint8_t foot_mask) noexcept {
  if (foot_mask & foot_bits::Toes) return 1;
  if (foot_mask & foot_bits::Instep) return 2;
  if (foot_mask & foot_bits::Heel) return 3;
  return 0;
}

/// Zone of the contact events in a window; Head dominates across events too.
inline Zone window_zone(std::span<const TimedContact> contacts) noexcept {
  std::uint8_t mask = 0;
  for (const auto& c : contacts) mask |= c.contact.zone_mask;
  return zone_from_mask(mask);
}

// ---------------------------------------------------------------------------
// Signal helpers

/// Excess kurtosis; 0 when n < 4 or the variance vanishes.
inline double excess_kurtosis(std::span<const double> x) noexcept {
  const std::size_t n = x.size();
  if (n < 4) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 1e-300) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

/// Trapezoid-rule integral of uniformly spaced samples.
inline double trapezoid(std::span<const double> y, double dt) noexcept {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * dt;
}

/// Frequency (Hz) of the largest DFT magnitude bin, DC excluded, after
/// zero-padding to the next power of two.
inline double dominant_frequency(std::span<const double> x, double rate_hz) {
  if (x.size() < 2) return 0.0;
  std::size_t n = 1;
  while (n < x.size()) n <<= 1;
  double best = 0.0;
  std::size_t best_bin = 0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    std::complex<double> acc{0.0, 0.0};
    const double w = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    for (std::size_t t = 0; t < x.size(); ++t)
      acc += x[t] * std::polar(1.0, w * static_cast<double>(t));
    const double mag = std::abs(acc);
    if (mag > best) {
      best = mag;
      best_bin = k;
    }
  }
  return static_cast<double>(best_bin) * rate_hz / static_cast<double>(n);
}

/// Number of excursions above 50% of the maximum, separated by dips below 40%.
inline int count_peaks(std::span<const double> x) noexcept {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, v);
  if (peak <= 0.0) return 0;
  const double hi = 0.5 * peak, lo = 0.4 * peak;
  int count = 0;
  bool above = false;
  for (double v : x) {
    if (!above && v > hi) {
      above = true;
      ++count;
    } else if (above && v < lo) {
      above = false;
    }
  }
  return count;
}

// ---------------------------------------------------------------------------

inline FeatureVector extract_features(const KickEventWindow& event, Stance stance) {
  using namespace feature;
  FeatureVector f{};
  const SyncedWindow& w = event.window;
  const std::size_t n = w.size();
  const double dt = w.dt();

  // Kicking foot: the foot channel carrying the larger resultant peak.
  std::vector<double> res_left(n), res_right(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = w.foot_left[k].accel;
    const auto& b = w.foot_right[k].accel;
    res_left[k] = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    res_right[k] = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  }
  const double peak_left = n ? *std::max_element(res_left.begin(), res_left.end()) : 0.0;
  const double peak_right = n ? *std::max_element(res_right.begin(), res_right.end()) : 0.0;
  const bool left_kicks = peak_left >= peak_right;
  const auto& foot = left_kicks ? w.foot_left : w.foot_right;
  const auto& res = left_kicks ? res_left : res_right;
  const double peak = left_kicks ? peak_left : peak_right;

  if (n > 0 && peak > 0.0) {
    const auto k_peak =
        static_cast<std::size_t>(std::max_element(res.begin(), res.end()) - res.begin());
    const double thr = 0.2 * peak;
    std::size_t first = 0;
    while (res[first] < thr) ++first;
    std::size_t last = n - 1;
    while (res[last] < thr) --last;
    // Linear interpolation of the threshold crossing times.
    double t_first = static_cast<double>(first) * dt;
    if (first > 0)
      t_first -= dt * (res[first] - thr) / (res[first] - res[first - 1]);
    double t_last = static_cast<double>(last) * dt;
    if (last + 1 < n) t_last += dt * (res[last] - thr) / (res[last] - res[last + 1]);
    const double t_peak = static_cast<double>(k_peak) * dt;

    f[KickDuration] = t_last - t_first;
    f[TimeToPeakAccel] = t_peak - t_first;
    f[PeakResultantAccel] = peak;
    if (event.impact_peak_n > 0.0) {
      const double t_impact =
          (static_cast<double>(w.impact_peak.timestamp_us) - static_cast<double>(w.start_us)) * 1e-6;
      f[ImpactToPeakLag] = t_impact - t_peak;
    }
    f[AccelPeakCount] = count_peaks(res);
    f[DominantFrequency] = dominant_frequency(res, w.sample_rate_hz);
    const bool kicking_is_front =
        (left_kicks && stance == Stance::LeftForward) || (!left_kicks && stance == Stance::RightForward);
    f[KickingLeg] = kicking_is_front ? 0.0 : 1.0;
  }

  std::array<std::vector<double>, 3> axes;
  for (auto& a : axes) a.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    for (int i = 0; i < 3; ++i) axes[i][k] = foot[k].accel[i];
  for (int i = 0; i < 3; ++i) {
    double pk = 0.0, sum = 0.0;
    for (double v : axes[i]) {
      pk = std::max(pk, std::abs(v));
      sum += v;
    }
    f[PeakAccelX + i] = pk;
    f[MeanAccelX + i] = n ? sum / static_cast<double>(n) : 0.0;
    f[KurtosisAccelX + i] = excess_kurtosis(axes[i]);
  }

  std::vector<double> yaw(n);
  double yaw_peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    yaw[k] = w.trunk[k].gyro[2];
    yaw_peak = std::max(yaw_peak, std::abs(yaw[k]));
  }
  f[PeakTrunkYawRate] = yaw_peak;
  f[TotalTrunkYawDeg] = std::abs(trapezoid(yaw, dt)) * 180.0 / std::numbers::pi;
  f[Rotation360] = f[TotalTrunkYawDeg] >= 360.0 ? 1.0 : 0.0;

  f[feature::ImpactPeak] = event.impact_peak_n;

  std::uint8_t foot_mask = 0;
  for (const auto& c : w.contact_events) {
    if (c.contact.foot_part_mask != 0) {
      foot_mask = c.contact.foot_part_mask;
      break;
    }
  }
  f[FootPartCode] = foot_part_code(foot_mask);
  f[ZoneCode] = static_cast<double>(window_zone(w.contact_events));
  return f;
}

inline bool all_finite(const FeatureVector& v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------

struct Standardizer {
  static constexpr double kStdFloor = 1e-9;

  FeatureVector mean{};
  FeatureVector std{};

  static Standardizer fit(std::span<const FeatureVector> data) {
    if (data.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit standardizer");
    Standardizer s;
    const double n = static_cast<double>(data.size());
    for (const auto& v : data)
      for (std::size_t i = 0; i < kFeatureCount; ++i) s.mean[i] += v[i];
    for (auto& m : s.mean) m /= n;
    for (const auto& v : data)
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const double d = v[i] - s.mean[i];
        s.std[i] += d * d;
      }
    for (auto& sd : s.std) sd = std::sqrt(sd / n);
    return s;
  }

  FeatureVector apply(const FeatureVector& v) const noexcept {
    FeatureVector out;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      out[i] = (v[i] - mean[i]) / std::max(std[i], kStdFloor);
    return out;
  }
};

}  // namespace kickscore
