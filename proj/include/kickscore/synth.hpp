#pragma once

// Parametric generator of labeled synthetic kick traces.
//
// A kick occupies [lead, lead + D] of an instance that carries `lead` seconds
// of resting noise on either side. The kicking foot's acceleration follows a
// sequence of smooth bumps (the accel profile) whose largest sample is the
// drawn peak; trunk yaw rate is a half-sine over the chamber phase scaled so
// its trapezoid integral equals the drawn total yaw; the protector channel of
// the target zone carries a 20 ms half-sine force pulse centred on the
// impact sample, where a single contact frame also fires.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kickscore/align.hpp"
#include "kickscore/error.hpp"
#include "kickscore/features.hpp"
#include "kickscore/labels.hpp"
#include "kickscore/sensor.hpp"
#include "kickscore/wire.hpp"

namespace kickscore::synth {

struct Range {
  double min = 0.0;
  double max = 0.0;
  double mid() const noexcept { return 0.5 * (min + max); }
  bool valid() const noexcept { return std::isfinite(min) && std::isfinite(max) && min <= max; }
};

enum class FootPart : std::uint8_t { Toes, Instep, Heel };
enum class TargetZone : std::uint8_t { TrunkFront, TrunkLeft, TrunkRight, Head };
enum class KickingLeg : std::uint8_t { Front, Back };
enum class AccelProfile : std::uint8_t { SingleSnap, DoublePeak, DownwardArc, SpinThenSnap };

constexpr std::uint8_t foot_mask(FootPart p) noexcept {
  switch (p) {
    case FootPart::Toes: return foot_bits::Toes;
    case FootPart::Instep: return foot_bits::Instep;
    case FootPart::Heel: return foot_bits::Heel;
  }
  return 0;
}

constexpr std::uint8_t zone_mask(TargetZone z) noexcept {
  switch (z) {
    case TargetZone::TrunkFront: return zone_bits::TrunkFront;
    case TargetZone::TrunkLeft: return zone_bits::TrunkLeft;
    case TargetZone::TrunkRight: return zone_bits::TrunkRight;
    case TargetZone::Head: return zone_bits::Head;
  }
  return 0;
}

struct KickTemplate {
  TechniqueLabel label = TechniqueLabel::RoundhouseBack;
  Range duration_s;
  Range peak_foot_accel;
  Range total_hip_yaw_deg;
  Range impact_force;
  FootPart foot_part = FootPart::Instep;
  TargetZone typical_zone = TargetZone::TrunkFront;
  KickingLeg kicking_leg = KickingLeg::Back;
  AccelProfile accel_profile = AccelProfile::SingleSnap;
  /// Direction of the snap-phase acceleration in the foot frame (normalized on use).
  std::array<double, 3> snap_direction{1.0, 0.0, 0.0};

  void validate() const {
    const auto bad = [&](const std::string& why) {
      throw Error(ErrorCode::InvalidTemplate, std::string(to_string(label)) + ": " + why);
    };
    if (label == TechniqueLabel::NoValidKick) bad("NoValidKick has no kick template");
    for (const Range* r : {&duration_s, &peak_foot_accel, &total_hip_yaw_deg, &impact_force})
      if (!r->valid()) bad("range must be finite with min <= max");
    if (duration_s.min <= 0) bad("duration must be positive");
    if (peak_foot_accel.min < 0 || impact_force.min < 0) bad("peak accel and force must be >= 0");
    if (peak_foot_accel.max > kMaxAccelMagnitude) bad("peak accel above sensor bound");
    const double dir = std::hypot(snap_direction[0], snap_direction[1], snap_direction[2]);
    if (!(dir > 0) || !std::isfinite(dir)) bad("snap_direction must be nonzero");
    if (label == TechniqueLabel::TornadoKick && total_hip_yaw_deg.min < 360) bad("tornado yaw below 360");
    if (label == TechniqueLabel::BackKick && total_hip_yaw_deg.min < 150) bad("back kick yaw below 150");
    if (kicking_leg == KickingLeg::Front &&
        std::max(std::abs(total_hip_yaw_deg.min), std::abs(total_hip_yaw_deg.max)) > 120)
      bad("front-leg yaw above 120");
  }
};

struct SynthConfig {
  std::uint64_t rng_seed = 1;
  double noise_std_accel = 1.5;
  double noise_std_gyro = 0.05;
  double time_warp_pct = 10.0;
  double amplitude_jitter_pct = 15.0;
  double miss_probability = 0.0;
  double sample_rate_hz = kDefaultSampleRateHz;
  Stance stance = Stance::LeftForward;

  void validate() const {
    if (!(noise_std_accel >= 0 && noise_std_gyro >= 0))
      throw Error(ErrorCode::InvalidConfig, "noise std must be >= 0");
    if (!(time_warp_pct >= 0 && time_warp_pct <= 100 && amplitude_jitter_pct >= 0 &&
          amplitude_jitter_pct <= 100))
      throw Error(ErrorCode::InvalidConfig, "percentages must be in [0, 100]");
    if (!(miss_probability >= 0 && miss_probability <= 1))
      throw Error(ErrorCode::InvalidConfig, "miss_probability must be in [0, 1]");
    if (!(sample_rate_hz >= 50 && sample_rate_hz <= 2000))
      throw Error(ErrorCode::InvalidConfig, "sample_rate_hz must be in [50, 2000]");
  }
};

enum class InstanceKind : std::uint8_t { Kick, Rest, Foul };

constexpr std::string_view to_string(InstanceKind k) noexcept {
  switch (k) {
    case InstanceKind::Kick: return "kick";
    case InstanceKind::Rest: return "rest";
    case InstanceKind::Foul: return "foul";
  }
  return "?";
}

/// Ground truth for one generated instance. Times are session-clock microseconds.
struct Annotation {
  std::size_t index = 0;
  TechniqueLabel label = TechniqueLabel::NoValidKick;
  InstanceKind kind = InstanceKind::Kick;
  std::uint8_t athlete_id = 0;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  std::int64_t impact_us = 0;
  /// Span between the first and last 20%-of-peak crossings of the foot accel.
  double duration_s = 0.0;
  double peak_accel = 0.0;
  double total_yaw_deg = 0.0;
  double impact_force = 0.0;
  Zone zone = Zone::None;
  std::uint8_t zone_mask = 0;
  std::uint8_t foot_part_mask = 0;
  KickingLeg kicking_leg = KickingLeg::Front;
  bool missed = false;
};

struct GeneratedStream {
  std::vector<SensorFrame> frames;
  std::vector<Annotation> annotations;
};

// ---------------------------------------------------------------------------
// Default template table. Monkey and Fish kicks are not characterized
// anywhere; their entries are deliberately low-energy placeholders.

inline std::vector<KickTemplate> default_templates() {
  using L = TechniqueLabel;
  using P = AccelProfile;
  using F = FootPart;
  using Z = TargetZone;
  using G = KickingLeg;
  // label, duration, peak accel, yaw, force, foot, zone, leg, profile, snap dir
  return {
      {L::MonkeyKick, {0.25, 0.40}, {30, 50}, {0, 20}, {60, 120}, F::Toes, Z::TrunkFront, G::Front,
       P::DoublePeak, {0.8, 0.2, 0.56}},
      {L::FishKick, {0.25, 0.40}, {30, 50}, {0, 20}, {60, 120}, F::Instep, Z::TrunkLeft, G::Back,
       P::SingleSnap, {0.3, 0.3, 0.9}},
      {L::ScorpionKick, {0.35, 0.45}, {90, 140}, {40, 80}, {150, 300}, F::Heel, Z::Head, G::Back,
       P::DownwardArc, {-0.5, 0.2, -0.84}},
      {L::TwistKickFront, {0.25, 0.35}, {80, 130}, {0, 25}, {120, 250}, F::Instep, Z::TrunkRight,
       G::Front, P::SingleSnap, {0.5, -0.8, 0.33}},
      {L::AxeKickFront, {0.35, 0.45}, {100, 150}, {0, 20}, {150, 300}, F::Heel, Z::Head, G::Front,
       P::DownwardArc, {0.2, 0.1, -0.97}},
      {L::AxeKickBack, {0.35, 0.45}, {120, 180}, {10, 40}, {200, 350}, F::Heel, Z::Head, G::Back,
       P::DownwardArc, {0.25, 0.1, -0.96}},
      {L::SideKickFront, {0.20, 0.35}, {60, 120}, {0, 30}, {120, 260}, F::Heel, Z::TrunkFront,
       G::Front, P::SingleSnap, {0.95, 0.1, 0.3}},
      {L::SideKickBack, {0.30, 0.45}, {110, 170}, {60, 100}, {200, 380}, F::Heel, Z::TrunkFront,
       G::Back, P::SingleSnap, {0.95, 0.15, 0.27}},
      {L::RoundhouseFront, {0.25, 0.35}, {90, 150}, {40, 70}, {130, 260}, F::Instep, Z::TrunkLeft,
       G::Front, P::SingleSnap, {0.4, 0.85, 0.34}},
      {L::RoundhouseBack, {0.30, 0.45}, {120, 200}, {80, 120}, {180, 350}, F::Instep, Z::TrunkLeft,
       G::Back, P::SingleSnap, {0.4, 0.85, 0.34}},
      {L::BackKick, {0.35, 0.45}, {130, 190}, {150, 200}, {250, 450}, F::Heel, Z::TrunkFront, G::Back,
       P::SpinThenSnap, {-0.95, 0.1, 0.3}},
      {L::TornadoKick, {0.40, 0.45}, {150, 220}, {360, 420}, {200, 400}, F::Instep, Z::Head, G::Back,
       P::SpinThenSnap, {0.3, 0.9, 0.3}},
  };
}

inline const KickTemplate& find_template(const std::vector<KickTemplate>& table, TechniqueLabel label) {
  for (const auto& t : table)
    if (t.label == label) return t;
  throw Error(ErrorCode::InvalidTemplate, "no template for " + std::string(to_string(label)));
}

// ---------------------------------------------------------------------------
// Template table config file (JSON):
//   { "templates": [ { "label": "BackKick", "duration_s": [0.35, 0.45],
//       "peak_foot_accel": [130, 190], "total_hip_yaw_deg": [150, 200],
//       "impact_force": [250, 450], "foot_part": "Heel", "typical_zone": "TrunkFront",
//       "kicking_leg": "Back", "accel_profile": "SpinThenSnap",
//       "snap_direction": [-0.95, 0.1, 0.3] }, ... ] }

namespace detail {

template <typename E, std::size_t N>
E enum_from(const std::string& s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  throw Error(ErrorCode::InvalidConfig, std::string("unknown ") + what + " '" + s + "'");
}

inline constexpr std::array<std::string_view, 3> kFootNames{"Toes", "Instep", "Heel"};
inline constexpr std::array<std::string_view, 4> kZoneNames{"TrunkFront", "TrunkLeft", "TrunkRight",
                                                            "Head"};
inline constexpr std::array<std::string_view, 2> kLegNames{"Front", "Back"};
inline constexpr std::array<std::string_view, 4> kProfileNames{"SingleSnap", "DoublePeak",
                                                               "DownwardArc", "SpinThenSnap"};

inline Range range_from(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be [min, max]");
  return {a[0].get<double>(), a[1].get<double>()};
}

}  // namespace detail

inline std::string_view to_string(FootPart p) noexcept { return detail::kFootNames[static_cast<std::size_t>(p)]; }
inline std::string_view to_string(TargetZone z) noexcept { return detail::kZoneNames[static_cast<std::size_t>(z)]; }
inline std::string_view to_string(KickingLeg g) noexcept { return detail::kLegNames[static_cast<std::size_t>(g)]; }
inline std::string_view to_string(AccelProfile p) noexcept {
  return detail::kProfileNames[static_cast<std::size_t>(p)];
}

inline nlohmann::json templates_to_json(const std::vector<KickTemplate>& table) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : table) {
    arr.push_back({
        {"label", to_string(t.label)},
        {"duration_s", {t.duration_s.min, t.duration_s.max}},
        {"peak_foot_accel", {t.peak_foot_accel.min, t.peak_foot_accel.max}},
        {"total_hip_yaw_deg", {t.total_hip_yaw_deg.min, t.total_hip_yaw_deg.max}},
        {"impact_force", {t.impact_force.min, t.impact_force.max}},
        {"foot_part", to_string(t.foot_part)},
        {"typical_zone", to_string(t.typical_zone)},
        {"kicking_leg", to_string(t.kicking_leg)},
        {"accel_profile", to_string(t.accel_profile)},
        {"snap_direction", t.snap_direction},
    });
  }
  return {{"templates", arr}};
}

inline std::vector<KickTemplate> templates_from_json(const nlohmann::json& j) {
  std::vector<KickTemplate> out;
  try {
    for (const auto& e : j.at("templates")) {
      KickTemplate t;
      const auto name = e.at("label").get<std::string>();
      const auto label = label_from_string(name);
      if (!label) throw Error(ErrorCode::InvalidConfig, "unknown label '" + name + "'");
      t.label = *label;
      t.duration_s = detail::range_from(e, "duration_s");
      t.peak_foot_accel = detail::range_from(e, "peak_foot_accel");
      t.total_hip_yaw_deg = detail::range_from(e, "total_hip_yaw_deg");
      t.impact_force = detail::range_from(e, "impact_force");
      t.foot_part = detail::enum_from<FootPart>(e.at("foot_part").get<std::string>(), detail::kFootNames, "foot_part");
      t.typical_zone = detail::enum_from<TargetZone>(e.at("typical_zone").get<std::string>(), detail::kZoneNames, "typical_zone");
      t.kicking_leg = detail::enum_from<KickingLeg>(e.at("kicking_leg").get<std::string>(), detail::kLegNames, "kicking_leg");
      t.accel_profile = detail::enum_from<AccelProfile>(e.at("accel_profile").get<std::string>(), detail::kProfileNames, "accel_profile");
      if (e.contains("snap_direction")) t.snap_direction = e.at("snap_direction").get<std::array<double, 3>>();
      t.validate();
      out.push_back(t);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, ex.what());
  }
  return out;
}

inline std::vector<KickTemplate> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return templates_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Rendering internals

namespace detail {

inline constexpr double kLeadSeconds = 0.3;
inline constexpr double kImpactFraction = 0.6;
inline constexpr double kForcePulseWidth = 0.020;

/// Deterministic per-instance stream derived from (seed, stream id).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

struct Phase {
  double u0, u1, up, amp;
  std::array<double, 3> dir;
};

// Asymmetric sin^2 bump: 0 at u0 and u1, `amp` at up.
inline double bump(const Phase& p, double u) noexcept {
  if (u <= p.u0 || u >= p.u1) return 0.0;
  const double s = u <= p.up ? (u - p.u0) / (p.up - p.u0) : (p.u1 - u) / (p.u1 - p.up);
  const double v = std::sin(0.5 * std::numbers::pi * s);
  return p.amp * v * v;
}

inline std::array<double, 3> normalized(std::array<double, 3> d) {
  const double n = std::hypot(d[0], d[1], d[2]);
  for (auto& x : d) x /= n;
  return d;
}

inline std::vector<Phase> phases_for(AccelProfile profile, const std::array<double, 3>& snap_dir) {
  const auto snap = normalized(snap_dir);
  const double up = kImpactFraction;
  switch (profile) {
    case AccelProfile::SingleSnap:
      return {{0.0, 1.0, up, 1.0, snap}};
    case AccelProfile::DoublePeak:
      return {{0.0, 0.42, 0.21, 0.7, normalized({0.2, 0.9, 0.4})}, {0.42, 1.0, up, 1.0, snap}};
    case AccelProfile::DownwardArc:
      return {{0.0, 0.40, 0.20, 0.35, {0.0, 0.0, 1.0}}, {0.40, 1.0, up, 1.0, snap}};
    case AccelProfile::SpinThenSnap:
      return {{0.0, 0.45, 0.22, 0.25, normalized({0.7, 0.7, 0.1})}, {0.45, 1.0, up, 1.0, snap}};
  }
  return {};
}

/// Sample-indexed signals for one athlete over a contiguous block of ticks.
struct Track {
  explicit Track(std::size_t n) : length(n) {
    for (auto& c : imu) c.assign(n, {});
    for (auto& c : force) c.assign(n, 0.0);
  }
  std::size_t length;
  // foot left, foot right, trunk: ax ay az gx gy gz
  std::array<std::vector<std::array<double, 6>>, 3> imu;
  // trunk, head
  std::array<std::vector<double>, 2> force;
  std::vector<std::pair<std::size_t, ContactSample>> contacts;
};

struct ResolvedKick {
  TechniqueLabel label;
  double duration_s, peak, yaw_deg, force;
  FootPart foot_part;
  TargetZone zone;
  KickingLeg leg;
  AccelProfile profile;
  std::array<double, 3> snap_dir;
  bool missed;
};

inline double draw_in_range(const Range& r, double pct, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double jitter = u(rng) * pct / 100.0;
  return std::clamp(r.mid() * (1.0 + jitter), r.min, r.max);
}

inline ResolvedKick resolve(const KickTemplate& t, const SynthConfig& cfg, std::mt19937_64& rng) {
  ResolvedKick k{};
  k.label = t.label;
  k.duration_s = draw_in_range(t.duration_s, cfg.time_warp_pct, rng);
  k.peak = draw_in_range(t.peak_foot_accel, cfg.amplitude_jitter_pct, rng);
  k.yaw_deg = draw_in_range(t.total_hip_yaw_deg, cfg.amplitude_jitter_pct, rng);
  k.force = draw_in_range(t.impact_force, cfg.amplitude_jitter_pct, rng);
  k.foot_part = t.foot_part;
  k.zone = t.typical_zone;
  k.leg = t.kicking_leg;
  k.profile = t.accel_profile;
  k.snap_dir = t.snap_direction;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  k.missed = u01(rng) < cfg.miss_probability;
  return k;
}

inline std::size_t instance_ticks(double duration_s, double rate) {
  return static_cast<std::size_t>(std::ceil((2.0 * kLeadSeconds + duration_s) * rate)) + 1;
}

inline std::int64_t tick_us(std::size_t k, double rate) {
  return std::llround(static_cast<double>(k) * 1e6 / rate);
}

inline void add_force_pulse(Track& tr, std::size_t channel, std::size_t center, double peak, double rate) {
  const double half = 0.5 * kForcePulseWidth;
  const auto reach = static_cast<std::size_t>(std::ceil(half * rate));
  for (std::size_t k = center >= reach ? center - reach : 0; k <= center + reach && k < tr.length; ++k) {
    const double dt = (static_cast<double>(k) - static_cast<double>(center)) / rate;
    if (std::abs(dt) >= half) continue;
    tr.force[channel][k] += peak * std::cos(std::numbers::pi * dt / kForcePulseWidth);
  }
}

/// Fills the annotation fields that are relative to the block (indices are
/// converted to times by the caller via `block_start_us`).
inline Annotation render_kick(Track& tr, std::size_t start_tick, const ResolvedKick& k, double rate,
                              Stance stance, std::int64_t block_start_us) {
  const double t0 = static_cast<double>(start_tick) / rate + kLeadSeconds;
  const double D = k.duration_s;
  const auto impact_tick =
      static_cast<std::size_t>(std::llround((t0 + kImpactFraction * D) * rate));
  const double t_imp = static_cast<double>(impact_tick) / rate;
  const auto phases = phases_for(k.profile, k.snap_dir);

  const auto envelope = [&](double u, std::array<double, 3>* vec) {
    double total = 0.0;
    std::array<double, 3> v{};
    for (const auto& p : phases) {
      const double b = bump(p, u);
      total += b;
      for (int i = 0; i < 3; ++i) v[i] += b * p.dir[i];
    }
    if (vec) *vec = v;
    return total;
  };

  // Sampled envelope maximum fixes the normalization so the largest emitted
  // resultant equals the drawn peak.
  const auto first_tick = static_cast<std::size_t>(std::floor(t0 * rate));
  const auto last_tick = std::min(tr.length - 1, static_cast<std::size_t>(std::ceil((t0 + D) * rate)));
  double env_max = 0.0;
  for (std::size_t i = first_tick; i <= last_tick; ++i)
    env_max = std::max(env_max, envelope((static_cast<double>(i) / rate - t0) / D, nullptr));
  if (env_max <= 0.0) env_max = 1.0;

  const bool left_is_front = stance == Stance::LeftForward;
  const bool kick_left = (k.leg == KickingLeg::Front) == left_is_front;
  auto& foot = tr.imu[kick_left ? 0 : 1];
  auto& trunk = tr.imu[2];
  for (std::size_t i = first_tick; i <= last_tick; ++i) {
    const double u = (static_cast<double>(i) / rate - t0) / D;
    std::array<double, 3> v{};
    const double e = envelope(u, &v);
    if (e == 0.0) continue;
    for (int a = 0; a < 3; ++a) foot[i][a] += k.peak * v[a] / env_max;
    // Foot rotation about the shank and a small trunk reaction.
    foot[i][3] += 12.0 * e / env_max;
    foot[i][5] += 4.0 * e / env_max;
    trunk[i][0] += 0.12 * k.peak * e / env_max;
  }

  // Trunk yaw: half-sine over [t0, t_imp], scaled so the trapezoid integral
  // over the emitted samples equals the drawn yaw.
  const double yaw_rad = k.yaw_deg * std::numbers::pi / 180.0;
  if (yaw_rad != 0.0 && t_imp > t0) {
    std::vector<std::pair<std::size_t, double>> shape;
    for (std::size_t i = first_tick; i <= impact_tick && i < tr.length; ++i) {
      const double t = static_cast<double>(i) / rate;
      if (t <= t0 || t >= t_imp) continue;
      shape.emplace_back(i, std::sin(std::numbers::pi * (t - t0) / (t_imp - t0)));
    }
    double integral = 0.0;
    for (const auto& [i, s] : shape) integral += s;  // interior points; endpoints are zero
    integral /= rate;
    if (integral > 0.0)
      for (const auto& [i, s] : shape) trunk[i][5] += s * yaw_rad / integral;
  }

  Annotation a;
  a.label = k.label;
  a.kind = InstanceKind::Kick;
  a.peak_accel = k.peak;
  a.total_yaw_deg = k.yaw_deg;
  a.kicking_leg = k.leg;
  a.missed = k.missed;
  a.impact_us = block_start_us + tick_us(impact_tick, rate);

  // Ground-truth duration from the continuous envelope on a fine grid.
  {
    const double thr = 0.2 * env_max;
    constexpr int kSteps = 200000;
    double u_first = -1.0, u_last = -1.0;
    double prev = envelope(0.0, nullptr);
    for (int s = 1; s <= kSteps; ++s) {
      const double u = static_cast<double>(s) / kSteps;
      const double cur = envelope(u, nullptr);
      const double up = static_cast<double>(s - 1) / kSteps;
      if (u_first < 0 && prev < thr && cur >= thr) u_first = up + (thr - prev) / (cur - prev) / kSteps;
      if (prev >= thr && cur < thr) u_last = up + (prev - thr) / (prev - cur) / kSteps;
      prev = cur;
    }
    a.duration_s = (u_first >= 0 && u_last >= 0) ? (u_last - u_first) * D : 0.0;
  }

  if (!k.missed) {
    const bool head = k.zone == TargetZone::Head;
    add_force_pulse(tr, head ? 1 : 0, impact_tick, k.force, rate);
    const ContactSample c{zone_mask(k.zone), foot_mask(k.foot_part)};
    tr.contacts.emplace_back(impact_tick, c);
    a.impact_force = k.force;
    a.zone_mask = c.zone_mask;
    a.foot_part_mask = c.foot_part_mask;
    a.zone = zone_from_mask(c.zone_mask);
  }
  return a;
}

/// Adds noise and converts a track to frames. Per tick, channels are emitted
/// in enum order with the contact frame (if any) last.
inline void emit_frames(const Track& tr, std::uint8_t athlete, std::int64_t block_start_us, double rate,
                        const SynthConfig& cfg, double noise_scale, std::mt19937_64& rng,
                        std::vector<std::vector<SensorFrame>>& per_tick) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sa = cfg.noise_std_accel * noise_scale;
  const double sg = cfg.noise_std_gyro * noise_scale;
  std::size_t next_contact = 0;
  auto contacts = tr.contacts;
  std::sort(contacts.begin(), contacts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (per_tick.size() < tr.length) per_tick.resize(tr.length);
  for (std::size_t k = 0; k < tr.length; ++k) {
    const auto ts = static_cast<std::uint64_t>(block_start_us + tick_us(k, rate));
    auto& out = per_tick[k];
    for (std::size_t c = 0; c < 3; ++c) {
      ImuSample s;
      for (int a = 0; a < 3; ++a) {
        s.accel[a] = static_cast<float>(tr.imu[c][k][a] + sa * n01(rng));
        s.gyro[a] = static_cast<float>(tr.imu[c][k][3 + a] + sg * n01(rng));
      }
      out.push_back({athlete, static_cast<Channel>(c), ts, s});
    }
    for (std::size_t c = 0; c < 2; ++c) {
      const double f = tr.force[c][k] + std::abs(sa * n01(rng));
      out.push_back({athlete, c == 0 ? Channel::TrunkImpact : Channel::HeadImpact, ts,
                     ImpactSample{static_cast<float>(f)}});
    }
    // At most one contact frame per tick keeps the channel strictly monotonic.
    std::uint8_t zm = 0, fm = 0;
    bool any = false;
    while (next_contact < contacts.size() && contacts[next_contact].first == k) {
      zm |= contacts[next_contact].second.zone_mask;
      fm |= contacts[next_contact].second.foot_part_mask;
      any = true;
      ++next_contact;
    }
    if (any) out.push_back({athlete, Channel::ContactMask, ts, ContactSample{zm, fm}});
  }
}

inline std::vector<SensorFrame> flatten(std::vector<std::vector<SensorFrame>>& per_tick) {
  std::vector<SensorFrame> out;
  std::size_t total = 0;
  for (const auto& t : per_tick) total += t.size();
  out.reserve(total);
  for (auto& t : per_tick)
    for (auto& f : t) out.push_back(std::move(f));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public operations

/// One kick instance: `lead` s of rest, the kick, `lead` s of rest. The
/// instance starts at `start_us` on the session clock.
inline GeneratedStream generate_kick(const KickTemplate& tmpl, const SynthConfig& config,
                                     std::int64_t start_us = 0, std::uint8_t athlete_id = 0,
                                     std::uint64_t stream_id = 0) {
  tmpl.validate();
  config.validate();
  auto rng = detail::make_rng(config.rng_seed, stream_id);
  const auto kick = detail::resolve(tmpl, config, rng);
  const double rate = config.sample_rate_hz;
  detail::Track tr(detail::instance_ticks(kick.duration_s, rate));
  auto ann = detail::render_kick(tr, 0, kick, rate, config.stance, start_us);
  ann.athlete_id = athlete_id;
  ann.start_us = start_us;
  ann.end_us = start_us + detail::tick_us(tr.length - 1, rate);
  std::vector<std::vector<SensorFrame>> ticks;
  detail::emit_frames(tr, athlete_id, start_us, rate, config, 1.0, rng, ticks);
  return {detail::flatten(ticks), {ann}};
}

/// NoValidKick instances: resting windows (noise scaled by a uniform factor in
/// [0, 1]) or fouls (impact and contact without foot motion).
inline GeneratedStream generate_no_valid(InstanceKind kind, const SynthConfig& config,
                                         std::int64_t start_us = 0, std::uint8_t athlete_id = 0,
                                         std::uint64_t stream_id = 0) {
  config.validate();
  auto rng = detail::make_rng(config.rng_seed, stream_id);
  const double rate = config.sample_rate_hz;
  constexpr double kRestSpan = 0.4;
  detail::Track tr(detail::instance_ticks(kRestSpan, rate));
  const auto center = static_cast<std::size_t>(
      std::llround((detail::kLeadSeconds + detail::kImpactFraction * kRestSpan) * rate));
  Annotation ann;
  ann.label = TechniqueLabel::NoValidKick;
  ann.athlete_id = athlete_id;
  ann.start_us = start_us;
  ann.end_us = start_us + detail::tick_us(tr.length - 1, rate);
  ann.impact_us = start_us + detail::tick_us(center, rate);
  double noise_scale = 1.0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (kind == InstanceKind::Foul) {
    ann.kind = InstanceKind::Foul;
    const bool head = u01(rng) < 0.25;
    const double force = 80.0 + 320.0 * u01(rng);
    detail::add_force_pulse(tr, head ? 1 : 0, center, force, rate);
    const ContactSample c{head ? zone_bits::Head : zone_bits::TrunkFront, 0};
    tr.contacts.emplace_back(center, c);
    ann.impact_force = force;
    ann.zone_mask = c.zone_mask;
    ann.zone = zone_from_mask(c.zone_mask);
  } else {
    ann.kind = InstanceKind::Rest;
    noise_scale = u01(rng);
  }
  std::vector<std::vector<SensorFrame>> ticks;
  detail::emit_frames(tr, athlete_id, start_us, rate, config, noise_scale, rng, ticks);
  return {detail::flatten(ticks), {ann}};
}

struct Dataset {
  wire::LogHeader header;
  std::vector<SensorFrame> frames;
  std::vector<Annotation> annotations;
};

/// per_class instances of every template label (and of NoValidKick when
/// include_no_valid), interleaved round-robin in label order on one session
/// clock. Instance i draws from an RNG stream keyed by (seed, i).
inline Dataset generate_dataset(const std::vector<KickTemplate>& templates, std::size_t per_class,
                                const SynthConfig& config, bool include_no_valid = false) {
  if (per_class < 1) throw Error(ErrorCode::InvalidConfig, "per_class must be >= 1");
  if (templates.empty()) throw Error(ErrorCode::InvalidConfig, "no templates");
  config.validate();
  Dataset ds;
  ds.header.rate_hz = static_cast<std::uint32_t>(std::lround(config.sample_rate_hz));
  std::int64_t cursor = 0;
  std::size_t index = 0;
  const auto append = [&](GeneratedStream&& g) {
    auto ann = g.annotations.front();
    ann.index = index++;
    ds.annotations.push_back(ann);
    ds.frames.insert(ds.frames.end(), g.frames.begin(), g.frames.end());
    cursor = ann.end_us + detail::tick_us(1, config.sample_rate_hz);
  };
  for (std::size_t k = 0; k < per_class; ++k) {
    for (const auto& t : templates) append(generate_kick(t, config, cursor, 0, index));
    if (include_no_valid) {
      const auto kind = (k % 2 == 0) ? InstanceKind::Rest : InstanceKind::Foul;
      append(generate_no_valid(kind, config, cursor, 0, index));
    }
  }
  return ds;
}

struct ScriptEntry {
  std::uint8_t athlete_id = 0;
  TechniqueLabel label = TechniqueLabel::RoundhouseBack;
  double offset_s = 0.0;
};

/// Renders a timed script of kicks for any number of athletes into one
/// timestamp-ordered stream with continuous resting noise between kicks.
inline GeneratedStream generate_match_script(const std::vector<ScriptEntry>& script,
                                             const std::vector<KickTemplate>& templates,
                                             const SynthConfig& config, double tail_s = 1.0) {
  config.validate();
  if (script.empty()) return {};
  const double rate = config.sample_rate_hz;

  struct Placed {
    std::size_t entry;
    detail::ResolvedKick kick;
    std::size_t start_tick;
    double motion_begin, motion_end;
  };
  std::map<std::uint8_t, std::vector<Placed>> by_athlete;
  std::size_t total_ticks = 0;
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& e = script[i];
    if (!(e.offset_s >= 0)) throw Error(ErrorCode::InvalidConfig, "negative script offset");
    const auto& tmpl = find_template(templates, e.label);
    tmpl.validate();
    auto rng = detail::make_rng(config.rng_seed, 0x5C0000ULL + i);
    Placed p{i, detail::resolve(tmpl, config, rng),
             static_cast<std::size_t>(std::llround(e.offset_s * rate)), 0, 0};
    p.motion_begin = static_cast<double>(p.start_tick) / rate + detail::kLeadSeconds;
    p.motion_end = p.motion_begin + p.kick.duration_s;
    auto& lane = by_athlete[e.athlete_id];
    if (!lane.empty()) {
      const auto& prev = lane.back();
      if (e.offset_s < script[prev.entry].offset_s)
        throw Error(ErrorCode::InvalidConfig, "offsets must be non-decreasing per athlete");
      const double overlap = prev.motion_end - p.motion_begin;
      if (overlap > 0.5 * std::min(prev.kick.duration_s, p.kick.duration_s))
        throw Error(ErrorCode::OverlapSameAthlete,
                    "athlete " + std::to_string(e.athlete_id) + " entry " + std::to_string(i));
    }
    lane.push_back(p);
    total_ticks = std::max(total_ticks, p.start_tick + detail::instance_ticks(p.kick.duration_s, rate));
  }
  total_ticks += static_cast<std::size_t>(std::llround(tail_s * rate));

  GeneratedStream out;
  std::vector<std::vector<SensorFrame>> ticks(total_ticks);
  for (auto& [athlete, lane] : by_athlete) {
    detail::Track tr(total_ticks);
    for (const auto& p : lane) {
      auto ann = detail::render_kick(tr, p.start_tick, p.kick, rate, config.stance, 0);
      ann.index = p.entry;
      ann.athlete_id = athlete;
      ann.start_us = detail::tick_us(p.start_tick, rate);
      ann.end_us = detail::tick_us(p.start_tick + detail::instance_ticks(p.kick.duration_s, rate) - 1, rate);
      out.annotations.push_back(ann);
    }
    auto rng = detail::make_rng(config.rng_seed, 0xA7000ULL + athlete);
    detail::emit_frames(tr, athlete, 0, rate, config, 1.0, rng, ticks);
  }
  std::sort(out.annotations.begin(), out.annotations.end(),
            [](const Annotation& a, const Annotation& b) { return a.index < b.index; });
  out.frames = detail::flatten(ticks);
  return out;
}

/// `count` kicks spread over `span_s` seconds, alternating athletes, with
/// labels drawn uniformly from the templates.
inline std::vector<ScriptEntry> random_script(std::size_t count, double span_s,
                                              const std::vector<KickTemplate>& templates, std::uint64_t seed) {
  std::vector<ScriptEntry> out;
  if (count == 0 || templates.empty()) return out;
  auto rng = detail::make_rng(seed, 0x5C817ULL);
  std::uniform_int_distribution<std::size_t> pick(0, templates.size() - 1);
  std::uniform_real_distribution<double> jitter(0.0, 0.3);
  const double slot = span_s / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    ScriptEntry e;
    e.athlete_id = static_cast<std::uint8_t>(i % 2);
    e.label = templates[pick(rng)].label;
    e.offset_s = 0.5 + slot * static_cast<double>(i) + jitter(rng) * slot;
    out.push_back(e);
  }
  return out;
}

inline nlohmann::json script_to_json(const std::vector<ScriptEntry>& script) {
  auto arr = nlohmann::json::array();
  for (const auto& e : script)
    arr.push_back({{"athlete", e.athlete_id}, {"label", std::string(to_string(e.label))}, {"offset_s", e.offset_s}});
  return {{"kicks", arr}};
}

inline std::vector<ScriptEntry> script_from_json(const nlohmann::json& j) {
  std::vector<ScriptEntry> out;
  try {
    for (const auto& k : j.at("kicks")) {
      ScriptEntry e;
      e.athlete_id = k.at("athlete").get<std::uint8_t>();
      const auto l = label_from_string(k.at("label").get<std::string>());
      if (!l) throw Error(ErrorCode::InvalidConfig, "unknown label " + k["label"].get<std::string>());
      e.label = *l;
      e.offset_s = k.at("offset_s").get<double>();
      out.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("script: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotation sidecar (JSON lines)

inline nlohmann::json annotation_to_json(const Annotation& a) {
  return {{"index", a.index},
          {"label", to_string(a.label)},
          {"kind", to_string(a.kind)},
          {"athlete", a.athlete_id},
          {"start_us", a.start_us},
          {"end_us", a.end_us},
          {"impact_us", a.impact_us},
          {"duration_s", a.duration_s},
          {"peak_accel", a.peak_accel},
          {"total_yaw_deg", a.total_yaw_deg},
          {"impact_force", a.impact_force},
          {"zone", to_string(a.zone)},
          {"zone_mask", a.zone_mask},
          {"foot_part_mask", a.foot_part_mask},
          {"kicking_leg", to_string(a.kicking_leg)},
          {"missed", a.missed}};
}

inline Annotation annotation_from_json(const nlohmann::json& j) {
  Annotation a;
  try {
    a.index = j.at("index").get<std::size_t>();
    const auto name = j.at("label").get<std::string>();
    const auto label = label_from_string(name);
    if (!label) throw Error(ErrorCode::InvalidConfig, "unknown label '" + name + "'");
    a.label = *label;
    const auto kind = j.at("kind").get<std::string>();
    a.kind = kind == "rest" ? InstanceKind::Rest : kind == "foul" ? InstanceKind::Foul : InstanceKind::Kick;
    a.athlete_id = j.at("athlete").get<std::uint8_t>();
    a.start_us = j.at("start_us").get<std::int64_t>();
    a.end_us = j.at("end_us").get<std::int64_t>();
    a.impact_us = j.at("impact_us").get<std::int64_t>();
    a.duration_s = j.at("duration_s").get<double>();
    a.peak_accel = j.at("peak_accel").get<double>();
    a.total_yaw_deg = j.at("total_yaw_deg").get<double>();
    a.impact_force = j.at("impact_force").get<double>();
    a.zone_mask = j.at("zone_mask").get<std::uint8_t>();
    a.zone = zone_from_mask(a.zone_mask);
    a.foot_part_mask = j.at("foot_part_mask").get<std::uint8_t>();
    a.kicking_leg = j.at("kicking_leg").get<std::string>() == "Back" ? KickingLeg::Back : KickingLeg::Front;
    a.missed = j.at("missed").get<bool>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, std::string("annotation: ") + ex.what());
  }
  return a;
}

inline std::string annotations_to_jsonl(const std::vector<Annotation>& anns) {
  std::string out;
  for (const auto& a : anns) {
    out += annotation_to_json(a).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Annotation> annotations_from_jsonl(std::istream& in) {
  std::vector<Annotation> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidConfig, std::string("annotation line: ") + ex.what());
    }
  }
  return out;
}

/// Writes `<path>` (KSLOG) and `<path>.jsonl` (annotations).
inline void save_dataset(const Dataset& ds, const std::string& path) {
  const auto bytes = wire::encode_log(ds.header, ds.frames);
  wire::write_file_bytes(path, bytes);
  std::ofstream ann(path + ".jsonl", std::ios::binary | std::ios::trunc);
  if (!ann) throw Error(ErrorCode::Io, "cannot write " + path + ".jsonl");
  ann << annotations_to_jsonl(ds.annotations);
}

inline Dataset load_dataset(const std::string& path) {
  Dataset ds;
  const auto bytes = wire::read_file_bytes(path);
  auto log = wire::decode_log(bytes, /*strict=*/true);
  ds.header = log.header;
  ds.frames = std::move(log.frames);
  std::ifstream ann(path + ".jsonl");
  if (!ann) throw Error(ErrorCode::Io, "cannot open " + path + ".jsonl");
  ds.annotations = annotations_from_jsonl(ann);
  return ds;
}

}  // namespace kickscore::synth
