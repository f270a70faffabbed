#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace kickscore {

/// Technique classes. The underlying values are persisted in model files.
enum class TechniqueLabel : std::uint8_t {
  MonkeyKick = 0,
  FishKick,
  ScorpionKick,
  TwistKickFront,
  AxeKickFront,
  AxeKickBack,
  SideKickFront,
  SideKickBack,
  RoundhouseFront,
  RoundhouseBack,
  BackKick,
  TornadoKick,
  NoValidKick,
};

inline constexpr std::size_t kLabelCount = 13;

inline constexpr std::array<TechniqueLabel, kLabelCount> kAllLabels{
    TechniqueLabel::MonkeyKick,      TechniqueLabel::FishKick,       TechniqueLabel::ScorpionKick,
    TechniqueLabel::TwistKickFront,  TechniqueLabel::AxeKickFront,   TechniqueLabel::AxeKickBack,
    TechniqueLabel::SideKickFront,   TechniqueLabel::SideKickBack,   TechniqueLabel::RoundhouseFront,
    TechniqueLabel::RoundhouseBack,  TechniqueLabel::BackKick,       TechniqueLabel::TornadoKick,
    TechniqueLabel::NoValidKick};

/// The twelve rubric techniques (everything except NoValidKick).
inline constexpr std::array<TechniqueLabel, 12> kRubricLabels{
    TechniqueLabel::MonkeyKick,     TechniqueLabel::FishKick,       TechniqueLabel::ScorpionKick,
    TechniqueLabel::TwistKickFront, TechniqueLabel::AxeKickFront,   TechniqueLabel::AxeKickBack,
    TechniqueLabel::SideKickFront,  TechniqueLabel::SideKickBack,   TechniqueLabel::RoundhouseFront,
    TechniqueLabel::RoundhouseBack, TechniqueLabel::BackKick,       TechniqueLabel::TornadoKick};

constexpr std::size_t index_of(TechniqueLabel l) noexcept { return static_cast<std::size_t>(l); }

constexpr std::string_view to_string(TechniqueLabel l) noexcept {
  switch (l) {
    case TechniqueLabel::MonkeyKick: return "MonkeyKick";
    case TechniqueLabel::FishKick: return "FishKick";
    case TechniqueLabel::ScorpionKick: return "ScorpionKick";
    case TechniqueLabel::TwistKickFront: return "TwistKickFront";
    case TechniqueLabel::AxeKickFront: return "AxeKickFront";
    case TechniqueLabel::AxeKickBack: return "AxeKickBack";
    case TechniqueLabel::SideKickFront: return "SideKickFront";
    case TechniqueLabel::SideKickBack: return "SideKickBack";
    case TechniqueLabel::RoundhouseFront: return "RoundhouseFront";
    case TechniqueLabel::RoundhouseBack: return "RoundhouseBack";
    case TechniqueLabel::BackKick: return "BackKick";
    case TechniqueLabel::TornadoKick: return "TornadoKick";
    case TechniqueLabel::NoValidKick: return "NoValidKick";
  }
  return "?";
}

/// Human-readable technique name for score displays.
constexpr std::string_view display_name(TechniqueLabel l) noexcept {
  switch (l) {
    case TechniqueLabel::MonkeyKick: return "Monkey Kick";
    case TechniqueLabel::FishKick: return "Fish Kick";
    case TechniqueLabel::ScorpionKick: return "Scorpion Kick";
    case TechniqueLabel::TwistKickFront: return "Twist Kick (Front Leg)";
    case TechniqueLabel::AxeKickFront: return "Axe Kick (Front Leg)";
    case TechniqueLabel::AxeKickBack: return "Axe Kick (Back Leg)";
    case TechniqueLabel::SideKickFront: return "Side Kick (Front Leg)";
    case TechniqueLabel::SideKickBack: return "Side Kick (Back Leg)";
    case TechniqueLabel::RoundhouseFront: return "Roundhouse Kick (Front Leg)";
    case TechniqueLabel::RoundhouseBack: return "Roundhouse Kick (Back Leg)";
    case TechniqueLabel::BackKick: return "Back Kick";
    case TechniqueLabel::TornadoKick: return "Tornado Kick";
    case TechniqueLabel::NoValidKick: return "No Valid Kick";
  }
  return "?";
}

constexpr std::optional<TechniqueLabel> label_from_string(std::string_view s) noexcept {
  for (auto l : kAllLabels)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

constexpr std::optional<TechniqueLabel> label_from_index(std::size_t i) noexcept {
  if (i < kLabelCount) return static_cast<TechniqueLabel>(i);
  return std::nullopt;
}

}  // namespace kickscore
