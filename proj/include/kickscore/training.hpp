#pragma once

// Turning annotated synthetic datasets into labeled feature vectors.

#include <algorithm>
#include <vector>

#include "kickscore/features.hpp"
#include "kickscore/segmentation.hpp"
#include "kickscore/svm.hpp"
#include "kickscore/synth.hpp"

namespace kickscore {

struct AnnotatedWindow {
  synth::Annotation annotation;
  KickEventWindow window;
  /// False when the segmenter produced nothing for the instance and the
  /// window was cut around the annotated centre instead.
  bool segmented = true;
};

/// Window built directly around `trigger_us` from a frame list.
inline KickEventWindow window_at(std::span<const SensorFrame> frames, std::int64_t trigger_us,
                                 const SegmenterConfig& cfg, std::uint8_t athlete_id = 0) {
  const auto pre = std::llround(cfg.window_pre_s * 1e6);
  const auto post = std::llround(cfg.window_post_s * 1e6);
  const TimeSpan span{trigger_us - pre, trigger_us + post};
  ChannelFrames per;
  for (const auto& f : frames) {
    if (f.athlete_id != athlete_id) continue;
    per[index_of(f.channel)].push_back(f);
  }
  // Keep one frame either side of the span for interpolation.
  for (auto& v : per) {
    if (v.empty()) continue;
    auto lo = std::upper_bound(v.begin(), v.end(), span.start_us, [](std::int64_t t, const SensorFrame& f) {
      return t < static_cast<std::int64_t>(f.timestamp_us);
    });
    if (lo != v.begin()) --lo;
    auto hi = std::upper_bound(v.begin(), v.end(), span.end_us, [](std::int64_t t, const SensorFrame& f) {
      return t < static_cast<std::int64_t>(f.timestamp_us);
    });
    if (hi != v.end()) ++hi;
    v = std::vector<SensorFrame>(lo, hi);
  }
  KickEventWindow w;
  w.athlete_id = athlete_id;
  w.trigger_kind = TriggerKind::MotionOnly;
  w.trigger_us = trigger_us;
  w.window = align_streams(per, cfg.sample_rate_hz, span);
  w.contact_present = !w.window.contact_events.empty();
  w.impact_peak_n = w.window.impact_peak.force;
  return w;
}

/// Runs the segmenter over a dataset stream and pairs each annotation with
/// the window whose trigger falls inside the instance (impact windows
/// preferred). Instances with no window get one cut at the annotated centre.
inline std::vector<AnnotatedWindow> dataset_windows(const synth::Dataset& ds, const SegmenterConfig& cfg = {}) {
  Segmenter seg(cfg, 0);
  auto windows = seg.push_frames(ds.frames);
  auto tail = seg.flush();
  windows.insert(windows.end(), std::make_move_iterator(tail.begin()), std::make_move_iterator(tail.end()));

  std::vector<AnnotatedWindow> out;
  out.reserve(ds.annotations.size());
  std::size_t w = 0;
  std::size_t frame_lo = 0;
  for (const auto& ann : ds.annotations) {
    while (w < windows.size() && windows[w].trigger_us < ann.start_us) ++w;
    const KickEventWindow* best = nullptr;
    for (std::size_t k = w; k < windows.size() && windows[k].trigger_us <= ann.end_us; ++k) {
      if (!best || (best->trigger_kind != TriggerKind::Impact && windows[k].trigger_kind == TriggerKind::Impact))
        best = &windows[k];
    }
    if (best) {
      out.push_back({ann, *best, true});
      continue;
    }
    while (frame_lo < ds.frames.size() &&
           static_cast<std::int64_t>(ds.frames[frame_lo].timestamp_us) < ann.start_us)
      ++frame_lo;
    std::size_t frame_hi = frame_lo;
    while (frame_hi < ds.frames.size() &&
           static_cast<std::int64_t>(ds.frames[frame_hi].timestamp_us) <= ann.end_us)
      ++frame_hi;
    const std::span<const SensorFrame> inst(ds.frames.data() + frame_lo, frame_hi - frame_lo);
    out.push_back({ann, window_at(inst, ann.impact_us, cfg, ann.athlete_id), false});
  }
  return out;
}

inline std::vector<svm::LabeledSample> dataset_samples(const synth::Dataset& ds, Stance stance = Stance::LeftForward,
                                                       const SegmenterConfig& cfg = {}) {
  std::vector<svm::LabeledSample> out;
  for (const auto& aw : dataset_windows(ds, cfg)) out.push_back({extract_features(aw.window, stance), aw.annotation.label});
  return out;
}

}  // namespace kickscore
