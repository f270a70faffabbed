#include <gtest/gtest.h>

#include "kickscore/align.hpp"
#include "test_support.hpp"

using namespace kickscore;

namespace {

// All continuous channels carry accel.x = value(t); forces carry value(t) too.
template <typename F>
ChannelFrames channels_from(const std::vector<std::uint64_t>& times, F value) {
  ChannelFrames cf;
  for (auto t : times) {
    const auto v = static_cast<float>(value(t));
    for (Channel c : {Channel::FootImuLeft, Channel::FootImuRight, Channel::TrunkImu})
      cf[index_of(c)].push_back(kstest::imu(2, c, t, {v, 0, 0}, {0, 0, v}));
    for (Channel c : {Channel::TrunkImpact, Channel::HeadImpact})
      cf[index_of(c)].push_back(kstest::impact(2, c, t, v));
  }
  return cf;
}

}  // namespace

TEST(Align, IdentityAtKnots) {
  std::vector<std::uint64_t> times;
  for (int k = 0; k < 100; ++k) times.push_back(1'000'000 + 5000ULL * k);
  const auto cf = channels_from(times, [](std::uint64_t t) { return (t / 5000) % 7; });
  const auto w = align_streams(cf, 200.0, {1'000'000, 1'000'000 + 5000 * 99});
  ASSERT_EQ(w.size(), 99U);
  EXPECT_EQ(w.athlete_id, 2);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double expect = static_cast<double>((times[k] / 5000) % 7);
    EXPECT_EQ(w.foot_left[k].accel[0], expect);
    EXPECT_EQ(w.trunk[k].gyro[2], expect);
    EXPECT_EQ(w.head_force[k], expect);
  }
}

TEST(Align, RampMidpoints) {
  // Source at 100 Hz, grid at 200 Hz: every other grid point is a midpoint.
  std::vector<std::uint64_t> times;
  for (int k = 0; k <= 50; ++k) times.push_back(10000ULL * k);
  const auto cf = channels_from(times, [](std::uint64_t t) { return static_cast<double>(t) / 10000.0 * 2.0; });
  const auto w = align_streams(cf, 200.0, {0, 500000});
  ASSERT_EQ(w.size(), 100U);
  for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(w.foot_right[k].accel[0], static_cast<double>(k), 1e-9);
}

TEST(Align, RandomPiecewiseLinearWithinTolerance) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::uint64_t> gap(1000, 9000);
  std::uniform_real_distribution<double> val(-100, 100);
  std::vector<std::uint64_t> times{0};
  std::vector<double> values{val(rng)};
  while (times.back() < 2'000'000) {
    times.push_back(times.back() + gap(rng));
    values.push_back(val(rng));
  }
  std::map<std::uint64_t, double> lookup;
  for (std::size_t i = 0; i < times.size(); ++i) lookup[times[i]] = static_cast<float>(values[i]);
  const auto cf = channels_from(times, [&](std::uint64_t t) { return lookup[t]; });
  const auto w = align_streams(cf, 333.0, {100'000, 1'900'000});

  // Independent oracle: binary search for the bracketing knots.
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double t = w.time_us(k);
    auto hi = lookup.upper_bound(static_cast<std::uint64_t>(t));
    auto lo = std::prev(hi);
    const double frac = (t - static_cast<double>(lo->first)) / static_cast<double>(hi->first - lo->first);
    const double expect = lo->second + frac * (hi->second - lo->second);
    EXPECT_NEAR(w.trunk_force[k], expect, 1e-6);
    EXPECT_NEAR(w.foot_left[k].accel[0], expect, 1e-6);
  }
}

TEST(Align, HoldsEndpointsOutsideData) {
  const auto cf = channels_from({100000, 200000}, [](std::uint64_t t) { return t / 100000.0; });
  const auto w = align_streams(cf, 100.0, {0, 300000});
  EXPECT_EQ(w.trunk[0].accel[0], 1.0);
  EXPECT_EQ(w.trunk[29].accel[0], 2.0);
}

TEST(Align, ContactsAndImpactPeak) {
  auto cf = channels_from({0, 100000, 200000}, [](std::uint64_t) { return 0.0; });
  cf[index_of(Channel::HeadImpact)][1] = kstest::impact(2, Channel::HeadImpact, 100000, 900);
  cf[index_of(Channel::TrunkImpact)][2] = kstest::impact(2, Channel::TrunkImpact, 200000, 400);
  cf[index_of(Channel::ContactMask)] = {kstest::contact(2, 50000, zone_bits::Head, foot_bits::Instep),
                                        kstest::contact(2, 500000, zone_bits::TrunkFront, 0)};
  const auto w = align_streams(cf, 200.0, {0, 200000});
  ASSERT_EQ(w.contact_events.size(), 1U);
  EXPECT_EQ(w.contact_events[0].timestamp_us, 50000);
  EXPECT_EQ(w.impact_peak.force, 900.0);
  EXPECT_EQ(w.impact_peak.channel, Channel::HeadImpact);
  EXPECT_EQ(w.impact_peak.timestamp_us, 100000);
}

TEST(Align, Errors) {
  const auto cf = channels_from({0, 100000}, [](std::uint64_t) { return 0.0; });
  auto code = [&](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code([&] { align_streams(cf, 200, {10, 10}); }), ErrorCode::InvalidSpan);
  EXPECT_EQ(code([&] { align_streams(cf, 200, {10, 5}); }), ErrorCode::InvalidSpan);
  auto missing = cf;
  missing[index_of(Channel::TrunkImu)].clear();
  EXPECT_EQ(code([&] { align_streams(missing, 200, {0, 10}); }), ErrorCode::EmptyChannel);
  auto disorder = cf;
  std::swap(disorder[0][0], disorder[0][1]);
  EXPECT_EQ(code([&] { align_streams(disorder, 200, {0, 10}); }), ErrorCode::NonMonotonicTimestamp);
  EXPECT_EQ(code([&] { align_streams(cf, 10, {0, 10}); }), ErrorCode::InvalidConfig);
}

TEST(MonotonicGuard, PerAthleteChannel) {
  MonotonicGuard g;
  EXPECT_TRUE(g.accept(kstest::impact(0, Channel::TrunkImpact, 10, 0)));
  EXPECT_TRUE(g.accept(kstest::impact(1, Channel::TrunkImpact, 5, 0)));
  EXPECT_TRUE(g.accept(kstest::impact(0, Channel::HeadImpact, 5, 0)));
  EXPECT_FALSE(g.accept(kstest::impact(0, Channel::TrunkImpact, 10, 0)));
  EXPECT_EQ(g.rejected(), 1U);
  EXPECT_THROW(g.require(kstest::impact(1, Channel::TrunkImpact, 4, 0)), Error);
}
