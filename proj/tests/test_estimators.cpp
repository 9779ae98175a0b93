#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "binbps/estimators.hpp"

using binbps::MomentAccumulator;
using binbps::SpinState;

TEST(MomentAccumulator, CancellingSegments) {
  MomentAccumulator acc(1);
  acc.accumulate_segment(SpinState::parse("+"), 2.0);
  acc.accumulate_segment(SpinState::parse("-"), 2.0);
  EXPECT_EQ(acc.finalize().first[0], 0.0);
  EXPECT_EQ(acc.total(), 4.0);
}

TEST(MomentAccumulator, SingleSegmentGivesOuterProduct) {
  MomentAccumulator acc(3);
  const auto s = SpinState::parse("+-+");
  acc.accumulate_segment(s, 0.7);
  const auto t = acc.finalize();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(t.first[i], s[i]);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t.pair(i, j), s[i] * s[j]);
  }
}

TEST(MomentAccumulator, RejectsBadInput) {
  MomentAccumulator acc(2);
  EXPECT_THROW(acc.accumulate_segment(SpinState::parse("++"), 0.0), binbps::DomainError);
  EXPECT_THROW(acc.accumulate_segment(SpinState::parse("++"), -1.0), binbps::DomainError);
  EXPECT_THROW(acc.finalize(), binbps::DomainError);
  EXPECT_THROW(acc.accumulate_segment(SpinState::parse("+"), 1.0), binbps::DimensionError);
}

TEST(MomentAccumulator, SamplesMatchUnitSegments) {
  std::mt19937_64 rng(3);
  MomentAccumulator samples(4), segments(4);
  for (int k = 0; k < 101; ++k) {
    const auto s = SpinState::from_code(rng(), 4);
    samples.accumulate_sample(s);
    segments.accumulate_segment(s, 1.0);
  }
  const auto a = samples.finalize();
  const auto b = segments.finalize();
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(a.second[i], b.second[i], 1e-12);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.first[i], b.first[i], 1e-12);
}

TEST(MomentAccumulator, EqualAndAlternatingSamples) {
  MomentAccumulator same(2);
  for (int k = 0; k < 5; ++k) same.accumulate_sample(SpinState::parse("-+"));
  const auto t = same.finalize();
  EXPECT_EQ(t.first, (std::vector{-1.0, 1.0}));
  EXPECT_EQ(t.pair(0, 1), -1.0);

  MomentAccumulator alt(1);
  for (int k = 0; k < 10; ++k) alt.accumulate_sample(SpinState(1, k % 2 ? 1 : -1));
  EXPECT_EQ(alt.finalize().first[0], 0.0);
}

TEST(MomentAccumulator, OrderIndependenceAndMerge) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dur(0.01, 3.0);
  std::vector<std::pair<SpinState, double>> segs;
  for (int k = 0; k < 500; ++k) segs.emplace_back(SpinState::from_code(rng(), 6), dur(rng));

  MomentAccumulator forward(6), shuffled(6), left(6), right(6);
  for (const auto& [s, t] : segs) forward.accumulate_segment(s, t);
  auto perm = segs;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (const auto& [s, t] : perm) shuffled.accumulate_segment(s, t);
  for (std::size_t k = 0; k < segs.size(); ++k) {
    (k < 200 ? left : right).accumulate_segment(segs[k].first, segs[k].second);
  }
  left.merge(right);

  const auto a = forward.finalize();
  for (const auto& other : {shuffled.finalize(), left.finalize()}) {
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a.first[i], other.first[i], 1e-12);
    for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(a.second[i], other.second[i], 1e-12);
  }
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.pair(i, i), 1.0);
    EXPECT_LE(std::abs(a.first[i]), 1.0);
  }
}

TEST(MomentAccumulator, FirstMomentsOnly) {
  MomentAccumulator acc(3, false);
  acc.accumulate_sample(SpinState::parse("+-+"));
  const auto t = acc.finalize();
  EXPECT_FALSE(t.has_second());
  EXPECT_EQ(t.first[1], -1.0);
  MomentAccumulator full(3);
  EXPECT_THROW(full.merge(acc), binbps::DomainError);
}

TEST(BatchMeans, SplitsEvenlyAndPoolsToTheWholeStream) {
  std::mt19937_64 rng(5);
  binbps::BatchMeans batches(2, 10, 1000);
  MomentAccumulator all(2);
  for (int k = 0; k < 1000; ++k) {
    const auto s = SpinState::from_code(rng(), 2);
    batches.accumulate_segment(s, 0.5);
    all.accumulate_segment(s, 0.5);
  }
  for (std::size_t b = 0; b < 10; ++b) EXPECT_DOUBLE_EQ(batches.batch(b).total(), 50.0);
  const auto pooled = batches.pooled().finalize();
  const auto direct = all.finalize();
  EXPECT_NEAR(pooled.first[0], direct.first[0], 1e-12);
  EXPECT_NEAR(pooled.pair(0, 1), direct.pair(0, 1), 1e-12);
  const auto se = batches.standard_errors();
  EXPECT_GT(se.first[0], 0.0);
  EXPECT_LT(se.first[0], 0.2);
}
