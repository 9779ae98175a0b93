#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "binbps/bps.hpp"
#include "binbps/oracle.hpp"

using binbps::AugmentationKind;
using binbps::BpsConfig;
using binbps::EventKind;
using binbps::FlatModel;
using binbps::MrfModel;
using binbps::OrthantState;
using binbps::SpinState;

namespace {

/// exp(-int_0^t [c + t']_+ dt') by quadrature, the survival probability the
/// closed-form inversion must hit.
double survival_by_quadrature(double c, double t) {
  auto rate = [c](double x) { return std::max(0.0, c + x); };
  using boost::math::quadrature::gauss_kronrod;
  double integral = 0.0;
  if (-c > 0.0 && -c < t) {
    integral = gauss_kronrod<double, 15>::integrate(rate, 0.0, -c) +
               gauss_kronrod<double, 15>::integrate(rate, -c, t);
  } else {
    integral = gauss_kronrod<double, 15>::integrate(rate, 0.0, t);
  }
  return std::exp(-integral);
}

double norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

/// Records the orthant at regularly spaced trajectory times.
struct SnapshotSink {
  double spacing;
  std::vector<std::uint64_t> counts;
  double clock = 0.0;
  double next = 0.0;

  SnapshotSink(double spacing_, std::size_t dim) : spacing(spacing_), counts(1u << dim, 0) {}

  void accumulate_segment(const SpinState& s, double duration) {
    const double end = clock + duration;
    while (next < end) {
      ++counts[s.code()];
      next += spacing;
    }
    clock = end;
  }
  void accumulate_sample(const SpinState&) {}
};

}  // namespace

// --- event-time inversion -------------------------------------------------

TEST(BounceTimeGaussian, Examples) {
  EXPECT_EQ(binbps::bounce_time_gaussian(3.0, 0.0), 0.0);
  EXPECT_NEAR(binbps::bounce_time_gaussian(0.0, 2.0), 2.0, 1e-15);
  EXPECT_NEAR(binbps::bounce_time_gaussian(-1.0, 0.5), 2.0, 1e-15);
  // the same values through the quadrature oracle
  EXPECT_NEAR(survival_by_quadrature(0.0, 2.0), std::exp(-2.0), 1e-12);
  EXPECT_NEAR(survival_by_quadrature(-1.0, 2.0), std::exp(-0.5), 1e-12);
  EXPECT_THROW(binbps::bounce_time_gaussian(0.0, -1.0), binbps::DomainError);
}

TEST(BounceTimeGaussian, InvertsTheIntegratedRate) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cdist(-10.0, 10.0);
  std::exponential_distribution<double> edist(0.3);
  for (int k = 0; k < 1000; ++k) {
    const double c = cdist(rng);
    const double e = edist(rng);
    const double t = binbps::bounce_time_gaussian(c, e);
    EXPECT_NEAR(-std::log(survival_by_quadrature(c, t)), e, 1e-8) << "c=" << c << " E=" << e;
  }
}

TEST(BounceTimeExponential, Examples) {
  EXPECT_EQ(binbps::bounce_time_exponential(2.0, 3.0), 1.5);
  EXPECT_TRUE(std::isinf(binbps::bounce_time_exponential(0.0, 1.0)));
  EXPECT_EQ(binbps::bounce_time_exponential(0.5, 1.0), 2.0);
  EXPECT_THROW(binbps::bounce_time_exponential(-1.0, 1.0), binbps::DomainError);
}

// --- geometry ---------------------------------------------------------------

TEST(WallTimes, Examples) {
  const double r = 1.0 / std::sqrt(2.0);
  auto w = binbps::wall_times(std::vector{1.0, -2.0}, std::vector{-r, r});
  EXPECT_NEAR(w.times[0], std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(w.times[1], 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_EQ(w.argmin, 0u);

  w = binbps::wall_times(std::vector{1.0, 1.0}, std::vector{r, r});
  EXPECT_TRUE(std::isinf(w.times[0]) && std::isinf(w.times[1]));
  EXPECT_FALSE(w.argmin.has_value());

  w = binbps::wall_times(std::vector{0.0, 1.0}, std::vector{1.0, 0.0});
  EXPECT_TRUE(std::isinf(w.times[0]));

  w = binbps::wall_times(std::vector{1.0, -1.0}, std::vector{-1.0, 1.0});
  EXPECT_EQ(w.argmin, 0u);  // tie goes to the smaller index
}

TEST(ReflectOffGradient, Examples) {
  EXPECT_EQ(binbps::reflect_off_gradient(std::vector{1.0, 0.0}, std::vector{2.0, 0.0}),
            (std::vector{-1.0, 0.0}));
  EXPECT_EQ(binbps::reflect_off_gradient(std::vector{0.0, 1.0}, std::vector{1.0, 0.0}),
            (std::vector{0.0, 1.0}));
  const auto r = binbps::reflect_off_gradient(std::vector{1.0, 0.0}, std::vector{1.0, 1.0});
  EXPECT_NEAR(r[0], 0.0, 1e-15);
  EXPECT_NEAR(r[1], -1.0, 1e-15);
  EXPECT_THROW(binbps::reflect_off_gradient(std::vector{1.0}, std::vector{0.0}),
               binbps::DomainError);
}

TEST(ReflectOffGradient, InvolutionNormAndFlip) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t d = 1 + k % 9;
    std::vector<double> v(d), g(d);
    for (auto& x : v) x = normal(rng);
    for (auto& x : g) x = normal(rng);
    const auto r = binbps::reflect_off_gradient(v, g);
    const auto rr = binbps::reflect_off_gradient(r, g);
    EXPECT_NEAR(norm(r), norm(v), 1e-12 * std::max(1.0, norm(v)));
    double vg = 0.0, rg = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_NEAR(rr[i], v[i], 1e-12);
      vg += v[i] * g[i];
      rg += r[i] * g[i];
    }
    EXPECT_NEAR(rg, -vg, 1e-12);
  }
}

// --- walls ------------------------------------------------------------------

TEST(WallEvent, FlatAndDownhillAlwaysCross) {
  const FlatModel flat(2);
  for (double u : {0.0, 0.5, 0.999999}) {
    OrthantState st{{0.0, 1.0}, SpinState::parse("++"), {-0.6, 0.8}};
    EXPECT_EQ(binbps::wall_event(flat, st, 0, u), binbps::WallOutcome::Cross);
    EXPECT_EQ(st.s.to_string(), "-+");
    EXPECT_EQ(st.v[0], -0.6);
  }
  // flip_delta(0, ++) = 1.5 > 0: crossing is downhill (dU = -1.5)
  const MrfModel m(2, {0.0, 0.25, 0.25, 0.0}, {0.5, 0.0});
  OrthantState st{{0.0, 1.0}, SpinState::parse("++"), {-1.0, 0.0}};
  EXPECT_EQ(binbps::wall_event(m, st, 0, 0.999999), binbps::WallOutcome::Cross);
}

TEST(WallEvent, UphillRejectionReversesNormalVelocity) {
  const MrfModel m(1, {0.0}, {-0.5 * std::numbers::ln2});  // dU = log 2 leaving s = +1
  OrthantState st{{0.0}, SpinState::parse("+"), {-1.0}};
  EXPECT_EQ(binbps::wall_event(m, st, 0, 0.5), binbps::WallOutcome::Reflect);
  EXPECT_EQ(st.v[0], 1.0);
  EXPECT_EQ(st.s.to_string(), "+");
  OrthantState st2{{0.0}, SpinState::parse("+"), {-1.0}};
  EXPECT_EQ(binbps::wall_event(m, st2, 0, 0.4999), binbps::WallOutcome::Cross);
}

TEST(WallEvent, AcceptanceFrequencyAtLogTwo) {
  const MrfModel m(1, {0.0}, {-0.5 * std::numbers::ln2});
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int crossed = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    OrthantState st{{0.0}, SpinState::parse("+"), {-1.0}};
    crossed += binbps::wall_event(m, st, 0, u(rng)) == binbps::WallOutcome::Cross;
  }
  EXPECT_NEAR(static_cast<double>(crossed) / n, 0.5, 0.005);
}

TEST(WallEvent, RequiresParticleOnWallAndApproaching) {
  const FlatModel flat(1);
  OrthantState off{{0.1}, SpinState::parse("+"), {-1.0}};
  EXPECT_THROW(binbps::wall_event(flat, off, 0, 0.1), binbps::DomainError);
  OrthantState leaving{{0.0}, SpinState::parse("+"), {1.0}};
  EXPECT_THROW(binbps::wall_event(flat, leaving, 0, 0.1), binbps::DomainError);
}

// --- event loop ---------------------------------------------------------------

TEST(BpsStep, FlatExponentialDownhillGoesToNearestWall) {
  const FlatModel flat(3);
  BpsConfig config;
  config.augmentation = AugmentationKind::Exponential;
  std::mt19937_64 rng(1);
  const double a = 1.0 / std::sqrt(3.0);
  OrthantState st{{5.0, 3.0, -8.0}, SpinState::parse("++-"), {-a, -a, a}};
  const auto step = binbps::bps_step(st, flat, config, rng);
  EXPECT_EQ(step.event.kind, EventKind::WallCross);
  EXPECT_EQ(step.event.coord, 1u);
  EXPECT_NEAR(step.elapsed, 3.0 / a, 1e-12);
  EXPECT_EQ(st.y[1], 0.0);
  EXPECT_EQ(st.s.to_string(), "+--");
}

TEST(BpsStep, OneDimensionalGaussianBounceReversesVelocity) {
  const FlatModel flat(1);
  BpsConfig config;
  std::mt19937_64 rng(2024);
  auto probe = rng;
  const double e = std::exponential_distribution<double>(1.0)(probe);
  OrthantState st{{1.0}, SpinState::parse("+"), {1.0}};
  const auto step = binbps::bps_step(st, flat, config, rng, 10.0);
  EXPECT_EQ(step.event.kind, EventKind::Bounce);
  EXPECT_FALSE(step.event.coord.has_value());
  EXPECT_NEAR(step.elapsed, std::sqrt(1.0 + 2.0 * e) - 1.0, 1e-14);
  EXPECT_NEAR(survival_by_quadrature(1.0, step.elapsed), std::exp(-e), 1e-12);
  EXPECT_NEAR(step.event.time, 10.0 + step.elapsed, 1e-14);
  EXPECT_NEAR(st.v[0], -1.0, 1e-15);
  EXPECT_NEAR(st.y[0], 1.0 + step.elapsed, 1e-14);
}

TEST(BpsStep, TrajectoryInvariants) {
  std::mt19937_64 rng(77);
  for (auto kind : {AugmentationKind::Gaussian, AugmentationKind::Exponential}) {
    for (double refresh : {0.0, 0.3}) {
      const auto model = binbps::mrf_sample(6, 1.0, 0.5, 3);
      BpsConfig config;
      config.augmentation = kind;
      config.refresh_rate = refresh;
      auto st = binbps::bps_initialize(6, rng);
      double clock = 0.0;
      double sum = 0.0;
      std::uint64_t refreshes = 0;
      for (int k = 0; k < 20000; ++k) {
        const auto before = st;
        const auto step = binbps::bps_step(st, model, config, rng, clock);
        ASSERT_GE(step.event.time, clock);
        clock = step.event.time;
        sum += step.elapsed;
        refreshes += step.event.kind == EventKind::Refresh;
        const bool wall = step.event.kind == EventKind::WallCross ||
                          step.event.kind == EventKind::WallReflect;
        ASSERT_EQ(step.event.coord.has_value(), wall);
        for (std::size_t i = 0; i < 6; ++i) {
          ASSERT_NEAR(st.y[i], before.y[i] + before.v[i] * step.elapsed, 1e-9);
          ASSERT_TRUE(st.y[i] * st.s[i] >= 0.0) << "left the tracked orthant";
        }
        ASSERT_NEAR(norm(st.v), 1.0, 1e-9);
      }
      EXPECT_NEAR(clock, sum, 1e-9 * sum);
      if (refresh == 0.0) EXPECT_EQ(refreshes, 0u);
      else EXPECT_GT(refreshes, 0u);
    }
  }
}

TEST(BpsRun, FlatModelIsSymmetric) {
  const FlatModel flat(2);
  for (auto kind : {AugmentationKind::Gaussian, AugmentationKind::Exponential}) {
    BpsConfig config;
    config.augmentation = kind;
    config.max_events = 1'000'000;
    std::mt19937_64 rng(5);
    const auto result = binbps::bps_run(flat, config, rng);
    for (double m : result.moments.first) EXPECT_NEAR(m, 0.0, 0.01);
    EXPECT_EQ(result.stats.counts.total(), config.max_events);
    EXPECT_EQ(result.stats.counts.refresh, 0u);
    EXPECT_LE(result.stats.estimation_time, result.stats.total_time);
  }
}

TEST(BpsRun, SmallMrfAgreesWithEnumeration) {
  const auto model = binbps::mrf_sample(3, 0.2, 0.5, 11);
  const auto exact = binbps::enumerate_moments(model);
  for (auto kind : {AugmentationKind::Gaussian, AugmentationKind::Exponential}) {
    BpsConfig config;
    config.augmentation = kind;
    config.max_events = 400'000;
    std::mt19937_64 rng(21);
    const auto kept = config.max_events - static_cast<std::uint64_t>(0.1 * config.max_events);
    binbps::BatchMeans batches(3, 10, kept);
    binbps::bps_run(model, config, rng, batches);
    const auto est = batches.pooled().finalize();
    const auto se = batches.standard_errors();
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_LE(std::abs(est.first[i] - exact.first[i]), 4.0 * se.first[i]);
      for (std::size_t j = i + 1; j < 3; ++j) {
        EXPECT_LE(std::abs(est.pair(i, j) - exact.pair(i, j)), 4.0 * se.pair(i, j));
      }
    }
  }
}

TEST(BpsRun, OrthantOccupancyChiSquare) {
  // Snapshots spaced far apart in trajectory time are close to independent
  // draws, so a multinomial chi-square against the exact orthant
  // probabilities applies.
  const double critical = boost::math::quantile(
      boost::math::complement(boost::math::chi_squared(3.0), 0.001));
  for (auto kind : {AugmentationKind::Gaussian, AugmentationKind::Exponential}) {
    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto model = binbps::mrf_sample(2, 1.0, 1.0, seed);
      std::vector<double> p(4);
      double z = 0.0;
      for (std::uint64_t c = 0; c < 4; ++c) z += p[c] = std::exp(model.log_weight(SpinState::from_code(c, 2)));
      for (auto& x : p) x /= z;

      BpsConfig config;
      config.augmentation = kind;
      config.max_events = 1'000'000;
      std::mt19937_64 rng(100 + seed);
      SnapshotSink sink(20.0, 2);
      binbps::bps_run(model, config, rng, sink);
      double n = 0.0;
      for (auto c : sink.counts) n += static_cast<double>(c);
      double chi2 = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        const double expected = n * p[c];
        chi2 += (static_cast<double>(sink.counts[c]) - expected) *
                (static_cast<double>(sink.counts[c]) - expected) / expected;
      }
      failures += chi2 > critical;
      RecordProperty("chi2_" + std::string(binbps::to_string(kind)) + "_" + std::to_string(seed),
                     std::to_string(chi2));
    }
    EXPECT_LE(failures, 1) << binbps::to_string(kind);
  }
}

TEST(BpsRun, TrajectoryDumpFormat) {
  const auto model = binbps::mrf_sample(3, 0.5, 0.5, 2);
  BpsConfig config;
  config.max_events = 50;
  std::mt19937_64 rng(3);
  binbps::MomentAccumulator acc(3);
  std::ostringstream out;
  binbps::bps_run(model, config, rng, acc, &out);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  double last = 0.0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    double t;
    std::string kind, coord, spins;
    ASSERT_TRUE(fields >> t >> kind >> coord >> spins) << line;
    EXPECT_GE(t, last);
    last = t;
    EXPECT_EQ(spins.size(), 3u);
    EXPECT_EQ(coord == "-", kind == "bounce" || kind == "refresh");
    ++lines;
  }
  EXPECT_EQ(lines, 50);
}

TEST(BpsConfig, Validation) {
  BpsConfig c;
  c.burn_in_fraction = 1.0;
  EXPECT_THROW(c.validate(), binbps::ConfigError);
  c = {};
  c.max_events = 0;
  EXPECT_THROW(c.validate(), binbps::ConfigError);
  c = {};
  c.refresh_rate = -1.0;
  EXPECT_THROW(c.validate(), binbps::ConfigError);
}

// --- discrete-time kernel -----------------------------------------------------

TEST(DiscreteTimeStep, DegenerateProbabilities) {
  const FlatModel flat(1);
  BpsConfig config;
  std::mt19937_64 rng(1);
  // moving toward the wall in the Gaussian orthant: rate [v.y]_+ = 0
  for (int k = 0; k < 100; ++k) {
    OrthantState st{{5.0}, SpinState::parse("+"), {-1.0}};
    EXPECT_FALSE(binbps::discrete_time_reference_step(st, 0.01, flat, config, rng));
    EXPECT_NEAR(st.y[0], 4.99, 1e-15);
  }
  // dt * rate = 1
  for (int k = 0; k < 100; ++k) {
    OrthantState st{{2.0}, SpinState::parse("+"), {1.0}};
    EXPECT_TRUE(binbps::discrete_time_reference_step(st, 0.5, flat, config, rng));
    EXPECT_EQ(st.v[0], -1.0);
  }
  OrthantState st{{3.0}, SpinState::parse("+"), {1.0}};
  EXPECT_THROW(binbps::discrete_time_reference_step(st, 0.5, flat, config, rng),
               binbps::DomainError);
  OrthantState crossing{{0.1}, SpinState::parse("+"), {-1.0}};
  EXPECT_THROW(binbps::discrete_time_reference_step(crossing, 0.5, flat, config, rng),
               binbps::DomainError);
}

TEST(DiscreteTimeStep, FirstBounceTimeMatchesContinuousSampler) {
  const FlatModel flat(1);
  BpsConfig config;
  std::mt19937_64 rng(8);
  const int n = 3000;
  const double dt = 1e-3;
  std::vector<double> discrete, continuous;
  std::exponential_distribution<double> exp1(1.0);
  for (int k = 0; k < n; ++k) {
    OrthantState st{{1.0}, SpinState::parse("+"), {1.0}};
    std::uint64_t steps = 0;
    do {
      ++steps;
    } while (!binbps::discrete_time_reference_step(st, dt, flat, config, rng));
    discrete.push_back(static_cast<double>(steps) * dt);
    continuous.push_back(binbps::bounce_time_gaussian(1.0, exp1(rng)));
  }
  std::sort(discrete.begin(), discrete.end());
  std::sort(continuous.begin(), continuous.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < discrete.size() && j < continuous.size()) {
    if (discrete[i] <= continuous[j]) ++i; else ++j;
    ks = std::max(ks, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / n));
  }
  EXPECT_LT(ks, 1.628 * std::sqrt(2.0 / n));
}

TEST(BpsRun, RefreshRestoresErgodicityOnIsotropicTarget) {
  // Flat model + Gaussian augmentation is an isotropic Gaussian; without
  // refreshment the trajectory is confined to a lower-dimensional orbit.
  const FlatModel flat(5);
  MrfModel zero(5, std::vector<double>(25, 0.0), std::vector<double>(5, 0.0));
  const auto exact = binbps::enumerate_moments(zero);
  BpsConfig config;
  config.max_events = 1'000'000;
  std::mt19937_64 stuck_rng(0);
  EXPECT_GT(binbps::summed_mse(binbps::bps_run(flat, config, stuck_rng).moments, exact, true), 0.1);
  config.refresh_rate = 1.0;
  std::mt19937_64 rng(0);
  EXPECT_LT(binbps::summed_mse(binbps::bps_run(flat, config, rng).moments, exact, true), 2e-3);
}
