#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "binbps/augmentation.hpp"
#include "binbps/errors.hpp"
#include "binbps/estimators.hpp"
#include "binbps/model.hpp"

namespace binbps {

struct HmcConfig {
  /// Harmonic phase T advanced per iteration.
  double travel_time = 6.5 * std::numbers::pi;
  std::uint64_t iterations = 100'000;
  double burn_in_fraction = 0.1;
  /// Optional work budget: when nonzero, the run also stops after the
  /// iteration during which the total wall-event count reaches this value.
  std::uint64_t max_wall_events = 0;

  void validate() const {
    if (!(travel_time > 0.0) || !std::isfinite(travel_time)) {
      throw ConfigError("travel_time must be positive and finite");
    }
    if (iterations < 1) throw ConfigError("iterations must be positive");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
      throw ConfigError("burn_in_fraction must lie in [0, 1)");
    }
  }
};

/// Exact flow of H = (y.y + v.v)/2 for time t: every coordinate rotates.
inline std::pair<std::vector<double>, std::vector<double>> evolve_harmonic(
    std::span<const double> y, std::span<const double> v, double t) {
  detail::check_dim(v.size(), y.size(), "velocity");
  const double c = std::cos(t);
  const double sn = std::sin(t);
  std::pair<std::vector<double>, std::vector<double>> out;
  out.first.resize(y.size());
  out.second.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.first[i] = y[i] * c + v[i] * sn;
    out.second[i] = -y[i] * sn + v[i] * c;
  }
  return out;
}

/// First t > 0 at which y cos t + v sin t vanishes; exactly pi when
/// starting on the wall.
inline double wall_hit_time(double y, double v) {
  if (y == 0.0 && v == 0.0) throw DomainError("coordinate at rest on its wall never moves");
  if (y == 0.0) return std::numbers::pi;
  // y(t) = A sin(t + phi) with phi = atan2(y, v); zeros at t + phi = k pi
  const double phi = std::atan2(y, v);
  double t = std::fmod(-phi, std::numbers::pi);
  if (t <= 0.0) t += std::numbers::pi;
  return t;
}

struct HmcWallResult {
  WallOutcome outcome;
  double velocity;
};

/// Energy bookkeeping at a wall: cross if the normal kinetic energy exceeds
/// the potential step, else bounce back.
inline HmcWallResult hmc_wall_rule(double v_i, double delta_u) {
  if (0.5 * v_i * v_i > delta_u) {
    const double speed = std::sqrt(v_i * v_i - 2.0 * delta_u);
    return {WallOutcome::Cross, std::copysign(speed, v_i)};
  }
  return {WallOutcome::Reflect, -v_i};
}

struct HmcTrajectoryStats {
  std::uint64_t wall_cross = 0;
  std::uint64_t wall_reflect = 0;

  std::uint64_t wall_events() const noexcept { return wall_cross + wall_reflect; }
};

/// Follows the exact Hamiltonian trajectory for phase `travel_time`, handling
/// wall events in time order. Updates y, v and s in place.
///
/// Coordinates rotate independently between events, so each keeps its own
/// last-update phase and a single scheduled hit; a wall event on i only
/// reschedules i (to exactly pi later, since it restarts from y_i = 0).
template <BinaryModel Model>
HmcTrajectoryStats hmc_trajectory(const Model& model, std::vector<double>& y,
                                  std::vector<double>& v, SpinState& s, double travel_time) {
  const std::size_t d = y.size();
  detail::check_dim(v.size(), d, "velocity");
  detail::check_dim(s.size(), d, "spin state");
  detail::check_dim(model.dim(), d, "model");
  if (!orthant_consistent(y, s)) throw DomainError("position is not inside the orthant of s");

  using Hit = std::pair<double, std::size_t>;
  std::priority_queue<Hit, std::vector<Hit>, std::greater<>> queue;
  std::vector<double> last(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (y[i] == 0.0 && v[i] == 0.0) continue;
    if (y[i] == 0.0 && v[i] * s[i] < 0.0) {
      queue.emplace(0.0, i);  // on the wall and heading out of the orthant
    } else {
      queue.emplace(wall_hit_time(y[i], v[i]), i);
    }
  }

  HmcTrajectoryStats stats;
  while (!queue.empty() && queue.top().first <= travel_time) {
    const auto [t_hit, i] = queue.top();
    queue.pop();
    const double dt = t_hit - last[i];
    const double v_hit = -y[i] * std::sin(dt) + v[i] * std::cos(dt);
    y[i] = 0.0;
    last[i] = t_hit;
    const auto result = hmc_wall_rule(v_hit, wall_jump(model, s, i));
    v[i] = result.velocity;
    if (result.outcome == WallOutcome::Cross) {
      s.flip(i);
      ++stats.wall_cross;
    } else {
      ++stats.wall_reflect;
    }
    queue.emplace(t_hit + std::numbers::pi, i);
  }

  for (std::size_t i = 0; i < d; ++i) {
    const double dt = travel_time - last[i];
    const double c = std::cos(dt);
    const double sn = std::sin(dt);
    const double yi = y[i] * c + v[i] * sn;
    v[i] = -y[i] * sn + v[i] * c;
    // a hit scheduled a rounding error past the end can leave y_i on the wrong side
    y[i] = yi * s[i] < 0.0 ? 0.0 : yi;
  }
  return stats;
}

/// One HMC iteration: fresh N(0, I) velocity, then the exact trajectory.
template <BinaryModel Model, class Rng>
HmcTrajectoryStats hmc_iterate(const Model& model, std::vector<double>& y, SpinState& s,
                               const HmcConfig& config, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(y.size());
  for (auto& x : v) x = normal(rng);
  return hmc_trajectory(model, y, v, s, config.travel_time);
}

struct HmcRunStats {
  std::uint64_t iterations = 0;
  std::uint64_t samples = 0;
  std::uint64_t wall_cross = 0;
  std::uint64_t wall_reflect = 0;

  std::uint64_t wall_events() const noexcept { return wall_cross + wall_reflect; }
};

/// Repeated iterations from a random start; each post-burn-in endpoint spin
/// state goes to `sink` as one unit-weight sample.
template <BinaryModel Model, class Rng, MomentSink Sink>
HmcRunStats hmc_run(const Model& model, const HmcConfig& config, Rng& rng, Sink& sink) {
  config.validate();
  const std::size_t d = model.dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> y(d);
  SpinState s(d);
  for (std::size_t i = 0; i < d; ++i) {
    const int sign = coin(rng) ? +1 : -1;
    y[i] = sign * std::abs(normal(rng));
    s.set(i, sign);
  }

  // Burn-in is a fraction of whichever budget governs the run.
  const bool wall_budget = config.max_wall_events > 0;
  const auto burn_iterations =
      wall_budget ? 0
                  : static_cast<std::uint64_t>(std::floor(
                        config.burn_in_fraction * static_cast<double>(config.iterations)));
  const double burn_walls =
      wall_budget ? config.burn_in_fraction * static_cast<double>(config.max_wall_events) : 0.0;

  HmcRunStats stats;
  while (stats.iterations < config.iterations) {
    if (wall_budget && stats.wall_events() >= config.max_wall_events) break;
    const bool burning = stats.iterations < burn_iterations ||
                         static_cast<double>(stats.wall_events()) < burn_walls;
    const auto it = hmc_iterate(model, y, s, config, rng);
    stats.wall_cross += it.wall_cross;
    stats.wall_reflect += it.wall_reflect;
    ++stats.iterations;
    if (!burning) {
      sink.accumulate_sample(s);
      ++stats.samples;
    }
  }
  return stats;
}

struct HmcResult {
  MomentTable moments;
  HmcRunStats stats;
};

template <BinaryModel Model, class Rng>
HmcResult hmc_run(const Model& model, const HmcConfig& config, Rng& rng,
                  bool track_second = true) {
  MomentAccumulator acc(model.dim(), track_second);
  HmcResult result;
  result.stats = hmc_run(model, config, rng, acc);
  result.moments = acc.finalize();
  return result;
}

}  // namespace binbps
