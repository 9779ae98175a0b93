#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "binbps/augmentation.hpp"
#include "binbps/errors.hpp"
#include "binbps/estimators.hpp"
#include "binbps/model.hpp"

namespace binbps {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class EventKind { Bounce, WallCross, WallReflect, Refresh };

inline std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Bounce: return "bounce";
    case EventKind::WallCross: return "wall-cross";
    case EventKind::WallReflect: return "wall-reflect";
    case EventKind::Refresh: return "refresh";
  }
  return "unknown";
}

/// One entry of the trajectory log. `coord` is set iff the event is a wall event.
struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Bounce;
  std::optional<std::size_t> coord;
};

struct BpsConfig {
  AugmentationKind augmentation = AugmentationKind::Gaussian;
  /// Poisson rate of full velocity resampling; off by default.
  double refresh_rate = 0.0;
  /// Fraction of the event budget discarded before estimation starts.
  double burn_in_fraction = 0.1;
  std::uint64_t max_events = 1'000'000;
  /// Coordinates closer than this (in travel time) to their wall after a move
  /// are snapped onto it and handled as the next, zero-length event.
  double min_event_gap = 1e-12;

  void validate() const {
    if (!(refresh_rate >= 0.0) || !std::isfinite(refresh_rate)) {
      throw ConfigError("refresh_rate must be finite and nonnegative");
    }
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
      throw ConfigError("burn_in_fraction must lie in [0, 1)");
    }
    if (max_events < 1) throw ConfigError("max_events must be positive");
    if (!(min_event_gap > 0.0)) throw ConfigError("min_event_gap must be positive");
  }
};

// ---------------------------------------------------------------------------
// Event-time sampling

/// First bounce time for the Gaussian augmentation with unit speed.
///
/// Along the ray y + v t the rate is [c + t]_+ with c = v.y. Solves
/// int_0^t [c + t']_+ dt' = exp_draw in closed form.
inline double bounce_time_gaussian(double c, double exp_draw) {
  if (!(exp_draw >= 0.0)) throw DomainError("exponential draw must be nonnegative");
  if (exp_draw == 0.0) return 0.0;
  if (c >= 0.0) {
    // sqrt(c^2 + 2E) - c without cancellation for large c
    return 2.0 * exp_draw / (std::sqrt(c * c + 2.0 * exp_draw) + c);
  }
  return -c + std::sqrt(2.0 * exp_draw);
}

/// Bounce time for the exponential augmentation, whose rate [v.s]_+ is
/// constant within an orthant. Infinite when the particle moves downhill.
inline double bounce_time_exponential(double rate, double exp_draw) {
  if (!(rate >= 0.0)) throw DomainError("bounce rate must be nonnegative");
  if (!(exp_draw >= 0.0)) throw DomainError("exponential draw must be nonnegative");
  if (rate == 0.0) return kInfinity;
  return exp_draw / rate;
}

struct WallTimes {
  std::vector<double> times;
  double min = kInfinity;
  std::optional<std::size_t> argmin;
};

/// Straight-line hit times of every coordinate wall. A coordinate only hits
/// its wall when y_i v_i < 0; a coordinate sitting on its wall is treated as
/// having just departed. Ties go to the smallest index.
inline WallTimes wall_times(std::span<const double> y, std::span<const double> v) {
  detail::check_dim(v.size(), y.size(), "velocity");
  WallTimes out;
  out.times.assign(y.size(), kInfinity);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] * v[i] < 0.0) {
      out.times[i] = -y[i] / v[i];
      if (out.times[i] < out.min) {
        out.min = out.times[i];
        out.argmin = i;
      }
    }
  }
  return out;
}

/// Reflection of v through the hyperplane orthogonal to g.
inline std::vector<double> reflect_off_gradient(std::span<const double> v,
                                                std::span<const double> g) {
  detail::check_dim(g.size(), v.size(), "gradient");
  double vg = 0.0;
  double gg = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    vg += v[i] * g[i];
    gg += g[i] * g[i];
  }
  if (!(gg > 0.0)) throw DomainError("cannot reflect off a zero gradient");
  const double scale = 2.0 * vg / gg;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - scale * g[i];
  return out;
}

/// Metropolis probability of passing a potential step of height delta_u.
inline double wall_acceptance(double delta_u) {
  return delta_u <= 0.0 ? 1.0 : std::exp(-delta_u);
}

/// Resolves a particle sitting on wall i and moving out of its orthant.
/// Crossing flips s_i and keeps v; rejection negates v_i.
template <BinaryModel Model>
WallOutcome wall_event(const Model& model, OrthantState& state, std::size_t i,
                       double uniform_draw) {
  detail::check_index(i, state.dim());
  if (state.y[i] != 0.0 || state.v[i] * state.s[i] >= 0.0) {
    throw DomainError("wall event requires the particle on wall " + std::to_string(i) +
                      " and approaching it");
  }
  const double delta_u = wall_jump(model, state.s, i);
  if (uniform_draw < wall_acceptance(delta_u)) {
    state.s.flip(i);
    return WallOutcome::Cross;
  }
  state.v[i] = -state.v[i];
  return WallOutcome::Reflect;
}

// ---------------------------------------------------------------------------
// Event loop

namespace detail {

template <class Rng>
std::vector<double> uniform_on_sphere(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// v.s, the (constant) directional derivative of |y|_1 inside the orthant.
inline double dot_spins(std::span<const double> v, const SpinState& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * s[i];
  return acc;
}

/// Bounce reflection off the smooth-part gradient on the closed orthant
/// (y for Gaussian, s for exponential), applied in place.
inline void reflect_in_orthant(AugmentationKind kind, OrthantState& st) {
  const std::size_t d = st.dim();
  if (kind == AugmentationKind::Gaussian) {
    double vg = 0.0;
    double gg = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      vg += st.v[i] * st.y[i];
      gg += st.y[i] * st.y[i];
    }
    if (!(gg > 0.0)) throw DomainError("cannot reflect off a zero gradient");
    const double scale = 2.0 * vg / gg;
    for (std::size_t i = 0; i < d; ++i) st.v[i] -= scale * st.y[i];
  } else {
    const double scale = 2.0 * dot_spins(st.v, st.s) / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) st.v[i] -= scale * st.s[i];
  }
}

/// Next wall hit using the tracked orthant: a coordinate on its wall hits
/// immediately when moving out of the orthant and never when moving in.
inline std::pair<double, std::optional<std::size_t>> next_wall(const OrthantState& st) {
  double best = kInfinity;
  std::optional<std::size_t> arg;
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if (st.v[i] * st.s[i] >= 0.0) continue;
    const double t = st.y[i] == 0.0 ? 0.0 : -st.y[i] / st.v[i];
    if (t < best) {
      best = t;
      arg = i;
    }
  }
  return {best, arg};
}

}  // namespace detail

/// y drawn with i.i.d. standard normal magnitudes in a uniformly random
/// orthant; v uniform on the unit sphere.
template <class Rng>
OrthantState bps_initialize(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  OrthantState st;
  st.y.resize(dim);
  st.s = SpinState(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const int sign = coin(rng) ? +1 : -1;
    double mag = 0.0;
    do {
      mag = std::abs(normal(rng));
    } while (mag == 0.0);
    st.y[i] = sign * mag;
    st.s.set(i, sign);
  }
  st.v = detail::uniform_on_sphere(dim, rng);
  return st;
}

struct BpsStep {
  Event event;
  double elapsed = 0.0;
};

/// Advances the particle to its next event and applies the transition.
///
/// Each call draws a fresh exponential for the bounce clock and a fresh
/// uniform for a wall decision. By memorylessness this matches sampling the
/// whole piecewise survival function with a single uniform.
template <BinaryModel Model, class Rng>
BpsStep bps_step(OrthantState& state, const Model& model, const BpsConfig& config, Rng& rng,
                 double now = 0.0) {
  std::exponential_distribution<double> exponential(1.0);
  const auto kind = config.augmentation;

  double t_bounce = kInfinity;
  if (kind == AugmentationKind::Gaussian) {
    t_bounce = bounce_time_gaussian(detail::dot(state.v, state.y), exponential(rng));
  } else {
    const double rate = std::max(0.0, detail::dot_spins(state.v, state.s));
    t_bounce = bounce_time_exponential(rate, exponential(rng));
  }
  const auto [t_wall, wall_coord] = detail::next_wall(state);
  double t_refresh = kInfinity;
  if (config.refresh_rate > 0.0) {
    t_refresh = exponential(rng) / config.refresh_rate;
  }

  BpsStep step;
  double tau = t_bounce;
  step.event.kind = EventKind::Bounce;
  if (t_wall <= tau) {
    tau = t_wall;
    step.event.kind = EventKind::WallCross;  // refined below
  }
  if (t_refresh < tau) {
    tau = t_refresh;
    step.event.kind = EventKind::Refresh;
  }
  if (!std::isfinite(tau)) throw DomainError("no finite next event (zero velocity?)");

  const std::size_t d = state.dim();
  for (std::size_t i = 0; i < d; ++i) {
    if (state.y[i] == 0.0 && state.v[i] * state.s[i] < 0.0) continue;  // pinned on wall
    state.y[i] += state.v[i] * tau;
    // rounding can push a coordinate a hair past its wall; snap it onto the wall
    if (state.y[i] * state.s[i] < 0.0 ||
        std::abs(state.y[i]) < config.min_event_gap * std::abs(state.v[i])) {
      if (state.v[i] * state.s[i] < 0.0) state.y[i] = 0.0;
    }
  }

  step.elapsed = tau;
  step.event.time = now + tau;
  switch (step.event.kind) {
    case EventKind::Bounce: {
      detail::reflect_in_orthant(kind, state);
      break;
    }
    case EventKind::Refresh: {
      state.v = detail::uniform_on_sphere(d, rng);
      break;
    }
    default: {
      const std::size_t i = *wall_coord;
      state.y[i] = 0.0;
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      const auto outcome = wall_event(model, state, i, uniform(rng));
      step.event.kind =
          outcome == WallOutcome::Cross ? EventKind::WallCross : EventKind::WallReflect;
      step.event.coord = i;
      break;
    }
  }
  return step;
}

struct EventCounts {
  std::uint64_t bounce = 0;
  std::uint64_t wall_cross = 0;
  std::uint64_t wall_reflect = 0;
  std::uint64_t refresh = 0;

  std::uint64_t total() const noexcept { return bounce + wall_cross + wall_reflect + refresh; }

  void record(EventKind kind) {
    switch (kind) {
      case EventKind::Bounce: ++bounce; break;
      case EventKind::WallCross: ++wall_cross; break;
      case EventKind::WallReflect: ++wall_reflect; break;
      case EventKind::Refresh: ++refresh; break;
    }
  }
};

struct BpsRunStats {
  EventCounts counts;
  std::uint64_t events = 0;
  /// Global clock at the end of the run.
  double total_time = 0.0;
  /// Trajectory time fed to the estimator (after burn-in).
  double estimation_time = 0.0;
};

/// Writes one trajectory record: time, event kind, coordinate ('-' if none)
/// and the post-event spin state as a '+'/'-' string.
inline void write_trajectory_record(std::ostream& out, const Event& event, const SpinState& s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", event.time);
  out << buf << ' ' << to_string(event.kind) << ' ';
  if (event.coord) {
    out << *event.coord;
  } else {
    out << '-';
  }
  out << ' ' << s.to_string() << '\n';
}

/// Runs the event loop for config.max_events events from a random start.
/// Segments after the burn-in prefix go to `sink` weighted by duration.
template <BinaryModel Model, class Rng, MomentSink Sink>
BpsRunStats bps_run(const Model& model, const BpsConfig& config, Rng& rng, Sink& sink,
                    std::ostream* trajectory = nullptr) {
  config.validate();
  OrthantState state = bps_initialize(model.dim(), rng);
  const auto burn_in = static_cast<std::uint64_t>(
      std::floor(config.burn_in_fraction * static_cast<double>(config.max_events)));

  BpsRunStats stats;
  double clock = 0.0;
  SpinState segment_spins = state.s;
  for (std::uint64_t k = 0; k < config.max_events; ++k) {
    segment_spins = state.s;
    const BpsStep step = bps_step(state, model, config, rng, clock);
    clock += step.elapsed;
    stats.counts.record(step.event.kind);
    if (k >= burn_in && step.elapsed > 0.0) {
      sink.accumulate_segment(segment_spins, step.elapsed);
      stats.estimation_time += step.elapsed;
    }
    if (trajectory != nullptr) write_trajectory_record(*trajectory, step.event, state.s);
  }
  stats.events = config.max_events;
  stats.total_time = clock;
  return stats;
}

struct BpsResult {
  MomentTable moments;
  BpsRunStats stats;
};

template <BinaryModel Model, class Rng>
BpsResult bps_run(const Model& model, const BpsConfig& config, Rng& rng,
                  bool track_second = true) {
  MomentAccumulator acc(model.dim(), track_second);
  BpsResult result;
  result.stats = bps_run(model, config, rng, acc);
  result.moments = acc.finalize();
  return result;
}

// ---------------------------------------------------------------------------
// Discrete-time reference kernel

/// One step of the small-dt kernel the continuous process is the limit of:
/// move by v dt, and with probability dt [v.grad U]_+ reflect v off the
/// gradient at the starting point. Only valid strictly inside an orthant.
/// Returns true when the velocity was reflected.
template <BinaryModel Model, class Rng>
bool discrete_time_reference_step(OrthantState& state, double dt, const Model& model,
                                  const BpsConfig& config, Rng& rng) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  detail::check_dim(state.dim(), model.dim(), "position");
  for (std::size_t i = 0; i < state.dim(); ++i) {
    const double end = state.y[i] + state.v[i] * dt;
    if (!(state.y[i] * state.s[i] > 0.0) || !(end * state.s[i] > 0.0)) {
      throw DomainError("discrete step must stay strictly inside the orthant");
    }
  }
  const auto grad = orthant_gradient(config.augmentation, state.y, state.s);
  const double rate = std::max(0.0, detail::dot(state.v, grad));
  const double p = dt * rate;
  if (p > 1.0) throw DomainError("time step too large for the bounce rate");

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const bool bounce = uniform(rng) < p;
  for (std::size_t i = 0; i < state.dim(); ++i) state.y[i] += state.v[i] * dt;
  if (bounce) state.v = reflect_off_gradient(state.v, grad);
  return bounce;
}

}  // namespace binbps
