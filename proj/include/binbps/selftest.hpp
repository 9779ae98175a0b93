#pragma once

// Property checks over randomized inputs. Run by `binbps selftest` and by the
// acceptance suite. Reference integrals come from Boost.Math quadrature, which
// is independent of the closed-form inversions it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "binbps/augmentation.hpp"
#include "binbps/bps.hpp"
#include "binbps/hmc.hpp"
#include "binbps/model.hpp"

namespace binbps::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(const char* format, double a, double b = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

/// int_a^b [c + t]_+ dt by adaptive Gauss-Kronrod, split at the kink t = -c.
inline double integrate_gaussian_rate(double c, double t) {
  auto rate = [c](double x) { return std::max(0.0, c + x); };
  using boost::math::quadrature::gauss_kronrod;
  const double kink = -c;
  if (kink > 0.0 && kink < t) {
    return gauss_kronrod<double, 15>::integrate(rate, 0.0, kink, 10, 1e-14) +
           gauss_kronrod<double, 15>::integrate(rate, kink, t, 10, 1e-14);
  }
  return gauss_kronrod<double, 15>::integrate(rate, 0.0, t, 10, 1e-14);
}

}  // namespace detail

/// |R(v)| = |v|, R(R(v)) = v and R(v).g = -v.g, for random (v, g).
inline CheckResult reflection_identities(std::uint64_t seed, int trials = 1000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> dims(1, 12);
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const std::size_t d = dims(rng);
    auto v = binbps::detail::uniform_on_sphere(d, rng);
    std::vector<double> g(d);
    for (auto& x : g) x = normal(rng);
    const auto r = reflect_off_gradient(v, g);
    const auto rr = reflect_off_gradient(r, g);
    double nv = 0.0, nr = 0.0, vg = 0.0, rg = 0.0, back = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      nv += v[i] * v[i];
      nr += r[i] * r[i];
      vg += v[i] * g[i];
      rg += r[i] * g[i];
      back = std::max(back, std::abs(rr[i] - v[i]));
    }
    worst = std::max({worst, std::abs(std::sqrt(nr) - std::sqrt(nv)), back, std::abs(rg + vg)});
  }
  return {"reflection involution/norm/flip", worst <= 1e-12,
          detail::fmt("max deviation %.3e (tol 1e-12)", worst)};
}

/// Integrating the bounce rate up to the returned time reproduces the draw.
inline CheckResult inversion_vs_quadrature(std::uint64_t seed, int trials = 1000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cdist(-5.0, 5.0);
  std::uniform_real_distribution<double> rdist(0.01, 5.0);
  std::exponential_distribution<double> edist(0.5);
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const double c = cdist(rng);
    const double e = edist(rng);
    const double t = bounce_time_gaussian(c, e);
    worst = std::max(worst, std::abs(detail::integrate_gaussian_rate(c, t) - e));

    const double rate = rdist(rng);
    const double te = bounce_time_exponential(rate, e);
    using boost::math::quadrature::gauss_kronrod;
    const double integral =
        gauss_kronrod<double, 15>::integrate([rate](double) { return rate; }, 0.0, te, 5, 1e-14);
    worst = std::max(worst, std::abs(integral - e));
  }
  return {"bounce-time inversion vs quadrature", worst <= 1e-8,
          detail::fmt("max |integral - E| %.3e (tol 1e-8)", worst)};
}

/// min(1, e^-dU) = min(1, e^dU) e^-dU for random potential steps.
inline CheckResult wall_detailed_balance(std::uint64_t seed, int trials = 1000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> du(-10.0, 10.0);
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const double x = du(rng);
    worst = std::max(worst, std::abs(wall_acceptance(x) - wall_acceptance(-x) * std::exp(-x)));
  }
  return {"wall detailed balance", worst <= 1e-12,
          detail::fmt("max deviation %.3e (tol 1e-12)", worst)};
}

/// Total energy |v|^2/2 + U(y) is unchanged by a full HMC trajectory with
/// wall crossings and reflections.
inline CheckResult hmc_energy_conservation(std::uint64_t seed, int trials = 1000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> dims(2, 10);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  std::uint64_t walls = 0;
  for (int k = 0; k < trials; ++k) {
    const std::size_t d = dims(rng);
    const auto model = mrf_sample(d, 1.0, 1.0, rng());
    std::vector<double> y(d), v(d);
    SpinState s(d);
    for (std::size_t i = 0; i < d; ++i) {
      const int sign = coin(rng) ? 1 : -1;
      y[i] = sign * std::abs(normal(rng));
      s.set(i, sign);
      v[i] = normal(rng);
    }
    auto energy = [&] {
      double kinetic = 0.0;
      for (double x : v) kinetic += 0.5 * x * x;
      return kinetic + potential(AugmentationKind::Gaussian, model, y, s);
    };
    const double before = energy();
    const auto stats = hmc_trajectory(model, y, v, s, 6.5 * std::numbers::pi);
    walls += stats.wall_events();
    const double after = energy();
    worst = std::max(worst, std::abs(after - before) / std::max(1.0, std::abs(before)));
  }
  return {"HMC energy conservation", worst <= 1e-9 && walls > 0,
          detail::fmt("max relative drift %.3e (tol 1e-9) over %.0f wall events", worst,
                      static_cast<double>(walls))};
}

/// Crossing frequency at a step of log 2 is 1/2.
inline CheckResult wall_acceptance_frequency(std::uint64_t seed, int draws = 100000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  // d=1 field with flip_delta(+1) = 2r = -log 2, i.e. a step of +log 2
  const MrfModel model(1, {0.0}, {-0.5 * std::numbers::ln2});
  int crossed = 0;
  for (int k = 0; k < draws; ++k) {
    OrthantState st{{0.0}, SpinState(1, +1), {-1.0}};
    if (wall_event(model, st, 0, uniform(rng)) == WallOutcome::Cross) ++crossed;
  }
  const double freq = static_cast<double>(crossed) / draws;
  return {"wall acceptance frequency at dU = log 2", std::abs(freq - 0.5) <= 0.005,
          detail::fmt("frequency %.5f (target 0.5 +- 0.005)", freq)};
}

inline std::vector<CheckResult> run_all(std::uint64_t seed = 20240601) {
  return {
      reflection_identities(seed),
      inversion_vs_quadrature(seed + 1),
      wall_detailed_balance(seed + 2),
      hmc_energy_conservation(seed + 3),
      wall_acceptance_frequency(seed + 4),
  };
}

}  // namespace binbps::selftest
