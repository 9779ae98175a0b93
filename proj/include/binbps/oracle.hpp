#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "binbps/errors.hpp"
#include "binbps/model.hpp"

namespace binbps {

/// First and second spin moments, E[s_i] and E[s_i s_j].
///
/// `second` is a dense row-major d x d matrix with unit diagonal, or empty
/// when only first moments were tracked. `total_weight` is the normalizer
/// (partition sum, trajectory time or sample count) the moments were divided by.
struct MomentTable {
  std::vector<double> first;
  std::vector<double> second;
  double total_weight = 0.0;

  std::size_t dim() const noexcept { return first.size(); }
  bool has_second() const noexcept { return !second.empty(); }
  double pair(std::size_t i, std::size_t j) const { return second[i * dim() + j]; }
};

inline constexpr std::size_t kMaxEnumerationDim = 25;

/// Exact moments by summing over all 2^d spin states.
///
/// Weights are computed relative to the largest log weight so that strongly
/// coupled models do not overflow.
template <BinaryModel Model>
MomentTable enumerate_moments(const Model& model) {
  const std::size_t d = model.dim();
  if (d > kMaxEnumerationDim) {
    throw EnumerationInfeasible("enumeration requires dim <= 25, got " + std::to_string(d));
  }
  const std::uint64_t n_states = std::uint64_t{1} << d;

  // Single pass with a running maximum: whenever a larger log weight shows up
  // the accumulated sums are rescaled to the new reference.
  std::vector<double> first(d, 0.0);
  std::vector<double> upper(d * d, 0.0);
  std::vector<double> spins(d);
  double max_logw = -std::numeric_limits<double>::infinity();
  double z = 0.0;
  for (std::uint64_t code = 0; code < n_states; ++code) {
    const SpinState s = SpinState::from_code(code, d);
    const double lw = model.log_weight(s);
    if (!std::isfinite(lw)) throw DomainError("model log weight is not finite");
    if (lw > max_logw) {
      const double scale = std::exp(max_logw - lw);
      z *= scale;
      for (auto& f : first) f *= scale;
      for (auto& u : upper) u *= scale;
      max_logw = lw;
    }
    const double w = std::exp(lw - max_logw);
    z += w;
    for (std::size_t i = 0; i < d; ++i) spins[i] = s[i];
    for (std::size_t i = 0; i < d; ++i) {
      const double wi = w * spins[i];
      first[i] += wi;
      for (std::size_t j = i + 1; j < d; ++j) upper[i * d + j] += wi * spins[j];
    }
  }

  MomentTable table;
  table.first.resize(d);
  table.second.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    table.first[i] = std::clamp(first[i] / z, -1.0, 1.0);
    table.second[i * d + i] = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      const double m = std::clamp(upper[i * d + j] / z, -1.0, 1.0);
      table.second[i * d + j] = m;
      table.second[j * d + i] = m;
    }
  }
  // Partition sum in the model's own scale; may overflow to inf for extreme
  // energies, which only affects this informational field.
  table.total_weight = z * std::exp(max_logw);
  return table;
}

/// Sum of squared first-moment errors, plus the strictly-upper-triangle
/// second-moment errors when `include_second` is set.
inline double summed_mse(const MomentTable& estimate, const MomentTable& exact,
                         bool include_second) {
  detail::check_dim(estimate.dim(), exact.dim(), "moment table");
  const std::size_t d = exact.dim();
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double e = estimate.first[i] - exact.first[i];
    total += e * e;
  }
  if (include_second) {
    if (!estimate.has_second() || !exact.has_second()) {
      throw DomainError("second moments requested but not present in both tables");
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        const double e = estimate.pair(i, j) - exact.pair(i, j);
        total += e * e;
      }
    }
  }
  return total;
}

}  // namespace binbps
