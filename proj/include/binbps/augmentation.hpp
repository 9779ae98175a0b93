#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binbps/errors.hpp"
#include "binbps/model.hpp"

namespace binbps {

/// Continuous part of the augmented density within an orthant.
enum class AugmentationKind { Gaussian, Exponential };

inline std::string_view to_string(AugmentationKind kind) {
  return kind == AugmentationKind::Gaussian ? "gaussian" : "exponential";
}

inline AugmentationKind parse_augmentation(std::string_view text) {
  if (text == "gaussian") return AugmentationKind::Gaussian;
  if (text == "exponential") return AugmentationKind::Exponential;
  throw ConfigError("unknown augmentation '" + std::string(text) + "'");
}

/// Position, velocity and the orthant the particle is in.
///
/// The spins are tracked explicitly: a coordinate sitting exactly on its wall
/// (y_i == 0) still belongs to the orthant named by s_i.
struct OrthantState {
  std::vector<double> y;
  SpinState s;
  std::vector<double> v;

  std::size_t dim() const noexcept { return y.size(); }
};

/// True when sign(y_i) == s_i for every nonzero coordinate.
inline bool orthant_consistent(std::span<const double> y, const SpinState& s) {
  if (y.size() != s.size()) return false;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] * s[i] < 0.0) return false;
  }
  return true;
}

/// U(y) = y.y/2 - log p(s) (Gaussian) or |y|_1 - log p(s) (exponential),
/// with the additive normalization constant set to zero.
template <BinaryModel Model>
double potential(AugmentationKind kind, const Model& model, std::span<const double> y,
                 const SpinState& s) {
  detail::check_dim(y.size(), model.dim(), "position");
  detail::check_dim(s.size(), model.dim(), "spin state");
  if (!orthant_consistent(y, s)) throw DomainError("position is not inside the orthant of s");
  double continuous = 0.0;
  if (kind == AugmentationKind::Gaussian) {
    for (double yi : y) continuous += 0.5 * yi * yi;
  } else {
    for (double yi : y) continuous += std::abs(yi);
  }
  return continuous - model.log_weight(s);
}

/// Gradient of U strictly inside the orthant of s: y (Gaussian) or s (exponential).
inline std::vector<double> orthant_gradient(AugmentationKind kind, std::span<const double> y,
                                            const SpinState& s) {
  detail::check_dim(s.size(), y.size(), "spin state");
  for (double yi : y) {
    if (yi == 0.0) throw DomainError("gradient requested on a wall");
  }
  if (kind == AugmentationKind::Gaussian) return {y.begin(), y.end()};
  std::vector<double> g(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) g[i] = s[i];
  return g;
}

enum class WallOutcome { Cross, Reflect };

/// Potential jump when crossing wall i out of orthant s:
/// U(just across) - U(just before) = -(log p(flip_i s) - log p(s)).
template <BinaryModel Model>
double wall_jump(const Model& model, const SpinState& s, std::size_t i) {
  return -model.flip_delta(i, s);
}

}  // namespace binbps
