#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binbps/errors.hpp"

namespace binbps {

/// A configuration of d binary spins, each exactly -1 or +1.
class SpinState {
 public:
  SpinState() = default;
  explicit SpinState(std::size_t dim, int value = +1) : spins_(dim, to_spin(value)) {}

  static SpinState from_values(std::span<const int> values) {
    SpinState s;
    s.spins_.reserve(values.size());
    for (int v : values) s.spins_.push_back(to_spin(v));
    return s;
  }

  /// Parses a string of '+'/'-' characters.
  static SpinState parse(std::string_view text) {
    SpinState s;
    s.spins_.reserve(text.size());
    for (char c : text) {
      if (c == '+') {
        s.spins_.push_back(+1);
      } else if (c == '-') {
        s.spins_.push_back(-1);
      } else {
        throw DomainError("spin string may only contain '+' and '-'");
      }
    }
    return s;
  }

  /// Spin state whose bits are the binary digits of `code` (bit i set -> s_i = +1).
  static SpinState from_code(std::uint64_t code, std::size_t dim) {
    SpinState s(dim, -1);
    for (std::size_t i = 0; i < dim; ++i) {
      if ((code >> i) & 1U) s.spins_[i] = +1;
    }
    return s;
  }

  std::size_t size() const noexcept { return spins_.size(); }
  int operator[](std::size_t i) const noexcept { return spins_[i]; }
  int at(std::size_t i) const {
    detail::check_index(i, size());
    return spins_[i];
  }

  void set(std::size_t i, int value) {
    detail::check_index(i, size());
    spins_[i] = to_spin(value);
  }

  void flip(std::size_t i) {
    detail::check_index(i, size());
    spins_[i] = static_cast<std::int8_t>(-spins_[i]);
  }

  SpinState flipped(std::size_t i) const {
    SpinState copy = *this;
    copy.flip(i);
    return copy;
  }

  std::uint64_t code() const noexcept {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < size() && i < 64; ++i) {
      if (spins_[i] > 0) c |= (std::uint64_t{1} << i);
    }
    return c;
  }

  std::string to_string() const {
    std::string out;
    out.reserve(size());
    for (auto v : spins_) out.push_back(v > 0 ? '+' : '-');
    return out;
  }

  std::span<const std::int8_t> values() const noexcept { return spins_; }

  friend bool operator==(const SpinState&, const SpinState&) = default;

 private:
  static std::int8_t to_spin(int v) {
    if (v != 1 && v != -1) throw DomainError("spin values must be -1 or +1");
    return static_cast<std::int8_t>(v);
  }

  std::vector<std::int8_t> spins_;
};

/// A distribution over {-1,+1}^d given by its unnormalized log weight.
/// flip_delta(i, s) must equal log_weight(s with s_i negated) - log_weight(s).
template <class M>
concept BinaryModel = requires(const M& m, const SpinState& s, std::size_t i) {
  { m.dim() } -> std::convertible_to<std::size_t>;
  { m.log_weight(s) } -> std::convertible_to<double>;
  { m.flip_delta(i, s) } -> std::convertible_to<double>;
};

/// Binary Markov random field, log p(s) = -s.r - 1/2 s'Ms.
///
/// M is kept in canonical form: symmetric with a zero diagonal. The diagonal
/// only shifts log p by a constant because s_i^2 = 1.
class MrfModel {
 public:
  MrfModel() = default;

  /// `couplings` is row-major d x d. It is symmetrized as (M + M')/2 and its
  /// diagonal zeroed.
  MrfModel(std::size_t dim, std::vector<double> couplings, std::vector<double> fields)
      : dim_(dim), couplings_(std::move(couplings)), fields_(std::move(fields)) {
    if (dim_ == 0) throw DimensionError("MRF dimension must be positive");
    detail::check_dim(couplings_.size(), dim_ * dim_, "couplings");
    detail::check_dim(fields_.size(), dim_, "fields");
    for (std::size_t i = 0; i < dim_; ++i) {
      coupling_ref(i, i) = 0.0;
      for (std::size_t j = i + 1; j < dim_; ++j) {
        const double m = 0.5 * (coupling_ref(i, j) + coupling_ref(j, i));
        coupling_ref(i, j) = m;
        coupling_ref(j, i) = m;
      }
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  double coupling(std::size_t i, std::size_t j) const noexcept { return couplings_[i * dim_ + j]; }
  double field(std::size_t i) const noexcept { return fields_[i]; }
  std::span<const double> couplings() const noexcept { return couplings_; }
  std::span<const double> fields() const noexcept { return fields_; }

  double sigma_m() const noexcept { return sigma_m_; }
  double sigma_r() const noexcept { return sigma_r_; }
  std::uint64_t seed() const noexcept { return seed_; }

  double log_weight(const SpinState& s) const {
    detail::check_dim(s.size(), dim_, "spin state");
    double linear = 0.0;
    double quadratic = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double si = s[i];
      linear += si * fields_[i];
      const double* row = &couplings_[i * dim_];
      double acc = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) acc += row[j] * s[j];
      quadratic += si * acc;
    }
    return -linear - 0.5 * quadratic;
  }

  /// log_weight(s with s_i flipped) - log_weight(s), in O(d).
  double flip_delta(std::size_t i, const SpinState& s) const {
    detail::check_index(i, dim_);
    detail::check_dim(s.size(), dim_, "spin state");
    const double* row = &couplings_[i * dim_];
    double local = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) local += row[j] * s[j];
    const double si = s[i];
    return 2.0 * si * fields_[i] + 2.0 * si * local;
  }

  friend bool operator==(const MrfModel&, const MrfModel&) = default;

  friend MrfModel mrf_with_metadata(MrfModel, double, double, std::uint64_t);

 private:
  double& coupling_ref(std::size_t i, std::size_t j) { return couplings_[i * dim_ + j]; }

  std::size_t dim_ = 0;
  std::vector<double> couplings_;
  std::vector<double> fields_;
  double sigma_m_ = 0.0;
  double sigma_r_ = 0.0;
  std::uint64_t seed_ = 0;
};

static_assert(BinaryModel<MrfModel>);

/// Attaches generator metadata (used when reading a serialized model back).
inline MrfModel mrf_with_metadata(MrfModel model, double sigma_m, double sigma_r,
                                  std::uint64_t seed) {
  model.sigma_m_ = sigma_m;
  model.sigma_r_ = sigma_r;
  model.seed_ = seed;
  return model;
}

/// Random MRF: M_ij (i<j) ~ N(0, sigma_m^2) mirrored to M_ji, zero diagonal,
/// r_i ~ N(0, sigma_r^2). Deterministic in (d, sigma_m, sigma_r, seed).
inline MrfModel mrf_sample(std::size_t dim, double sigma_m, double sigma_r, std::uint64_t seed) {
  if (dim == 0) throw DimensionError("MRF dimension must be positive");
  if (!(sigma_m >= 0.0) || !(sigma_r >= 0.0)) {
    throw DomainError("MRF standard deviations must be nonnegative");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> couplings(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      const double m = sigma_m * normal(rng);
      couplings[i * dim + j] = m;
      couplings[j * dim + i] = m;
    }
  }
  std::vector<double> fields(dim);
  for (auto& r : fields) r = sigma_r * normal(rng);
  MrfModel model(dim, std::move(couplings), std::move(fields));
  return mrf_with_metadata(std::move(model), sigma_m, sigma_r, seed);
}

/// The uniform distribution over {-1,+1}^d.
class FlatModel {
 public:
  explicit FlatModel(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw DimensionError("model dimension must be positive");
  }
  std::size_t dim() const noexcept { return dim_; }
  double log_weight(const SpinState& s) const {
    detail::check_dim(s.size(), dim_, "spin state");
    return 0.0;
  }
  double flip_delta(std::size_t i, const SpinState& s) const {
    detail::check_index(i, dim_);
    detail::check_dim(s.size(), dim_, "spin state");
    return 0.0;
  }

 private:
  std::size_t dim_;
};

static_assert(BinaryModel<FlatModel>);

}  // namespace binbps
