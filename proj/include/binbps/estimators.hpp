#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "binbps/errors.hpp"
#include "binbps/model.hpp"
#include "binbps/oracle.hpp"

namespace binbps {

/// Something that consumes spin segments from a sampler.
template <class S>
concept MomentSink = requires(S& sink, const SpinState& s, double duration) {
  sink.accumulate_segment(s, duration);
  sink.accumulate_sample(s);
};

/// Running weighted sums of s_i and s_i s_j.
///
/// BPS feeds (spin, segment duration) pairs; HMC feeds unit-weight samples.
/// Pair sums cover the strict upper triangle only and are skipped entirely
/// in first-moments-only mode.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t dim, bool track_second = true)
      : dim_(dim),
        track_second_(track_second),
        first_(dim, 0.0),
        second_(track_second ? dim * dim : 0, 0.0) {}

  std::size_t dim() const noexcept { return dim_; }
  bool tracks_second() const noexcept { return track_second_; }
  double total() const noexcept { return total_; }

  void accumulate_segment(const SpinState& s, double duration) {
    if (!(duration > 0.0)) throw DomainError("segment duration must be positive");
    detail::check_dim(s.size(), dim_, "spin state");
    for (std::size_t i = 0; i < dim_; ++i) {
      const double w = duration * s[i];
      first_[i] += w;
      if (track_second_) {
        double* row = &second_[i * dim_];
        for (std::size_t j = i + 1; j < dim_; ++j) row[j] += w * s[j];
      }
    }
    total_ += duration;
  }

  void accumulate_sample(const SpinState& s) { accumulate_segment(s, 1.0); }

  void merge(const MomentAccumulator& other) {
    detail::check_dim(other.dim_, dim_, "accumulator");
    if (other.track_second_ != track_second_) {
      throw DomainError("cannot merge accumulators with different moment orders");
    }
    for (std::size_t i = 0; i < first_.size(); ++i) first_[i] += other.first_[i];
    for (std::size_t i = 0; i < second_.size(); ++i) second_[i] += other.second_[i];
    total_ += other.total_;
  }

  MomentTable finalize() const {
    if (!(total_ > 0.0)) throw DomainError("cannot finalize an empty accumulator");
    MomentTable table;
    table.total_weight = total_;
    table.first.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      table.first[i] = std::clamp(first_[i] / total_, -1.0, 1.0);
    }
    if (track_second_) {
      table.second.assign(dim_ * dim_, 0.0);
      for (std::size_t i = 0; i < dim_; ++i) {
        table.second[i * dim_ + i] = 1.0;
        for (std::size_t j = i + 1; j < dim_; ++j) {
          const double m = std::clamp(second_[i * dim_ + j] / total_, -1.0, 1.0);
          table.second[i * dim_ + j] = m;
          table.second[j * dim_ + i] = m;
        }
      }
    }
    return table;
  }

 private:
  std::size_t dim_;
  bool track_second_;
  std::vector<double> first_;
  std::vector<double> second_;
  double total_ = 0.0;
};

static_assert(MomentSink<MomentAccumulator>);

/// Splits an input stream of known length into equal-count batches for
/// batch-means standard errors. Inputs beyond `expected_inputs` land in the
/// last batch.
class BatchMeans {
 public:
  BatchMeans(std::size_t dim, std::size_t batches, std::size_t expected_inputs,
             bool track_second = true)
      : expected_(std::max<std::size_t>(expected_inputs, 1)),
        batches_(std::max<std::size_t>(batches, 1), MomentAccumulator(dim, track_second)) {}

  void accumulate_segment(const SpinState& s, double duration) {
    current().accumulate_segment(s, duration);
    ++seen_;
  }
  void accumulate_sample(const SpinState& s) {
    current().accumulate_sample(s);
    ++seen_;
  }

  std::size_t batch_count() const noexcept { return batches_.size(); }
  const MomentAccumulator& batch(std::size_t b) const { return batches_.at(b); }

  MomentAccumulator pooled() const {
    MomentAccumulator all = batches_.front();
    for (std::size_t b = 1; b < batches_.size(); ++b) all.merge(batches_[b]);
    return all;
  }

  /// Standard error of each moment: sample sd of the batch estimates / sqrt(k).
  MomentTable standard_errors() const {
    std::vector<MomentTable> tables;
    tables.reserve(batches_.size());
    for (const auto& b : batches_) tables.push_back(b.finalize());
    const double k = static_cast<double>(tables.size());
    auto se_of = [&](auto get) {
      double mean = 0.0;
      for (const auto& t : tables) mean += get(t);
      mean /= k;
      double ss = 0.0;
      for (const auto& t : tables) ss += (get(t) - mean) * (get(t) - mean);
      return std::sqrt(ss / (k - 1.0) / k);
    };
    MomentTable se;
    const std::size_t d = tables.front().dim();
    se.total_weight = k;
    se.first.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      se.first[i] = se_of([i](const MomentTable& t) { return t.first[i]; });
    }
    if (tables.front().has_second()) {
      se.second.assign(d * d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
          const double v = se_of([i, j](const MomentTable& t) { return t.pair(i, j); });
          se.second[i * d + j] = v;
          se.second[j * d + i] = v;
        }
      }
    }
    return se;
  }

 private:
  MomentAccumulator& current() {
    const std::size_t k = batches_.size();
    const std::size_t b = std::min(k - 1, seen_ * k / expected_);
    return batches_[b];
  }

  std::size_t expected_;
  std::size_t seen_ = 0;
  std::vector<MomentAccumulator> batches_;
};

static_assert(MomentSink<BatchMeans>);

}  // namespace binbps
