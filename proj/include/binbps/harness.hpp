#pragma once

// Benchmark orchestration: seeded models, matched sampler budgets,
// replicates, MSE scoring against exact moments and CSV output.

#include <time.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "binbps/bps.hpp"
#include "binbps/errors.hpp"
#include "binbps/estimators.hpp"
#include "binbps/hmc.hpp"
#include "binbps/model.hpp"
#include "binbps/oracle.hpp"

namespace binbps {

enum class SamplerKind { BpsGaussian, BpsExponential, Hmc };

inline std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::BpsGaussian: return "bps-gaussian";
    case SamplerKind::BpsExponential: return "bps-exponential";
    case SamplerKind::Hmc: return "hmc";
  }
  return "unknown";
}

inline AugmentationKind augmentation_of(SamplerKind kind) {
  return kind == SamplerKind::BpsExponential ? AugmentationKind::Exponential
                                             : AugmentationKind::Gaussian;
}

inline SamplerKind parse_sampler(std::string_view name) {
  if (name == "bps-gaussian") return SamplerKind::BpsGaussian;
  if (name == "bps-exponential") return SamplerKind::BpsExponential;
  if (name == "hmc") return SamplerKind::Hmc;
  throw ConfigError("unknown sampler '" + std::string(name) + "'");
}

/// Parses a comma-separated sampler list such as "bps-gaussian,hmc".
inline std::vector<SamplerKind> parse_sampler_list(std::string_view text) {
  std::vector<SamplerKind> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const auto token = text.substr(start, comma - start);
    if (!token.empty()) {
      const auto kind = parse_sampler(token);
      if (std::find(out.begin(), out.end(), kind) != out.end()) {
        throw ConfigError("sampler '" + std::string(token) + "' listed twice");
      }
      out.push_back(kind);
    }
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("at least one sampler must be selected");
  return out;
}

enum class BudgetMode { Events, CpuMillis };

inline double default_hmc_travel_time(std::size_t d) {
  return d <= 20 ? 6.5 * std::numbers::pi : 0.5 * std::numbers::pi;
}

struct ExperimentConfig {
  std::size_t d = 10;
  double sigma_m = 0.2;
  double sigma_r = 0.5;
  std::uint64_t model_seed = 1;
  std::uint64_t replicates = 30;
  std::vector<SamplerKind> samplers = {SamplerKind::BpsGaussian, SamplerKind::BpsExponential,
                                       SamplerKind::Hmc};
  BudgetMode budget_mode = BudgetMode::Events;
  /// Events mode: BPS runs this many events; HMC runs whole iterations until
  /// it has processed this many wall events.
  std::uint64_t budget_events = 1'000'000;
  std::uint64_t budget_cpu_millis = 1000;
  /// Explicit per-sampler counts (BPS events, HMC iterations) that override
  /// the budget, e.g. from a recorded calibration.
  std::map<SamplerKind, std::uint64_t> pinned_counts;
  std::optional<double> hmc_travel_time;
  bool include_second_moments = true;
  double burn_in_fraction = 0.1;
  /// BPS velocity refreshment rate; 0 disables it.
  double refresh_rate = 0.0;
  std::uint64_t run_seed_base = 0;
  /// Score against exact enumeration (or `reference` when given).
  bool score = true;
  std::optional<MomentTable> reference;
  /// Worker threads for replicates; 0 means hardware concurrency.
  unsigned threads = 0;
  /// Probe length per sampler for CPU-budget calibration.
  double probe_millis = 100.0;

  double travel_time() const { return hmc_travel_time.value_or(default_hmc_travel_time(d)); }

  void validate() const {
    if (d < 1) throw ConfigError("d must be positive");
    if (!(sigma_m >= 0.0) || !(sigma_r >= 0.0)) {
      throw ConfigError("sigma_m and sigma_r must be nonnegative");
    }
    if (replicates < 1) throw ConfigError("replicates must be at least 1");
    if (samplers.empty()) throw ConfigError("at least one sampler must be selected");
    if (budget_mode == BudgetMode::Events && budget_events < 1) {
      throw ConfigError("event budget must be positive");
    }
    if (budget_mode == BudgetMode::CpuMillis && budget_cpu_millis < 1) {
      throw ConfigError("CPU budget must be positive");
    }
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
      throw ConfigError("burn-in fraction must lie in [0, 1)");
    }
    if (!(refresh_rate >= 0.0) || !std::isfinite(refresh_rate)) {
      throw ConfigError("refresh rate must be finite and nonnegative");
    }
    if (!(travel_time() > 0.0) || !std::isfinite(travel_time())) {
      throw ConfigError("HMC travel time must be positive");
    }
    if (reference) detail::check_dim(reference->dim(), d, "reference moments");
  }
};

// ---------------------------------------------------------------------------
// Budget calibration

struct SamplerProbe {
  SamplerKind sampler;
  /// Events/s for BPS, iterations/s for HMC.
  double rate = 0.0;
  double relative_spread = 0.0;
  std::uint64_t count = 0;
};

struct Calibration {
  std::vector<SamplerProbe> probes;
  std::vector<std::string> warnings;

  std::uint64_t count_for(SamplerKind kind) const {
    for (const auto& p : probes) {
      if (p.sampler == kind) return p.count;
    }
    throw ConfigError("no calibration for sampler " + std::string(to_string(kind)));
  }
};

/// Work units a sampler can do in `cpu_millis` at a measured rate (at least 1).
inline std::uint64_t count_for_budget(double rate_per_second, double cpu_millis) {
  const double n = std::floor(rate_per_second * cpu_millis / 1000.0);
  return n < 1.0 ? 1 : static_cast<std::uint64_t>(n);
}

namespace detail {

inline double thread_cpu_millis() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) * 1e-6;
}

inline constexpr double kMaxProbeSpread = 0.20;
inline constexpr int kProbeRepeats = 3;

template <BinaryModel Model>
double probe_rate(const Model& model, SamplerKind kind, const ExperimentConfig& config,
                  double millis, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MomentAccumulator sink(model.dim(), config.include_second_moments);
  std::uint64_t work = 0;
  const double start = thread_cpu_millis();
  double elapsed = 0.0;
  while (elapsed < millis) {
    if (kind == SamplerKind::Hmc) {
      HmcConfig hc;
      hc.travel_time = config.travel_time();
      hc.iterations = 50;
      hc.burn_in_fraction = 0.0;
      work += hmc_run(model, hc, rng, sink).iterations;
    } else {
      BpsConfig bc;
      bc.augmentation = augmentation_of(kind);
      bc.max_events = 10'000;
      bc.burn_in_fraction = 0.0;
      bc.refresh_rate = config.refresh_rate;
      work += bps_run(model, bc, rng, sink).events;
    }
    elapsed = thread_cpu_millis() - start;
  }
  if (work < 10 || !(elapsed > 0.0)) {
    throw CalibrationError("timing probe too short to resolve a rate");
  }
  return static_cast<double>(work) / (elapsed / 1000.0);
}

}  // namespace detail

/// Converts a CPU-time budget into deterministic per-sampler counts by
/// timing each sampler on the model (serially, to avoid contention). Runs
/// with those counts are reproducible given the calibration.
template <BinaryModel Model>
Calibration calibrate_budget(const Model& model, const ExperimentConfig& config) {
  Calibration cal;
  if (config.budget_mode == BudgetMode::Events) {
    for (auto kind : config.samplers) {
      cal.probes.push_back({kind, 0.0, 0.0, config.budget_events});
    }
    return cal;
  }
  const double per_probe =
      std::max(config.probe_millis, 1.0) / static_cast<double>(detail::kProbeRepeats);
  for (auto kind : config.samplers) {
    std::vector<double> rates;
    for (int rep = 0; rep < detail::kProbeRepeats; ++rep) {
      rates.push_back(detail::probe_rate(model, kind, config, per_probe,
                                         config.run_seed_base + 0x9e3779b97f4a7c15ULL + rep));
    }
    double mean = 0.0;
    for (double r : rates) mean += r;
    mean /= static_cast<double>(rates.size());
    double var = 0.0;
    for (double r : rates) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rates.size() - 1);
    SamplerProbe probe{kind, mean, std::sqrt(var) / mean, 0};
    probe.count = count_for_budget(mean, static_cast<double>(config.budget_cpu_millis));
    if (probe.relative_spread > detail::kMaxProbeSpread) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "probe rates for %s vary by %.0f%% (> 20%%)",
                    std::string(to_string(kind)).c_str(), 100.0 * probe.relative_spread);
      cal.warnings.emplace_back(buf);
    }
    cal.probes.push_back(probe);
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Experiment

struct ResultRow {
  SamplerKind sampler = SamplerKind::BpsGaussian;
  /// Replicate index; empty for a median summary row.
  std::optional<std::uint64_t> replicate;
  std::uint64_t events = 0;
  std::uint64_t hmc_iterations = 0;
  double cpu_millis = 0.0;
  double mse_first = 0.0;
  double mse_second = 0.0;
  double mse_total = 0.0;
  /// Measured thread CPU time; informational, not part of the CSV.
  double measured_millis = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ResultRow> rows;
  std::vector<ResultRow> medians;
  std::optional<Calibration> calibration;
  std::optional<MomentTable> truth;
};

inline double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end(), [](double a, double b) {
    // NaNs last
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  });
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace detail {

template <BinaryModel Model>
ResultRow run_single(const Model& model, const ExperimentConfig& config, SamplerKind kind,
                     std::uint64_t replicate, std::optional<std::uint64_t> count,
                     const std::optional<MomentTable>& truth) {
  std::mt19937_64 rng(config.run_seed_base + replicate);
  MomentAccumulator acc(model.dim(), config.include_second_moments);
  ResultRow row;
  row.sampler = kind;
  row.replicate = replicate;
  if (config.budget_mode == BudgetMode::CpuMillis) {
    row.cpu_millis = static_cast<double>(config.budget_cpu_millis);
  }

  const double start = thread_cpu_millis();
  if (kind == SamplerKind::Hmc) {
    HmcConfig hc;
    hc.travel_time = config.travel_time();
    hc.burn_in_fraction = config.burn_in_fraction;
    if (count) {
      hc.iterations = *count;
    } else {
      hc.iterations = std::numeric_limits<std::uint64_t>::max();
      hc.max_wall_events = config.budget_events;
    }
    const auto stats = hmc_run(model, hc, rng, acc);
    row.events = stats.wall_events();
    row.hmc_iterations = stats.iterations;
  } else {
    BpsConfig bc;
    bc.augmentation = augmentation_of(kind);
    bc.burn_in_fraction = config.burn_in_fraction;
    bc.refresh_rate = config.refresh_rate;
    bc.max_events = count.value_or(config.budget_events);
    const auto stats = bps_run(model, bc, rng, acc);
    row.events = stats.events;
  }
  row.measured_millis = thread_cpu_millis() - start;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.mse_first = row.mse_second = row.mse_total = nan;
  if (truth && acc.total() > 0.0) {
    const MomentTable estimate = acc.finalize();
    row.mse_first = summed_mse(estimate, *truth, false);
    if (config.include_second_moments && truth->has_second()) {
      row.mse_total = summed_mse(estimate, *truth, true);
      row.mse_second = row.mse_total - row.mse_first;
    } else {
      row.mse_total = row.mse_first;
    }
  }
  return row;
}

}  // namespace detail

/// Runs every (sampler, replicate) pair on one seeded MRF and scores it.
///
/// Replicate r uses run seed run_seed_base + r. Rows come back ordered by
/// sampler (as listed in the config) then replicate, independent of thread
/// scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config = config;

  const MrfModel model = mrf_sample(config.d, config.sigma_m, config.sigma_r, config.model_seed);
  if (config.reference) {
    result.truth = config.reference;
  } else if (config.score) {
    result.truth = enumerate_moments(model);  // throws EnumerationInfeasible for d > 25
  }

  std::map<SamplerKind, std::optional<std::uint64_t>> counts;
  for (auto kind : config.samplers) counts[kind] = std::nullopt;
  if (config.budget_mode == BudgetMode::CpuMillis) {
    result.calibration = calibrate_budget(model, config);
    for (auto kind : config.samplers) counts[kind] = result.calibration->count_for(kind);
  }
  for (const auto& [kind, n] : config.pinned_counts) {
    if (counts.contains(kind)) counts[kind] = n;
  }

  struct Job {
    SamplerKind kind;
    std::uint64_t replicate;
  };
  std::vector<Job> jobs;
  for (auto kind : config.samplers) {
    for (std::uint64_t r = 0; r < config.replicates; ++r) jobs.push_back({kind, r});
  }
  result.rows.resize(jobs.size());

  unsigned workers = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t j = next++; j < jobs.size(); j = next++) {
        const auto& job = jobs[j];
        result.rows[j] =
            detail::run_single(model, config, job.kind, job.replicate, counts.at(job.kind), result.truth);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (auto kind : config.samplers) {
    std::vector<double> events, iters, cpu, first, second, total, measured;
    for (const auto& row : result.rows) {
      if (row.sampler != kind) continue;
      events.push_back(static_cast<double>(row.events));
      iters.push_back(static_cast<double>(row.hmc_iterations));
      cpu.push_back(row.cpu_millis);
      first.push_back(row.mse_first);
      second.push_back(row.mse_second);
      total.push_back(row.mse_total);
      measured.push_back(row.measured_millis);
    }
    ResultRow med;
    med.sampler = kind;
    med.events = static_cast<std::uint64_t>(median_of(events));
    med.hmc_iterations = static_cast<std::uint64_t>(median_of(iters));
    med.cpu_millis = median_of(cpu);
    med.mse_first = median_of(first);
    med.mse_second = median_of(second);
    med.mse_total = median_of(total);
    med.measured_millis = median_of(measured);
    result.medians.push_back(med);
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader =
    "sampler,augmentation,d,sigma_m,sigma_r,model_seed,replicate,events,hmc_iterations,"
    "cpu_millis,mse_first,mse_second,mse_total";

/// Shortest-round-trip-safe float text: 17 significant digits.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv_row(std::ostream& out, const ExperimentConfig& config, const ResultRow& row) {
  out << to_string(row.sampler) << ',' << to_string(augmentation_of(row.sampler)) << ','
      << config.d << ',' << format_real(config.sigma_m) << ',' << format_real(config.sigma_r)
      << ',' << config.model_seed << ',';
  if (row.replicate) {
    out << *row.replicate;
  } else {
    out << "median";
  }
  out << ',' << row.events << ',' << row.hmc_iterations << ',' << format_real(row.cpu_millis)
      << ',' << format_real(row.mse_first) << ',' << format_real(row.mse_second) << ','
      << format_real(row.mse_total) << '\n';
}

/// Header, one row per run, then one `median` row per sampler. In CPU-budget
/// mode the calibration probes precede the header as '#' comment lines.
inline void write_csv(std::ostream& out, const ExperimentResult& result) {
  if (result.calibration && result.config.budget_mode == BudgetMode::CpuMillis) {
    for (const auto& p : result.calibration->probes) {
      out << "# calibration sampler=" << to_string(p.sampler) << " rate_per_s="
          << format_real(p.rate) << " spread=" << format_real(p.relative_spread)
          << " count=" << p.count << '\n';
    }
    for (const auto& w : result.calibration->warnings) out << "# warning " << w << '\n';
  }
  out << kCsvHeader << '\n';
  for (const auto& row : result.rows) write_csv_row(out, result.config, row);
  for (const auto& row : result.medians) write_csv_row(out, result.config, row);
}

inline std::string to_csv(const ExperimentResult& result) {
  std::ostringstream out;
  write_csv(out, result);
  return out.str();
}

}  // namespace binbps
