// binbps: benchmark harness and utilities for binary BPS / HMC samplers.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "binbps/binbps.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

struct ModelArgs {
  std::size_t d = 10;
  double sigma_m = 0.2;
  double sigma_r = 0.5;
  std::uint64_t model_seed = 1;
};

void add_model_options(CLI::App* cmd, ModelArgs& args) {
  cmd->add_option("--d", args.d, "Number of spins")->check(CLI::PositiveNumber);
  cmd->add_option("--sigma-m", args.sigma_m, "Std. dev. of couplings M")->check(CLI::NonNegativeNumber);
  cmd->add_option("--sigma-r", args.sigma_r, "Std. dev. of fields r")->check(CLI::NonNegativeNumber);
  cmd->add_option("--model-seed", args.model_seed, "Seed of the random MRF");
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw binbps::ConfigError("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bouncy particle and binary HMC samplers for binary MRFs"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "Run the sampler comparison and write CSV");
  ModelArgs bench_model;
  add_model_options(bench, bench_model);
  std::uint64_t run_seed = 0;
  std::uint64_t replicates = 30;
  std::string samplers = "bps-gaussian,bps-exponential,hmc";
  std::uint64_t budget_events = 0;
  std::uint64_t budget_ms = 0;
  double travel_pi = 0.0;
  bool first_only = false;
  double burn_in = 0.1;
  double refresh = 0.0;
  std::string out_path;
  std::string reference_path;
  bool no_score = false;
  unsigned threads = 0;
  std::vector<std::string> pins;
  bench->add_option("--run-seed", run_seed, "Base seed; replicate r uses run-seed + r");
  bench->add_option("--replicates", replicates, "Replicates per sampler")->check(CLI::PositiveNumber);
  bench->add_option("--samplers", samplers, "Comma-separated: bps-gaussian,bps-exponential,hmc");
  auto* ev = bench->add_option("--budget-events", budget_events,
                               "Events per BPS run (HMC: wall events)")->check(CLI::PositiveNumber);
  auto* ms = bench->add_option("--budget-ms", budget_ms, "CPU milliseconds per run (calibrated)")
                 ->check(CLI::PositiveNumber);
  ev->excludes(ms);
  bench->add_option("--hmc-travel-time-pi", travel_pi, "HMC travel time in units of pi")
      ->check(CLI::PositiveNumber);
  bench->add_flag("--first-moments-only", first_only, "Score E[s_i] only");
  bench->add_option("--burn-in", burn_in, "Burn-in fraction")->check(CLI::Range(0.0, 0.999999));
  bench->add_option("--refresh-rate", refresh, "BPS velocity refresh rate (0 = off)")
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--out", out_path, "CSV output path (default stdout)");
  bench->add_option("--reference", reference_path, "Reference moments JSON instead of enumeration");
  bench->add_flag("--no-score", no_score, "Skip MSE scoring (allows d > 25)");
  bench->add_option("--threads", threads, "Worker threads (0 = all cores)");
  bench->add_option("--pin", pins, "Pinned count sampler=N (BPS events, HMC iterations)");

  // moments
  auto* moments = app.add_subcommand("moments", "Print exact moments of a seeded model as JSON");
  ModelArgs moments_model;
  add_model_options(moments, moments_model);
  std::string moments_out;
  std::string model_out;
  moments->add_option("--out", moments_out, "Output path (default stdout)");
  moments->add_option("--model-out", model_out, "Also write the model JSON here");

  // trace
  auto* trace = app.add_subcommand("trace", "Dump a BPS trajectory, one event per line");
  ModelArgs trace_model;
  add_model_options(trace, trace_model);
  std::string trace_aug = "gaussian";
  std::uint64_t trace_events = 1000;
  std::uint64_t trace_seed = 0;
  double trace_refresh = 0.0;
  std::string trace_out;
  trace->add_option("--augmentation", trace_aug, "gaussian or exponential");
  trace->add_option("--events", trace_events, "Number of events")->check(CLI::PositiveNumber);
  trace->add_option("--run-seed", trace_seed, "Run seed");
  trace->add_option("--refresh-rate", trace_refresh, "Velocity refresh rate")
      ->check(CLI::NonNegativeNumber);
  trace->add_option("--out", trace_out, "Output path (default stdout)");

  // selftest
  auto* self = app.add_subcommand("selftest", "Run the invariant suite");
  std::uint64_t self_seed = 20240601;
  self->add_option("--seed", self_seed, "Seed for randomized checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*bench) {
      binbps::ExperimentConfig config;
      config.d = bench_model.d;
      config.sigma_m = bench_model.sigma_m;
      config.sigma_r = bench_model.sigma_r;
      config.model_seed = bench_model.model_seed;
      config.run_seed_base = run_seed;
      config.replicates = replicates;
      config.samplers = binbps::parse_sampler_list(samplers);
      if (budget_ms > 0) {
        config.budget_mode = binbps::BudgetMode::CpuMillis;
        config.budget_cpu_millis = budget_ms;
      } else if (budget_events > 0) {
        config.budget_events = budget_events;
      }
      if (travel_pi > 0.0) config.hmc_travel_time = travel_pi * std::numbers::pi;
      config.include_second_moments = !first_only;
      config.burn_in_fraction = burn_in;
      config.refresh_rate = refresh;
      config.score = !no_score;
      config.threads = threads;
      if (!reference_path.empty()) {
        config.reference = binbps::moments_from_json(binbps::read_json_file(reference_path));
      }
      for (const auto& pin : pins) {
        const auto eq = pin.find('=');
        if (eq == std::string::npos) throw binbps::ConfigError("--pin expects sampler=N");
        const auto kind = binbps::parse_sampler(pin.substr(0, eq));
        try {
          config.pinned_counts[kind] = std::stoull(pin.substr(eq + 1));
        } catch (const std::exception&) {
          throw binbps::ConfigError("bad count in --pin " + pin);
        }
      }

      const auto result = binbps::run_experiment(config);
      write_output(out_path, binbps::to_csv(result));
      for (const auto& med : result.medians) {
        std::fprintf(stderr, "%-16s median mse_total %.6g  (median cpu %.1f ms)\n",
                     std::string(binbps::to_string(med.sampler)).c_str(), med.mse_total,
                     med.measured_millis);
      }
      if (result.calibration) {
        for (const auto& w : result.calibration->warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      }
      return 0;
    }

    if (*moments) {
      const auto model = binbps::mrf_sample(moments_model.d, moments_model.sigma_m,
                                            moments_model.sigma_r, moments_model.model_seed);
      if (!model_out.empty()) write_output(model_out, binbps::to_json(model).dump(2) + "\n");
      const auto table = binbps::enumerate_moments(model);
      write_output(moments_out, binbps::to_json(table).dump(2) + "\n");
      return 0;
    }

    if (*trace) {
      const auto model = binbps::mrf_sample(trace_model.d, trace_model.sigma_m,
                                            trace_model.sigma_r, trace_model.model_seed);
      binbps::BpsConfig config;
      config.augmentation = binbps::parse_augmentation(trace_aug);
      config.max_events = trace_events;
      config.refresh_rate = trace_refresh;
      config.burn_in_fraction = 0.0;
      std::mt19937_64 rng(trace_seed);
      binbps::MomentAccumulator sink(model.dim());
      std::ostringstream text;
      binbps::bps_run(model, config, rng, sink, &text);
      write_output(trace_out, text.str());
      return 0;
    }

    if (*self) {
      bool ok = true;
      for (const auto& check : binbps::selftest::run_all(self_seed)) {
        std::printf("%s  %-40s %s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.c_str());
        ok = ok && check.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const binbps::EnumerationInfeasible& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const binbps::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const binbps::DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
