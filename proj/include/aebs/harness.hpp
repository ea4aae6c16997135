#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aebs/baselines.hpp"
#include "aebs/config.hpp"
#include "aebs/denoiser.hpp"
#include "aebs/orchestrator.hpp"
#include "aebs/trainer.hpp"

namespace aebs {

// Denoiser for a config; the initialization stream depends on the run seed.
GraphDenoiser make_denoiser(const AppConfig& cfg, std::uint64_t seed);

struct TrainedModel {
  GraphDenoiser model;
  TrainResult result;
};

// Trains from scratch (or from `resume_dir`). Metrics go to `metrics` when
// given; checkpoints land in checkpoint_dir/step_XXXXXX when it is non-empty.
TrainedModel train_model(const AppConfig& cfg, std::uint64_t seed, std::ostream* metrics = nullptr,
                         const std::string& checkpoint_dir = "", const std::string& resume_dir = "");

// The solve-time scenario: the configured GU drop with a fading seed drawn from the run seed.
Environment solve_environment(const AppConfig& cfg, std::uint64_t seed);
SolveOptions solve_options(const AppConfig& cfg);
AlternateResult solve_with(const DenoiserModel& model, const AppConfig& cfg, std::uint64_t seed, bool rsma = true);

// Mean reward of the random policy over `steps` x `per_step` draws, with the
// same per-step fading as training. One metrics line per step.
std::vector<StepMetrics> random_curve(const AppConfig& cfg, std::uint64_t seed, std::ostream* metrics = nullptr);

enum class SweepKind { Aebs, Gu, Range, Steps, Lr };
SweepKind sweep_kind_from_string(const std::string& s);
const char* to_string(SweepKind k);
std::vector<double> default_grid(SweepKind k);

// Config for one sweep cell. The GU drop follows the cell seed. Throws
// std::invalid_argument outside the supported range.
AppConfig sweep_config(const AppConfig& base, SweepKind kind, double value, std::uint64_t seed);

struct SweepCell {
  double value = 0.0;
  std::uint64_t seed = 0;
  double utility = 0.0;
  double sum_rate = 0.0;
  double coverage = 0.0;
  bool feasible = false;
  double final_reward = 0.0;  // mean training reward over the last ten steps
  double wall_time = 0.0;
  std::string error;          // empty on success
  std::vector<StepMetrics> curve;
};

// Deployment sweeps (aebs, gu, range) train and solve each cell; the steps
// and lr sweeps only train. Cells run on up to `workers` threads and are
// returned in grid-major, seed-minor order.
std::vector<SweepCell> run_sweep(const AppConfig& base, SweepKind kind, const std::vector<double>& grid,
                                 const std::vector<std::uint64_t>& seeds, unsigned workers = 1);

void write_sweep_cells(std::ostream& out, SweepKind kind, const std::vector<SweepCell>& cells);
void write_sweep_summary(std::ostream& out, SweepKind kind, const std::vector<SweepCell>& cells);
void write_sweep_curves(std::ostream& out, SweepKind kind, const std::vector<SweepCell>& cells);

struct SweepStat {
  double value = 0.0;
  int runs = 0;
  double coverage_mean = 0.0, coverage_std = 0.0, coverage_se = 0.0;
  double utility_mean = 0.0, utility_std = 0.0;
  double sum_rate_mean = 0.0, sum_rate_std = 0.0;
  double final_reward_mean = 0.0, final_reward_std = 0.0;
};
std::vector<SweepStat> summarize_sweep(const std::vector<SweepCell>& cells);

// Command-line entry point. Returns the process exit code: 0 on success,
// 2 for a missing or invalid config, nonzero for usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aebs
