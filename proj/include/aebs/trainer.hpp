#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "aebs/config.hpp"
#include "aebs/denoiser.hpp"
#include "aebs/diffusion.hpp"
#include "aebs/graph_mdp.hpp"

namespace aebs {

// One sampled denoising chain and the score of its final graph.
struct Trajectory {
  std::vector<GraphState> states;  // G^T, ..., G^0
  Condition cond;
  double reward = 0.0;
  ConstraintReport audit;
};

// Uniformly random subset of {1..T} of the given size, ascending.
std::vector<int> sample_timesteps(int steps, int count, std::uint64_t seed);

// Policy-gradient estimate averaged over trajectories:
//   (1/M) sum_m (T/|T_m|) sum_{t in T_m} (r_m - b_m) grad log q(G^0_m | G^t_m)
// (eager form), or with log q(G^{t-1}_m | G^t_m) in the per-step form.
// `baselines` holds b_m per trajectory (empty for none). Reductions run in
// trajectory order, so the result does not depend on the worker count.
Eigen::VectorXd eager_gradient(const DenoiserModel& model, const std::vector<Trajectory>& batch,
                               const NoiseSchedule& schedule, int timestep_samples,
                               const std::vector<double>& baselines, std::uint64_t seed,
                               Estimator estimator = Estimator::Eager, unsigned workers = 1);

// Adam or plain ascent on a flat parameter vector.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::VectorXd m, v;
  long long t = 0;

  // Returns the ascent step to add to the parameters.
  Eigen::VectorXd step(const Eigen::VectorXd& grad);
};

struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double max_reward = 0.0;
  std::array<double, 4> penalty_rates{};  // fraction of trajectories with xi_a, xi_m, xi_c, xi_r set
  double wall_time = 0.0;
  bool skipped = false;
};

nlohmann::json metrics_to_json(const StepMetrics& m);

// The training scenario: network, GU drop and reward settings. A fresh
// fading seed is drawn every step.
struct TrainSetup {
  Environment env;
  NoiseSchedule schedule;
  RewardOptions reward;
};

TrainSetup make_train_setup(const AppConfig& cfg);

// Resumable trainer state.
struct TrainerState {
  int step = 0;
  OptimizerState opt;
  double baseline = 0.0;
  bool baseline_ready = false;
  int consecutive_skips = 0;
};

// Pieces of one training step shared by every policy-gradient trainer.
std::uint64_t step_channel_seed(std::uint64_t seed, int step);
StepMetrics summarize_step(int step, const std::vector<double>& rewards, const std::vector<ConstraintReport>& audits);
// Per-trajectory baselines: leave-one-out mean on the first step, the running
// mean afterwards, empty when disabled.
std::vector<double> step_baselines(const TrainerState& st, const TrainConfig& tc, const std::vector<double>& rewards);
// Applies the gradient (or records a skip) and advances the running mean.
void finish_step(TrainerState& st, const TrainConfig& tc, const Eigen::VectorXd& grad, Eigen::VectorXd& params,
                 StepMetrics& sm);

struct TrainResult {
  std::vector<StepMetrics> curve;
  TrainerState state;
};

struct TrainHooks {
  std::ostream* metrics = nullptr;  // JSONL, one line per step
  std::function<void(const TrainerState&)> checkpoint;  // called every checkpoint_every steps
  // Replaces the gradient before the update (tests inject non-finite values).
  std::function<void(Eigen::VectorXd&)> gradient_filter;
};

// Condition for a graph: its surrogate utility and each AeBS's used power fraction.
Condition condition_for(const GraphState& g, const Environment& env, bool rsma = true);

// Samples one trajectory from the model for the given environment, with the
// condition taken from the surrogate resources of the starting graph.
Trajectory rollout(const DenoiserModel& model, const TrainSetup& setup, std::uint64_t seed);

std::vector<int> gu_cells(const Environment& env);

// Runs steps [state.step, L) of reward training. Throws std::runtime_error
// after three consecutive non-finite gradients.
TrainResult train(DenoiserModel& model, const TrainSetup& setup, const TrainConfig& tc, std::uint64_t seed,
                  TrainerState state = {}, const TrainHooks& hooks = {});

// Checkpoint = denoiser directory plus optimizer moments and trainer scalars.
void save_checkpoint(const std::string& dir, const GraphDenoiser& model, const TrainerState& st,
                     const nlohmann::json& extra = {});
GraphDenoiser load_checkpoint(const std::string& dir, TrainerState* st, nlohmann::json* extra = nullptr);

}  // namespace aebs
