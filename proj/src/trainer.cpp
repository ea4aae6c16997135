#include "aebs/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "aebs/parallel.hpp"
#include "aebs/rng.hpp"

namespace aebs {

std::vector<int> sample_timesteps(int steps, int count, std::uint64_t seed) {
  if (count < 1 || count > steps) throw std::invalid_argument("sample_timesteps: count must be in [1, T]");
  std::vector<int> pool(steps);
  std::iota(pool.begin(), pool.end(), 1);
  Rng rng = make_rng(seed);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(uniform01(rng) * (steps - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Eigen::VectorXd eager_gradient(const DenoiserModel& model, const std::vector<Trajectory>& batch,
                               const NoiseSchedule& schedule, int timestep_samples,
                               const std::vector<double>& baselines, std::uint64_t seed, Estimator estimator,
                               unsigned workers) {
  const int P = model.num_parameters();
  const int T = schedule.steps;
  const int M = static_cast<int>(batch.size());
  if (!baselines.empty() && static_cast<int>(baselines.size()) != M)
    throw std::invalid_argument("eager_gradient: one baseline per trajectory");
  std::vector<Eigen::VectorXd> parts(M);
  parallel_for(
      M,
      [&](std::size_t i) {
        const Trajectory& tr = batch[i];
        if (static_cast<int>(tr.states.size()) != T + 1)
          throw std::invalid_argument("eager_gradient: trajectory length must be T + 1");
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(P);
        const double adv = tr.reward - (baselines.empty() ? 0.0 : baselines[i]);
        if (adv != 0.0) {
          const auto ts = sample_timesteps(T, timestep_samples, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
          const double scale = adv * static_cast<double>(T) / static_cast<double>(ts.size()) / M;
          const TargetWeights final_w = TargetWeights::one_hot(tr.states.back());
          Eigen::VectorXd g(P);
          for (int t : ts) {
            const GraphState& gt = tr.states[T - t];
            if (estimator == Estimator::Eager) {
              model.log_prob_grad(gt, t, tr.cond, final_w, &g);
            } else {
              model.log_prob_grad(gt, t, tr.cond, step_weights(tr.states[T - t + 1], gt, t, schedule), &g);
            }
            acc += scale * g;
          }
        }
        parts[i] = std::move(acc);
      },
      workers);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
  for (const auto& p : parts) grad += p;
  return grad;
}

Eigen::VectorXd OptimizerState::step(const Eigen::VectorXd& grad) {
  if (kind == OptimizerKind::Sgd) return lr * grad;
  if (m.size() != grad.size()) {
    m = Eigen::VectorXd::Zero(grad.size());
    v = Eigen::VectorXd::Zero(grad.size());
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  return (lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
}

nlohmann::json metrics_to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"mean_reward", m.mean_reward},
          {"max_reward", m.max_reward},
          {"penalty_rates",
           {{"xi_a", m.penalty_rates[0]}, {"xi_m", m.penalty_rates[1]}, {"xi_c", m.penalty_rates[2]},
            {"xi_r", m.penalty_rates[3]}}},
          {"wall_time", m.wall_time},
          {"skipped", m.skipped}};
}

TrainSetup make_train_setup(const AppConfig& cfg) {
  TrainSetup s;
  s.env.net = cfg.network;
  s.env.gus = generate_gu_positions(cfg.network, cfg.scenario);
  s.env.grid = cfg.diffusion.grid;
  s.env.channel_seed = cfg.scenario.seed;
  const int K = cfg.network.num_aebs;
  s.schedule = make_schedule(cfg.diffusion.steps, cfg.diffusion.grid * cfg.diffusion.grid, cfg.diffusion.stationary,
                             cfg.diffusion.cosine_offset, 1.0 / K);
  s.reward.mode = cfg.train.reward_mode;
  s.reward.omega = cfg.train.omega;
  s.reward.sca.tau = cfg.solve.sca_tau;
  s.reward.sca.max_iters = cfg.solve.sca_max_iters;
  return s;
}

std::vector<int> gu_cells(const Environment& env) {
  std::vector<int> cells;
  cells.reserve(env.gus.size());
  for (const auto& p : env.gus) cells.push_back(cell_of(p, env.grid, env.net));
  return cells;
}

Condition condition_for(const GraphState& g, const Environment& env, bool rsma) {
  RewardOptions opt;
  opt.mode = RewardMode::Surrogate;
  opt.rsma = rsma;
  const Scored s = score_graph(g, env, opt);
  Condition c;
  c.utility = s.utility;
  c.gu_cells = gu_cells(env);
  for (int k = 0; k < g.num_nodes; ++k)
    c.power_fraction.push_back(std::clamp(s.resources.power(k, s.assoc) / env.net.max_power_w, 0.0, 1.0));
  return c;
}

Trajectory rollout(const DenoiserModel& model, const TrainSetup& setup, std::uint64_t seed) {
  const auto& s = setup.schedule;
  Trajectory tr;
  tr.states.reserve(s.steps + 1);
  tr.states.push_back(
      sample_stationary(setup.env.net.num_aebs, setup.env.net.num_gus, s, derive_seed(seed, {0ULL})));
  tr.cond = condition_for(tr.states.back(), setup.env, setup.reward.rsma);
  for (int t = s.steps; t >= 1; --t) {
    const CategoricalField pred = model.predict(tr.states.back(), t, tr.cond);
    tr.states.push_back(
        denoise_step(tr.states.back(), pred, t, s, derive_seed(seed, {1ULL, static_cast<std::uint64_t>(t)})));
  }
  const Scored sc = score_graph(tr.states.back(), setup.env, setup.reward);
  tr.reward = sc.reward;
  tr.audit = sc.audit;
  return tr;
}

std::uint64_t step_channel_seed(std::uint64_t seed, int step) {
  return derive_seed(seed, {static_cast<std::uint64_t>(step), 0xC4A7ULL});
}

StepMetrics summarize_step(int step, const std::vector<double>& rewards, const std::vector<ConstraintReport>& audits) {
  StepMetrics sm;
  sm.step = step;
  const double M = static_cast<double>(rewards.size());
  sm.max_reward = -std::numeric_limits<double>::infinity();
  for (double r : rewards) {
    sm.mean_reward += r;
    sm.max_reward = std::max(sm.max_reward, r);
  }
  sm.mean_reward /= M;
  for (const auto& a : audits) {
    sm.penalty_rates[0] += a.xi_a != 0;
    sm.penalty_rates[1] += a.xi_m != 0;
    sm.penalty_rates[2] += a.xi_c != 0;
    sm.penalty_rates[3] += a.xi_r != 0;
  }
  for (auto& r : sm.penalty_rates) r /= M;
  return sm;
}

std::vector<double> step_baselines(const TrainerState& st, const TrainConfig& tc, const std::vector<double>& rewards) {
  if (!tc.baseline) return {};
  const int M = static_cast<int>(rewards.size());
  const double total = std::accumulate(rewards.begin(), rewards.end(), 0.0);
  std::vector<double> b(M);
  for (int m = 0; m < M; ++m)
    b[m] = st.baseline_ready ? st.baseline : (M > 1 ? (total - rewards[m]) / (M - 1) : 0.0);
  return b;
}

void finish_step(TrainerState& st, const TrainConfig& tc, const Eigen::VectorXd& grad, Eigen::VectorXd& params,
                 StepMetrics& sm) {
  if (grad.allFinite()) {
    params += st.opt.step(grad);
    st.consecutive_skips = 0;
  } else {
    sm.skipped = true;
    if (++st.consecutive_skips >= 3)
      throw std::runtime_error("train: three consecutive non-finite gradients at step " + std::to_string(sm.step));
  }
  if (st.baseline_ready) {
    st.baseline = tc.baseline_decay * st.baseline + (1.0 - tc.baseline_decay) * sm.mean_reward;
  } else {
    st.baseline = sm.mean_reward;
    st.baseline_ready = true;
  }
  st.step = sm.step + 1;
}

TrainResult train(DenoiserModel& model, const TrainSetup& setup, const TrainConfig& tc, std::uint64_t seed,
                  TrainerState state, const TrainHooks& hooks) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  state.opt.kind = tc.optimizer;
  state.opt.lr = tc.learning_rate;
  const int M = tc.trajectories;
  TrainResult res;
  for (int step = state.step; step < tc.steps; ++step) {
    const auto us = static_cast<std::uint64_t>(step);
    TrainSetup local = setup;
    local.env.channel_seed = step_channel_seed(seed, step);

    std::vector<Trajectory> batch(M);
    parallel_for(
        M, [&](std::size_t m) { batch[m] = rollout(model, local, derive_seed(seed, {us, m, 1ULL})); }, tc.workers);
    std::vector<double> rewards;
    std::vector<ConstraintReport> audits;
    for (const auto& tr : batch) rewards.push_back(tr.reward), audits.push_back(tr.audit);
    StepMetrics sm = summarize_step(step, rewards, audits);

    Eigen::VectorXd grad = eager_gradient(model, batch, local.schedule, tc.timestep_samples,
                                          step_baselines(state, tc, rewards), derive_seed(seed, {us, 2ULL}),
                                          tc.estimator, tc.workers);
    if (hooks.gradient_filter) hooks.gradient_filter(grad);
    Eigen::VectorXd params = model.parameters();
    finish_step(state, tc, grad, params, sm);
    if (!sm.skipped) model.set_parameters(params);

    sm.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    if (hooks.metrics) *hooks.metrics << metrics_to_json(sm).dump() << '\n' << std::flush;
    res.curve.push_back(sm);
    if (hooks.checkpoint && tc.checkpoint_every > 0 && state.step % tc.checkpoint_every == 0)
      hooks.checkpoint(state);
  }
  res.state = state;
  return res;
}

namespace fs = std::filesystem;

void save_checkpoint(const std::string& dir, const GraphDenoiser& model, const TrainerState& st,
                     const nlohmann::json& extra) {
  nlohmann::json trainer = {{"step", st.step},
                            {"baseline", st.baseline},
                            {"baseline_ready", st.baseline_ready},
                            {"consecutive_skips", st.consecutive_skips},
                            {"optimizer", st.opt.kind == OptimizerKind::Adam ? "adam" : "sgd"},
                            {"lr", st.opt.lr},
                            {"adam_t", st.opt.t}};
  model.save(dir, {{"trainer", trainer}, {"extra", extra}});
  if (st.opt.m.size() > 0) {
    write_npy((fs::path(dir) / "adam_m.npy").string(), st.opt.m);
    write_npy((fs::path(dir) / "adam_v.npy").string(), st.opt.v);
  }
}

GraphDenoiser load_checkpoint(const std::string& dir, TrainerState* st, nlohmann::json* extra) {
  nlohmann::json meta;
  GraphDenoiser model = GraphDenoiser::load(dir, &meta);
  if (extra) *extra = meta.value("extra", nlohmann::json::object());
  if (st && meta.contains("trainer")) {
    const auto& tj = meta.at("trainer");
    st->step = tj.at("step").get<int>();
    st->baseline = tj.at("baseline").get<double>();
    st->baseline_ready = tj.at("baseline_ready").get<bool>();
    st->consecutive_skips = tj.at("consecutive_skips").get<int>();
    st->opt.kind = tj.at("optimizer").get<std::string>() == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
    st->opt.lr = tj.at("lr").get<double>();
    st->opt.t = tj.at("adam_t").get<long long>();
    const fs::path mp = fs::path(dir) / "adam_m.npy";
    if (fs::exists(mp)) {
      st->opt.m = read_npy(mp.string()).reshaped();
      st->opt.v = read_npy((fs::path(dir) / "adam_v.npy").string()).reshaped();
    }
  }
  return model;
}

}  // namespace aebs
