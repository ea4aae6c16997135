#include "aebs/baselines.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "aebs/parallel.hpp"
#include "aebs/rng.hpp"

namespace aebs {

namespace {

std::complex<double> complex_gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  const double r = std::sqrt(-std::log(u1));
  return {r * std::cos(2.0 * std::numbers::pi * u2), r * std::sin(2.0 * std::numbers::pi * u2)};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SolutionBundle random_policy(const Environment& env, std::uint64_t seed, bool rsma) {
  const int K = env.net.num_aebs;
  const int N = env.net.num_gus;
  const int S = env.grid * env.grid;
  const int Nt = env.net.num_antennas;
  Rng rng = make_rng(seed, {0x7261ULL});
  GraphState g(K, N, S);
  for (int k = 0; k < K; ++k) g.nodes[k] = std::min(S - 1, static_cast<int>(uniform01(rng) * S));
  for (int e = 0; e < g.num_edges(); ++e) g.edges[e] = uniform01(rng) < 0.5 ? 1 : 0;
  const auto [placement, decided] = decode(g, env.net, env.grid);

  SolutionBundle sol;
  sol.placement = placement;
  sol.decided = decided;
  sol.rsma = rsma;
  const ConstraintReport audit = audit_constraints(placement, decided, env.gus, env.net);
  sol.assoc = (audit.xi_a == 0 && audit.xi_r == 0) ? decided : served_subset(placement, decided, env.gus, env.net);

  sol.resources = ResourceSolution::zeros(K, N, Nt);
  auto draw = [&] {
    Eigen::VectorXcd v(Nt);
    for (int a = 0; a < Nt; ++a) v[a] = complex_gaussian(rng);
    return v;
  };
  for (int k = 0; k < K; ++k) {
    const auto members = sol.assoc.cluster(k);
    if (members.empty()) continue;
    if (rsma) sol.resources.common[k] = draw();
    for (int n : members) sol.resources.private_precoder[n] = draw();
    const double budget = (1.0 - uniform01(rng)) * env.net.max_power_w;
    const double scale = std::sqrt(budget / sol.resources.power(k, sol.assoc));
    if (rsma) sol.resources.common[k] *= scale;
    for (int n : members) sol.resources.private_precoder[n] *= scale;
  }
  if (rsma) {
    const RateReport rep = rate_report(sol.assoc, env.channels(placement), sol.resources, env.net);
    for (int k = 0; k < K; ++k) {
      const auto members = sol.assoc.cluster(k);
      if (members.empty()) continue;
      std::vector<double> w;
      double total = 0.0;
      for (std::size_t i = 0; i < members.size(); ++i) total += w.emplace_back(1.0 - uniform01(rng));
      const double share = uniform01(rng) * rep.common_cap[k];
      for (std::size_t i = 0; i < members.size(); ++i) sol.resources.common_split[members[i]] = share * w[i] / total;
    }
  }
  return sol;
}

DirectPolicy::DirectPolicy(int num_aebs, int num_gus, int node_alphabet, int hidden, std::uint64_t init_seed)
    : K_(num_aebs), N_(num_gus), S_(node_alphabet), H_(hidden), in_(2 * num_gus) {
  const int out = K_ * S_ + K_ * N_;
  theta_ = Eigen::VectorXd::Zero(H_ * in_ + H_ + out * H_ + out);
  Rng rng = make_rng(init_seed, {0x6470ULL});
  const double a = std::sqrt(3.0 / in_);
  for (int i = 0; i < H_ * in_; ++i) theta_[i] = a * (2.0 * uniform01(rng) - 1.0);
}

void DirectPolicy::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != theta_.size()) throw std::invalid_argument("DirectPolicy: parameter size mismatch");
  theta_ = p;
}

Eigen::VectorXd DirectPolicy::features(const Environment& env) {
  Eigen::VectorXd x(2 * env.gus.size());
  const double w = env.net.x_max - env.net.x_min, h = env.net.y_max - env.net.y_min;
  for (std::size_t n = 0; n < env.gus.size(); ++n) {
    x[2 * n] = 2.0 * (env.gus[n].x - env.net.x_min) / w - 1.0;
    x[2 * n + 1] = 2.0 * (env.gus[n].y - env.net.y_min) / h - 1.0;
  }
  return x;
}

DirectPolicy::Forward DirectPolicy::forward(const Eigen::VectorXd& x) const {
  if (x.size() != in_) throw std::invalid_argument("DirectPolicy: feature size mismatch");
  const int out = K_ * S_ + K_ * N_;
  const Eigen::Map<const Eigen::MatrixXd> w1(theta_.data(), H_, in_);
  const Eigen::Map<const Eigen::VectorXd> b1(theta_.data() + H_ * in_, H_);
  const Eigen::Map<const Eigen::MatrixXd> w2(theta_.data() + H_ * in_ + H_, out, H_);
  const Eigen::Map<const Eigen::VectorXd> b2(theta_.data() + H_ * in_ + H_ + out * H_, out);
  Forward f;
  f.hidden = (w1 * x + b1).array().tanh().matrix();
  const Eigen::VectorXd o = w2 * f.hidden + b2;
  f.node_logits = o.head(K_ * S_);
  f.edge_logits = o.tail(K_ * N_);
  return f;
}

GraphState DirectPolicy::sample(const Eigen::VectorXd& features, std::uint64_t seed) const {
  const Forward f = forward(features);
  Rng rng = make_rng(seed);
  GraphState g(K_, N_, S_);
  for (int k = 0; k < K_; ++k) {
    const Eigen::VectorXd l = f.node_logits.segment(k * S_, S_);
    const Eigen::VectorXd p = (l.array() - l.maxCoeff()).exp().matrix();
    g.nodes[k] = sample_categorical(p / p.sum(), rng);
  }
  for (int e = 0; e < K_ * N_; ++e) g.edges[e] = uniform01(rng) < sigmoid(f.edge_logits[e]) ? 1 : 0;
  return g;
}

double DirectPolicy::log_prob_grad(const GraphState& g, const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  const Forward f = forward(x);
  const int out = K_ * S_ + K_ * N_;
  Eigen::VectorXd dout(out);
  double lp = 0.0;
  for (int k = 0; k < K_; ++k) {
    const Eigen::VectorXd l = f.node_logits.segment(k * S_, S_);
    const double mx = l.maxCoeff();
    const double lse = mx + std::log((l.array() - mx).exp().sum());
    lp += l[g.nodes[k]] - lse;
    dout.segment(k * S_, S_) = -(l.array() - lse).exp().matrix();
    dout[k * S_ + g.nodes[k]] += 1.0;
  }
  for (int e = 0; e < K_ * N_; ++e) {
    const double l = f.edge_logits[e];
    const double s = sigmoid(l);
    // log sigma(l) = -log(1 + e^{-l}), log(1 - sigma(l)) = -log(1 + e^{l})
    lp += g.edges[e] ? -std::log1p(std::exp(-l)) : -std::log1p(std::exp(l));
    dout[K_ * S_ + e] = (g.edges[e] ? 1.0 : 0.0) - s;
  }
  if (grad) {
    grad->setZero(theta_.size());
    const Eigen::Map<const Eigen::MatrixXd> w2(theta_.data() + H_ * in_ + H_, out, H_);
    const Eigen::VectorXd dpre = ((w2.transpose() * dout).array() * (1.0 - f.hidden.array().square())).matrix();
    Eigen::Map<Eigen::MatrixXd>(grad->data(), H_, in_) = dpre * x.transpose();
    grad->segment(H_ * in_, H_) = dpre;
    Eigen::Map<Eigen::MatrixXd>(grad->data() + H_ * in_ + H_, out, H_) = dout * f.hidden.transpose();
    grad->segment(H_ * in_ + H_ + out * H_, out) = dout;
  }
  return lp;
}

TrainResult train_direct(DirectPolicy& policy, const TrainSetup& setup, const TrainConfig& tc, std::uint64_t seed,
                         const TrainHooks& hooks) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const int M = tc.trajectories;
  const Eigen::VectorXd x = DirectPolicy::features(setup.env);
  TrainerState state;
  state.opt.kind = tc.optimizer;
  state.opt.lr = tc.learning_rate;
  TrainResult res;
  for (int step = 0; step < tc.steps; ++step) {
    const auto us = static_cast<std::uint64_t>(step);
    Environment env = setup.env;
    env.channel_seed = step_channel_seed(seed, step);
    std::vector<GraphState> graphs(M);
    std::vector<double> rewards(M);
    std::vector<ConstraintReport> audits(M);
    parallel_for(
        M,
        [&](std::size_t m) {
          graphs[m] = policy.sample(x, derive_seed(seed, {us, m, 1ULL}));
          const Scored s = score_graph(graphs[m], env, setup.reward);
          rewards[m] = s.reward;
          audits[m] = s.audit;
        },
        tc.workers);
    StepMetrics sm = summarize_step(step, rewards, audits);
    const std::vector<double> b = step_baselines(state, tc, rewards);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.num_parameters());
    Eigen::VectorXd g;
    for (int m = 0; m < M; ++m) {
      const double adv = rewards[m] - (b.empty() ? 0.0 : b[m]);
      if (adv == 0.0) continue;
      policy.log_prob_grad(graphs[m], x, &g);
      grad += (adv / M) * g;
    }
    if (hooks.gradient_filter) hooks.gradient_filter(grad);
    Eigen::VectorXd params = policy.parameters();
    finish_step(state, tc, grad, params, sm);
    if (!sm.skipped) policy.set_parameters(params);
    sm.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    if (hooks.metrics) *hooks.metrics << metrics_to_json(sm).dump() << '\n' << std::flush;
    res.curve.push_back(sm);
  }
  res.state = state;
  return res;
}

AlternateResult sdma_pipeline(const DenoiserModel& model, const NoiseSchedule& schedule, const Environment& env,
                              SolveOptions opt, std::uint64_t seed) {
  opt.rsma = false;
  opt.sca.rsma = false;
  return alternate(model, schedule, env, opt, seed);
}

}  // namespace aebs
