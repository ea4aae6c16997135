#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "aebs/orchestrator.hpp"
#include "aebs/trainer.hpp"

namespace aebs {

// Uniform grid cells, uniform binary association, and random precoders with a
// uniformly drawn total power in (0, P_max] per AeBS. The common split is a
// random share of the decodable common rate. Violating GUs are dropped from
// the served set exactly as for sampled graphs.
SolutionBundle random_policy(const Environment& env, std::uint64_t seed, bool rsma = true);

// One-shot categorical policy: a single-hidden-layer network maps the GU
// coordinates to independent node and edge logits. No denoising chain.
class DirectPolicy {
 public:
  DirectPolicy(int num_aebs, int num_gus, int node_alphabet, int hidden = 32, std::uint64_t init_seed = 0);

  GraphState sample(const Eigen::VectorXd& features, std::uint64_t seed) const;
  // log pi(g) and its gradient with respect to the flat parameters.
  double log_prob_grad(const GraphState& g, const Eigen::VectorXd& features, Eigen::VectorXd* grad) const;

  const Eigen::VectorXd& parameters() const { return theta_; }
  void set_parameters(const Eigen::VectorXd& p);
  int num_parameters() const { return static_cast<int>(theta_.size()); }

  static Eigen::VectorXd features(const Environment& env);

 private:
  struct Forward {
    Eigen::VectorXd hidden;
    Eigen::VectorXd node_logits;  // K * S
    Eigen::VectorXd edge_logits;  // K * N, logit of the edge being on
  };
  Forward forward(const Eigen::VectorXd& x) const;

  int K_, N_, S_, H_, in_;
  Eigen::VectorXd theta_;  // w1 (H x in), b1 (H), w2 (out x H), b2 (out)
};

// REINFORCE on the direct policy with the trainer's reward, batch size,
// budget, optimizer and baseline.
TrainResult train_direct(DirectPolicy& policy, const TrainSetup& setup, const TrainConfig& tc, std::uint64_t seed,
                         const TrainHooks& hooks = {});

// The full alternating pipeline with every common stream disabled.
AlternateResult sdma_pipeline(const DenoiserModel& model, const NoiseSchedule& schedule, const Environment& env,
                              SolveOptions opt, std::uint64_t seed);

}  // namespace aebs
