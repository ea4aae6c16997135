#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "aebs/autograd.hpp"
#include "aebs/config.hpp"
#include "aebs/diffusion.hpp"

namespace aebs {

// Float64 .npy arrays (C order, 2-D).
void write_npy(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_npy(const std::string& path);

// Graph-transformer denoiser. Tokens are the AeBS nodes (one-hot state plus
// used-power fraction) and the GUs (one-hot of their grid cell); edges carry
// their binary state and the AeBS-GU cell distance. Each layer runs
// multi-head attention with per-head edge biases on AeBS-GU pairs, a
// FiLM-modulated feed-forward block conditioned on the timestep embedding,
// pooled node/edge features and the utility, and an edge update. Two heads
// give x^0 distributions for nodes and edges.
class GraphDenoiser : public DenoiserModel {
 public:
  // node_alphabet is G^2 for grid states; grid (0 for none) is used for the
  // cell-distance edge feature.
  GraphDenoiser(const DenoiserConfig& cfg, int node_alphabet, int grid);

  CategoricalField predict(const GraphState& gt, int t, const Condition& cond) const override;
  double log_prob_grad(const GraphState& gt, int t, const Condition& cond, const TargetWeights& w,
                       Eigen::VectorXd* grad) const override;
  Eigen::VectorXd parameters() const override;
  void set_parameters(const Eigen::VectorXd& p) override;
  int num_parameters() const override;

  // log q(target | gt) under the x^0 prediction, summed over nodes and edges.
  // Zero-probability targets are clamped at -1e9.
  double log_prob_of(const GraphState& target, const GraphState& gt, int t, const Condition& cond) const;

  const DenoiserConfig& config() const { return cfg_; }
  int node_alphabet() const { return alphabet_; }
  int grid() const { return grid_; }
  int context_dim() const;

  // Closed-form parameter count for a configuration.
  static long long parameter_count(const DenoiserConfig& cfg, int node_alphabet);

  struct Param {
    std::string name;
    Eigen::MatrixXd value;
  };
  const std::vector<Param>& params() const { return params_; }

  // Directory with meta.json and one .npy per parameter. `extra` is stored in
  // the metadata verbatim.
  void save(const std::string& dir, const nlohmann::json& extra = {}) const;
  static GraphDenoiser load(const std::string& dir, nlohmann::json* extra = nullptr);

 private:
  struct Outputs {
    ad::Var node_probs;
    ad::Var edge_probs;
  };
  Outputs forward(ad::Tape& tape, const std::vector<ad::Var>& p, const GraphState& gt, int t,
                  const Condition& cond) const;
  void add(const std::string& name, int rows, int cols, double init_scale, std::uint64_t seed);
  int index_of(const std::string& name) const;

  DenoiserConfig cfg_;
  int alphabet_ = 0;
  int grid_ = 0;
  std::vector<Param> params_;
};

// Sinusoidal embedding of step t (1 x dim).
Eigen::MatrixXd timestep_embedding(int t, int dim);

}  // namespace aebs
