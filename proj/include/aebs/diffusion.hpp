#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "aebs/config.hpp"
#include "aebs/graph_mdp.hpp"
#include "aebs/rng.hpp"

namespace aebs {

// Keep probabilities for the categorical noising chain. Index t runs 0..T
// with alpha_bar[0] = 1; alpha[t] = alpha_bar[t] / alpha_bar[t-1] for t >= 1.
// One step moves a category a to b with probability alpha_t [a == b] + (1 - alpha_t) m_b.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  Eigen::VectorXd node_stationary;  // m over the node alphabet
  Eigen::VectorXd edge_stationary;  // m over {0, 1}

  int node_alphabet() const { return static_cast<int>(node_stationary.size()); }

  // Row a of the one-step matrix Q^t.
  Eigen::VectorXd step_row(int t, int a, const Eigen::VectorXd& m) const;
  // Row a of the cumulative matrix (alpha_bar_t I + (1 - alpha_bar_t) 1 m^T).
  Eigen::VectorXd cumulative_row(int t, int a, const Eigen::VectorXd& m) const;
};

// Cosine schedule, rescaled so that alpha_bar[0] = 1 exactly.
NoiseSchedule make_schedule(int steps, int node_alphabet, Stationary stationary, double offset = 0.008,
                            double edge_density = 0.5);

// Cumulative keep probability before rescaling: cos^2(((t/T)+s)/(1+s) pi/2).
double cosine_alpha_bar(int t, int steps, double offset);

void write_schedule_csv(std::ostream& out, const NoiseSchedule& s);

// Per-node and per-edge categorical distributions (rows sum to 1).
struct CategoricalField {
  Eigen::MatrixXd node;  // num_nodes x node_alphabet
  Eigen::MatrixXd edge;  // num_edges x 2, row k * num_gus + n

  bool normalized(double tol = 1e-9) const;
};

// Extra scalars fed to the denoiser's conditioning context.
struct Condition {
  double utility = 0.0;
  std::vector<double> power_fraction;  // per AeBS, used power / budget
  std::vector<int> gu_cells;           // grid cell of each GU, empty when unknown
};

// Any reverse-process model: a prediction of G^0 from G^t, and the gradient
// of sum_i log(sum_c w_ic p_ic) over nodes and edges with respect to the
// model's flat parameter vector.
struct TargetWeights {
  Eigen::MatrixXd node;
  Eigen::MatrixXd edge;

  // One-hot weights selecting the categories of g.
  static TargetWeights one_hot(const GraphState& g);
};

class DenoiserModel {
 public:
  virtual ~DenoiserModel() = default;
  virtual CategoricalField predict(const GraphState& gt, int t, const Condition& cond) const = 0;
  virtual double log_prob_grad(const GraphState& gt, int t, const Condition& cond, const TargetWeights& w,
                               Eigen::VectorXd* grad) const = 0;
  virtual Eigen::VectorXd parameters() const = 0;
  virtual void set_parameters(const Eigen::VectorXd& p) = 0;
  virtual int num_parameters() const = 0;
};

// q(x^{t-1} | x^0, x^t), normalized over x^{t-1}.
Eigen::VectorXd posterior(int x0, int xt, int t, const NoiseSchedule& s, const Eigen::VectorXd& m);

// Sum over x^0 of q(x^{t-1} | x^0, x^t) times the predicted probability of x^0.
Eigen::VectorXd posterior_mixture(const Eigen::VectorXd& x0_probs, int xt, int t, const NoiseSchedule& s,
                                  const Eigen::VectorXd& m);

// Weights w[x0] = q(x^{t-1} = target | x^0, x^t), so that
// posterior_mixture(p)[target] = w . p.
Eigen::VectorXd posterior_weights(int target, int xt, int t, const NoiseSchedule& s, const Eigen::VectorXd& m);

int sample_categorical(const Eigen::VectorXd& p, Rng& rng);

GraphState sample_stationary(int num_nodes, int num_gus, const NoiseSchedule& s, std::uint64_t seed);

// Independent resampling of every node and edge from the cumulative rows at t.
GraphState forward_sample(const GraphState& g0, int t, const NoiseSchedule& s, std::uint64_t seed);

// One reverse step G^t -> G^{t-1} given the x^0 predictions.
GraphState denoise_step(const GraphState& gt, const CategoricalField& pred, int t, const NoiseSchedule& s,
                        std::uint64_t seed);

// G^T, ..., G^0 (T + 1 states; G^T drawn from the stationary law).
std::vector<GraphState> sample_trajectory(const DenoiserModel& model, const NoiseSchedule& s, int num_nodes,
                                          int num_gus, const Condition& cond, std::uint64_t seed);

// Weights for log q(G^{t-1} | G^t) as a function of the x^0 predictions.
TargetWeights step_weights(const GraphState& prev, const GraphState& gt, int t, const NoiseSchedule& s);

// Analytic total variation between the forward marginal at t and the
// stationary law, maximized over starting categories.
double forward_tv_to_stationary(int t, const NoiseSchedule& s);

}  // namespace aebs
