#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aebs/channel.hpp"
#include "aebs/config.hpp"
#include "aebs/core_model.hpp"
#include "aebs/rsma_rates.hpp"
#include "aebs/sca_solver.hpp"

namespace aebs {

// Deployment plus association as a graph: one categorical state per AeBS
// node (a grid cell, or any alphabet for toy problems) and one binary state
// per AeBS-GU edge.
struct GraphState {
  int num_nodes = 0;
  int num_gus = 0;
  int node_alphabet = 0;
  std::vector<int> nodes;
  std::vector<std::uint8_t> edges;  // row-major num_nodes x num_gus
  int t = 0;

  GraphState() = default;
  GraphState(int num_nodes, int num_gus, int node_alphabet);

  int edge(int k, int n) const { return edges[static_cast<std::size_t>(k) * num_gus + n]; }
  void set_edge(int k, int n, int v) { edges[static_cast<std::size_t>(k) * num_gus + n] = static_cast<std::uint8_t>(v); }
  int num_edges() const { return num_nodes * num_gus; }
  bool valid() const;

  // Same nodes and edges (the step tag is ignored).
  bool same_graph(const GraphState& o) const { return nodes == o.nodes && edges == o.edges; }
};

nlohmann::json graph_to_json(const GraphState& g);
GraphState graph_from_json(const nlohmann::json& j);

// Center of grid cell `cell` (row-major over a grid x grid partition of the area).
Point2 cell_center(int cell, int grid, const NetworkConfig& cfg);
// Cell containing the point (clamped to the area).
int cell_of(const Point2& p, int grid, const NetworkConfig& cfg);

std::pair<Placement, Association> decode(const GraphState& g, const NetworkConfig& cfg, int grid);
GraphState encode(const Placement& placement, const Association& assoc, const NetworkConfig& cfg, int grid);

// Everything needed to score a graph: the network, the GU drop, and the
// episode's fading seed. Fading is keyed per (AeBS, GU) pair, so every
// candidate placement in an episode sees the same small-scale fading.
struct Environment {
  NetworkConfig net;
  GuPositions gus;
  std::uint64_t channel_seed = 0;
  int grid = 10;
  FadingMode fading = FadingMode::Rayleigh;

  ChannelRealization channels(const Placement& placement) const;
};

struct RewardOptions {
  RewardMode mode = RewardMode::Surrogate;
  std::array<double, 4> omega{1.0, 1.0, 1.0, 1.0};
  bool rsma = true;
  ScaOptions sca;
};

struct Scored {
  double reward = 0.0;
  double utility = 0.0;
  double sum_rate = 0.0;
  double coverage = 0.0;
  ConstraintReport audit;
  Placement placement;
  Association assoc;         // association the rates were computed on
  ResourceSolution resources;
  bool solved = false;       // resources came from the full solver path
};

// Penalized reward U - sum omega_i xi_i. When the association and range
// constraints hold, U comes from the resource solver (SCA in exact mode, the
// initialization point in surrogate mode); otherwise only GUs with exactly one
// in-range server are kept, with initialization-point resources.
Scored score_graph(const GraphState& g, const Environment& env, const RewardOptions& opt);

double reward(const GraphState& g, const Environment& env, const RewardOptions& opt);

struct MdpTransition {
  GraphState state;   // G^t
  GraphState action;  // G^{t-1}
  double reward = 0.0;
};

// Transitions for a trajectory G^T, ..., G^0 with the terminal reward on the last step.
std::vector<MdpTransition> make_transitions(const std::vector<GraphState>& trajectory, double terminal_reward);

// Sum of rewards; throws std::invalid_argument on an empty trajectory.
double trajectory_return(const std::vector<MdpTransition>& transitions);

}  // namespace aebs
