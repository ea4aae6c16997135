#include "aebs/graph_mdp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace aebs {

GraphState::GraphState(int num_nodes_, int num_gus_, int node_alphabet_)
    : num_nodes(num_nodes_),
      num_gus(num_gus_),
      node_alphabet(node_alphabet_),
      nodes(num_nodes_, 0),
      edges(static_cast<std::size_t>(num_nodes_) * num_gus_, 0) {}

bool GraphState::valid() const {
  if (static_cast<int>(nodes.size()) != num_nodes || static_cast<int>(edges.size()) != num_edges()) return false;
  for (int v : nodes)
    if (v < 0 || v >= node_alphabet) return false;
  for (auto e : edges)
    if (e > 1) return false;
  return true;
}

nlohmann::json graph_to_json(const GraphState& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (int k = 0; k < g.num_nodes; ++k) {
    std::string r;
    for (int n = 0; n < g.num_gus; ++n) r.push_back(g.edge(k, n) ? '1' : '0');
    rows.push_back(r);
  }
  return {{"nodes", g.nodes}, {"edges", rows}, {"alphabet", g.node_alphabet}, {"num_gus", g.num_gus}, {"t", g.t}};
}

GraphState graph_from_json(const nlohmann::json& j) {
  const auto nodes = j.at("nodes").get<std::vector<int>>();
  const auto rows = j.at("edges").get<std::vector<std::string>>();
  if (rows.size() != nodes.size()) throw std::invalid_argument("graph: edge rows must match nodes");
  const int n = j.contains("num_gus") ? j.at("num_gus").get<int>() : (rows.empty() ? 0 : static_cast<int>(rows[0].size()));
  GraphState g(static_cast<int>(nodes.size()), n, j.at("alphabet").get<int>());
  g.nodes = nodes;
  g.t = j.value("t", 0);
  for (int k = 0; k < g.num_nodes; ++k) {
    if (static_cast<int>(rows[k].size()) != n) throw std::invalid_argument("graph: edge row length");
    for (int i = 0; i < n; ++i) {
      if (rows[k][i] != '0' && rows[k][i] != '1') throw std::invalid_argument("graph: edge rows must be 0/1");
      g.set_edge(k, i, rows[k][i] == '1');
    }
  }
  if (!g.valid()) throw std::invalid_argument("graph: node state outside alphabet");
  return g;
}

Point2 cell_center(int cell, int grid, const NetworkConfig& cfg) {
  if (cell < 0 || cell >= grid * grid) throw std::out_of_range("cell index");
  const int row = cell / grid;
  const int col = cell % grid;
  return {cfg.x_min + (col + 0.5) * (cfg.x_max - cfg.x_min) / grid,
          cfg.y_min + (row + 0.5) * (cfg.y_max - cfg.y_min) / grid};
}

int cell_of(const Point2& p, int grid, const NetworkConfig& cfg) {
  const auto idx = [grid](double v, double lo, double hi) {
    const int i = static_cast<int>((v - lo) / (hi - lo) * grid);
    return std::clamp(i, 0, grid - 1);
  };
  return idx(p.y, cfg.y_min, cfg.y_max) * grid + idx(p.x, cfg.x_min, cfg.x_max);
}

std::pair<Placement, Association> decode(const GraphState& g, const NetworkConfig& cfg, int grid) {
  if (g.node_alphabet != grid * grid) throw std::invalid_argument("decode: node alphabet is not grid^2");
  if (!g.valid()) throw std::out_of_range("decode: invalid graph state");
  std::vector<Point2> xy;
  for (int v : g.nodes) xy.push_back(cell_center(v, grid, cfg));
  Association a(g.num_nodes, g.num_gus);
  for (int k = 0; k < g.num_nodes; ++k)
    for (int n = 0; n < g.num_gus; ++n) a.set(k, n, g.edge(k, n));
  return {make_placement(xy, cfg), a};
}

GraphState encode(const Placement& placement, const Association& assoc, const NetworkConfig& cfg, int grid) {
  GraphState g(placement.size(), assoc.num_gus(), grid * grid);
  for (int k = 0; k < placement.size(); ++k)
    g.nodes[k] = cell_of({placement.positions[k].x, placement.positions[k].y}, grid, cfg);
  for (int k = 0; k < assoc.num_aebs(); ++k)
    for (int n = 0; n < assoc.num_gus(); ++n) g.set_edge(k, n, assoc(k, n));
  return g;
}

ChannelRealization Environment::channels(const Placement& placement) const {
  return realize_channels(placement, gus, net, channel_seed, fading);
}

Scored score_graph(const GraphState& g, const Environment& env, const RewardOptions& opt) {
  Scored s;
  auto [placement, raw] = decode(g, env.net, env.grid);
  s.placement = placement;
  s.audit = audit_constraints(placement, raw, env.gus, env.net);
  const ChannelRealization ch = env.channels(placement);

  const bool clean = s.audit.xi_a == 0 && s.audit.xi_r == 0;
  s.assoc = clean ? raw : served_subset(placement, raw, env.gus, env.net);
  if (clean && opt.mode == RewardMode::Exact) {
    try {
      ScaOptions sca = opt.sca;
      sca.rsma = opt.rsma;
      s.resources = run_sca(s.assoc, ch, env.net, sca).solution;
      s.solved = true;
    } catch (const std::exception&) {
      s.resources = surrogate_resources(s.assoc, ch, env.net, opt.rsma);
    }
  } else {
    s.resources = surrogate_resources(s.assoc, ch, env.net, opt.rsma);
    s.solved = clean;
  }
  const RateReport rep = rate_report(s.assoc, ch, s.resources, env.net);
  s.utility = rep.utility;
  s.sum_rate = rep.sum_rate;
  s.coverage = rep.coverage;
  const auto& w = opt.omega;
  s.reward = s.utility - w[0] * s.audit.xi_a - w[1] * s.audit.xi_m - w[2] * s.audit.xi_c - w[3] * s.audit.xi_r;
  return s;
}

double reward(const GraphState& g, const Environment& env, const RewardOptions& opt) {
  return score_graph(g, env, opt).reward;
}

std::vector<MdpTransition> make_transitions(const std::vector<GraphState>& trajectory, double terminal_reward) {
  if (trajectory.size() < 2) throw std::invalid_argument("make_transitions: need at least two states");
  std::vector<MdpTransition> out;
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i)
    out.push_back({trajectory[i], trajectory[i + 1], i + 2 == trajectory.size() ? terminal_reward : 0.0});
  return out;
}

double trajectory_return(const std::vector<MdpTransition>& transitions) {
  if (transitions.empty()) throw std::invalid_argument("trajectory_return: empty trajectory");
  double r = 0.0;
  for (const auto& tr : transitions) r += tr.reward;
  return r;
}

}  // namespace aebs
