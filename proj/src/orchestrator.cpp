#include "aebs/orchestrator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "aebs/rng.hpp"

namespace aebs {

namespace {

bool all_min_rate(const RateReport& r) {
  for (std::size_t n = 0; n < r.rmin_ok.size(); ++n)
    if (r.server[n] >= 0 && !r.rmin_ok[n]) return false;
  return true;
}

}  // namespace

Evaluation evaluate(const SolutionBundle& sol, const Environment& env, const std::array<double, 4>& omega) {
  Evaluation ev;
  const ChannelRealization ch = env.channels(sol.placement);
  ev.rates = sol.rsma ? rate_report(sol.assoc, ch, sol.resources, env.net)
                      : sdma_rate_report(sol.assoc, ch, sol.resources, env.net);
  ev.audit = audit_constraints(sol.placement, sol.decided, env.gus, env.net);
  ev.reward = ev.rates.utility - omega[0] * ev.audit.xi_a - omega[1] * ev.audit.xi_m - omega[2] * ev.audit.xi_c -
              omega[3] * ev.audit.xi_r;
  ev.min_rate_ok = all_min_rate(ev.rates);
  ev.feasible = ev.audit.all_clear() && ev.rates.c5_ok && ev.rates.c7_ok && ev.rates.c8_ok && ev.min_rate_ok;
  return ev;
}

SolutionBundle solve_resources(const Placement& placement, const Association& assoc, const Environment& env,
                               const ScaOptions& sca, bool rsma) {
  SolutionBundle sol;
  sol.placement = placement;
  sol.decided = assoc;
  sol.rsma = rsma;
  const ConstraintReport audit = audit_constraints(placement, assoc, env.gus, env.net);
  sol.assoc = (audit.xi_a == 0 && audit.xi_r == 0) ? assoc : served_subset(placement, assoc, env.gus, env.net);
  const ChannelRealization ch = env.channels(placement);
  ScaOptions o = sca;
  o.rsma = rsma;
  try {
    sol.resources = run_sca(sol.assoc, ch, env.net, o).solution;
  } catch (const std::exception&) {
    sol.resources = surrogate_resources(sol.assoc, ch, env.net, rsma);
  }
  return sol;
}

GraphState heuristic_graph(const Environment& env, int num_aebs) {
  const auto& gus = env.gus;
  const int N = static_cast<int>(gus.size());
  if (N == 0) throw std::invalid_argument("heuristic_graph: no GUs");
  auto d2 = [](const Point2& a, const Point2& b) { return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y); };
  std::vector<Point2> centers{gus[0]};
  while (static_cast<int>(centers.size()) < num_aebs) {
    int far = 0;
    double best = -1.0;
    for (int n = 0; n < N; ++n) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) nearest = std::min(nearest, d2(gus[n], c));
      if (nearest > best) best = nearest, far = n;
    }
    centers.push_back(gus[far]);
  }
  std::vector<int> owner(N, 0);
  auto assign = [&] {
    for (int n = 0; n < N; ++n) {
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < num_aebs; ++k)
        if (d2(gus[n], centers[k]) < best) best = d2(gus[n], centers[k]), owner[n] = k;
    }
  };
  for (int it = 0; it < 20; ++it) {
    assign();
    for (int k = 0; k < num_aebs; ++k) {
      Point2 sum;
      int count = 0;
      for (int n = 0; n < N; ++n)
        if (owner[n] == k) sum.x += gus[n].x, sum.y += gus[n].y, ++count;
      if (count > 0) centers[k] = {sum.x / count, sum.y / count};
    }
  }
  GraphState g(num_aebs, N, env.grid * env.grid);
  for (int k = 0; k < num_aebs; ++k) {
    g.nodes[k] = cell_of(centers[k], env.grid, env.net);
    centers[k] = cell_center(g.nodes[k], env.grid, env.net);
  }
  assign();
  for (int n = 0; n < N; ++n) g.set_edge(owner[n], n, 1);
  return g;
}

Condition condition_from(const SolutionBundle& sol, const Evaluation& ev, const Environment& env) {
  Condition c;
  c.utility = ev.rates.utility;
  for (int k = 0; k < sol.placement.size(); ++k)
    c.power_fraction.push_back(std::clamp(sol.resources.power(k, sol.assoc) / env.net.max_power_w, 0.0, 1.0));
  for (const auto& p : env.gus) c.gu_cells.push_back(cell_of(p, env.grid, env.net));
  return c;
}

AlternateResult alternate(const DenoiserModel& model, const NoiseSchedule& schedule, const Environment& env,
                          const SolveOptions& opt, std::uint64_t seed) {
  if (opt.k_max < 1) throw std::invalid_argument("alternate: k_max must be positive");
  const int K = env.net.num_aebs;
  const int N = env.net.num_gus;
  AlternateResult res;

  auto consider = [&](int k, const SolutionBundle& cand) {
    const Evaluation ev = evaluate(cand, env, opt.omega);
    IterateRecord rec{k, ev.rates.utility, ev.reward, ev.feasible, false};
    if (res.trace.empty() || ev.reward > res.eval.reward) {
      res.best = cand;
      res.best.utility = ev.rates.utility;
      res.best.feasible = ev.feasible;
      res.eval = ev;
      rec.accepted = true;
    }
    res.any_feasible = res.any_feasible || ev.feasible;
    res.trace.push_back(rec);
  };

  const auto [p0, a0] = decode(heuristic_graph(env, K), env.net, env.grid);
  consider(0, solve_resources(p0, a0, env, opt.sca, opt.rsma));

  double prev_u = res.trace.back().utility;
  for (int k = 1; k <= opt.k_max; ++k) {
    const Condition cond = condition_from(res.best, res.eval, env);
    const auto traj = sample_trajectory(model, schedule, K, N, cond, derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    const auto [placement, assoc] = decode(traj.back(), env.net, env.grid);
    consider(k, solve_resources(placement, assoc, env, opt.sca, opt.rsma));
    const double u = res.trace.back().utility;
    if (std::abs(u - prev_u) < opt.tau) break;
    prev_u = u;
  }
  return res;
}

namespace {

nlohmann::json complex_vec(const Eigen::VectorXcd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v[i].real(), v[i].imag()});
  return out;
}

Eigen::VectorXcd complex_vec(const nlohmann::json& j) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = {j[i].at(0).get<double>(), j[i].at(1).get<double>()};
  return v;
}

nlohmann::json assoc_rows(const Association& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (int k = 0; k < a.num_aebs(); ++k) {
    std::string row;
    for (int n = 0; n < a.num_gus(); ++n) row += a(k, n) ? '1' : '0';
    rows.push_back(row);
  }
  return rows;
}

Association assoc_from_rows(const nlohmann::json& rows, int num_aebs) {
  const int K = static_cast<int>(rows.size());
  const int N = K > 0 ? static_cast<int>(rows[0].get<std::string>().size()) : 0;
  if (K != num_aebs) throw std::invalid_argument("solution: association rows must match placement");
  Association a(K, N);
  for (int k = 0; k < K; ++k) {
    const std::string row = rows[k].get<std::string>();
    if (static_cast<int>(row.size()) != N) throw std::invalid_argument("solution: ragged association");
    for (int n = 0; n < N; ++n) {
      if (row[n] != '0' && row[n] != '1') throw std::invalid_argument("solution: association must be binary");
      a.set(k, n, row[n] == '1');
    }
  }
  return a;
}

nlohmann::json audit_to_json(const ConstraintReport& a) {
  return {{"c1", a.c1_ok}, {"c2", a.c2_ok},   {"c3", a.c3_ok},   {"c4", a.c4_ok},  {"c9", a.c9_ok},
          {"c10", a.c10_ok}, {"xi_a", a.xi_a}, {"xi_m", a.xi_m}, {"xi_c", a.xi_c}, {"xi_r", a.xi_r}};
}

}  // namespace

nlohmann::json solution_to_json(const SolutionBundle& sol, const Evaluation& ev) {
  nlohmann::json placement = nlohmann::json::array();
  for (const auto& p : sol.placement.positions) placement.push_back({p.x, p.y, p.z});
  nlohmann::json common = nlohmann::json::array(), priv = nlohmann::json::array();
  for (const auto& v : sol.resources.common) common.push_back(complex_vec(v));
  for (const auto& v : sol.resources.private_precoder) priv.push_back(complex_vec(v));
  return {{"format", "aebs-solution/1"},
          {"scheme", sol.rsma ? "rsma" : "sdma"},
          {"placement", placement},
          {"association", assoc_rows(sol.decided)},
          {"served", assoc_rows(sol.assoc)},
          {"resources", {{"common", common}, {"private", priv}, {"common_split", sol.resources.common_split}}},
          {"utility", ev.rates.utility},
          {"sum_rate", ev.rates.sum_rate},
          {"coverage", ev.rates.coverage},
          {"reward", ev.reward},
          {"min_rate_ok", ev.min_rate_ok},
          {"c5", ev.rates.c5_ok},
          {"c7", ev.rates.c7_ok},
          {"c8", ev.rates.c8_ok},
          {"audit", audit_to_json(ev.audit)},
          {"feasible", ev.feasible}};
}

SolutionBundle solution_from_json(const nlohmann::json& j) {
  SolutionBundle sol;
  sol.rsma = j.at("scheme").get<std::string>() == "rsma";
  for (const auto& p : j.at("placement")) sol.placement.positions.push_back({p.at(0), p.at(1), p.at(2)});
  const int K = sol.placement.size();
  sol.decided = assoc_from_rows(j.at("association"), K);
  sol.assoc = assoc_from_rows(j.at("served"), K);
  const int N = sol.assoc.num_gus();
  if (sol.decided.num_gus() != N) throw std::invalid_argument("solution: association and served sets differ in size");
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      if (sol.assoc(k, n) && !sol.decided(k, n)) throw std::invalid_argument("solution: served GU not in the association");
  const auto& r = j.at("resources");
  for (const auto& v : r.at("common")) sol.resources.common.push_back(complex_vec(v));
  for (const auto& v : r.at("private")) sol.resources.private_precoder.push_back(complex_vec(v));
  sol.resources.common_split = r.at("common_split").get<std::vector<double>>();
  if (static_cast<int>(sol.resources.common.size()) != K || static_cast<int>(sol.resources.private_precoder.size()) != N ||
      static_cast<int>(sol.resources.common_split.size()) != N)
    throw std::invalid_argument("solution: resource dimensions do not match the association");
  sol.utility = j.at("utility").get<double>();
  sol.feasible = j.at("feasible").get<bool>();
  return sol;
}

nlohmann::json iterate_to_json(const IterateRecord& r) {
  return {{"k", r.k}, {"U", r.utility}, {"reward", r.reward}, {"feasible", r.feasible}, {"accepted", r.accepted}};
}

void write_run(const std::string& dir, const AppConfig& cfg, std::uint64_t seed, const AlternateResult& res) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "config.json") << config_to_json(cfg).dump(2) << '\n';
  std::ofstream(fs::path(dir) / "seed.txt") << seed << '\n';
  std::ofstream trace(fs::path(dir) / "trace.jsonl");
  for (const auto& r : res.trace) trace << iterate_to_json(r).dump() << '\n';
  std::ofstream(fs::path(dir) / "solution.json") << solution_to_json(res.best, res.eval).dump(2) << '\n';
  std::ofstream rates(fs::path(dir) / "rates.csv");
  write_rate_csv(rates, res.eval.rates);
}

}  // namespace aebs
