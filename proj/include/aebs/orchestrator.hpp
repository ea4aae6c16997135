#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "aebs/config.hpp"
#include "aebs/core_model.hpp"
#include "aebs/diffusion.hpp"
#include "aebs/graph_mdp.hpp"
#include "aebs/rsma_rates.hpp"
#include "aebs/sca_solver.hpp"

namespace aebs {

// Deployment, association and resources of one candidate, plus the numbers
// the producer reported for it.
struct SolutionBundle {
  Placement placement;
  Association decided;  // association as chosen by the policy; audited
  Association assoc;    // GUs actually served (decided minus violating GUs)
  ResourceSolution resources;
  bool rsma = true;
  double utility = 0.0;
  bool feasible = false;
};

struct Evaluation {
  RateReport rates;
  ConstraintReport audit;
  double reward = 0.0;  // utility minus weighted violation indicators
  bool min_rate_ok = true;
  bool feasible = false;  // audit clear, C5-C8 hold
};

// Recomputes every metric of a bundle from scratch. All reported numbers go
// through here.
Evaluation evaluate(const SolutionBundle& sol, const Environment& env,
                    const std::array<double, 4>& omega = {1.0, 1.0, 1.0, 1.0});

// Resource solve for a fixed deployment: SCA on the association when it is
// clean, otherwise on the GUs with exactly one in-range server. Falls back to
// the initialization point if SCA fails.
SolutionBundle solve_resources(const Placement& placement, const Association& assoc, const Environment& env,
                               const ScaOptions& sca, bool rsma);

// Nearest-center clustering of the GUs on the grid (farthest-point seeding,
// Lloyd updates), each GU assigned to its closest AeBS.
GraphState heuristic_graph(const Environment& env, int num_aebs);

struct SolveOptions {
  int k_max = 10;
  double tau = 1e-5;
  ScaOptions sca;
  bool rsma = true;
  std::array<double, 4> omega{1.0, 1.0, 1.0, 1.0};
};

struct IterateRecord {
  int k = 0;
  double utility = 0.0;
  double reward = 0.0;
  bool feasible = false;
  bool accepted = false;
};

struct AlternateResult {
  SolutionBundle best;
  Evaluation eval;
  std::vector<IterateRecord> trace;  // k = 0 is the initialization
  bool any_feasible = false;
};

Condition condition_from(const SolutionBundle& sol, const Evaluation& ev, const Environment& env);

// Alternates between sampling a deployment from the model conditioned on the
// incumbent and solving its resources, keeping the best candidate by reward.
AlternateResult alternate(const DenoiserModel& model, const NoiseSchedule& schedule, const Environment& env,
                          const SolveOptions& opt, std::uint64_t seed);

nlohmann::json solution_to_json(const SolutionBundle& sol, const Evaluation& ev);
SolutionBundle solution_from_json(const nlohmann::json& j);
nlohmann::json iterate_to_json(const IterateRecord& r);

// Writes config.json, seed.txt, trace.jsonl, solution.json and rates.csv.
void write_run(const std::string& dir, const AppConfig& cfg, std::uint64_t seed, const AlternateResult& res);

}  // namespace aebs
