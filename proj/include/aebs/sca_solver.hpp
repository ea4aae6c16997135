#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "aebs/channel.hpp"
#include "aebs/config.hpp"
#include "aebs/convex.hpp"
#include "aebs/core_model.hpp"
#include "aebs/rsma_rates.hpp"

namespace aebs {

struct ScaOptions {
  double tau = 1e-5;
  int max_iters = 100;
  bool rsma = true;              // false disables every common stream (SDMA)
  double sinr_floor = 1e-9;
  double common_off_below = 1e-8;  // switch a common stream off once its total split drops below this
  BarrierOptions barrier;
};

// One SCA iterate in normalized units: precoders are scaled by 1/sqrt(P_max)
// and channels by sqrt(P_max / sigma^2), so the noise is 1 and each AeBS has
// unit power budget. Per-GU vectors are indexed by global GU index.
struct ScaState {
  int iter = 0;
  std::vector<Eigen::VectorXcd> common;   // K
  std::vector<Eigen::VectorXcd> priv;     // N
  std::vector<bool> common_on;            // K
  std::vector<double> r_common, phi, nu_c, nu_p, chi_c, chi_p;  // N
  double rho = 0.0;
  double y_common = 0.0;   // Q^{-1}(eps) log2(e) / sqrt(Dc)
  double y_private = 0.0;
  double min_rate = 0.0;   // current (possibly relaxed) rate floor
  bool enforce_min_rate = true;
};

// Index map of the stacked real decision vector.
struct ScaLayout {
  int num_vars = 0;
  int num_antennas = 0;
  std::vector<int> common;  // offset of [Re; Im] block per AeBS, -1 when off or idle
  std::vector<int> priv;    // per GU, -1 when unserved
  std::vector<int> r_common, phi, nu_c, nu_p, chi_c, chi_p;  // per GU, -1 when absent
};

struct ScaSubproblem {
  ConvexProblem problem;  // minimizes -rho
  ScaLayout layout;
  Eigen::VectorXd start;  // the expansion point
};

struct ScaResult {
  ResourceSolution solution;
  ScaState state;
  double rho = 0.0;
  std::vector<double> rho_trace;       // rho after each solved subproblem
  std::vector<double> residual_trace;  // max constraint residual per subproblem
  int iterations = 0;
  int relaxation = 0;   // 0 none, 1 rate floor halved, 2 rate floor dropped
  bool converged = false;
};

// Channel in normalized units.
Eigen::VectorXcd normalized_channel(const ChannelRealization& ch, int k, int n, const NetworkConfig& cfg);

// Matched-filter private precoders, common precoder along the dominant
// served-channel direction, 50/50 power split at full budget; slacks are set
// from the induced SINRs and interference.
ScaState initialize(const Association& assoc, const ChannelRealization& ch, const NetworkConfig& cfg,
                    const ScaOptions& opt = {});

ScaSubproblem build_subproblem(const ScaState& state, const Association& assoc, const ChannelRealization& ch,
                               const NetworkConfig& cfg, const ScaOptions& opt = {});

ConvexSolution solve_subproblem(const ScaSubproblem& sub, const BarrierOptions& opt = {});

// Reads a solved subproblem back into an iterate.
ScaState read_state(const ScaSubproblem& sub, const ConvexSolution& sol, const ScaState& prev,
                    const Association& assoc);

ResourceSolution to_resources(const ScaState& state, const Association& assoc, const NetworkConfig& cfg);

// The initialization point as a resource solution, with each common split
// equal to its share of the cluster's decodable common rate. Used as the cheap
// reward surrogate.
ResourceSolution surrogate_resources(const Association& assoc, const ChannelRealization& ch,
                                     const NetworkConfig& cfg, bool rsma = true);

// Full SCA loop with the rate-floor relaxation ladder. The association must
// give every GU at most one server.
ScaResult run_sca(const Association& assoc, const ChannelRealization& ch, const NetworkConfig& cfg,
                  const ScaOptions& opt = {});

// CSV trace: iter,rho,max_residual
void write_sca_trace(std::ostream& out, const ScaResult& res);

}  // namespace aebs
