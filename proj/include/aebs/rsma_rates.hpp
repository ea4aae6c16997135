#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "aebs/channel.hpp"
#include "aebs/config.hpp"
#include "aebs/core_model.hpp"

namespace aebs {

// Inverse Gaussian tail function Q^{-1}(eps).
double q_inv(double eps);

// Finite-blocklength rate log2(1+g) - sqrt(V(g)/D) Q^{-1}(eps)/ln 2, clamped at 0.
double fbl_rate(double gamma, double blocklength, double eps);

// The same expression without the clamp (negative for very small SINR).
double fbl_rate_raw(double gamma, double blocklength, double eps);

// Beamformers and common-rate split. Private precoders and common splits are
// indexed by global GU index; entries for unserved GUs are ignored. The common
// precoder of AeBS k is common[k].
struct ResourceSolution {
  std::vector<Eigen::VectorXcd> common;            // K vectors of length Nt
  std::vector<Eigen::VectorXcd> private_precoder;  // N vectors of length Nt
  std::vector<double> common_split;                // N entries, r^c per GU

  static ResourceSolution zeros(int num_aebs, int num_gus, int num_antennas);

  // P_k as an Nt x (|N_k|+1) matrix: column 0 common, then the cluster in
  // ascending GU order.
  Eigen::MatrixXcd precoder_matrix(int k, const Association& assoc) const;

  // Sum of squared precoder norms of AeBS k over its common and served streams.
  double power(int k, const Association& assoc) const;
};

struct RateReport {
  std::vector<double> gamma_c, gamma_p;
  std::vector<double> c_common;   // decodable common rate per GU
  std::vector<double> r_common;   // allocated r^c
  std::vector<double> r_private;
  std::vector<double> r_total;
  std::vector<int> server;        // serving AeBS or -1
  std::vector<bool> rmin_ok;
  std::vector<double> common_cap; // min_n c over the cluster, per AeBS
  std::vector<double> aebs_power; // per AeBS, watts
  double sum_rate = 0.0;
  double coverage = 0.0;
  double utility = 0.0;
  bool c5_ok = true;
  bool c7_ok = true;
  bool c8_ok = true;
};

// Both SINRs require alpha[k][n] = 1 and throw std::domain_error otherwise.
double sinr_common(int k, int n, const Association& assoc, const ChannelRealization& ch,
                   const ResourceSolution& sol, const NetworkConfig& cfg);
double sinr_private(int k, int n, const Association& assoc, const ChannelRealization& ch,
                    const ResourceSolution& sol, const NetworkConfig& cfg);

// Full metric computation for an association with at most one server per GU.
// C5/C7/C8 breaches are flagged (tolerance tol) rather than thrown.
RateReport rate_report(const Association& assoc, const ChannelRealization& ch, const ResourceSolution& sol,
                       const NetworkConfig& cfg, double tol = 1e-6);

// Rate report with the common stream disabled. A nonzero common precoder or
// common split on input is a contract violation (std::invalid_argument).
RateReport sdma_rate_report(const Association& assoc, const ChannelRealization& ch, const ResourceSolution& sol,
                            const NetworkConfig& cfg, double tol = 1e-6);

// One row per GU: n,server,gamma_c,gamma_p,c_common,r_common,r_private,r_total,rmin_ok
void write_rate_csv(std::ostream& out, const RateReport& rep);

}  // namespace aebs
