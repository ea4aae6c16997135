#include "aebs/rsma_rates.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace aebs {

double q_inv(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("q_inv: eps must lie in (0,1)");
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * eps);
}

double fbl_rate_raw(double gamma, double blocklength, double eps) {
  const double v = 1.0 - 1.0 / ((1.0 + gamma) * (1.0 + gamma));
  return std::log2(1.0 + gamma) - std::sqrt(std::max(v, 0.0) / blocklength) * q_inv(eps) / std::numbers::ln2;
}

double fbl_rate(double gamma, double blocklength, double eps) {
  return std::max(0.0, fbl_rate_raw(gamma, blocklength, eps));
}

ResourceSolution ResourceSolution::zeros(int num_aebs, int num_gus, int num_antennas) {
  ResourceSolution s;
  s.common.assign(num_aebs, Eigen::VectorXcd::Zero(num_antennas));
  s.private_precoder.assign(num_gus, Eigen::VectorXcd::Zero(num_antennas));
  s.common_split.assign(num_gus, 0.0);
  return s;
}

Eigen::MatrixXcd ResourceSolution::precoder_matrix(int k, const Association& assoc) const {
  const auto members = assoc.cluster(k);
  Eigen::MatrixXcd P(common[k].size(), static_cast<Eigen::Index>(members.size()) + 1);
  P.col(0) = common[k];
  for (std::size_t i = 0; i < members.size(); ++i) P.col(static_cast<Eigen::Index>(i) + 1) = private_precoder[members[i]];
  return P;
}

double ResourceSolution::power(int k, const Association& assoc) const {
  double p = common[k].squaredNorm();
  for (int n : assoc.cluster(k)) p += private_precoder[n].squaredNorm();
  return p;
}

namespace {

double gain(const Eigen::VectorXcd& h, const Eigen::VectorXcd& p) { return std::norm(h.dot(p)); }

void check_shapes(const Association& assoc, const ChannelRealization& ch, const ResourceSolution& sol) {
  if (assoc.num_aebs() != ch.num_aebs || assoc.num_gus() != ch.num_gus)
    throw std::invalid_argument("rate_report: association and channel shapes differ");
  if (static_cast<int>(sol.common.size()) != ch.num_aebs ||
      static_cast<int>(sol.private_precoder.size()) != ch.num_gus ||
      static_cast<int>(sol.common_split.size()) != ch.num_gus)
    throw std::invalid_argument("rate_report: resource solution shape");
}

// Power received at GU n from every AeBS other than k: common stream plus
// all served private streams.
double out_of_cell(int k, int n, const Association& assoc, const ChannelRealization& ch,
                   const ResourceSolution& sol) {
  double s = 0.0;
  for (int i = 0; i < ch.num_aebs; ++i) {
    if (i == k) continue;
    const auto& h = ch.at(i, n);
    s += gain(h, sol.common[i]);
    for (int m = 0; m < ch.num_gus; ++m)
      if (assoc(i, m)) s += gain(h, sol.private_precoder[m]);
  }
  return s;
}

void require_served(int k, int n, const Association& assoc) {
  if (!assoc(k, n)) throw std::domain_error("SINR requested for an unassociated pair");
}

}  // namespace

double sinr_common(int k, int n, const Association& assoc, const ChannelRealization& ch,
                   const ResourceSolution& sol, const NetworkConfig& cfg) {
  require_served(k, n, assoc);
  const auto& h = ch.at(k, n);
  double intra = 0.0;
  for (int j = 0; j < ch.num_gus; ++j)
    if (assoc(k, j)) intra += gain(h, sol.private_precoder[j]);
  return gain(h, sol.common[k]) / (intra + out_of_cell(k, n, assoc, ch, sol) + cfg.noise_w);
}

double sinr_private(int k, int n, const Association& assoc, const ChannelRealization& ch,
                    const ResourceSolution& sol, const NetworkConfig& cfg) {
  require_served(k, n, assoc);
  const auto& h = ch.at(k, n);
  double intra = 0.0;
  for (int j = 0; j < ch.num_gus; ++j)
    if (j != n && assoc(k, j)) intra += gain(h, sol.private_precoder[j]);
  return gain(h, sol.private_precoder[n]) / (intra + out_of_cell(k, n, assoc, ch, sol) + cfg.noise_w);
}

RateReport rate_report(const Association& assoc, const ChannelRealization& ch, const ResourceSolution& sol,
                       const NetworkConfig& cfg, double tol) {
  check_shapes(assoc, ch, sol);
  const int K = ch.num_aebs;
  const int N = ch.num_gus;
  for (int n = 0; n < N; ++n)
    if (assoc.column_sum(n) > 1) throw std::invalid_argument("rate_report: GU with several serving AeBSs");

  RateReport r;
  r.gamma_c.assign(N, 0.0);
  r.gamma_p.assign(N, 0.0);
  r.c_common.assign(N, 0.0);
  r.r_common.assign(N, 0.0);
  r.r_private.assign(N, 0.0);
  r.r_total.assign(N, 0.0);
  r.server.assign(N, -1);
  r.rmin_ok.assign(N, false);
  r.common_cap.assign(K, 0.0);
  r.aebs_power.assign(K, 0.0);

  for (int n = 0; n < N; ++n) {
    const int k = assoc.server_of(n);
    r.server[n] = k;
    if (k < 0) continue;
    r.gamma_c[n] = sinr_common(k, n, assoc, ch, sol, cfg);
    r.gamma_p[n] = sinr_private(k, n, assoc, ch, sol, cfg);
    r.c_common[n] = fbl_rate(r.gamma_c[n], cfg.common_blocklength, cfg.decoding_error);
    r.r_private[n] = fbl_rate(r.gamma_p[n], cfg.private_blocklength, cfg.decoding_error);
    r.r_common[n] = sol.common_split[n];
    if (sol.common_split[n] < -tol) r.c7_ok = false;
  }

  for (int k = 0; k < K; ++k) {
    const auto members = assoc.cluster(k);
    r.aebs_power[k] = sol.power(k, assoc);
    if (r.aebs_power[k] > cfg.max_power_w * (1.0 + tol)) r.c8_ok = false;
    if (members.empty()) continue;
    double cap = std::numeric_limits<double>::infinity();
    double used = 0.0;
    for (int n : members) {
      cap = std::min(cap, r.c_common[n]);
      used += sol.common_split[n];
    }
    r.common_cap[k] = cap;
    if (used > cap + tol) r.c5_ok = false;
  }

  for (int n = 0; n < N; ++n) {
    if (r.server[n] < 0) continue;
    r.r_total[n] = r.r_common[n] + r.r_private[n];
    r.rmin_ok[n] = r.r_total[n] >= cfg.min_rate - tol;
    r.sum_rate += r.r_total[n];
  }
  r.coverage = coverage(assoc);
  r.utility = utility(r.coverage, r.sum_rate, cfg);
  return r;
}

RateReport sdma_rate_report(const Association& assoc, const ChannelRealization& ch, const ResourceSolution& sol,
                            const NetworkConfig& cfg, double tol) {
  check_shapes(assoc, ch, sol);
  for (const auto& p : sol.common)
    if (p.squaredNorm() > 0.0) throw std::invalid_argument("sdma_rate_report: common precoder must be zero");
  for (double c : sol.common_split)
    if (c != 0.0) throw std::invalid_argument("sdma_rate_report: common split must be zero");
  return rate_report(assoc, ch, sol, cfg, tol);
}

void write_rate_csv(std::ostream& out, const RateReport& rep) {
  out << "n,server,gamma_c,gamma_p,c_common,r_common,r_private,r_total,rmin_ok\n" << std::setprecision(17);
  for (std::size_t n = 0; n < rep.server.size(); ++n)
    out << n << ',' << rep.server[n] << ',' << rep.gamma_c[n] << ',' << rep.gamma_p[n] << ',' << rep.c_common[n]
        << ',' << rep.r_common[n] << ',' << rep.r_private[n] << ',' << rep.r_total[n] << ','
        << (rep.rmin_ok[n] ? 1 : 0) << '\n';
}

}  // namespace aebs
