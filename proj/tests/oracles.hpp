#pragma once

// Reference computations written independently of the library code paths
// they check: closed forms, bisection, enumeration and finite differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "aebs/channel.hpp"
#include "aebs/core_model.hpp"
#include "aebs/rsma_rates.hpp"

namespace oracle {

// Gaussian tail Q(x) = 0.5 erfc(x / sqrt 2), inverted by bisection.
inline double q_inv(double eps) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > eps ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double fbl(double gamma, double blocklength, double eps) {
  const double v = 1.0 - 1.0 / ((1.0 + gamma) * (1.0 + gamma));
  return std::log2(1.0 + gamma) - std::sqrt(v / blocklength) * q_inv(eps) / std::log(2.0);
}

inline double gain(const Eigen::VectorXcd& h, const Eigen::VectorXcd& p) { return std::norm(h.dot(p)); }

struct Sinrs {
  std::vector<double> common, priv;  // per GU, 0 when unserved
};

// SINRs straight from the received-signal model: the common stream sees all of
// its own AeBS's private streams as interference, the private stream only the
// other private streams; every stream of every other AeBS interferes.
inline Sinrs sinrs(const aebs::Association& a, const aebs::ChannelRealization& ch, const aebs::ResourceSolution& s,
                   double noise) {
  const int K = a.num_aebs(), N = a.num_gus();
  Sinrs out{std::vector<double>(N, 0.0), std::vector<double>(N, 0.0)};
  for (int n = 0; n < N; ++n) {
    int k = -1;
    for (int i = 0; i < K; ++i)
      if (a(i, n)) k = i;
    if (k < 0) continue;
    const auto& h = ch.at(k, n);
    double outside = 0.0;
    for (int i = 0; i < K; ++i) {
      if (i == k) continue;
      const auto& hi = ch.at(i, n);
      outside += gain(hi, s.common[i]);
      for (int j = 0; j < N; ++j)
        if (a(i, j)) outside += gain(hi, s.private_precoder[j]);
    }
    double own_private = 0.0;
    for (int j = 0; j < N; ++j)
      if (a(k, j)) own_private += gain(h, s.private_precoder[j]);
    const double mine = gain(h, s.private_precoder[n]);
    out.common[n] = gain(h, s.common[k]) / (own_private + outside + noise);
    out.priv[n] = mine / (own_private - mine + outside + noise);
  }
  return out;
}

struct PowerAndCommonAudit {
  bool c5 = true, c7 = true, c8 = true;
};

// Common-rate decodability (C5), nonnegative common shares (C7) and the power
// budget (C8), recomputed from the channel vectors.
inline PowerAndCommonAudit audit_c5_c7_c8(const aebs::Association& a, const aebs::ChannelRealization& ch,
                                          const aebs::ResourceSolution& s, const aebs::NetworkConfig& cfg,
                                          double tol) {
  PowerAndCommonAudit out;
  const int K = a.num_aebs(), N = a.num_gus();
  const Sinrs g = sinrs(a, ch, s, cfg.noise_w);
  for (int k = 0; k < K; ++k) {
    double power = s.common[k].squaredNorm();
    double cap = std::numeric_limits<double>::infinity(), used = 0.0;
    bool any = false;
    for (int n = 0; n < N; ++n) {
      if (!a(k, n)) continue;
      any = true;
      power += s.private_precoder[n].squaredNorm();
      cap = std::min(cap, std::max(0.0, fbl(g.common[n], cfg.common_blocklength, cfg.decoding_error)));
      used += s.common_split[n];
      if (s.common_split[n] < -tol) out.c7 = false;
    }
    if (power > cfg.max_power_w * (1.0 + tol)) out.c8 = false;
    if (any && used > cap + tol) out.c5 = false;
  }
  return out;
}

// Central differences of f at x.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double fp = f(y);
    y[i] = x[i] - h;
    const double fm = f(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}


// One AeBS, two GUs on orthogonal unit directions with normalized SNRs snr1 and
// snr2. Exhaustive grid over the common power share and the private split,
// with the common precoder on the bisector and private precoders matched.
// Returns the best finite-blocklength sum rate.
inline double orthogonal_pair_grid(double snr1, double snr2, double blocklength, double eps, int steps) {
  const auto rate = [&](double g) { return std::max(0.0, fbl(g, blocklength, eps)); };
  double best = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double s = double(i) / steps;
    for (int j = 0; j <= steps; ++j) {
      const double f = double(j) / steps;
      const double p1 = (1.0 - s) * f, p2 = (1.0 - s) * (1.0 - f);
      const double c1 = rate(snr1 * s / 2.0 / (snr1 * p1 + 1.0));
      const double c2 = rate(snr2 * s / 2.0 / (snr2 * p2 + 1.0));
      best = std::max(best, std::min(c1, c2) + rate(snr1 * p1) + rate(snr2 * p2));
    }
  }
  return best;
}


// q(x^{t-1} | x^0, x^t) by Bayes' rule from the explicit one-step and
// cumulative transition laws of a keep-or-resample chain with stationary m.
inline Eigen::VectorXd bayes_posterior(int x0, int xt, int t, const std::vector<double>& alpha,
                                       const std::vector<double>& alpha_bar, const Eigen::VectorXd& m) {
  const int S = static_cast<int>(m.size());
  Eigen::VectorXd p(S);
  for (int b = 0; b < S; ++b) {
    const double step = alpha[t] * (b == xt) + (1.0 - alpha[t]) * m[xt];
    const double cum = alpha_bar[t - 1] * (x0 == b) + (1.0 - alpha_bar[t - 1]) * m[b];
    p[b] = step * cum;
  }
  return p / p.sum();
}

inline double tv(const Eigen::VectorXd& p, const Eigen::VectorXd& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

}  // namespace oracle
