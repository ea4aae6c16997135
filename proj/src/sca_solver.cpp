#include "aebs/sca_solver.hpp"

#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <stdexcept>

namespace aebs {

namespace {

using cd = std::complex<double>;

// Real-stacked forms of z -> h^H p with z = [Re p; Im p]: h^H p = a^T z + i b^T z.
struct RealForm {
  Eigen::VectorXd a, b;
  Eigen::MatrixXd Q;  // a a^T + b b^T, so z^T Q z = |h^H p|^2
};

RealForm real_form(const Eigen::VectorXcd& h) {
  const auto nt = h.size();
  RealForm f;
  f.a.resize(2 * nt);
  f.b.resize(2 * nt);
  f.a << h.real(), h.imag();
  f.b << -h.imag(), h.real();
  f.Q = f.a * f.a.transpose() + f.b * f.b.transpose();
  return f;
}

Eigen::VectorXd stack(const Eigen::VectorXcd& p) {
  Eigen::VectorXd z(2 * p.size());
  z << p.real(), p.imag();
  return z;
}

Eigen::VectorXcd unstack(const Eigen::VectorXd& z) {
  const auto nt = z.size() / 2;
  Eigen::VectorXcd p(nt);
  for (Eigen::Index j = 0; j < nt; ++j) p[j] = cd(z[j], z[nt + j]);
  return p;
}

double gain(const Eigen::VectorXcd& h, const Eigen::VectorXcd& p) { return std::norm(h.dot(p)); }

// 1 - (1+v)^-2 without cancellation for small v.
double dispersion(double v) { return -std::expm1(-2.0 * std::log1p(v)); }

// Normalized channels for all pairs, row-major over (k, n).
struct NormChannels {
  int K = 0, N = 0;
  std::vector<Eigen::VectorXcd> h;
  const Eigen::VectorXcd& at(int k, int n) const { return h[static_cast<std::size_t>(k) * N + n]; }
};

NormChannels normalize(const ChannelRealization& ch, const NetworkConfig& cfg) {
  NormChannels out;
  out.K = ch.num_aebs;
  out.N = ch.num_gus;
  const double s = std::sqrt(cfg.max_power_w / cfg.noise_w);
  out.h.reserve(ch.h.size());
  for (const auto& v : ch.h) out.h.push_back(s * v);
  return out;
}

// Received power at GU n (served by k) from every other AeBS.
double cross_power(const ScaState& s, const Association& assoc, const NormChannels& H, int k, int n) {
  double v = 0.0;
  for (int i = 0; i < H.K; ++i) {
    if (i == k) continue;
    const auto& h = H.at(i, n);
    if (s.common_on[i]) v += gain(h, s.common[i]);
    for (int m : assoc.cluster(i)) v += gain(h, s.priv[m]);
  }
  return v;
}

void check_assoc(const Association& assoc, const ChannelRealization& ch) {
  if (assoc.num_aebs() != ch.num_aebs || assoc.num_gus() != ch.num_gus)
    throw std::invalid_argument("sca: association and channel shapes differ");
  for (int n = 0; n < assoc.num_gus(); ++n)
    if (assoc.column_sum(n) > 1) throw std::invalid_argument("sca: GU with several serving AeBSs");
}

Eigen::VectorXcd common_direction(const std::vector<Eigen::VectorXcd>& hs) {
  const auto nt = hs.front().size();
  Eigen::MatrixXcd M(nt, static_cast<Eigen::Index>(hs.size()));
  for (std::size_t i = 0; i < hs.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = hs[i];
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU);
  Eigen::VectorXcd u = svd.matrixU().col(0);

  double worst = 1.0;
  for (const auto& h : hs) worst = std::min(worst, gain(h, u) / std::max(h.squaredNorm(), 1e-300));
  if (worst >= 1e-3) return u;

  // Some user sits nearly orthogonal to the dominant direction; align the
  // phases of all unit channels to the first one and add them up instead.
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(nt);
  const Eigen::VectorXcd ref = hs.front().normalized();
  for (const auto& h : hs) {
    const cd c = ref.dot(h);
    const cd rot = std::abs(c) > 0.0 ? std::conj(c) / std::abs(c) : cd(1.0, 0.0);
    w += rot * h.normalized();
  }
  return w.norm() > 1e-12 ? Eigen::VectorXcd(w.normalized()) : u;
}

void assign_power(ScaState& s, const Association& assoc, const NormChannels& H, int k,
                  const Eigen::VectorXcd& direction) {
  const auto members = assoc.cluster(k);
  const double share = s.common_on[k] ? 0.5 : 1.0;
  s.common[k] = s.common_on[k] ? Eigen::VectorXcd(std::sqrt(1.0 - share) * direction)
                               : Eigen::VectorXcd::Zero(direction.size());
  for (int n : members) {
    const auto& h = H.at(k, n);
    s.priv[n] = std::sqrt(share / members.size()) * h / h.norm();
  }
}

// Slack values that make every constraint of the next subproblem hold at the
// given precoders (the linearizations are exact there).
void fill_slacks(ScaState& s, const Association& assoc, const NormChannels& H, const NetworkConfig& cfg) {
  const double eps = cfg.decoding_error;
  std::fill(s.r_common.begin(), s.r_common.end(), 0.0);
  for (int k = 0; k < H.K; ++k) {
    const auto members = assoc.cluster(k);
    if (members.empty()) continue;
    double cap = std::numeric_limits<double>::infinity();
    for (int n : members) {
      const auto& h = H.at(k, n);
      const double psi = cross_power(s, assoc, H, k, n);
      double intra = 0.0;
      for (int j : members) intra += gain(h, s.priv[j]);
      const double own = gain(h, s.priv[n]);
      s.chi_p[n] = intra - own + psi + 1.0;
      s.nu_p[n] = own / s.chi_p[n];
      s.phi[n] = fbl_rate_raw(s.nu_p[n], cfg.private_blocklength, eps);
      if (s.common_on[k]) {
        s.chi_c[n] = intra + psi + 1.0;
        s.nu_c[n] = gain(h, s.common[k]) / s.chi_c[n];
        cap = std::min(cap, fbl_rate_raw(s.nu_c[n], cfg.common_blocklength, eps));
      } else {
        s.chi_c[n] = s.nu_c[n] = 0.0;
      }
    }
    if (s.common_on[k])
      for (int n : members) s.r_common[n] = std::max(cap, 0.0) / members.size();
  }
  s.rho = 0.0;
  for (int n = 0; n < H.N; ++n)
    if (assoc.server_of(n) >= 0) s.rho += s.r_common[n] + s.phi[n];
}

}  // namespace

Eigen::VectorXcd normalized_channel(const ChannelRealization& ch, int k, int n, const NetworkConfig& cfg) {
  return std::sqrt(cfg.max_power_w / cfg.noise_w) * ch.at(k, n);
}

ScaState initialize(const Association& assoc, const ChannelRealization& ch, const NetworkConfig& cfg,
                    const ScaOptions& opt) {
  check_assoc(assoc, ch);
  const NormChannels H = normalize(ch, cfg);
  const int K = ch.num_aebs, N = ch.num_gus, nt = ch.num_antennas;

  ScaState s;
  s.common.assign(K, Eigen::VectorXcd::Zero(nt));
  s.priv.assign(N, Eigen::VectorXcd::Zero(nt));
  s.common_on.assign(K, false);
  for (auto* v : {&s.r_common, &s.phi, &s.nu_c, &s.nu_p, &s.chi_c, &s.chi_p}) v->assign(N, 0.0);
  const double log2e = 1.0 / std::numbers::ln2;
  s.y_common = q_inv(cfg.decoding_error) * log2e / std::sqrt(static_cast<double>(cfg.common_blocklength));
  s.y_private = q_inv(cfg.decoding_error) * log2e / std::sqrt(static_cast<double>(cfg.private_blocklength));
  s.min_rate = cfg.min_rate;

  std::vector<Eigen::VectorXcd> dirs(K, Eigen::VectorXcd::Zero(nt));
  for (int k = 0; k < K; ++k) {
    const auto members = assoc.cluster(k);
    if (members.empty()) continue;
    std::vector<Eigen::VectorXcd> hs;
    for (int n : members) hs.push_back(H.at(k, n));
    dirs[k] = common_direction(hs);
    s.common_on[k] = opt.rsma;
    assign_power(s, assoc, H, k, dirs[k]);
  }

  // A common stream that some member cannot decode at any positive rate only
  // costs power and interference; hand its power to the private streams.
  for (bool changed = true; changed;) {
    changed = false;
    fill_slacks(s, assoc, H, cfg);
    for (int k = 0; k < K; ++k) {
      if (!s.common_on[k]) continue;
      for (int n : assoc.cluster(k)) {
        if (fbl_rate_raw(s.nu_c[n], cfg.common_blocklength, cfg.decoding_error) < 0.0) {
          s.common_on[k] = false;
          assign_power(s, assoc, H, k, dirs[k]);
          changed = true;
          break;
        }
      }
    }
  }
  return s;
}

ScaSubproblem build_subproblem(const ScaState& s, const Association& assoc, const ChannelRealization& ch,
                               const NetworkConfig& cfg, const ScaOptions& opt) {
  check_assoc(assoc, ch);
  const NormChannels H = normalize(ch, cfg);
  const int K = ch.num_aebs, N = ch.num_gus, nt = ch.num_antennas;

  ScaSubproblem sub;
  ScaLayout& L = sub.layout;
  L.num_antennas = nt;
  L.common.assign(K, -1);
  for (auto* v : {&L.priv, &L.r_common, &L.phi, &L.nu_c, &L.nu_p, &L.chi_c, &L.chi_p}) v->assign(N, -1);
  int off = 0;
  for (int k = 0; k < K; ++k) {
    if (assoc.row_sum(k) == 0) continue;
    if (s.common_on[k]) {
      L.common[k] = off;
      off += 2 * nt;
    }
  }
  for (int n = 0; n < N; ++n) {
    const int k = assoc.server_of(n);
    if (k < 0) continue;
    L.priv[n] = off;
    off += 2 * nt;
    if (L.common[k] >= 0) {
      L.r_common[n] = off++;
      L.nu_c[n] = off++;
      L.chi_c[n] = off++;
    }
    L.phi[n] = off++;
    L.nu_p[n] = off++;
    L.chi_p[n] = off++;
  }
  L.num_vars = off;

  Eigen::VectorXd& x0 = sub.start;
  x0 = Eigen::VectorXd::Zero(off);
  for (int k = 0; k < K; ++k)
    if (L.common[k] >= 0) x0.segment(L.common[k], 2 * nt) = stack(s.common[k]);
  for (int n = 0; n < N; ++n) {
    if (L.priv[n] < 0) continue;
    x0.segment(L.priv[n], 2 * nt) = stack(s.priv[n]);
    if (L.r_common[n] >= 0) {
      x0[L.r_common[n]] = s.r_common[n];
      x0[L.nu_c[n]] = s.nu_c[n];
      x0[L.chi_c[n]] = s.chi_c[n];
    }
    x0[L.phi[n]] = s.phi[n];
    x0[L.nu_p[n]] = s.nu_p[n];
    x0[L.chi_p[n]] = s.chi_p[n];
  }

  ConvexProblem& P = sub.problem;
  P.num_vars = off;
  P.objective = Eigen::VectorXd::Zero(off);
  for (int n = 0; n < N; ++n) {
    if (L.r_common[n] >= 0) P.objective[L.r_common[n]] = -1.0;
    if (L.phi[n] >= 0) P.objective[L.phi[n]] = -1.0;
  }

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2 * nt, 2 * nt);

  // Linearized finite-blocklength rate: rate - log2(1+v) + Y (f0 + f'(v - v0)) <= 0.
  auto rate_row = [&](ConvexConstraint& c, int nu_idx, double v0, double Y) {
    const double y0 = dispersion(v0);
    const double f0 = std::sqrt(y0);
    const double df = std::pow(1.0 + v0, -3.0) / f0;
    c.lin[nu_idx] += Y * df;
    c.constant += Y * (f0 - df * v0);
    c.log_index = nu_idx;
    c.log_coef = 1.0;
  };
  // Linearized |h^H p|^2 / chi >= v around (p0, chi0).
  auto sinr_row = [&](ConvexConstraint& c, const Eigen::VectorXcd& h, int p_idx, const Eigen::VectorXcd& p0,
                      int chi_idx, double chi0, int nu_idx) {
    const RealForm f = real_form(h);
    const cd u0 = h.dot(p0);
    c.lin[nu_idx] = 1.0;
    c.lin.segment(p_idx, 2 * nt) -= (2.0 / chi0) * (u0.real() * f.a + u0.imag() * f.b);
    c.lin[chi_idx] = std::norm(u0) / (chi0 * chi0);
  };
  auto cross_rows = [&](ConvexConstraint& c, int k, int n) {
    for (int i = 0; i < K; ++i) {
      if (i == k) continue;
      const RealForm f = real_form(H.at(i, n));
      if (L.common[i] >= 0) c.quad.push_back({L.common[i], f.Q});
      for (int m : assoc.cluster(i)) c.quad.push_back({L.priv[m], f.Q});
    }
  };

  for (int n = 0; n < N; ++n) {
    const int k = assoc.server_of(n);
    if (k < 0) continue;
    const auto members = assoc.cluster(k);
    const auto& h = H.at(k, n);
    const RealForm fh = real_form(h);
    const bool common = L.common[k] >= 0;

    if (common) {
      auto& c = P.add(ConstraintTag::CommonRate);
      for (int j : members) c.lin[L.r_common[j]] += 1.0;
      rate_row(c, L.nu_c[n], s.nu_c[n], s.y_common);
    }
    {
      auto& c = P.add(ConstraintTag::PrivateRate);
      c.lin[L.phi[n]] = 1.0;
      rate_row(c, L.nu_p[n], s.nu_p[n], s.y_private);
    }
    if (common) {
      auto& c = P.add(ConstraintTag::CommonSinr);
      sinr_row(c, h, L.common[k], s.common[k], L.chi_c[n], s.chi_c[n], L.nu_c[n]);
    }
    {
      auto& c = P.add(ConstraintTag::PrivateSinr);
      sinr_row(c, h, L.priv[n], s.priv[n], L.chi_p[n], s.chi_p[n], L.nu_p[n]);
    }
    if (common) {
      auto& c = P.add(ConstraintTag::CommonInterference);
      for (int j : members) c.quad.push_back({L.priv[j], fh.Q});
      cross_rows(c, k, n);
      c.constant = 1.0;
      c.lin[L.chi_c[n]] = -1.0;
    }
    {
      auto& c = P.add(ConstraintTag::PrivateInterference);
      for (int j : members)
        if (j != n) c.quad.push_back({L.priv[j], fh.Q});
      cross_rows(c, k, n);
      c.constant = 1.0;
      c.lin[L.chi_p[n]] = -1.0;
    }
    if (s.enforce_min_rate) {
      auto& c = P.add(ConstraintTag::MinRate);
      c.constant = s.min_rate;
      c.lin[L.phi[n]] = -1.0;
      if (common) c.lin[L.r_common[n]] = -1.0;
    }
    if (common) {
      auto& c = P.add(ConstraintTag::CommonNonneg);
      c.lin[L.r_common[n]] = -1.0;
    }
    if (common) {
      auto& c = P.add(ConstraintTag::SinrFloor);
      c.constant = opt.sinr_floor;
      c.lin[L.nu_c[n]] = -1.0;
    }
    {
      auto& c = P.add(ConstraintTag::SinrFloor);
      c.constant = opt.sinr_floor;
      c.lin[L.nu_p[n]] = -1.0;
    }
    {
      // The private rate can never be below -Y, so this bound is inactive; it
      // keeps the phase-I search bounded when the rate floor is dropped.
      auto& c = P.add(ConstraintTag::RateFloor);
      c.constant = -s.y_private - 1.0;
      c.lin[L.phi[n]] = -1.0;
    }
  }

  for (int k = 0; k < K; ++k) {
    const auto members = assoc.cluster(k);
    if (members.empty()) continue;
    auto& c = P.add(ConstraintTag::PowerBudget);
    if (L.common[k] >= 0) c.quad.push_back({L.common[k], eye});
    for (int n : members) c.quad.push_back({L.priv[n], eye});
    c.constant = -1.0;
  }
  return sub;
}

ConvexSolution solve_subproblem(const ScaSubproblem& sub, const BarrierOptions& opt) {
  return solve_convex(sub.problem, sub.start, opt);
}

ScaState read_state(const ScaSubproblem& sub, const ConvexSolution& sol, const ScaState& prev,
                    const Association& assoc) {
  const ScaLayout& L = sub.layout;
  const Eigen::VectorXd& x = sol.x;
  ScaState s = prev;
  s.iter = prev.iter + 1;
  const int nt = L.num_antennas;
  for (std::size_t k = 0; k < L.common.size(); ++k)
    s.common[k] = L.common[k] >= 0 ? unstack(x.segment(L.common[k], 2 * nt)) : Eigen::VectorXcd::Zero(nt);
  s.rho = 0.0;
  for (std::size_t n = 0; n < L.priv.size(); ++n) {
    if (L.priv[n] < 0) {
      s.priv[n].setZero();
      continue;
    }
    s.priv[n] = unstack(x.segment(L.priv[n], 2 * nt));
    const bool common = L.r_common[n] >= 0;
    s.r_common[n] = common ? x[L.r_common[n]] : 0.0;
    s.nu_c[n] = common ? x[L.nu_c[n]] : 0.0;
    s.chi_c[n] = common ? x[L.chi_c[n]] : 0.0;
    s.phi[n] = x[L.phi[n]];
    s.nu_p[n] = x[L.nu_p[n]];
    s.chi_p[n] = x[L.chi_p[n]];
    s.rho += s.r_common[n] + s.phi[n];
  }
  (void)assoc;
  return s;
}

ResourceSolution to_resources(const ScaState& s, const Association& assoc, const NetworkConfig& cfg) {
  const int K = static_cast<int>(s.common.size());
  const int N = static_cast<int>(s.priv.size());
  const int nt = K > 0 ? static_cast<int>(s.common.front().size()) : 0;
  const double amp = std::sqrt(cfg.max_power_w);
  ResourceSolution out = ResourceSolution::zeros(K, N, nt);
  for (int k = 0; k < K; ++k)
    if (s.common_on[k]) out.common[k] = amp * s.common[k];
  for (int n = 0; n < N; ++n) {
    const int k = assoc.server_of(n);
    if (k < 0) continue;
    out.private_precoder[n] = amp * s.priv[n];
    out.common_split[n] = s.common_on[k] ? std::max(0.0, s.r_common[n]) : 0.0;
  }
  return out;
}

ResourceSolution surrogate_resources(const Association& assoc, const ChannelRealization& ch,
                                     const NetworkConfig& cfg, bool rsma) {
  ScaOptions opt;
  opt.rsma = rsma;
  return to_resources(initialize(assoc, ch, cfg, opt), assoc, cfg);
}

ScaResult run_sca(const Association& assoc, const ChannelRealization& ch, const NetworkConfig& cfg,
                  const ScaOptions& opt) {
  check_assoc(assoc, ch);
  ScaResult res;
  const int K = ch.num_aebs;

  auto fresh = [&](int relaxation) {
    ScaState s = initialize(assoc, ch, cfg, opt);
    if (relaxation >= 1) s.min_rate *= 0.5;
    if (relaxation >= 2) s.enforce_min_rate = false;
    return s;
  };
  ScaState state = fresh(0);

  for (int it = 1; it <= opt.max_iters; ++it) {
    ScaSubproblem sub = build_subproblem(state, assoc, ch, cfg, opt);
    if (sub.problem.num_vars == 0) {
      res.converged = true;
      break;
    }
    ConvexSolution sol;
    try {
      sol = solve_subproblem(sub, opt.barrier);
    } catch (const SubproblemInfeasible&) {
      if (it == 1 && res.relaxation < 2) {
        state = fresh(++res.relaxation);
        it = 0;
        continue;
      }
      if (it == 1) throw;
      // The previous iterate is feasible but the interior vanished; it is a
      // fixed point of the approximation.
      res.converged = true;
      break;
    }
    ScaState next = read_state(sub, sol, state, assoc);

    for (int k = 0; k < K; ++k) {
      if (!next.common_on[k]) continue;
      double total = 0.0;
      for (int n : assoc.cluster(k)) total += next.r_common[n];
      if (total < opt.common_off_below) {
        next.common_on[k] = false;
        next.common[k].setZero();
        for (int n : assoc.cluster(k)) {
          next.rho -= next.r_common[n];
          next.r_common[n] = next.nu_c[n] = next.chi_c[n] = 0.0;
        }
      }
    }

    res.rho_trace.push_back(next.rho);
    res.residual_trace.push_back(sol.max_violation);
    res.iterations = it;
    const bool done = it >= 2 && std::abs(next.rho - state.rho) < opt.tau;
    state = std::move(next);
    if (done) {
      res.converged = true;
      break;
    }
  }

  res.state = state;
  res.rho = state.rho;
  res.solution = to_resources(state, assoc, cfg);
  return res;
}

void write_sca_trace(std::ostream& out, const ScaResult& res) {
  out << "iter,rho,max_residual\n" << std::setprecision(17);
  for (std::size_t i = 0; i < res.rho_trace.size(); ++i)
    out << i + 1 << ',' << res.rho_trace[i] << ',' << res.residual_trace[i] << '\n';
}

}  // namespace aebs
