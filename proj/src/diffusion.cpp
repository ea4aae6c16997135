#include "aebs/diffusion.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <stdexcept>

namespace aebs {

double cosine_alpha_bar(int t, int steps, double offset) {
  const double c = std::cos(((static_cast<double>(t) / steps) + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
  return c * c;
}

NoiseSchedule make_schedule(int steps, int node_alphabet, Stationary stationary, double offset, double edge_density) {
  if (steps < 0) throw std::invalid_argument("schedule: negative step count");
  if (node_alphabet < 1) throw std::invalid_argument("schedule: empty node alphabet");
  NoiseSchedule s;
  s.steps = steps;
  s.alpha_bar.assign(steps + 1, 1.0);
  s.alpha.assign(steps + 1, 1.0);
  if (steps > 0) {
    const double f0 = cosine_alpha_bar(0, steps, offset);
    for (int t = 1; t <= steps; ++t) {
      s.alpha_bar[t] = std::max(0.0, cosine_alpha_bar(t, steps, offset) / f0);
      s.alpha[t] = s.alpha_bar[t - 1] > 0.0 ? s.alpha_bar[t] / s.alpha_bar[t - 1] : 0.0;
    }
  }
  s.node_stationary = Eigen::VectorXd::Constant(node_alphabet, 1.0 / node_alphabet);
  s.edge_stationary = Eigen::Vector2d(0.5, 0.5);
  if (stationary == Stationary::Marginal) s.edge_stationary = Eigen::Vector2d(1.0 - edge_density, edge_density);
  return s;
}

Eigen::VectorXd NoiseSchedule::step_row(int t, int a, const Eigen::VectorXd& m) const {
  Eigen::VectorXd r = (1.0 - alpha[t]) * m;
  r[a] += alpha[t];
  return r;
}

Eigen::VectorXd NoiseSchedule::cumulative_row(int t, int a, const Eigen::VectorXd& m) const {
  Eigen::VectorXd r = (1.0 - alpha_bar[t]) * m;
  r[a] += alpha_bar[t];
  return r;
}

void write_schedule_csv(std::ostream& out, const NoiseSchedule& s) {
  out << "t,alpha_t,alpha_bar_t\n" << std::setprecision(17);
  for (int t = 0; t <= s.steps; ++t) out << t << ',' << s.alpha[t] << ',' << s.alpha_bar[t] << '\n';
}

bool CategoricalField::normalized(double tol) const {
  for (const auto* M : {&node, &edge}) {
    if ((M->array() < 0.0).any()) return false;
    for (Eigen::Index i = 0; i < M->rows(); ++i)
      if (std::abs(M->row(i).sum() - 1.0) > tol) return false;
  }
  return true;
}

TargetWeights TargetWeights::one_hot(const GraphState& g) {
  TargetWeights w;
  w.node = Eigen::MatrixXd::Zero(g.num_nodes, g.node_alphabet);
  w.edge = Eigen::MatrixXd::Zero(g.num_edges(), 2);
  for (int k = 0; k < g.num_nodes; ++k) w.node(k, g.nodes[k]) = 1.0;
  for (int e = 0; e < g.num_edges(); ++e) w.edge(e, g.edges[e]) = 1.0;
  return w;
}

namespace {

void check_t(int t, const NoiseSchedule& s) {
  if (t < 1 || t > s.steps) throw std::out_of_range("diffusion step outside [1, T]");
}

}  // namespace

Eigen::VectorXd posterior(int x0, int xt, int t, const NoiseSchedule& s, const Eigen::VectorXd& m) {
  check_t(t, s);
  // Column xt of Q^t times row x0 of the cumulative matrix at t-1.
  const Eigen::VectorXd back = (1.0 - s.alpha[t]) * Eigen::VectorXd::Constant(m.size(), m[xt]) +
                               s.alpha[t] * Eigen::VectorXd::Unit(m.size(), xt);
  Eigen::VectorXd p = back.cwiseProduct(s.cumulative_row(t - 1, x0, m));
  const double z = p.sum();
  if (!(z > 0.0)) throw std::domain_error("posterior: zero normalizer");
  return p / z;
}

Eigen::VectorXd posterior_mixture(const Eigen::VectorXd& x0_probs, int xt, int t, const NoiseSchedule& s,
                                  const Eigen::VectorXd& m) {
  check_t(t, s);
  const Eigen::Index S = m.size();
  const double a = s.alpha[t];
  const double ab = s.alpha_bar[t - 1];
  // With A(b) = a [b == xt] + (1 - a) m_xt, the normalizer of the posterior
  // for x0 is Z(x0) = ab A(x0) + (1 - ab) m_xt.
  Eigen::VectorXd A = Eigen::VectorXd::Constant(S, (1.0 - a) * m[xt]);
  A[xt] += a;
  Eigen::VectorXd Z = ab * A + Eigen::VectorXd::Constant(S, (1.0 - ab) * m[xt]);
  double spread = 0.0;
  Eigen::VectorXd direct(S);
  for (Eigen::Index x = 0; x < S; ++x) {
    if (x0_probs[x] == 0.0) {
      direct[x] = 0.0;
      continue;
    }
    if (!(Z[x] > 0.0)) throw std::domain_error("posterior: zero normalizer");
    direct[x] = x0_probs[x] / Z[x];
    spread += direct[x];
  }
  Eigen::VectorXd out = A.cwiseProduct(ab * direct + (1.0 - ab) * spread * m);
  return out / out.sum();
}

Eigen::VectorXd posterior_weights(int target, int xt, int t, const NoiseSchedule& s, const Eigen::VectorXd& m) {
  check_t(t, s);
  const Eigen::Index S = m.size();
  const double a = s.alpha[t];
  const double ab = s.alpha_bar[t - 1];
  const double At = (target == xt ? a : 0.0) + (1.0 - a) * m[xt];
  Eigen::VectorXd w(S);
  for (Eigen::Index x = 0; x < S; ++x) {
    const double Ax = (x == xt ? a : 0.0) + (1.0 - a) * m[xt];
    const double Z = ab * Ax + (1.0 - ab) * m[xt];
    const double C = (x == target ? ab : 0.0) + (1.0 - ab) * m[target];
    w[x] = Z > 0.0 ? At * C / Z : 0.0;
  }
  return w;
}

int sample_categorical(const Eigen::VectorXd& p, Rng& rng) {
  const double u = uniform01(rng) * p.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u at the very top; return the last category with mass.
  for (Eigen::Index i = p.size() - 1; i >= 0; --i)
    if (p[i] > 0.0) return static_cast<int>(i);
  throw std::domain_error("sample_categorical: no mass");
}

GraphState sample_stationary(int num_nodes, int num_gus, const NoiseSchedule& s, std::uint64_t seed) {
  GraphState g(num_nodes, num_gus, s.node_alphabet());
  Rng rng = make_rng(seed, {0x5354ULL});
  for (auto& v : g.nodes) v = sample_categorical(s.node_stationary, rng);
  for (auto& e : g.edges) e = static_cast<std::uint8_t>(sample_categorical(s.edge_stationary, rng));
  g.t = s.steps;
  return g;
}

GraphState forward_sample(const GraphState& g0, int t, const NoiseSchedule& s, std::uint64_t seed) {
  check_t(t, s);
  GraphState g = g0;
  Rng rng = make_rng(seed, {0x4657ULL, static_cast<std::uint64_t>(t)});
  for (auto& v : g.nodes) v = sample_categorical(s.cumulative_row(t, v, s.node_stationary), rng);
  for (auto& e : g.edges) e = static_cast<std::uint8_t>(sample_categorical(s.cumulative_row(t, e, s.edge_stationary), rng));
  g.t = t;
  return g;
}

GraphState denoise_step(const GraphState& gt, const CategoricalField& pred, int t, const NoiseSchedule& s,
                        std::uint64_t seed) {
  check_t(t, s);
  if (pred.node.rows() != gt.num_nodes || pred.edge.rows() != gt.num_edges() ||
      pred.node.cols() != gt.node_alphabet || pred.edge.cols() != 2)
    throw std::invalid_argument("denoise_step: prediction shape");
  if (!pred.normalized(1e-6)) throw std::invalid_argument("denoise_step: predictions must be normalized");
  GraphState g = gt;
  Rng rng = make_rng(seed, {0x444eULL, static_cast<std::uint64_t>(t)});
  for (int k = 0; k < g.num_nodes; ++k)
    g.nodes[k] = sample_categorical(posterior_mixture(pred.node.row(k).transpose(), gt.nodes[k], t, s, s.node_stationary), rng);
  for (int e = 0; e < g.num_edges(); ++e)
    g.edges[e] = static_cast<std::uint8_t>(
        sample_categorical(posterior_mixture(pred.edge.row(e).transpose(), gt.edges[e], t, s, s.edge_stationary), rng));
  g.t = t - 1;
  return g;
}

std::vector<GraphState> sample_trajectory(const DenoiserModel& model, const NoiseSchedule& s, int num_nodes,
                                          int num_gus, const Condition& cond, std::uint64_t seed) {
  std::vector<GraphState> traj;
  traj.reserve(s.steps + 1);
  traj.push_back(sample_stationary(num_nodes, num_gus, s, derive_seed(seed, {0ULL})));
  for (int t = s.steps; t >= 1; --t) {
    const CategoricalField pred = model.predict(traj.back(), t, cond);
    traj.push_back(denoise_step(traj.back(), pred, t, s, derive_seed(seed, {1ULL, static_cast<std::uint64_t>(t)})));
  }
  return traj;
}

TargetWeights step_weights(const GraphState& prev, const GraphState& gt, int t, const NoiseSchedule& s) {
  TargetWeights w;
  w.node.resize(gt.num_nodes, gt.node_alphabet);
  w.edge.resize(gt.num_edges(), 2);
  for (int k = 0; k < gt.num_nodes; ++k)
    w.node.row(k) = posterior_weights(prev.nodes[k], gt.nodes[k], t, s, s.node_stationary).transpose();
  for (int e = 0; e < gt.num_edges(); ++e)
    w.edge.row(e) = posterior_weights(prev.edges[e], gt.edges[e], t, s, s.edge_stationary).transpose();
  return w;
}

double forward_tv_to_stationary(int t, const NoiseSchedule& s) {
  double worst = 0.0;
  for (const auto* m : {&s.node_stationary, &s.edge_stationary})
    for (Eigen::Index a = 0; a < m->size(); ++a)
      worst = std::max(worst, 0.5 * (s.cumulative_row(t, static_cast<int>(a), *m) - *m).cwiseAbs().sum());
  return worst;
}

}  // namespace aebs
