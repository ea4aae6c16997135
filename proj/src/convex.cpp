#include "aebs/convex.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace aebs {

const char* to_string(ConstraintTag tag) {
  switch (tag) {
    case ConstraintTag::CommonRate: return "common_rate";
    case ConstraintTag::PrivateRate: return "private_rate";
    case ConstraintTag::CommonSinr: return "common_sinr";
    case ConstraintTag::PrivateSinr: return "private_sinr";
    case ConstraintTag::CommonInterference: return "common_interference";
    case ConstraintTag::PrivateInterference: return "private_interference";
    case ConstraintTag::MinRate: return "min_rate";
    case ConstraintTag::CommonNonneg: return "common_nonneg";
    case ConstraintTag::PowerBudget: return "power_budget";
    case ConstraintTag::SinrFloor: return "sinr_floor";
    case ConstraintTag::RateFloor: return "rate_floor";
    case ConstraintTag::Other: return "other";
  }
  return "?";
}

bool ConvexConstraint::in_domain(const Eigen::VectorXd& x) const {
  return log_index < 0 || 1.0 + x[log_index] > 0.0;
}

double ConvexConstraint::value(const Eigen::VectorXd& x) const {
  double v = lin.dot(x) + constant;
  for (const auto& b : quad) {
    const auto z = x.segment(b.offset, b.Q.rows());
    v += z.dot(b.Q * z);
  }
  if (log_index >= 0) v -= log_coef * std::log2(1.0 + x[log_index]);
  return v;
}

Eigen::VectorXd ConvexConstraint::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = lin;
  for (const auto& b : quad) g.segment(b.offset, b.Q.rows()) += 2.0 * (b.Q * x.segment(b.offset, b.Q.rows()));
  if (log_index >= 0) g[log_index] -= log_coef / ((1.0 + x[log_index]) * std::numbers::ln2);
  return g;
}

void ConvexConstraint::add_hessian(const Eigen::VectorXd& x, double scale, Eigen::MatrixXd& H) const {
  for (const auto& b : quad) H.block(b.offset, b.offset, b.Q.rows(), b.Q.cols()) += 2.0 * scale * b.Q;
  if (log_index >= 0) {
    const double u = 1.0 + x[log_index];
    H(log_index, log_index) += scale * log_coef / (u * u * std::numbers::ln2);
  }
}

ConvexConstraint& ConvexProblem::add(ConstraintTag tag) {
  ConvexConstraint c;
  c.tag = tag;
  c.lin = Eigen::VectorXd::Zero(num_vars);
  constraints.push_back(std::move(c));
  return constraints.back();
}

int ConvexProblem::count(ConstraintTag tag) const {
  int n = 0;
  for (const auto& c : constraints) n += c.tag == tag;
  return n;
}

double ConvexProblem::max_violation(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (const auto& c : constraints) {
    if (!c.in_domain(x)) return std::numeric_limits<double>::infinity();
    v = std::max(v, c.value(x));
  }
  return v;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Barrier objective t c^T x - sum log(-g_i); +inf outside the strict interior.
double barrier_value(const ConvexProblem& p, const Eigen::VectorXd& x, double t) {
  double v = t * p.objective.dot(x);
  for (const auto& c : p.constraints) {
    if (!c.in_domain(x)) return kInf;
    const double g = c.value(x);
    if (!(g < 0.0)) return kInf;
    v -= std::log(-g);
  }
  return v;
}

// Newton centering. Returns the number of steps taken; `stop` may end the
// iteration early (phase I).
int center(const ConvexProblem& p, Eigen::VectorXd& x, double t, const BarrierOptions& opt,
           const std::function<bool(const Eigen::VectorXd&)>& stop) {
  const int n = p.num_vars;
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd grad(n);
  int steps = 0;
  for (; steps < opt.max_newton; ++steps) {
    H.setZero();
    grad = t * p.objective;
    for (const auto& c : p.constraints) {
      const double g = c.value(x);
      const Eigen::VectorXd dg = c.gradient(x);
      grad -= dg / g;
      H.selfadjointView<Eigen::Lower>().rankUpdate(dg, 1.0 / (g * g));
      c.add_hessian(x, -1.0 / g, H);
    }
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();

    // Symmetric diagonal scaling keeps the factorization accurate when the
    // variables live on very different scales.
    Eigen::VectorXd d = H.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd Hs = d.asDiagonal() * H * d.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
    Eigen::VectorXd dx = d.asDiagonal() * ldlt.solve(-(d.asDiagonal() * grad));
    if (ldlt.info() != Eigen::Success || !dx.allFinite()) {
      Hs.diagonal().array() += 1e-10;
      dx = d.asDiagonal() * Eigen::LDLT<Eigen::MatrixXd>(Hs).solve(-(d.asDiagonal() * grad));
      if (!dx.allFinite()) throw SolverFailure("barrier: singular Newton system");
    }
    const double slope = grad.dot(dx);
    if (-slope / 2.0 < opt.newton_tol) break;

    const double f0 = barrier_value(p, x, t);
    double s = 1.0;
    Eigen::VectorXd xn = x + dx;
    double fn = barrier_value(p, xn, t);
    while (!(fn <= f0 + 0.25 * s * slope) && s > 1e-16) {
      s *= 0.5;
      xn = x + s * dx;
      fn = barrier_value(p, xn, t);
    }
    if (!(fn <= f0 + 0.25 * s * slope)) {
      // No representable decrease left; accept a strictly better point if we
      // found one, otherwise we are at the numerical optimum of this center.
      if (fn < f0) x = xn;
      break;
    }
    x = xn;
    if (stop && stop(x)) return steps + 1;
    // Progress below rounding of the barrier value: centered as well as
    // double precision allows at this t.
    if (f0 - fn <= 1e-14 * std::max(1.0, std::abs(f0))) return steps + 1;
  }
  return steps;
}

bool strictly_feasible(const ConvexProblem& p, const Eigen::VectorXd& x) {
  for (const auto& c : p.constraints)
    if (!c.in_domain(x) || !(c.value(x) < 0.0)) return false;
  return true;
}

// Finds a strictly feasible point by minimizing s subject to g_i(x) <= s.
Eigen::VectorXd phase_one(const ConvexProblem& p, const Eigen::VectorXd& start, const BarrierOptions& opt,
                          int& steps) {
  const int n = p.num_vars;
  ConvexProblem aux;
  aux.num_vars = n + 1;
  aux.objective = Eigen::VectorXd::Zero(n + 1);
  aux.objective[n] = 1.0;
  double worst = 0.0;
  for (const auto& c : p.constraints) {
    if (!c.in_domain(start)) throw SolverFailure("phase I: start outside the domain");
    ConvexConstraint a = c;
    a.lin.conservativeResize(n + 1);
    a.lin[n] = -1.0;
    aux.constraints.push_back(std::move(a));
    worst = std::max(worst, c.value(start));
  }
  // Keeps the auxiliary problem bounded below.
  auto& floor = aux.add(ConstraintTag::Other);
  floor.lin[n] = -1.0;
  floor.constant = -1.0;

  Eigen::VectorXd z(n + 1);
  z.head(n) = start;
  z[n] = worst + 1.0;
  const auto done = [n](const Eigen::VectorXd& v) { return v[n] < 0.0; };
  double t = opt.t0;
  const int m = static_cast<int>(aux.constraints.size());
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    steps += center(aux, z, t, opt, done);
    if (z[n] < 0.0) return z.head(n);
    if (m / t < opt.gap_tol) break;
    t *= opt.mu;
  }
  throw SubproblemInfeasible("no strictly feasible point (phase I optimum " + std::to_string(z[n]) + ")");
}

}  // namespace

ConvexSolution solve_convex(const ConvexProblem& prob, const Eigen::VectorXd& start, const BarrierOptions& opt) {
  if (start.size() != prob.num_vars || prob.objective.size() != prob.num_vars)
    throw std::invalid_argument("solve_convex: dimension mismatch");
  ConvexSolution out;
  Eigen::VectorXd x = start;
  if (!strictly_feasible(prob, x)) x = phase_one(prob, start, opt, out.newton_steps);

  const int m = static_cast<int>(prob.constraints.size());
  double t = opt.t0;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const int st = center(prob, x, t, opt, {});
    out.newton_steps += st;
    if (m == 0 || m / t < opt.gap_tol) break;
    t *= opt.mu;
  }
  if (!x.allFinite()) throw SolverFailure("barrier: non-finite iterate");
  out.x = x;
  out.objective = prob.objective.dot(x);
  out.max_violation = prob.max_violation(x);
  return out;
}

}  // namespace aebs
