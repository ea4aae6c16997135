#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aebs {

class SubproblemInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Where a constraint came from in the beamforming subproblem. Used for
// counting, diagnostics and tests; the solver itself ignores it.
enum class ConstraintTag {
  CommonRate,
  PrivateRate,
  CommonSinr,
  PrivateSinr,
  CommonInterference,
  PrivateInterference,
  MinRate,
  CommonNonneg,
  PowerBudget,
  SinrFloor,
  RateFloor,
  Other,
};

const char* to_string(ConstraintTag tag);

// z[offset : offset+Q.rows()]^T Q z[...] with Q symmetric PSD.
struct QuadBlock {
  int offset = 0;
  Eigen::MatrixXd Q;
};

// g(x) = lin^T x + constant + sum_b quad_b(x) - log_coef * log2(1 + x[log_index]) <= 0.
// log_coef >= 0, so g is convex.
struct ConvexConstraint {
  ConstraintTag tag = ConstraintTag::Other;
  Eigen::VectorXd lin;
  double constant = 0.0;
  std::vector<QuadBlock> quad;
  int log_index = -1;
  double log_coef = 0.0;

  // False when x lies outside the log term's domain.
  bool in_domain(const Eigen::VectorXd& x) const;
  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  // Adds scale * Hessian to H.
  void add_hessian(const Eigen::VectorXd& x, double scale, Eigen::MatrixXd& H) const;
};

// minimize objective^T x subject to every constraint.
struct ConvexProblem {
  int num_vars = 0;
  Eigen::VectorXd objective;
  std::vector<ConvexConstraint> constraints;

  ConvexConstraint& add(ConstraintTag tag);
  int count(ConstraintTag tag) const;
  double max_violation(const Eigen::VectorXd& x) const;
};

struct BarrierOptions {
  double gap_tol = 1e-9;      // stop once m / t falls below this
  double newton_tol = 1e-9;   // Newton decrement squared / 2
  double mu = 20.0;
  double t0 = 1.0;
  int max_newton = 200;       // per centering step
  int max_outer = 60;
};

struct ConvexSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  double max_violation = 0.0;
  int newton_steps = 0;
};

// Log-barrier interior-point method with a phase-I search when the start is
// not strictly feasible. Throws SubproblemInfeasible or SolverFailure.
ConvexSolution solve_convex(const ConvexProblem& prob, const Eigen::VectorXd& start,
                            const BarrierOptions& opt = {});

}  // namespace aebs
