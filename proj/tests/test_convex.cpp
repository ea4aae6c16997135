#include "doctest.h"

#include <cmath>

#include "aebs/convex.hpp"

using namespace aebs;

TEST_SUITE("convex") {
  TEST_CASE("linear objective over a ball lands on the boundary") {
    ConvexProblem p;
    p.num_vars = 3;
    p.objective = Eigen::Vector3d(1.0, -2.0, 2.0);
    auto& ball = p.add(ConstraintTag::PowerBudget);
    ball.constant = -4.0;  // |x|^2 <= 4
    ball.quad.push_back({0, Eigen::Matrix3d::Identity()});
    const auto sol = solve_convex(p, Eigen::Vector3d::Zero());
    const Eigen::Vector3d expect = -2.0 * p.objective / p.objective.norm();
    CHECK((sol.x - expect).norm() < 1e-6);
    CHECK(sol.objective == doctest::Approx(-6.0).epsilon(1e-7));
    CHECK(p.count(ConstraintTag::PowerBudget) == 1);
  }

  TEST_CASE("log constraint: maximize x0 with x0 <= log2(1 + x1), x1 <= 3") {
    ConvexProblem p;
    p.num_vars = 2;
    p.objective = Eigen::Vector2d(-1.0, 0.0);
    auto& rate = p.add(ConstraintTag::PrivateRate);
    rate.lin[0] = 1.0;
    rate.log_index = 1;
    rate.log_coef = 1.0;
    auto& cap = p.add(ConstraintTag::Other);
    cap.lin[1] = 1.0;
    cap.constant = -3.0;
    const auto sol = solve_convex(p, Eigen::Vector2d(-1.0, 0.0));
    CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(sol.x[1] == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(sol.max_violation <= 1e-9);
  }

  TEST_CASE("an infeasible start goes through phase I") {
    ConvexProblem p;
    p.num_vars = 2;
    p.objective = Eigen::Vector2d(1.0, 1.0);
    auto& lo0 = p.add(ConstraintTag::Other);  // x0 >= 1
    lo0.lin[0] = -1.0;
    lo0.constant = 1.0;
    auto& lo1 = p.add(ConstraintTag::Other);  // x1 >= 2
    lo1.lin[1] = -1.0;
    lo1.constant = 2.0;
    auto& ball = p.add(ConstraintTag::Other);  // |x|^2 <= 25
    ball.constant = -25.0;
    ball.quad.push_back({0, Eigen::Matrix2d::Identity()});
    const auto sol = solve_convex(p, Eigen::Vector2d(-3.0, -3.0));
    CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.x[1] == doctest::Approx(2.0).epsilon(1e-6));
  }

  TEST_CASE("an empty feasible set is reported") {
    ConvexProblem p;
    p.num_vars = 1;
    p.objective = Eigen::VectorXd::Ones(1);
    auto& a = p.add(ConstraintTag::Other);  // x <= -1
    a.lin[0] = 1.0;
    a.constant = 1.0;
    auto& b = p.add(ConstraintTag::Other);  // x >= 1
    b.lin[0] = -1.0;
    b.constant = 1.0;
    CHECK_THROWS_AS(solve_convex(p, Eigen::VectorXd::Zero(1)), SubproblemInfeasible);
    CHECK_THROWS_AS(solve_convex(p, Eigen::VectorXd::Zero(2)), std::invalid_argument);
  }

  TEST_CASE("constraint gradient and Hessian match finite differences") {
    ConvexConstraint c;
    c.lin = Eigen::Vector3d(0.3, -0.1, 0.7);
    c.constant = 0.2;
    Eigen::Matrix2d q;
    q << 2.0, 0.5, 0.5, 1.0;
    c.quad.push_back({1, q});
    c.log_index = 0;
    c.log_coef = 1.5;
    const Eigen::Vector3d x(0.4, -0.2, 0.9);
    const Eigen::VectorXd g = c.gradient(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 3);
    c.add_hessian(x, 1.0, H);
    const double h = 1e-5;
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      CHECK(g[i] == doctest::Approx((c.value(xp) - c.value(xm)) / (2 * h)).epsilon(1e-6));
      const Eigen::VectorXd dg = (c.gradient(xp) - c.gradient(xm)) / (2 * h);
      for (int j = 0; j < 3; ++j) CHECK(H(j, i) == doctest::Approx(dg[j]).epsilon(1e-5));
    }
  }
}
