#include "doctest.h"

#include <cmath>

#include "aebs/baselines.hpp"
#include "aebs/harness.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aebs;

TEST_SUITE("baselines") {
  TEST_CASE("random policy respects the power budget and decodability") {
    const AppConfig cfg = tiny_config();
    const Environment env = solve_environment(cfg, 2);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const SolutionBundle sol = random_policy(env, s);
      const auto oa = oracle::audit_c5_c7_c8(sol.assoc, env.channels(sol.placement), sol.resources, env.net, 1e-6);
      CHECK(oa.c5);
      CHECK(oa.c7);
      CHECK(oa.c8);
      for (int n = 0; n < env.net.num_gus; ++n) CHECK(sol.assoc.column_sum(n) <= 1);
    }
    const SolutionBundle a = random_policy(env, 4), b = random_policy(env, 4);
    CHECK(a.decided == b.decided);
    CHECK(a.resources.common_split == b.resources.common_split);
    const SolutionBundle sd = random_policy(env, 4, false);
    for (const auto& c : sd.resources.common) CHECK(c.norm() == 0.0);
    CHECK_NOTHROW(sdma_rate_report(sd.assoc, env.channels(sd.placement), sd.resources, env.net));
  }

  TEST_CASE("untrained direct policy is uniform") {
    const DirectPolicy p(2, 4, 9, 16, 3);
    GraphState g(2, 4, 9);
    g.nodes = {3, 8};
    g.edges = {1, 0, 0, 1, 1, 1, 0, 0};
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0);
    CHECK(p.log_prob_grad(g, x, nullptr) == doctest::Approx(-2.0 * std::log(9.0) - 8.0 * std::log(2.0)));
  }

  TEST_CASE("direct policy gradient matches finite differences") {
    DirectPolicy p(2, 3, 4, 5, 1);
    Eigen::VectorXd theta = p.parameters();
    Rng rng = make_rng(2);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += 0.5 * (2.0 * uniform01(rng) - 1.0);
    p.set_parameters(theta);
    GraphState g(2, 3, 4);
    g.nodes = {1, 2};
    g.edges = {1, 0, 1, 0, 1, 1};
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -0.8, 0.9);
    Eigen::VectorXd grad;
    p.log_prob_grad(g, x, &grad);
    const auto f = [&](const Eigen::VectorXd& v) {
      DirectPolicy q = p;
      q.set_parameters(v);
      return q.log_prob_grad(g, x, nullptr);
    };
    const Eigen::VectorXd fd = oracle::finite_difference(f, theta, 1e-6);
    CHECK((fd - grad).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("direct policy training is reproducible") {
    const AppConfig cfg = tiny_config();
    const TrainSetup setup = make_train_setup(cfg);
    DirectPolicy a(2, 4, 9, 8, 1), b(2, 4, 9, 8, 1);
    const TrainResult ra = train_direct(a, setup, cfg.train, 5);
    train_direct(b, setup, cfg.train, 5);
    CHECK(ra.curve.size() == static_cast<std::size_t>(cfg.train.steps));
    CHECK(a.parameters() == b.parameters());
    CHECK(a.parameters() != DirectPolicy(2, 4, 9, 8, 1).parameters());
  }

  TEST_CASE("SDMA pipeline never uses a common stream") {
    const AppConfig cfg = tiny_config();
    const GraphDenoiser model = make_denoiser(cfg, 1);
    SolveOptions opt = solve_options(cfg);
    opt.k_max = 1;
    const AlternateResult res =
        sdma_pipeline(model, make_train_setup(cfg).schedule, solve_environment(cfg, 3), opt, 3);
    CHECK_FALSE(res.best.rsma);
    for (const auto& c : res.best.resources.common) CHECK(c.norm() == 0.0);
    for (double r : res.best.resources.common_split) CHECK(r == 0.0);
  }
}
