#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>

#include "aebs/harness.hpp"
#include "aebs/trainer.hpp"
#include "fixtures.hpp"

using namespace aebs;

namespace {

struct Bench {
  AppConfig cfg = tiny_config();
  TrainSetup setup = make_train_setup(cfg);
  GraphDenoiser model = make_denoiser(cfg, 1);

  Bench() {
    // move off the zero-initialized heads so gradients are informative
    Eigen::VectorXd p = model.parameters();
    Rng rng = make_rng(4);
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.2 * (2.0 * uniform01(rng) - 1.0);
    model.set_parameters(p);
  }

  std::vector<Trajectory> batch(int M, std::uint64_t seed) const {
    std::vector<Trajectory> b;
    for (int m = 0; m < M; ++m) b.push_back(rollout(model, setup, derive_seed(seed, {std::uint64_t(m)})));
    return b;
  }
};

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("timestep subsets are sorted, distinct and in range") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto ts = sample_timesteps(15, 4, s);
      REQUIRE(ts.size() == 4);
      CHECK(std::set<int>(ts.begin(), ts.end()).size() == 4);
      CHECK(std::is_sorted(ts.begin(), ts.end()));
      CHECK(ts.front() >= 1);
      CHECK(ts.back() <= 15);
    }
    CHECK(sample_timesteps(5, 5, 3) == std::vector<int>{1, 2, 3, 4, 5});
  }

  TEST_CASE("rollouts have T + 1 states and a scored final graph") {
    Bench b;
    const Trajectory tr = rollout(b.model, b.setup, 11);
    REQUIRE(tr.states.size() == 4);
    const Scored s = score_graph(tr.states.back(), b.setup.env, b.setup.reward);
    CHECK(tr.reward == doctest::Approx(s.reward));
    CHECK(tr.cond.gu_cells == gu_cells(b.setup.env));
    CHECK(rollout(b.model, b.setup, 11).states.back().same_graph(tr.states.back()));
  }

  TEST_CASE("zero advantages give a zero gradient") {
    Bench b;
    auto batch = b.batch(3, 2);
    for (auto& t : batch) t.reward = 0.0;
    CHECK(eager_gradient(b.model, batch, b.setup.schedule, 2, {}, 1).norm() == 0.0);
    for (auto& t : batch) t.reward = 0.5;
    CHECK(eager_gradient(b.model, batch, b.setup.schedule, 2, {0.5, 0.5, 0.5}, 1).norm() == 0.0);
  }

  TEST_CASE("with every timestep sampled the estimator is the full sum") {
    Bench b;
    const auto batch = b.batch(2, 3);
    const int T = b.setup.schedule.steps;
    const std::vector<double> base{0.1, -0.2};
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(b.model.num_parameters()), g;
    for (int m = 0; m < 2; ++m) {
      const TargetWeights w = TargetWeights::one_hot(batch[m].states.back());
      for (int t = 1; t <= T; ++t) {
        b.model.log_prob_grad(batch[m].states[T - t], t, batch[m].cond, w, &g);
        expect += (batch[m].reward - base[m]) / 2.0 * g;
      }
    }
    const Eigen::VectorXd got = eager_gradient(b.model, batch, b.setup.schedule, T, base, 9);
    CHECK((got - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
    CHECK(expect.norm() > 0.0);
    // worker count does not change the result
    CHECK(eager_gradient(b.model, batch, b.setup.schedule, 2, base, 9, Estimator::Eager, 4) ==
          eager_gradient(b.model, batch, b.setup.schedule, 2, base, 9, Estimator::Eager, 1));
  }

  TEST_CASE("leave-one-out baselines absorb a constant reward shift") {
    TrainConfig tc;
    TrainerState st;
    const std::vector<double> r{0.3, -1.0, 0.8, 0.1};
    std::vector<double> shifted = r;
    for (double& x : shifted) x += 5.0;
    const auto b1 = step_baselines(st, tc, r), b2 = step_baselines(st, tc, shifted);
    for (int m = 0; m < 4; ++m) CHECK(shifted[m] - b2[m] == doctest::Approx(r[m] - b1[m]));
    CHECK(b1[0] == doctest::Approx((-1.0 + 0.8 + 0.1) / 3.0));
    st.baseline_ready = true;
    st.baseline = 0.25;
    CHECK(step_baselines(st, tc, r) == std::vector<double>(4, 0.25));
    tc.baseline = false;
    CHECK(step_baselines(st, tc, r).empty());
  }

  TEST_CASE("first Adam step moves each coordinate by the learning rate") {
    OptimizerState opt;
    opt.lr = 0.01;
    const Eigen::Vector3d g(2.0, -0.5, 1e-3);
    const Eigen::VectorXd d = opt.step(g);
    for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(0.01 * g[i] / (std::abs(g[i]) + 1e-8)));
    opt.kind = OptimizerKind::Sgd;
    CHECK(opt.step(g).isApprox(0.01 * g));
  }

  TEST_CASE("zero steps leave the parameters untouched") {
    Bench b;
    TrainConfig tc = b.cfg.train;
    tc.steps = 0;
    const Eigen::VectorXd before = b.model.parameters();
    const TrainResult res = train(b.model, b.setup, tc, 1);
    CHECK(res.curve.empty());
    CHECK(b.model.parameters() == before);
  }

  TEST_CASE("training is reproducible and resumes exactly") {
    const AppConfig cfg = tiny_config();
    const TrainSetup setup = make_train_setup(cfg);
    TrainConfig tc = cfg.train;
    tc.steps = 4;

    GraphDenoiser a = make_denoiser(cfg, 2), b = make_denoiser(cfg, 2);
    std::ostringstream ma, mb;
    const TrainResult ra = train(a, setup, tc, 2, {}, {&ma});
    train(b, setup, tc, 2, {}, {&mb});
    CHECK(a.parameters() == b.parameters());
    REQUIRE(ra.curve.size() == 4);
    CHECK(a.parameters() != make_denoiser(cfg, 2).parameters());

    const auto dir = std::filesystem::temp_directory_path() / "aebs_resume";
    std::filesystem::remove_all(dir);
    GraphDenoiser c = make_denoiser(cfg, 2);
    TrainConfig half = tc;
    half.steps = 2;
    const TrainResult rc = train(c, setup, half, 2);
    save_checkpoint(dir.string(), c, rc.state, {{"seed", 2}});
    TrainerState st;
    nlohmann::json extra;
    GraphDenoiser d = load_checkpoint(dir.string(), &st, &extra);
    CHECK(st.step == 2);
    CHECK(extra["seed"] == 2);
    const TrainResult rd = train(d, setup, tc, 2, st);
    CHECK(d.parameters() == a.parameters());
    REQUIRE(rd.curve.size() == 2);
    CHECK(rd.curve[1].mean_reward == ra.curve[3].mean_reward);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("metrics lines carry the documented fields") {
    Bench b;
    TrainConfig tc = b.cfg.train;
    tc.steps = 1;
    std::ostringstream out;
    int checkpoints = 0;
    tc.checkpoint_every = 1;
    train(b.model, b.setup, tc, 3, {}, {&out, [&](const TrainerState&) { ++checkpoints; }});
    const auto j = nlohmann::json::parse(out.str());
    for (const char* k : {"step", "mean_reward", "max_reward", "penalty_rates", "wall_time", "skipped"})
      CHECK(j.contains(k));
    for (const char* k : {"xi_a", "xi_m", "xi_c", "xi_r"}) CHECK(j["penalty_rates"].contains(k));
    CHECK(checkpoints == 1);
  }

  TEST_CASE("non-finite gradients are skipped, three in a row abort") {
    Bench b;
    TrainConfig tc = b.cfg.train;
    tc.steps = 5;
    int calls = 0;
    TrainHooks once;
    once.gradient_filter = [&](Eigen::VectorXd& g) {
      if (calls++ == 1) g[0] = std::numeric_limits<double>::quiet_NaN();
    };
    const TrainResult r = train(b.model, b.setup, tc, 1, {}, once);
    CHECK(r.curve[1].skipped);
    CHECK_FALSE(r.curve[2].skipped);
    CHECK(b.model.parameters().allFinite());

    TrainHooks always;
    always.gradient_filter = [](Eigen::VectorXd& g) { g.setConstant(std::numeric_limits<double>::infinity()); };
    const Eigen::VectorXd before = b.model.parameters();
    CHECK_THROWS_AS(train(b.model, b.setup, tc, 1, {}, always), std::runtime_error);
    CHECK(b.model.parameters() == before);
  }
}
