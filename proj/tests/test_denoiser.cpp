#include "doctest.h"

#include <filesystem>

#include "aebs/denoiser.hpp"
#include "aebs/rng.hpp"
#include "oracles.hpp"

using namespace aebs;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.time_dim = 4;
  c.init_seed = 3;
  return c;
}

GraphState sample_graph() {
  GraphState g(2, 3, 4);
  g.nodes = {1, 3};
  g.edges = {1, 0, 1, 0, 1, 1};
  return g;
}

Condition sample_condition() {
  Condition c;
  c.utility = 0.4;
  c.power_fraction = {0.5, 0.9};
  c.gu_cells = {0, 2, 3};
  return c;
}

void randomize(GraphDenoiser& m, std::uint64_t seed, double scale) {
  Rng rng = make_rng(seed);
  Eigen::VectorXd p = m.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += scale * (2.0 * uniform01(rng) - 1.0);
  m.set_parameters(p);
}

}  // namespace

TEST_SUITE("denoiser") {
  TEST_CASE("parameter count matches the closed form") {
    const DenoiserConfig c = small_config();
    GraphDenoiser m(c, 4, 2);
    CHECK(m.num_parameters() == GraphDenoiser::parameter_count(c, 4));
    DenoiserConfig big;
    CHECK(GraphDenoiser::parameter_count(big, 100) == GraphDenoiser(big, 100, 10).num_parameters());
  }

  TEST_CASE("fresh output heads predict uniform distributions") {
    GraphDenoiser m(small_config(), 4, 2);
    const CategoricalField f = m.predict(sample_graph(), 2, sample_condition());
    CHECK(f.normalized());
    CHECK((f.node.array() - 0.25).abs().maxCoeff() < 1e-12);
    CHECK((f.edge.array() - 0.5).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("log-probability gradient matches finite differences") {
    GraphDenoiser m(small_config(), 4, 2);
    randomize(m, 5, 0.3);
    const GraphState g = sample_graph();
    const Condition cond = sample_condition();
    GraphState target = g;
    target.nodes = {2, 3};
    target.edges = {0, 0, 1, 1, 1, 0};
    const TargetWeights w = TargetWeights::one_hot(target);
    Eigen::VectorXd grad;
    const double lp = m.log_prob_grad(g, 3, cond, w, &grad);
    REQUIRE(grad.size() == m.num_parameters());
    const Eigen::VectorXd p0 = m.parameters();
    const auto f = [&](const Eigen::VectorXd& p) {
      GraphDenoiser copy = m;
      copy.set_parameters(p);
      return copy.log_prob_grad(g, 3, cond, w, nullptr);
    };
    CHECK(f(p0) == doctest::Approx(lp));
    // every parameter tensor is probed through a stride over the flat vector
    Rng rng = make_rng(8);
    int worst = 0;
    double worst_err = 0.0;
    for (Eigen::Index i = 0; i < p0.size(); i += 1 + static_cast<Eigen::Index>(uniform01(rng) * 6)) {
      Eigen::VectorXd pp = p0, pm = p0;
      pp[i] += 1e-6;
      pm[i] -= 1e-6;
      const double fd = (f(pp) - f(pm)) / 2e-6;
      const double err = std::abs(fd - grad[i]) / std::max(1e-4, std::abs(fd) + std::abs(grad[i]));
      if (err > worst_err) {
        worst_err = err;
        worst = static_cast<int>(i);
      }
    }
    INFO("worst index " << worst);
    CHECK(worst_err < 1e-3);
  }

  TEST_CASE("save and load are bit-exact") {
    GraphDenoiser m(small_config(), 4, 2);
    randomize(m, 6, 0.5);
    const auto dir = std::filesystem::temp_directory_path() / "aebs_denoiser_roundtrip";
    std::filesystem::remove_all(dir);
    m.save(dir.string(), {{"note", 1}});
    nlohmann::json extra;
    const GraphDenoiser back = GraphDenoiser::load(dir.string(), &extra);
    CHECK(back.parameters() == m.parameters());
    CHECK(extra["note"] == 1);
    CHECK(back.grid() == 2);
    const CategoricalField a = m.predict(sample_graph(), 1, sample_condition());
    const CategoricalField b = back.predict(sample_graph(), 1, sample_condition());
    CHECK(a.node == b.node);
    CHECK(a.edge == b.edge);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("npy round trip and timestep embedding") {
    const auto path = (std::filesystem::temp_directory_path() / "aebs_test.npy").string();
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6.5;
    write_npy(path, m);
    CHECK(read_npy(path) == m);
    std::filesystem::remove(path);
    const Eigen::MatrixXd e = timestep_embedding(3, 8);
    CHECK(e.rows() == 1);
    CHECK(e.cols() == 8);
    CHECK(timestep_embedding(3, 8) == e);
    CHECK_FALSE(timestep_embedding(4, 8).isApprox(e));
  }

  TEST_CASE("initialization depends on the init seed") {
    DenoiserConfig a = small_config(), b = small_config();
    b.init_seed = 4;
    CHECK(GraphDenoiser(a, 4, 2).parameters() == GraphDenoiser(a, 4, 2).parameters());
    CHECK(GraphDenoiser(a, 4, 2).parameters() != GraphDenoiser(b, 4, 2).parameters());
  }
}
