#include "doctest.h"

#include "aebs/graph_mdp.hpp"

using namespace aebs;

TEST_SUITE("graph_mdp") {
  TEST_CASE("cell index decodes to row-major cell centers") {
    NetworkConfig c;
    GraphState g(3, 0, 100);
    g.nodes = {0, 99, 23};
    const auto [p, a] = decode(g, c, 10);
    CHECK(p.positions[0].x == doctest::Approx(50.0));
    CHECK(p.positions[0].y == doctest::Approx(50.0));
    CHECK(p.positions[1].x == doctest::Approx(950.0));
    CHECK(p.positions[1].y == doctest::Approx(950.0));
    CHECK(p.positions[2].x == doctest::Approx(350.0));
    CHECK(p.positions[2].y == doctest::Approx(250.0));
    CHECK(p.positions[2].z == doctest::Approx(c.altitude));
    CHECK(cell_of({350.0, 250.0}, 10, c) == 23);
    CHECK(cell_of({-5.0, 2000.0}, 10, c) == 90);
    g.nodes[0] = 100;
    CHECK_THROWS(decode(g, c, 10));
  }

  TEST_CASE("encode inverts decode and JSON round-trips") {
    NetworkConfig c;
    GraphState g(2, 3, 100);
    g.nodes = {7, 64};
    g.set_edge(0, 0, 1);
    g.set_edge(1, 2, 1);
    g.set_edge(0, 1, 1);
    const auto [p, a] = decode(g, c, 10);
    CHECK(encode(p, a, c, 10).same_graph(g));
    CHECK(graph_from_json(graph_to_json(g)).same_graph(g));
    CHECK(a(0, 1));
    CHECK_FALSE(a(1, 1));
  }

  TEST_CASE("co-located AeBSs cost exactly the collision weight") {
    Environment env;
    env.net.num_aebs = 2;
    env.net.num_gus = 4;
    env.net.num_antennas = 2;
    env.gus = {{40, 40}, {60, 40}, {40, 60}, {60, 60}};
    env.channel_seed = 5;
    GraphState g(2, 4, 100);
    g.nodes = {0, 0};
    g.set_edge(0, 0, 1);
    g.set_edge(0, 1, 1);
    g.set_edge(1, 2, 1);
    g.set_edge(1, 3, 1);
    RewardOptions opt;
    const Scored s = score_graph(g, env, opt);
    CHECK(s.audit.xi_c == 1);
    CHECK(s.audit.xi_a == 0);
    CHECK(s.audit.xi_m == 0);
    CHECK(s.audit.xi_r == 0);
    CHECK(s.reward == doctest::Approx(s.utility - 1.0));
    CHECK(s.coverage == 1.0);
    opt.omega = {1, 1, 3, 1};
    CHECK(reward(g, env, opt) == doctest::Approx(s.utility - 3.0));

    g.nodes = {0, 11};
    const Scored apart = score_graph(g, env, RewardOptions{});
    CHECK(apart.audit.all_clear());
    CHECK(apart.reward == doctest::Approx(apart.utility));
  }

  TEST_CASE("infeasible candidates are scored on the served subset") {
    Environment env;
    env.net.num_aebs = 2;
    env.net.num_gus = 3;
    env.net.num_antennas = 2;
    env.gus = {{50, 50}, {60, 60}, {900, 900}};
    GraphState g(2, 3, 100);
    g.nodes = {0, 11};
    g.set_edge(0, 0, 1);
    g.set_edge(1, 0, 1);  // multi-assigned
    g.set_edge(0, 1, 1);
    g.set_edge(1, 2, 1);  // out of range
    const Scored s = score_graph(g, env, RewardOptions{});
    CHECK(s.audit.xi_a == 1);
    CHECK(s.audit.xi_r == 1);
    CHECK(s.assoc.column_sum(0) == 0);
    CHECK(s.assoc(0, 1));
    CHECK(s.assoc.column_sum(2) == 0);
    CHECK(s.coverage == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("only the last transition carries the reward") {
    std::vector<GraphState> traj(4, GraphState(1, 1, 4));
    const auto tr = make_transitions(traj, 0.7);
    REQUIRE(tr.size() == 3);
    CHECK(tr[0].reward == 0.0);
    CHECK(tr[1].reward == 0.0);
    CHECK(tr[2].reward == 0.7);
    CHECK(trajectory_return(tr) == doctest::Approx(0.7));
    CHECK_THROWS_AS(trajectory_return({}), std::invalid_argument);
    CHECK_THROWS_AS(make_transitions({traj[0]}, 1.0), std::invalid_argument);
  }
}
