#include "doctest.h"

#include <filesystem>

#include "aebs/harness.hpp"
#include "aebs/orchestrator.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aebs;

namespace {

struct Bench {
  AppConfig cfg = tiny_config();
  GraphDenoiser model = make_denoiser(cfg, 1);
  Environment env = solve_environment(cfg, 7);
  NoiseSchedule schedule = make_train_setup(cfg).schedule;
};

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("heuristic start assigns each GU to its nearest AeBS") {
    Bench b;
    const GraphState g = heuristic_graph(b.env, 2);
    REQUIRE(g.valid());
    const auto [p, a] = decode(g, b.env.net, b.env.grid);
    for (int n = 0; n < b.env.net.num_gus; ++n) {
      REQUIRE(a.column_sum(n) == 1);
      const int k = a.server_of(n);
      CHECK(horizontal_distance(p.positions[k], b.env.gus[n]) <=
            horizontal_distance(p.positions[1 - k], b.env.gus[n]) + 1e-9);
    }
  }

  TEST_CASE("alternation trace and incumbent") {
    Bench b;
    SolveOptions opt = solve_options(b.cfg);
    opt.k_max = 1;
    opt.tau = 0.0;
    const AlternateResult one = alternate(b.model, b.schedule, b.env, opt, 3);
    REQUIRE(one.trace.size() == 2);
    CHECK(one.trace[0].k == 0);
    CHECK(one.trace[0].accepted);

    opt.k_max = 4;
    const AlternateResult res = alternate(b.model, b.schedule, b.env, opt, 3);
    double best = -1e300;
    for (const auto& r : res.trace) {
      if (r.accepted) {
        CHECK(r.reward > best);
        best = r.reward;
      } else {
        CHECK(r.reward <= best);
      }
    }
    CHECK(res.eval.reward == doctest::Approx(best));
    CHECK(res.best.utility == doctest::Approx(res.eval.rates.utility));
  }

  TEST_CASE("reported metrics survive a JSON round trip") {
    Bench b;
    SolveOptions opt = solve_options(b.cfg);
    opt.k_max = 1;
    const AlternateResult res = alternate(b.model, b.schedule, b.env, opt, 4);
    const auto j = solution_to_json(res.best, res.eval);
    const SolutionBundle back = solution_from_json(j);
    const Evaluation ev = evaluate(back, b.env);
    CHECK(std::abs(ev.rates.utility - res.eval.rates.utility) < 1e-9);
    CHECK(ev.feasible == res.eval.feasible);
    CHECK(back.feasible == res.best.feasible);
    CHECK(back.decided == res.best.decided);
    CHECK(j["format"] == "aebs-solution/1");
    const auto oa = oracle::audit_c5_c7_c8(back.assoc, b.env.channels(back.placement), back.resources, b.env.net, 1e-6);
    CHECK(oa.c8 == ev.rates.c8_ok);
  }

  TEST_CASE("zero precoders leave only the coverage term") {
    Bench b;
    const GraphState g = heuristic_graph(b.env, 2);
    auto [p, a] = decode(g, b.env.net, b.env.grid);
    SolutionBundle sol;
    sol.placement = p;
    sol.decided = a;
    sol.assoc = served_subset(p, a, b.env.gus, b.env.net);
    sol.resources = ResourceSolution::zeros(2, b.env.net.num_gus, b.env.net.num_antennas);
    const Evaluation ev = evaluate(sol, b.env);
    CHECK(ev.rates.sum_rate == 0.0);
    CHECK(ev.rates.utility == doctest::Approx(b.env.net.lambda1 * coverage(sol.assoc)));
    CHECK_FALSE(ev.feasible);  // nobody reaches the rate floor
  }

  TEST_CASE("a GU with two servers is flagged and not served") {
    Bench b;
    const GraphState g = heuristic_graph(b.env, 2);
    auto [p, a] = decode(g, b.env.net, b.env.grid);
    a.set(0, 0, true);
    a.set(1, 0, true);
    const SolutionBundle sol = solve_resources(p, a, b.env, solve_options(b.cfg).sca, true);
    CHECK(sol.assoc.column_sum(0) == 0);
    const Evaluation ev = evaluate(sol, b.env);
    CHECK(ev.audit.xi_a == 1);
    CHECK_FALSE(ev.audit.c1_ok);
    CHECK_FALSE(ev.feasible);
    CHECK(ev.reward == doctest::Approx(ev.rates.utility - 1.0 - ev.audit.xi_m - ev.audit.xi_c - ev.audit.xi_r));
  }

  TEST_CASE("run directory contents") {
    Bench b;
    SolveOptions opt = solve_options(b.cfg);
    opt.k_max = 1;
    const AlternateResult res = alternate(b.model, b.schedule, b.env, opt, 5);
    const auto dir = std::filesystem::temp_directory_path() / "aebs_run_dir";
    std::filesystem::remove_all(dir);
    write_run(dir.string(), b.cfg, 5, res);
    for (const char* f : {"config.json", "seed.txt", "trace.jsonl", "solution.json", "rates.csv"})
      CHECK(std::filesystem::exists(dir / f));
    std::filesystem::remove_all(dir);
  }
}
