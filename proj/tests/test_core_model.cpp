#include "doctest.h"

#include "aebs/core_model.hpp"

using namespace aebs;

namespace {

NetworkConfig small_net() {
  NetworkConfig c;
  c.num_aebs = 2;
  c.num_gus = 4;
  return c;
}

}  // namespace

TEST_SUITE("core_model") {
  TEST_CASE("distance includes the flight altitude") {
    const NetworkConfig c = small_net();
    const Placement p = make_placement({{0.0, 0.0}}, c);
    const GuPositions gus{{30.0, 40.0}};
    CHECK(horizontal_distance(p.positions[0], gus[0]) == doctest::Approx(50.0));
    CHECK(distance(p, gus, 0, 0) == doctest::Approx(std::sqrt(50.0 * 50.0 + 50.0 * 50.0)));
    CHECK_THROWS_AS(distance(p, gus, 1, 0), std::out_of_range);
  }

  TEST_CASE("coverage counts served GUs and utility mixes coverage and normalized rate") {
    const NetworkConfig c = small_net();
    Association a(2, 4);
    a.set(0, 0, true);
    a.set(1, 2, true);
    CHECK(coverage(a) == doctest::Approx(0.5));
    CHECK(utility(0.5, 4.0, c) == doctest::Approx(c.lambda1 * 0.5 + c.lambda2 * 4.0 / c.rate_norm()));
    CHECK(a.server_of(0) == 0);
    CHECK(a.server_of(1) == -1);
    a.set(1, 0, true);
    CHECK(a.server_of(0) == -1);
    CHECK(a.column_sum(0) == 2);
  }

  TEST_CASE("audit flags each constraint family") {
    const NetworkConfig c = small_net();
    const GuPositions gus{{100, 100}, {110, 100}, {800, 800}, {810, 800}};
    const Placement p = make_placement({{100, 100}, {800, 800}}, c);
    Association a(2, 4);
    a.set(0, 0, true);
    a.set(0, 1, true);
    a.set(1, 2, true);
    a.set(1, 3, true);
    CHECK(audit_constraints(p, a, gus, c).all_clear());

    SUBCASE("multi-assigned GU") {
      Association b = a;
      b.set(1, 0, true);
      const auto r = audit_constraints(p, b, gus, c);
      CHECK_FALSE(r.c1_ok);
      CHECK(r.xi_a == 1);
    }
    SUBCASE("AeBS with a single GU") {
      Association b = a;
      b.set(0, 1, false);
      b.set(1, 1, true);
      const auto r = audit_constraints(p, b, gus, c);
      CHECK_FALSE(r.c2_ok);
      CHECK(r.xi_a == 1);
      CHECK(r.xi_r == 1);  // GU 1 is far from AeBS 1
    }
    SUBCASE("outside the area") {
      const Placement q = make_placement({{-5, 100}, {800, 800}}, c);
      CHECK(audit_constraints(q, a, gus, c).xi_m == 1);
    }
    SUBCASE("collision") {
      const Placement q = make_placement({{100, 100}, {105, 100}}, c);
      const auto r = audit_constraints(q, a, gus, c);
      CHECK(r.xi_c == 1);
    }
    SUBCASE("range") {
      const Placement q = make_placement({{100, 100}, {500, 800}}, c);
      const auto r = audit_constraints(q, a, gus, c);
      CHECK(r.xi_r == 1);
      const Association s = served_subset(q, a, gus, c);
      CHECK(s.row_sum(1) == 0);
      CHECK(s.row_sum(0) == 2);
    }
  }

  TEST_CASE("GU drops are reproducible and stay in the area") {
    NetworkConfig c = small_net();
    c.num_gus = 40;
    for (auto layout : {GuLayout::Uniform, GuLayout::Clustered}) {
      ScenarioConfig s;
      s.layout = layout;
      s.seed = 9;
      const auto a = generate_gu_positions(c, s);
      const auto b = generate_gu_positions(c, s);
      REQUIRE(a.size() == 40);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].x >= c.x_min);
        CHECK(a[i].x <= c.x_max);
        CHECK(a[i].y >= c.y_min);
        CHECK(a[i].y <= c.y_max);
      }
    }
  }

  TEST_CASE("drop_multi_assigned keeps single-server GUs only") {
    Association a(2, 3);
    a.set(0, 0, true);
    a.set(1, 0, true);
    a.set(1, 1, true);
    const Association d = drop_multi_assigned(a);
    CHECK(d.column_sum(0) == 0);
    CHECK(d(1, 1));
    CHECK(d.column_sum(2) == 0);
  }
}
