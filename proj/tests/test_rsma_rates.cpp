#include "doctest.h"

#include <sstream>

#include "aebs/rsma_rates.hpp"
#include "aebs/rng.hpp"
#include "oracles.hpp"

using namespace aebs;

namespace {

Eigen::VectorXcd random_vec(Rng& rng, int n, double scale) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = {scale * (uniform01(rng) - 0.5), scale * (uniform01(rng) - 0.5)};
  return v;
}

}  // namespace

TEST_SUITE("rsma_rates") {
  TEST_CASE("inverse Gaussian tail matches bisection") {
    for (double eps : {1e-2, 1e-3, 1e-5, 1e-7}) CHECK(q_inv(eps) == doctest::Approx(oracle::q_inv(eps)).epsilon(1e-10));
    CHECK(std::abs(q_inv(1e-5) - 4.26489) < 1e-4);
  }

  TEST_CASE("finite-blocklength rate pinpoint and clamp") {
    CHECK(std::abs(fbl_rate(1.0, 1000, 1e-5) - 0.8315) < 1e-4);
    for (double g : {0.05, 0.5, 3.0, 40.0})
      CHECK(fbl_rate_raw(g, 1000, 1e-5) == doctest::Approx(oracle::fbl(g, 1000, 1e-5)).epsilon(1e-10));
    CHECK(fbl_rate_raw(1e-4, 1000, 1e-5) < 0.0);
    CHECK(fbl_rate(1e-4, 1000, 1e-5) == 0.0);
    CHECK(fbl_rate(0.0, 1000, 1e-5) == 0.0);
  }

  TEST_CASE("SINRs and C5/C7/C8 flags agree with a direct computation") {
    NetworkConfig c;
    c.num_aebs = 2;
    c.num_gus = 4;
    c.num_antennas = 2;
    Rng rng = make_rng(3);
    std::vector<Eigen::VectorXcd> h;
    for (int i = 0; i < 8; ++i) h.push_back(random_vec(rng, 2, 1e-5));
    const auto ch = channels_from_vectors(2, 4, h);
    Association a(2, 4);
    a.set(0, 0, true);
    a.set(0, 1, true);
    a.set(1, 2, true);
    a.set(1, 3, true);
    ResourceSolution s = ResourceSolution::zeros(2, 4, 2);
    for (int k = 0; k < 2; ++k) s.common[k] = random_vec(rng, 2, 0.05);
    for (int n = 0; n < 4; ++n) s.private_precoder[n] = random_vec(rng, 2, 0.05);
    const auto ref = oracle::sinrs(a, ch, s, c.noise_w);
    for (int n = 0; n < 4; ++n) {
      const int k = n < 2 ? 0 : 1;
      CHECK(sinr_common(k, n, a, ch, s, c) == doctest::Approx(ref.common[n]).epsilon(1e-12));
      CHECK(sinr_private(k, n, a, ch, s, c) == doctest::Approx(ref.priv[n]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(sinr_common(1, 0, a, ch, s, c), std::domain_error);

    RateReport rep = rate_report(a, ch, s, c);
    auto audit = oracle::audit_c5_c7_c8(a, ch, s, c, 1e-6);
    CHECK(rep.c5_ok == audit.c5);
    CHECK(rep.c8_ok == audit.c8);
    CHECK(rep.c7_ok);

    // push the common split over the decodable rate and the power over budget
    s.common_split[0] = rep.common_cap[0] + 1.0;
    s.common_split[3] = -0.5;
    s.private_precoder[2] *= 100.0;
    rep = rate_report(a, ch, s, c);
    audit = oracle::audit_c5_c7_c8(a, ch, s, c, 1e-6);
    CHECK_FALSE(rep.c5_ok);
    CHECK_FALSE(audit.c5);
    CHECK_FALSE(rep.c7_ok);
    CHECK_FALSE(audit.c7);
    CHECK_FALSE(rep.c8_ok);
    CHECK_FALSE(audit.c8);
  }

  TEST_CASE("zero precoders leave only the coverage term") {
    NetworkConfig c;
    c.num_aebs = 1;
    c.num_gus = 2;
    c.num_antennas = 2;
    const auto ch = channels_from_vectors(1, 2, {Eigen::VectorXcd::Ones(2), Eigen::VectorXcd::Ones(2)});
    Association a(1, 2);
    a.set(0, 0, true);
    a.set(0, 1, true);
    const RateReport rep = rate_report(a, ch, ResourceSolution::zeros(1, 2, 2), c);
    CHECK(rep.sum_rate == 0.0);
    CHECK(rep.utility == doctest::Approx(c.lambda1 * 1.0));
    Association multi(2, 2);
    multi.set(0, 0, true);
    multi.set(1, 0, true);
    const auto ch2 = channels_from_vectors(2, 2, std::vector<Eigen::VectorXcd>(4, Eigen::VectorXcd::Ones(2)));
    CHECK_THROWS_AS(rate_report(multi, ch2, ResourceSolution::zeros(2, 2, 2), c), std::invalid_argument);
  }

  TEST_CASE("SDMA report rejects common-stream resources") {
    NetworkConfig c;
    c.num_aebs = 1;
    c.num_gus = 2;
    c.num_antennas = 2;
    const auto ch = channels_from_vectors(1, 2, {Eigen::VectorXcd::Ones(2), Eigen::VectorXcd::Ones(2)});
    Association a(1, 2);
    a.set(0, 0, true);
    a.set(0, 1, true);
    ResourceSolution s = ResourceSolution::zeros(1, 2, 2);
    CHECK_NOTHROW(sdma_rate_report(a, ch, s, c));
    s.common[0][0] = 0.1;
    CHECK_THROWS_AS(sdma_rate_report(a, ch, s, c), std::invalid_argument);
    s.common[0].setZero();
    s.common_split[1] = 0.2;
    CHECK_THROWS_AS(sdma_rate_report(a, ch, s, c), std::invalid_argument);
  }

  TEST_CASE("rate CSV has one row per GU") {
    NetworkConfig c;
    c.num_aebs = 1;
    c.num_gus = 3;
    c.num_antennas = 1;
    const auto ch = channels_from_vectors(1, 3, std::vector<Eigen::VectorXcd>(3, Eigen::VectorXcd::Ones(1)));
    Association a(1, 3);
    a.set(0, 1, true);
    std::ostringstream out;
    write_rate_csv(out, rate_report(a, ch, ResourceSolution::zeros(1, 3, 1), c));
    std::string line;
    std::istringstream in(out.str());
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);
  }
}
