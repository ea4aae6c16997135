#include "aebs/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aebs/rng.hpp"

namespace aebs {

int Association::column_sum(int n) const {
  int s = 0;
  for (int k = 0; k < num_aebs_; ++k) s += (*this)(k, n);
  return s;
}

int Association::row_sum(int k) const {
  int s = 0;
  for (int n = 0; n < num_gus_; ++n) s += (*this)(k, n);
  return s;
}

int Association::server_of(int n) const {
  int server = -1;
  for (int k = 0; k < num_aebs_; ++k) {
    if (!(*this)(k, n)) continue;
    if (server >= 0) return -1;
    server = k;
  }
  return server;
}

std::vector<int> Association::cluster(int k) const {
  std::vector<int> out;
  for (int n = 0; n < num_gus_; ++n)
    if ((*this)(k, n)) out.push_back(n);
  return out;
}

double horizontal_distance(const Position& aebs, const Point2& gu) {
  return std::hypot(aebs.x - gu.x, aebs.y - gu.y);
}

double distance(const Placement& placement, const GuPositions& gus, int k, int n) {
  if (k < 0 || k >= placement.size()) throw std::out_of_range("distance: AeBS index");
  if (n < 0 || n >= static_cast<int>(gus.size())) throw std::out_of_range("distance: GU index");
  const Position& p = placement.positions[k];
  return std::hypot(p.z, horizontal_distance(p, gus[n]));
}

double coverage(const Association& assoc) {
  if (assoc.num_gus() == 0) return 0.0;
  int served = 0;
  for (int k = 0; k < assoc.num_aebs(); ++k) served += assoc.row_sum(k);
  return static_cast<double>(served) / assoc.num_gus();
}

double utility(double coverage, double sum_rate, const NetworkConfig& cfg) {
  if (!(cfg.rate_norm() > 0.0)) throw ConfigError("network.R_N: must be > 0");
  return cfg.lambda1 * coverage + cfg.lambda2 * sum_rate / cfg.rate_norm();
}

ConstraintReport audit_constraints(const Placement& placement, const Association& assoc,
                                   const GuPositions& gus, const NetworkConfig& cfg) {
  ConstraintReport rep;
  const int K = placement.size();
  const int N = static_cast<int>(gus.size());

  // Association is binary by construction, so C3 holds whenever shapes agree.
  rep.c3_ok = assoc.num_aebs() == K && assoc.num_gus() == N;

  if (rep.c3_ok) {
    for (int n = 0; n < N; ++n)
      if (assoc.column_sum(n) != 1) rep.c1_ok = false;
    for (int k = 0; k < K; ++k) {
      const int load = assoc.row_sum(k);
      if (load < 2 || load > cfg.max_gus_per_aebs) rep.c2_ok = false;
    }
  } else {
    rep.c1_ok = rep.c2_ok = false;
  }

  for (const auto& p : placement.positions) {
    if (p.x < cfg.x_min || p.x > cfg.x_max || p.y < cfg.y_min || p.y > cfg.y_max) rep.c4_ok = false;
  }

  for (int a = 0; a < K; ++a) {
    for (int b = a + 1; b < K; ++b) {
      const auto& pa = placement.positions[a];
      const auto& pb = placement.positions[b];
      const double d = std::sqrt((pa.x - pb.x) * (pa.x - pb.x) + (pa.y - pb.y) * (pa.y - pb.y) +
                                 (pa.z - pb.z) * (pa.z - pb.z));
      if (d < cfg.min_separation) rep.c9_ok = false;
    }
  }

  if (rep.c3_ok) {
    const double S = cfg.big_m_value();
    for (int k = 0; k < K; ++k) {
      for (int n = 0; n < N; ++n) {
        const double a = assoc(k, n) ? 1.0 : 0.0;
        if (distance(placement, gus, k, n) > cfg.comm_radius + S * (1.0 - a)) rep.c10_ok = false;
      }
    }
  } else {
    rep.c10_ok = false;
  }

  rep.xi_a = (rep.c1_ok && rep.c2_ok && rep.c3_ok) ? 0 : 1;
  rep.xi_m = rep.c4_ok ? 0 : 1;
  rep.xi_c = rep.c9_ok ? 0 : 1;
  rep.xi_r = rep.c10_ok ? 0 : 1;
  return rep;
}

Association served_subset(const Placement& placement, const Association& assoc,
                          const GuPositions& gus, const NetworkConfig& cfg) {
  Association out(assoc.num_aebs(), assoc.num_gus());
  for (int n = 0; n < assoc.num_gus(); ++n) {
    const int k = assoc.server_of(n);
    if (k >= 0 && distance(placement, gus, k, n) <= cfg.comm_radius) out.set(k, n, true);
  }
  return out;
}

Association drop_multi_assigned(const Association& assoc) {
  Association out(assoc.num_aebs(), assoc.num_gus());
  for (int n = 0; n < assoc.num_gus(); ++n) {
    const int k = assoc.server_of(n);
    if (k >= 0) out.set(k, n, true);
  }
  return out;
}

GuPositions generate_gu_positions(const NetworkConfig& cfg, const ScenarioConfig& scenario) {
  Rng rng = make_rng(scenario.seed, {0x6775ULL});
  const double w = cfg.x_max - cfg.x_min;
  const double h = cfg.y_max - cfg.y_min;
  GuPositions gus;
  gus.reserve(cfg.num_gus);

  if (scenario.layout == GuLayout::Uniform) {
    for (int n = 0; n < cfg.num_gus; ++n)
      gus.push_back({cfg.x_min + w * uniform01(rng), cfg.y_min + h * uniform01(rng)});
    return gus;
  }

  // Hotspot centers keep a full cluster radius away from the border so every
  // GU lands inside the area.
  const double r = scenario.cluster_radius;
  const double mx = std::min(r, 0.5 * w);
  const double my = std::min(r, 0.5 * h);
  std::vector<Point2> centers;
  for (int c = 0; c < scenario.clusters; ++c)
    centers.push_back({cfg.x_min + mx + (w - 2 * mx) * uniform01(rng),
                       cfg.y_min + my + (h - 2 * my) * uniform01(rng)});
  for (int n = 0; n < cfg.num_gus; ++n) {
    const Point2& c = centers[n % scenario.clusters];
    const double rho = r * std::sqrt(uniform01(rng));
    const double phi = 2.0 * std::numbers::pi * uniform01(rng);
    double x = std::clamp(c.x + rho * std::cos(phi), cfg.x_min, cfg.x_max);
    double y = std::clamp(c.y + rho * std::sin(phi), cfg.y_min, cfg.y_max);
    gus.push_back({x, y});
  }
  return gus;
}

Placement make_placement(const std::vector<Point2>& xy, const NetworkConfig& cfg) {
  Placement p;
  for (const auto& q : xy) p.positions.push_back({q.x, q.y, cfg.altitude});
  return p;
}

}  // namespace aebs
