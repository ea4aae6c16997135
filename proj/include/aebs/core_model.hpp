#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aebs/config.hpp"

namespace aebs {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// AeBS positions; z is the common flight altitude.
struct Placement {
  std::vector<Position> positions;

  int size() const { return static_cast<int>(positions.size()); }
};

using GuPositions = std::vector<Point2>;

// Binary K x N association matrix. Any binary pattern can be stored so that
// sampled graphs with C1 breaches can still be audited; rate evaluation
// requires at most one serving AeBS per GU.
class Association {
 public:
  Association() = default;
  Association(int num_aebs, int num_gus)
      : num_aebs_(num_aebs), num_gus_(num_gus), bits_(static_cast<std::size_t>(num_aebs) * num_gus, 0) {}

  int num_aebs() const { return num_aebs_; }
  int num_gus() const { return num_gus_; }

  bool operator()(int k, int n) const { return bits_[index(k, n)] != 0; }
  void set(int k, int n, bool v) { bits_[index(k, n)] = v ? 1 : 0; }

  // Number of AeBSs serving GU n.
  int column_sum(int n) const;
  // Number of GUs served by AeBS k.
  int row_sum(int k) const;
  // Serving AeBS of GU n, or -1 when it has none or several.
  int server_of(int n) const;
  // GU indices served by AeBS k, ascending (the cluster N_k).
  std::vector<int> cluster(int k) const;

  bool operator==(const Association&) const = default;

 private:
  std::size_t index(int k, int n) const {
    if (k < 0 || k >= num_aebs_ || n < 0 || n >= num_gus_) throw std::out_of_range("Association index");
    return static_cast<std::size_t>(k) * num_gus_ + n;
  }

  int num_aebs_ = 0;
  int num_gus_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Per-family constraint outcome plus the four binary violation indicators
// used by the reward.
struct ConstraintReport {
  bool c1_ok = true;   // each GU served by exactly one AeBS
  bool c2_ok = true;   // 2 <= GUs per AeBS <= N_a
  bool c3_ok = true;   // binary association
  bool c4_ok = true;   // AeBS inside the task area
  bool c9_ok = true;   // pairwise separation >= d_min
  bool c10_ok = true;  // d_{k,n} <= R + S (1 - alpha)

  int xi_a = 0;
  int xi_m = 0;
  int xi_c = 0;
  int xi_r = 0;

  bool all_clear() const { return xi_a == 0 && xi_m == 0 && xi_c == 0 && xi_r == 0; }
};

double horizontal_distance(const Position& aebs, const Point2& gu);

// 3D AeBS-GU distance sqrt(H^2 + l^2).
double distance(const Placement& placement, const GuPositions& gus, int k, int n);

double coverage(const Association& assoc);

// lambda1 * C + lambda2 * R_sum / R_N.
double utility(double coverage, double sum_rate, const NetworkConfig& cfg);

ConstraintReport audit_constraints(const Placement& placement, const Association& assoc,
                                   const GuPositions& gus, const NetworkConfig& cfg);

// GUs with exactly one serving AeBS that is also within range. Everyone else
// is dropped, which is how infeasible candidates are scored.
Association served_subset(const Placement& placement, const Association& assoc,
                          const GuPositions& gus, const NetworkConfig& cfg);

// Removes GUs that have more than one serving AeBS.
Association drop_multi_assigned(const Association& assoc);

// GU drop for a scenario. Clustered layouts place scenario.clusters hotspots
// inside the area and scatter GUs uniformly in discs around them.
GuPositions generate_gu_positions(const NetworkConfig& cfg, const ScenarioConfig& scenario);

Placement make_placement(const std::vector<Point2>& xy, const NetworkConfig& cfg);

}  // namespace aebs
