#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace aebs {

// Raised for any invalid or unreadable configuration; the message names the
// offending field as "section.key: reason".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

// Physical and system constants of the multi-AeBS network. Units: meters,
// hertz, watts (linear), dB for the excess losses, bit/s/Hz for rates.
struct NetworkConfig {
  int num_aebs = 2;             // K
  int num_gus = 8;              // N
  int num_antennas = 4;         // Nt
  double x_min = 0.0, x_max = 1000.0;
  double y_min = 0.0, y_max = 1000.0;
  double altitude = 50.0;       // H
  double comm_radius = 200.0;   // R
  double min_separation = 10.0; // d_min
  int max_gus_per_aebs = 10;    // N_a
  double carrier_hz = 2.4e9;
  double light_speed = 3e8;
  double zeta_los_db = 1.0;
  double zeta_nlos_db = 20.0;
  double eta = 9.61;
  double varsigma = 0.16;
  double noise_w = dbm_to_watts(-113.0);
  double max_power_w = dbm_to_watts(10.0);
  int common_blocklength = 1000;   // Dc
  int private_blocklength = 1000;  // Dp
  double decoding_error = 1e-5;    // eps
  double min_rate = 1.0;           // R_min
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::optional<double> rate_normalization;  // R_N, defaults to 2 * N
  std::optional<double> big_m;               // S, defaults to 10 * area diagonal

  double rate_norm() const { return rate_normalization.value_or(2.0 * num_gus); }
  double area_diagonal() const { return std::hypot(x_max - x_min, y_max - y_min); }
  double big_m_value() const { return big_m.value_or(10.0 * area_diagonal()); }

  // Throws ConfigError naming the first violated invariant.
  void validate() const;
};

enum class GuLayout { Uniform, Clustered };

// How ground users are dropped into the task area.
struct ScenarioConfig {
  GuLayout layout = GuLayout::Clustered;
  int clusters = 2;
  double cluster_radius = 120.0;  // horizontal meters around each hotspot
  std::uint64_t seed = 1;
};

enum class Stationary { Uniform, Marginal };

struct DiffusionConfig {
  int steps = 15;       // T
  int grid = 10;        // G, node alphabet is G*G cells
  Stationary stationary = Stationary::Uniform;
  double cosine_offset = 0.008;
};

struct DenoiserConfig {
  int layers = 3;     // W
  int hidden = 128;   // d
  int heads = 4;
  int time_dim = 16;
  std::uint64_t init_seed = 0;
};

enum class RewardMode { Exact, Surrogate };
enum class OptimizerKind { Adam, Sgd };
enum class Estimator { Eager, PerStep };

struct TrainConfig {
  int trajectories = 8;        // M
  int timestep_samples = 4;    // |T_m|
  int steps = 100;             // L
  double learning_rate = 1e-4; // mu
  int batch_size = 64;         // gradient terms dispatched per worker batch
  RewardMode reward_mode = RewardMode::Surrogate;
  OptimizerKind optimizer = OptimizerKind::Adam;
  Estimator estimator = Estimator::Eager;
  bool baseline = true;
  double baseline_decay = 0.9;
  int checkpoint_every = 0;    // 0 disables periodic checkpoints
  unsigned workers = 0;        // 0 = hardware concurrency
  std::array<double, 4> omega{1.0, 1.0, 1.0, 1.0};

  void validate(int diffusion_steps) const;
};

struct SolveConfig {
  int k_max = 10;
  double tau = 1e-5;
  double sca_tau = 1e-5;
  int sca_max_iters = 100;
};

// Everything a run needs, loaded from one JSON document.
struct AppConfig {
  NetworkConfig network;
  ScenarioConfig scenario;
  DiffusionConfig diffusion;
  DenoiserConfig denoiser;
  TrainConfig train;
  SolveConfig solve;

  void validate() const;
};

// Parses a config document. Every key is optional (documented defaults
// apply) but unknown keys are rejected.
AppConfig config_from_json(const nlohmann::json& doc);
AppConfig load_config(const std::string& path);
nlohmann::json config_to_json(const AppConfig& cfg);

const char* to_string(RewardMode m);
RewardMode reward_mode_from_string(const std::string& s);

}  // namespace aebs
