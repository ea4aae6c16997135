#pragma once

#include <complex>
#include <cstdint>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "aebs/config.hpp"
#include "aebs/core_model.hpp"

namespace aebs {

// Probability of a line-of-sight link at elevation theta (degrees).
double p_los(double theta_deg, double eta, double varsigma);

double free_space_loss_db(double d, const NetworkConfig& cfg);

// Mean air-to-ground path loss in dB, averaging the LoS and NLoS excess losses
// with their probabilities. Throws std::domain_error for d <= 0.
double path_loss_db(double d, double theta_deg, const NetworkConfig& cfg);

// Elevation angle in degrees for horizontal distance l at altitude H.
double elevation_deg(double altitude, double horizontal);

enum class FadingMode {
  Rayleigh,  // unit-variance circularly-symmetric complex Gaussian
  Unit,      // g = 1, for tests
};

// Complex channel vectors h[k][n] (length Nt) for every AeBS-GU pair.
struct ChannelRealization {
  int num_aebs = 0;
  int num_gus = 0;
  int num_antennas = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXcd> h;      // row-major over (k, n)
  std::vector<Eigen::VectorXcd> fading; // g, same layout
  Eigen::MatrixXd pl_db;                // K x N

  const Eigen::VectorXcd& at(int k, int n) const { return h[static_cast<std::size_t>(k) * num_gus + n]; }
  Eigen::VectorXcd& at(int k, int n) { return h[static_cast<std::size_t>(k) * num_gus + n]; }
  const Eigen::VectorXcd& fading_at(int k, int n) const {
    return fading[static_cast<std::size_t>(k) * num_gus + n];
  }
};

// Draws the fading for pair (k, n) from a stream keyed on (seed, k, n), so a
// pair's draw does not depend on evaluation order or on other pairs.
Eigen::VectorXcd draw_fading(std::uint64_t seed, int k, int n, int num_antennas);

ChannelRealization realize_channels(const Placement& placement, const GuPositions& gus,
                                    const NetworkConfig& cfg, std::uint64_t seed,
                                    FadingMode mode = FadingMode::Rayleigh);

// Builds a realization directly from given vectors (tests and instance files).
ChannelRealization channels_from_vectors(int num_aebs, int num_gus,
                                         const std::vector<Eigen::VectorXcd>& h);

// CSV with columns k,n,antenna,re,im,pl_db.
void write_channel_csv(std::ostream& out, const ChannelRealization& ch);

}  // namespace aebs
