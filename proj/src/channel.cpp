#include "aebs/channel.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <stdexcept>

#include "aebs/rng.hpp"

namespace aebs {

double p_los(double theta_deg, double eta, double varsigma) {
  return 1.0 / (1.0 + eta * std::exp(-varsigma * (theta_deg - eta)));
}

double free_space_loss_db(double d, const NetworkConfig& cfg) {
  return 20.0 * std::log10(4.0 * std::numbers::pi * cfg.carrier_hz * d / cfg.light_speed);
}

double path_loss_db(double d, double theta_deg, const NetworkConfig& cfg) {
  if (!(d > 0.0)) throw std::domain_error("path_loss_db: distance must be positive");
  const double fspl = free_space_loss_db(d, cfg);
  const double plos = p_los(theta_deg, cfg.eta, cfg.varsigma);
  return plos * (fspl + cfg.zeta_los_db) + (1.0 - plos) * (fspl + cfg.zeta_nlos_db);
}

double elevation_deg(double altitude, double horizontal) {
  return std::atan2(altitude, horizontal) * 180.0 / std::numbers::pi;
}

namespace {

// Standard normal via Box-Muller on the raw generator output, independent of
// the standard library's distribution implementation.
std::pair<double, double> gaussian_pair(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

Eigen::VectorXcd draw_fading(std::uint64_t seed, int k, int n, int num_antennas) {
  Rng rng = make_rng(seed, {0x6368ULL, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(n)});
  Eigen::VectorXcd g(num_antennas);
  const double s = std::sqrt(0.5);
  for (int j = 0; j < num_antennas; ++j) {
    auto [re, im] = gaussian_pair(rng);
    g[j] = {s * re, s * im};
  }
  return g;
}

ChannelRealization realize_channels(const Placement& placement, const GuPositions& gus,
                                    const NetworkConfig& cfg, std::uint64_t seed, FadingMode mode) {
  ChannelRealization ch;
  ch.num_aebs = placement.size();
  ch.num_gus = static_cast<int>(gus.size());
  ch.num_antennas = cfg.num_antennas;
  ch.seed = seed;
  ch.pl_db.resize(ch.num_aebs, ch.num_gus);
  ch.h.reserve(static_cast<std::size_t>(ch.num_aebs) * ch.num_gus);
  ch.fading.reserve(ch.h.capacity());
  for (int k = 0; k < ch.num_aebs; ++k) {
    for (int n = 0; n < ch.num_gus; ++n) {
      const double l = horizontal_distance(placement.positions[k], gus[n]);
      const double d = distance(placement, gus, k, n);
      const double pl = path_loss_db(d, elevation_deg(placement.positions[k].z, l), cfg);
      ch.pl_db(k, n) = pl;
      Eigen::VectorXcd g = mode == FadingMode::Unit
                               ? Eigen::VectorXcd::Ones(cfg.num_antennas)
                               : draw_fading(seed, k, n, cfg.num_antennas);
      ch.h.push_back(std::pow(10.0, -pl / 20.0) * g);
      ch.fading.push_back(std::move(g));
    }
  }
  return ch;
}

ChannelRealization channels_from_vectors(int num_aebs, int num_gus, const std::vector<Eigen::VectorXcd>& h) {
  if (static_cast<int>(h.size()) != num_aebs * num_gus) throw std::invalid_argument("channels_from_vectors: size");
  ChannelRealization ch;
  ch.num_aebs = num_aebs;
  ch.num_gus = num_gus;
  ch.num_antennas = h.empty() ? 0 : static_cast<int>(h.front().size());
  ch.h = h;
  ch.fading = h;
  ch.pl_db = Eigen::MatrixXd::Zero(num_aebs, num_gus);
  return ch;
}

void write_channel_csv(std::ostream& out, const ChannelRealization& ch) {
  out << "k,n,antenna,re,im,pl_db\n" << std::setprecision(17);
  for (int k = 0; k < ch.num_aebs; ++k)
    for (int n = 0; n < ch.num_gus; ++n) {
      const auto& v = ch.at(k, n);
      for (int j = 0; j < v.size(); ++j)
        out << k << ',' << n << ',' << j << ',' << v[j].real() << ',' << v[j].imag() << ','
            << ch.pl_db(k, n) << '\n';
    }
}

}  // namespace aebs
