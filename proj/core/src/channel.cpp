#include "xhaul/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace xhaul {

double path_loss(double distance_m, double ref_gain, double ref_distance_m,
                 double exponent) {
  if (distance_m <= 0.0) throw std::domain_error("path_loss: distance must be positive");
  if (ref_distance_m <= 0.0 || ref_gain <= 0.0)
    throw std::domain_error("path_loss: reference gain/distance must be positive");
  return ref_gain * std::pow(distance_m / ref_distance_m, -exponent);
}

double noise_variance_watts(double bandwidth_hz, double noise_psd_dbm_hz) {
  if (bandwidth_hz <= 0.0) throw std::domain_error("noise_variance: bandwidth must be positive");
  const double total_dbm = noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz);
  return dbm_to_watts(total_dbm);
}

Topology place_nodes_at(const SystemConfig& cfg,
                        const std::vector<double>& errh_angles,
                        const std::vector<double>& user_angles) {
  if (static_cast<int>(errh_angles.size()) != cfg.num_errhs ||
      static_cast<int>(user_angles.size()) != cfg.num_users)
    throw std::invalid_argument("place_nodes_at: angle counts mismatch config");

  Topology topo;
  topo.errh_positions.reserve(errh_angles.size());
  for (double a : errh_angles)
    topo.errh_positions.emplace_back(cfg.errh_radius_m * std::cos(a),
                                     cfg.errh_radius_m * std::sin(a));
  topo.user_positions.reserve(user_angles.size());
  for (double a : user_angles)
    topo.user_positions.emplace_back(cfg.user_radius_m * std::cos(a),
                                     cfg.user_radius_m * std::sin(a));

  topo.distances_m.resize(cfg.num_errhs, cfg.num_users);
  for (int m = 0; m < cfg.num_errhs; ++m)
    for (int k = 0; k < cfg.num_users; ++k)
      topo.distances_m(m, k) = (topo.errh_positions[m] - topo.user_positions[k]).norm();
  return topo;
}

Topology place_nodes(const SystemConfig& cfg, std::mt19937_64& rng) {
  if (cfg.num_errhs < 1 || cfg.num_users < 1)
    throw std::invalid_argument("place_nodes: need at least one eRRH and one user");
  if (cfg.errh_radius_m <= 0.0 || cfg.user_radius_m <= 0.0)
    throw std::invalid_argument("place_nodes: radii must be positive");

  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<double> errh_angles(cfg.num_errhs), user_angles(cfg.num_users);
  for (double& a : errh_angles) a = angle(rng);
  for (double& a : user_angles) a = angle(rng);
  return place_nodes_at(cfg, errh_angles, user_angles);
}

ChannelSet draw_channels(const Topology& topo, const SystemConfig& cfg,
                         std::mt19937_64& rng) {
  const int m_count = cfg.num_errhs;
  const int k_count = cfg.num_users;
  if (topo.distances_m.rows() != m_count || topo.distances_m.cols() != k_count)
    throw std::invalid_argument("draw_channels: topology does not match config");

  // Unit-variance complex entries: real/imag parts are N(0, 1/2).
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));

  ChannelSet set;
  set.noise_variance_w = noise_variance_watts(cfg.bandwidth_hz, cfg.noise_psd_dbm_hz);
  set.h_mk.assign(m_count, std::vector<Cmat>(k_count));
  for (int m = 0; m < m_count; ++m) {
    for (int k = 0; k < k_count; ++k) {
      const double amp = std::sqrt(path_loss(topo.distances_m(m, k), cfg.pathloss_ref_gain,
                                             cfg.pathloss_ref_distance_m, cfg.pathloss_exponent));
      Cmat h(cfg.user_antennas, cfg.errh_antennas);
      for (int r = 0; r < h.rows(); ++r)
        for (int c = 0; c < h.cols(); ++c) {
          const double re = gauss(rng);
          const double im = gauss(rng);
          h(r, c) = std::complex<double>(amp * re, amp * im);
        }
      set.h_mk[m][k] = std::move(h);
    }
  }

  const int total = m_count * cfg.errh_antennas;
  set.h_user.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    Cmat hk(cfg.user_antennas, total);
    for (int m = 0; m < m_count; ++m)
      hk.block(0, m * cfg.errh_antennas, cfg.user_antennas, cfg.errh_antennas) =
          set.h_mk[m][k];
    set.h_user[k] = std::move(hk);
  }
  return set;
}

}  // namespace xhaul
