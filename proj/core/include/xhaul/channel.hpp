#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "xhaul/config.hpp"

namespace xhaul {

using Cmat = Eigen::MatrixXcd;

/// Node geometry for one episode. eRRHs and users sit on circles around
/// the BBU; distances_m(m, k) is the eRRH-to-user Euclidean distance.
struct Topology {
  Eigen::Vector2d bbu_position = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> errh_positions;
  std::vector<Eigen::Vector2d> user_positions;
  Eigen::MatrixXd distances_m;  // num_errhs x num_users
};

/// Block-fading channel realization, fixed for a whole episode.
/// h_mk[m][k] is the user_antennas x errh_antennas gain matrix; h_user[k]
/// is the horizontal concatenation [H_1k ... H_Mk].
struct ChannelSet {
  std::vector<std::vector<Cmat>> h_mk;
  std::vector<Cmat> h_user;
  double noise_variance_w = 0.0;
};

/// rho_0 * (d/d_0)^(-eta). Throws std::domain_error for d <= 0.
double path_loss(double distance_m, double ref_gain, double ref_distance_m,
                 double exponent);

/// Thermal noise power in watts over `bandwidth_hz` at the given PSD.
double noise_variance_watts(double bandwidth_hz, double noise_psd_dbm_hz);

/// Independent uniform angles for eRRHs and users at the configured radii.
Topology place_nodes(const SystemConfig& cfg, std::mt19937_64& rng);

/// Deterministic variant with caller-chosen angles (radians).
Topology place_nodes_at(const SystemConfig& cfg,
                        const std::vector<double>& errh_angles,
                        const std::vector<double>& user_angles);

/// CN(0,1) entries scaled by sqrt(path loss); draw order is fixed
/// (m outer, k inner, entries row-major) so equal seeds give equal sets.
ChannelSet draw_channels(const Topology& topo, const SystemConfig& cfg,
                         std::mt19937_64& rng);

}  // namespace xhaul
