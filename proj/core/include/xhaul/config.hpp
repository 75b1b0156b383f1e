#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xhaul {

/// All physical, content, RL and solver parameters of one experiment.
/// Powers are given in dBm at this boundary only; everything downstream
/// works in linear watts.
struct SystemConfig {
  // Topology / radio
  int num_errhs = 3;                           // cache-enabled edge radio heads
  int num_users = 10;
  int errh_antennas = 1;                       // antennas per eRRH
  int user_antennas = 1;                       // antennas per user
  int streams_per_user = 1;                    // data streams n_k (<= user_antennas)
  double errh_radius_m = 200.0;                // eRRH distance from the BBU
  double user_radius_m = 400.0;                // user distance from the BBU
  double pathloss_ref_gain = 1e-3;             // gain at the reference distance
  double pathloss_ref_distance_m = 1.0;
  double pathloss_exponent = 3.5;
  double bandwidth_hz = 20e6;
  double noise_psd_dbm_hz = -170.0;
  double errh_power_dbm = 30.0;                // per-eRRH transmit power cap
  double xhaul_capacity_bits_per_symbol = 0.1; // BBU<->eRRH link capacity

  // Content library / popularity
  int library_size = 20;                       // files in the library
  double file_size_bits = 100.0;
  int cache_capacity = 4;                      // files per eRRH cache
  double zipf_exponent = 1.0;
  int popularity_lifetime = 10;                // slots a file stays popular

  // Episodes / learning
  int slots_per_episode = 100;
  int num_episodes = 200;
  double discount = 1.0;
  double trace_decay = 0.5;
  int num_age_bins = 11;
  int age_cap = 20;                            // clamp for the cache-age feature
  double reward_scale = 0.0;                   // 0 -> use file_size_bits
  double epsilon_override = -1.0;              // >= 0 fixes epsilon during training

  // Latency solver
  int sca_iterations = 10;
  double sca_tol = 1e-4;
  double inner_tol = 1e-6;
  int inner_max_iters = 2000;
  double quant_floor = 1e-8;                   // eigenvalue floor on quantization covariances
  int mu_grid_points = 16;
  double golden_tol = 1e-3;

  // Harness
  std::uint64_t seed = 1;
  std::string baseline = "greedy";             // greedy | fronthaul | backhaul | offline
  int eval_episodes = 20;
  bool redraw_geometry_per_episode = true;
  bool cache_age_literal_formula = false;      // see cache_age()
  bool offline_always_fronthaul = false;
  std::vector<int> sweep_cache_sizes = {1, 2, 4, 6, 8};

  double reward_scale_effective() const {
    return reward_scale > 0.0 ? reward_scale : file_size_bits;
  }
  double errh_power_watts() const;
};

/// Small fast profile used by default for experiments and the test suite.
SystemConfig desk_profile();
/// Full-size profile (K=10, M=3, F=20, 100-slot episodes). Slow.
SystemConfig paper_profile();

/// Throws std::invalid_argument when a field combination is inconsistent.
void validate(const SystemConfig& cfg);

/// JSON round trip. Keys mirror the struct field names exactly; unknown
/// keys are rejected.
SystemConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const SystemConfig& cfg);
SystemConfig load_config_file(const std::string& path);

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

}  // namespace xhaul
