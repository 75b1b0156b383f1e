#include "xhaul/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xhaul {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

double SystemConfig::errh_power_watts() const { return dbm_to_watts(errh_power_dbm); }

SystemConfig paper_profile() {
  SystemConfig cfg;  // defaults already mirror the full-size setup
  return cfg;
}

SystemConfig desk_profile() {
  SystemConfig cfg;
  cfg.num_errhs = 2;
  cfg.num_users = 4;
  cfg.library_size = 10;
  cfg.cache_capacity = 4;
  cfg.slots_per_episode = 50;
  cfg.num_episodes = 200;
  return cfg;
}

void validate(const SystemConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (cfg.num_errhs < 1) fail("num_errhs must be >= 1");
  if (cfg.num_users < 1) fail("num_users must be >= 1");
  if (cfg.errh_antennas < 1 || cfg.user_antennas < 1) fail("antenna counts must be >= 1");
  if (cfg.streams_per_user < 1 || cfg.streams_per_user > cfg.user_antennas)
    fail("streams_per_user must be in [1, user_antennas]");
  if (cfg.errh_radius_m <= 0 || cfg.user_radius_m <= 0) fail("radii must be positive");
  if (cfg.pathloss_ref_gain <= 0 || cfg.pathloss_ref_distance_m <= 0)
    fail("path loss reference must be positive");
  if (cfg.bandwidth_hz <= 0) fail("bandwidth must be positive");
  if (cfg.xhaul_capacity_bits_per_symbol <= 0) fail("xhaul capacity must be positive");
  if (cfg.errh_power_watts() <= 0) fail("errh power must be positive");
  if (cfg.library_size < 1) fail("library_size must be >= 1");
  if (cfg.file_size_bits <= 0) fail("file_size_bits must be positive");
  if (cfg.cache_capacity < 1 || cfg.cache_capacity > cfg.library_size)
    fail("cache_capacity must be in [1, library_size]");
  if (cfg.num_users > cfg.library_size)
    fail("num_users must not exceed library_size (requests are distinct)");
  if (cfg.zipf_exponent < 0) fail("zipf_exponent must be >= 0");
  if (cfg.popularity_lifetime < 1) fail("popularity_lifetime must be >= 1");
  if (cfg.slots_per_episode < 1) fail("slots_per_episode must be >= 1");
  if (cfg.num_episodes < 1) fail("num_episodes must be >= 1");
  if (cfg.num_age_bins < 1) fail("num_age_bins must be >= 1");
  if (cfg.age_cap < 0) fail("age_cap must be >= 0");
  if (cfg.sca_iterations < 1) fail("sca_iterations must be >= 1");
  if (cfg.inner_max_iters < 1) fail("inner_max_iters must be >= 1");
  if (cfg.quant_floor <= 0) fail("quant_floor must be positive");
  if (cfg.mu_grid_points < 2) fail("mu_grid_points must be >= 2");
  if (cfg.epsilon_override > 1.0) fail("epsilon_override must be <= 1");
  if (cfg.eval_episodes < 1) fail("eval_episodes must be >= 1");
  if (cfg.baseline != "greedy" && cfg.baseline != "fronthaul" &&
      cfg.baseline != "backhaul" && cfg.baseline != "offline")
    fail("baseline must be one of greedy|fronthaul|backhaul|offline");
  for (int s : cfg.sweep_cache_sizes)
    if (s < 1 || s > cfg.library_size) fail("sweep_cache_sizes entries must be in [1, library_size]");
}

namespace {

using nlohmann::json;

// One row per field keeps the JSON schema and the struct in lockstep.
template <typename Fn>
void for_each_field(SystemConfig& c, Fn&& fn) {
  fn("num_errhs", c.num_errhs);
  fn("num_users", c.num_users);
  fn("errh_antennas", c.errh_antennas);
  fn("user_antennas", c.user_antennas);
  fn("streams_per_user", c.streams_per_user);
  fn("errh_radius_m", c.errh_radius_m);
  fn("user_radius_m", c.user_radius_m);
  fn("pathloss_ref_gain", c.pathloss_ref_gain);
  fn("pathloss_ref_distance_m", c.pathloss_ref_distance_m);
  fn("pathloss_exponent", c.pathloss_exponent);
  fn("bandwidth_hz", c.bandwidth_hz);
  fn("noise_psd_dbm_hz", c.noise_psd_dbm_hz);
  fn("errh_power_dbm", c.errh_power_dbm);
  fn("xhaul_capacity_bits_per_symbol", c.xhaul_capacity_bits_per_symbol);
  fn("library_size", c.library_size);
  fn("file_size_bits", c.file_size_bits);
  fn("cache_capacity", c.cache_capacity);
  fn("zipf_exponent", c.zipf_exponent);
  fn("popularity_lifetime", c.popularity_lifetime);
  fn("slots_per_episode", c.slots_per_episode);
  fn("num_episodes", c.num_episodes);
  fn("discount", c.discount);
  fn("trace_decay", c.trace_decay);
  fn("num_age_bins", c.num_age_bins);
  fn("age_cap", c.age_cap);
  fn("reward_scale", c.reward_scale);
  fn("epsilon_override", c.epsilon_override);
  fn("sca_iterations", c.sca_iterations);
  fn("sca_tol", c.sca_tol);
  fn("inner_tol", c.inner_tol);
  fn("inner_max_iters", c.inner_max_iters);
  fn("quant_floor", c.quant_floor);
  fn("mu_grid_points", c.mu_grid_points);
  fn("golden_tol", c.golden_tol);
  fn("seed", c.seed);
  fn("baseline", c.baseline);
  fn("eval_episodes", c.eval_episodes);
  fn("redraw_geometry_per_episode", c.redraw_geometry_per_episode);
  fn("cache_age_literal_formula", c.cache_age_literal_formula);
  fn("offline_always_fronthaul", c.offline_always_fronthaul);
  fn("sweep_cache_sizes", c.sweep_cache_sizes);
}

}  // namespace

SystemConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

  SystemConfig cfg;
  std::vector<std::string> known;
  for_each_field(cfg, [&](const char* key, auto& field) {
    known.emplace_back(key);
    auto it = j.find(key);
    if (it != j.end()) it->get_to(field);
  });
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known)
      if (k == key) { ok = true; break; }
    if (!ok) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

std::string config_to_json_text(const SystemConfig& cfg) {
  json j = json::object();
  for_each_field(const_cast<SystemConfig&>(cfg),
                 [&](const char* key, auto& field) { j[key] = field; });
  return j.dump(2);
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

}  // namespace xhaul
