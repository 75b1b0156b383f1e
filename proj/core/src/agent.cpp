#include "xhaul/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xhaul {

Observation make_observation(const CacheState& cache, const RequestSet& requests,
                             long slot) {
  Observation obs;
  obs.requested_files = requests.file_of_user;
  obs.cached_files = cache.entries();
  obs.cached_last_request.reserve(obs.cached_files.size());
  for (int f : obs.cached_files) obs.cached_last_request.push_back(cache.last_request_slot(f));
  obs.slot = slot;
  return obs;
}

int feature_dim(const FeatureConfig& cfg) {
  return 2 * (cfg.num_age_bins + 3 * cfg.library_size);
}

int observation_age(const Observation& obs, const FeatureConfig& cfg) {
  if (obs.cached_files.empty()) return cfg.age_cap;
  long extreme = obs.cached_last_request.front();
  for (long tau : obs.cached_last_request)
    extreme = cfg.age_literal_formula ? std::max(extreme, tau) : std::min(extreme, tau);
  return static_cast<int>(std::clamp<long>(obs.slot - extreme, 0, cfg.age_cap));
}

FeatureVector build_features(const Observation& obs, int action,
                             const FeatureConfig& cfg) {
  if (action != 0 && action != 1)
    throw std::invalid_argument("build_features: action must be 0 or 1");

  // phi per file: 1 = requested and uncached, 2 = cached, 0 = neither.
  std::vector<std::uint8_t> phi(cfg.library_size, 0);
  for (int f : obs.cached_files) phi[f] = 2;
  for (int f : obs.requested_files)
    if (phi[f] != 2) phi[f] = 1;

  FeatureVector x;
  x.dim = feature_dim(cfg);
  x.active.reserve(cfg.library_size + 1);

  // Base layout per file: [phi==1, phi==2, phi==0]; the base index is
  // doubled and offset by the action (action index varies fastest).
  for (int f = 0; f < cfg.library_size; ++f) {
    const int slot_in_block = phi[f] == 1 ? 0 : (phi[f] == 2 ? 1 : 2);
    const int base = 3 * f + slot_in_block;
    x.active.push_back(2 * base + action);
  }

  const int age = observation_age(obs, cfg);
  int bin = age / 2;  // ranges {0,1}, {2,3}, ...
  bin = std::min(bin, cfg.num_age_bins - 1);
  const int base = 3 * cfg.library_size + bin;
  x.active.push_back(2 * base + action);
  return x;
}

double q_value(const Eigen::VectorXd& w, const FeatureVector& x) {
  if (w.size() != x.dim) throw std::logic_error("q_value: weight/feature length mismatch");
  double q = 0.0;
  for (int i : x.active) q += w(i);
  return q;
}

int select_action(const Eigen::VectorXd& w, const Observation& obs, double epsilon,
                  const FeatureConfig& cfg, std::mt19937_64& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("select_action: epsilon outside [0,1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < epsilon) {
      std::uniform_int_distribution<int> coin(0, 1);
      return coin(rng);
    }
  }
  const double q0 = q_value(w, build_features(obs, 0, cfg));
  const double q1 = q_value(w, build_features(obs, 1, cfg));
  return q1 > q0 ? 1 : 0;  // ties prefer fronthaul
}

Schedule schedule(int episode) {
  if (episode < 1) throw std::invalid_argument("schedule: episode must be >= 1");
  const double inv = 1.0 / episode;
  return Schedule{inv, inv};
}

void sarsa_step(AgentState& agent, const FeatureVector& x, double reward,
                const FeatureVector* x_next, double gamma, double lambda,
                double beta) {
  if (agent.w.size() != x.dim) throw std::logic_error("sarsa_step: dimension mismatch");

  agent.trace *= gamma * lambda;
  for (int i : x.active) agent.trace(i) += 1.0;

  double q_next = 0.0;
  if (x_next) q_next = q_value(agent.w, *x_next);
  const double td = reward + gamma * q_next - q_value(agent.w, x);
  if (!std::isfinite(td))
    throw std::runtime_error("sarsa_step: non-finite TD error (check reward scaling)");

  agent.w += beta * td * agent.trace;
}

}  // namespace xhaul
