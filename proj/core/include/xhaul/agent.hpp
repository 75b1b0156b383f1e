#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "xhaul/content.hpp"

namespace xhaul {

/// What the mode-selection policy can see at one slot: requested files,
/// cached files and their last-request slots. Popularity itself is hidden.
struct Observation {
  std::vector<int> requested_files;
  std::vector<int> cached_files;            // recency order
  std::vector<long> cached_last_request;    // parallel to cached_files
  long slot = 0;
};

Observation make_observation(const CacheState& cache, const RequestSet& requests,
                             long slot);

struct FeatureConfig {
  int library_size = 20;
  int num_age_bins = 11;
  int age_cap = 20;
  bool age_literal_formula = false;
};

/// Sparse binary feature vector: per file a 3-way one-hot (requested and
/// uncached / cached / neither), then a one-hot cache-age bin, the whole
/// block Kronecker-expanded by the 2-way action one-hot (action index
/// varies fastest). Exactly library_size + 1 entries are set.
struct FeatureVector {
  std::vector<int> active;  // sorted indices of the ones
  int dim = 0;
};

FeatureVector build_features(const Observation& obs, int action,
                             const FeatureConfig& cfg);

int feature_dim(const FeatureConfig& cfg);

/// theta of an observation: age of the stalest cached file (default) or
/// of the freshest one (literal variant), clamped to [0, age_cap].
int observation_age(const Observation& obs, const FeatureConfig& cfg);

double q_value(const Eigen::VectorXd& w, const FeatureVector& x);

/// Epsilon-greedy over the two delivery modes; ties go to fronthaul (0).
int select_action(const Eigen::VectorXd& w, const Observation& obs,
                  double epsilon, const FeatureConfig& cfg,
                  std::mt19937_64& rng);

struct AgentState {
  Eigen::VectorXd w;
  Eigen::VectorXd trace;
  int episode = 0;  // 1-based during training

  explicit AgentState(int dim)
      : w(Eigen::VectorXd::Zero(dim)), trace(Eigen::VectorXd::Zero(dim)) {}
  AgentState() = default;

  void reset_trace() { trace.setZero(); }
};

struct Schedule {
  double epsilon = 1.0;
  double beta = 1.0;
};

/// Exploration and step size both decay as 1/episode.
Schedule schedule(int episode);

/// One SARSA(lambda) update. Order: trace decays and accumulates x first,
/// the TD error uses the pre-update weights, then w moves along the
/// updated trace. Pass x_next = nullptr for the terminal transition.
/// Throws std::runtime_error when the TD error is not finite.
void sarsa_step(AgentState& agent, const FeatureVector& x, double reward,
                const FeatureVector* x_next, double gamma, double lambda,
                double beta);

}  // namespace xhaul
