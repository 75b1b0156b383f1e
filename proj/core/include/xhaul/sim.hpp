#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "xhaul/agent.hpp"
#include "xhaul/channel.hpp"
#include "xhaul/config.hpp"
#include "xhaul/content.hpp"
#include "xhaul/latency.hpp"

namespace xhaul {

enum class PolicyKind { rl, greedy, always_fronthaul, always_backhaul, offline_popular };

PolicyKind policy_from_string(const std::string& name);
std::string policy_name(PolicyKind kind);

struct SlotRecord {
  int episode = 0;   // 1-based
  long slot = 0;     // 1..slots_per_episode
  int action = 0;    // 0 fronthaul, 1 backhaul
  double delta_r = 0.0;
  double delta_u = 0.0;
  double delta = 0.0;
  double delta_front = 0.0;  // both-mode totals, kept for diagnostics
  double delta_back = 0.0;
  int uncached_count = 0;
  int age = 0;               // cache age at decision time
  std::uint64_t cache_hash = 0;
  double reward = 0.0;
};

struct EpisodeLog {
  int episode_index = 0;
  std::vector<SlotRecord> slots;
  double mean_latency = 0.0;
};

struct SlotLatencies {
  double front_r = 0.0, front_u = 0.0, front_total = 0.0;
  double back_r = 0.0, back_u = 0.0, back_total = 0.0;
};

/// Process-wide memo of latency solutions. Channels are block-fading, so
/// within one episode the backhaul wireless solve is a constant and the
/// fronthaul solve depends only on the set of uncached users; episodes
/// with the same environment seed share entries across schemes and cache
/// sizes, which keeps paired comparisons cheap.
class LatencyMemo {
 public:
  struct FrontEntry {
    double delta_r, delta_u, total;
    bool clamped;
  };

  const double* find_wireless(std::uint64_t channel_uid) const;
  void store_wireless(std::uint64_t channel_uid, double min_rate);
  const FrontEntry* find_front(std::uint64_t channel_uid, std::uint64_t mask) const;
  void store_front(std::uint64_t channel_uid, std::uint64_t mask, FrontEntry e);

 private:
  std::map<std::uint64_t, double> wireless_;  // uid -> max-min rate
  std::map<std::pair<std::uint64_t, std::uint64_t>, FrontEntry> front_;
};

/// Both-mode latency evaluator for one episode's channels.
class SlotLatencyOracle {
 public:
  SlotLatencyOracle(const ChannelSet* channels, std::uint64_t channel_uid,
                    const SystemConfig* cfg, LatencyMemo* memo);

  SlotLatencies evaluate(const RequestSplit& split);
  double wireless_min_rate();  // backhaul max-min rate of this episode

 private:
  const ChannelSet* channels_;
  std::uint64_t uid_;
  const SystemConfig* cfg_;
  SolverConfig solver_;
  LatencyMemo* memo_;
  LatencyMemo local_;  // used when no shared memo is supplied
};

struct EpisodeParams {
  std::string_view phase = "train";  // keys the environment streams
  int episode_index = 1;             // 1-based
  int schedule_episode = 0;          // n_epi for the 1/n schedule; 0 = greedy eval
  bool learn = false;
};

/// One episode: fresh geometry/channels/cache/popularity from the named
/// streams, slots_per_episode slots, SARSA updates when params.learn.
EpisodeLog run_episode(const SystemConfig& cfg, PolicyKind kind, AgentState* agent,
                       const EpisodeParams& params, LatencyMemo* memo = nullptr);

struct TrainResult {
  AgentState agent;
  std::vector<double> episode_mean_latency;  // learning curve
  std::vector<EpisodeLog> logs;
};

TrainResult run_training(const SystemConfig& cfg, LatencyMemo* memo = nullptr);

struct EvalResult {
  std::vector<double> episode_means;
  double mean = 0.0;
  double ci_lo = 0.0;   // 90% confidence interval (Student t)
  double ci_hi = 0.0;
  std::vector<EpisodeLog> logs;
};

/// eval_episodes greedy episodes on the shared "eval" streams, so
/// different schemes see identical channels, popularity and requests.
EvalResult evaluate(const SystemConfig& cfg, PolicyKind kind,
                    const AgentState* agent = nullptr,
                    LatencyMemo* memo = nullptr);

struct SweepRow {
  std::string scheme;
  int cache_capacity = 0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Average evaluation latency versus cache size for the given schemes
/// ("rl" trains from scratch at every cache size).
std::vector<SweepRow> run_sweep(const SystemConfig& cfg,
                                const std::vector<std::string>& schemes,
                                LatencyMemo* memo = nullptr);

// --- result files (UTF-8 CSV with header row, JSON summaries)

void write_slot_csv(const std::string& path, const std::vector<EpisodeLog>& logs);
void write_learning_curve_csv(const std::string& path,
                              const std::vector<double>& episode_means);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);
void write_summary_json(const std::string& path, const SystemConfig& cfg,
                        const std::string& run_kind, const EvalResult* eval,
                        const std::vector<SweepRow>* sweep);
void write_weights_json(const std::string& path, const AgentState& agent);
AgentState load_weights_json(const std::string& path);

}  // namespace xhaul
