#include "xhaul/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "xhaul/rng.hpp"

namespace xhaul {

PolicyKind policy_from_string(const std::string& name) {
  if (name == "rl") return PolicyKind::rl;
  if (name == "greedy") return PolicyKind::greedy;
  if (name == "fronthaul") return PolicyKind::always_fronthaul;
  if (name == "backhaul") return PolicyKind::always_backhaul;
  if (name == "offline") return PolicyKind::offline_popular;
  throw std::invalid_argument("unknown policy/baseline: " + name);
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::rl: return "rl";
    case PolicyKind::greedy: return "greedy";
    case PolicyKind::always_fronthaul: return "fronthaul";
    case PolicyKind::always_backhaul: return "backhaul";
    case PolicyKind::offline_popular: return "offline";
  }
  return "?";
}

const double* LatencyMemo::find_wireless(std::uint64_t uid) const {
  auto it = wireless_.find(uid);
  return it == wireless_.end() ? nullptr : &it->second;
}

void LatencyMemo::store_wireless(std::uint64_t uid, double min_rate) {
  wireless_.emplace(uid, min_rate);
}

const LatencyMemo::FrontEntry* LatencyMemo::find_front(std::uint64_t uid,
                                                       std::uint64_t mask) const {
  auto it = front_.find({uid, mask});
  return it == front_.end() ? nullptr : &it->second;
}

void LatencyMemo::store_front(std::uint64_t uid, std::uint64_t mask, FrontEntry e) {
  front_.emplace(std::make_pair(uid, mask), e);
}

namespace {

// The memo key must change whenever a config field that feeds the latency
// problems changes (the sweep only varies the cache size, which does not).
std::uint64_t solver_fingerprint(const SystemConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    h ^= bits;
    h *= 0x100000001b3ULL;
  };
  mix(c.num_errhs);
  mix(c.num_users);
  mix(c.errh_antennas);
  mix(c.user_antennas);
  mix(c.errh_power_dbm);
  mix(c.xhaul_capacity_bits_per_symbol);
  mix(c.file_size_bits);
  mix(c.bandwidth_hz);
  mix(c.noise_psd_dbm_hz);
  mix(c.sca_iterations);
  mix(c.sca_tol);
  mix(c.inner_tol);
  mix(c.quant_floor);
  mix(c.mu_grid_points);
  mix(c.golden_tol);
  return h;
}

}  // namespace

SlotLatencyOracle::SlotLatencyOracle(const ChannelSet* channels, std::uint64_t channel_uid,
                                     const SystemConfig* cfg, LatencyMemo* memo)
    : channels_(channels),
      uid_(channel_uid),
      cfg_(cfg),
      solver_(SolverConfig::from(*cfg)),
      memo_(memo ? memo : &local_) {}

double SlotLatencyOracle::wireless_min_rate() {
  if (const double* hit = memo_->find_wireless(uid_)) return *hit;
  RequestSplit all_uncached;
  for (int k = 0; k < cfg_->num_users; ++k) all_uncached.uncached_users.push_back(k);
  const auto ctx = RequestContext::from(*channels_, all_uncached, *cfg_);
  const double rate = solve_wireless_maxmin(ctx, solver_).min_rate;
  memo_->store_wireless(uid_, rate);
  return rate;
}

SlotLatencies SlotLatencyOracle::evaluate(const RequestSplit& split) {
  SlotLatencies out;
  const double min_rate = wireless_min_rate();
  const double delta_u = cfg_->file_size_bits / min_rate;
  const int n_uncached = static_cast<int>(split.uncached_users.size());

  std::vector<double> caps(cfg_->num_errhs, cfg_->xhaul_capacity_bits_per_symbol);
  out.back_u = delta_u;
  out.back_r = backhaul_xhaul_latency(n_uncached, cfg_->file_size_bits, caps);
  out.back_total = out.back_r + out.back_u;

  if (n_uncached == 0) {
    out.front_r = 0.0;
    out.front_u = delta_u;
    out.front_total = delta_u;
    return out;
  }

  std::uint64_t mask = 0;
  for (int k : split.uncached_users) mask |= (1ULL << k);
  if (const auto* hit = memo_->find_front(uid_, mask)) {
    out.front_r = hit->delta_r;
    out.front_u = hit->delta_u;
    out.front_total = hit->total;
    return out;
  }

  const auto ctx = RequestContext::from(*channels_, split, *cfg_);
  WirelessSolution hint;
  hint.min_rate = min_rate;
  const LatencySolution sol = solve_p2_with_hint(ctx, solver_, &hint);
  memo_->store_front(uid_, mask,
                     {sol.xhaul_symbols, sol.wireless_symbols, sol.total_symbols,
                      sol.rate_floor_clamped});
  out.front_r = sol.xhaul_symbols;
  out.front_u = sol.wireless_symbols;
  out.front_total = sol.total_symbols;
  return out;
}

namespace {

CacheState top_popular_cache(const SystemConfig& cfg) {
  // Zipf order makes the lowest file ids the most popular ones.
  CacheState cache(cfg.cache_capacity);
  for (int f = 0; f < cfg.cache_capacity; ++f) cache.insert(f, 0);
  return cache;
}

}  // namespace

EpisodeLog run_episode(const SystemConfig& cfg, PolicyKind kind, AgentState* agent,
                       const EpisodeParams& params, LatencyMemo* memo) {
  if (kind == PolicyKind::rl && agent == nullptr)
    throw std::invalid_argument("run_episode: RL policy needs an agent");

  const std::string tag = std::string(params.phase);
  const std::uint64_t ep = static_cast<std::uint64_t>(params.episode_index);

  auto geometry_rng = cfg.redraw_geometry_per_episode
                          ? make_stream(cfg.seed, "geometry:" + tag, ep)
                          : make_stream(cfg.seed, "geometry", 0);
  auto fading_rng = make_stream(cfg.seed, "fading:" + tag, ep);
  auto popularity_rng = make_stream(cfg.seed, "popularity:" + tag, ep);
  auto request_rng = make_stream(cfg.seed, "requests:" + tag, ep);
  auto cache_rng = make_stream(cfg.seed, "cache-init:" + tag, ep);
  auto explore_rng = make_stream(cfg.seed, "explore:" + tag, ep);

  const Topology topo = place_nodes(cfg, geometry_rng);
  const ChannelSet channels = draw_channels(topo, cfg, fading_rng);
  const std::uint64_t uid =
      splitmix64(stream_seed(cfg.seed, "channel-uid:" + tag, ep) ^ solver_fingerprint(cfg)) ^
      (cfg.redraw_geometry_per_episode ? 0 : 0x5eedULL);
  SlotLatencyOracle oracle(&channels, uid, &cfg, memo);

  CacheState cache = (kind == PolicyKind::offline_popular)
                         ? top_popular_cache(cfg)
                         : random_initial_cache(cfg.library_size, cfg.cache_capacity, cache_rng);
  PopularityState pop =
      make_popularity(cfg.library_size, cfg.zipf_exponent, cfg.popularity_lifetime);

  const FeatureConfig fcfg{cfg.library_size, cfg.num_age_bins, cfg.age_cap,
                           cfg.cache_age_literal_formula};
  Schedule sched{0.0, 0.0};
  if (params.schedule_episode >= 1) sched = schedule(params.schedule_episode);
  double epsilon = sched.epsilon;
  if (params.learn && cfg.epsilon_override >= 0.0) epsilon = cfg.epsilon_override;

  const double r_scale = cfg.reward_scale_effective();

  EpisodeLog log;
  log.episode_index = params.episode_index;
  log.slots.reserve(cfg.slots_per_episode);

  FeatureVector x_prev;
  double reward_prev = 0.0;
  bool have_prev = false;

  for (int t = 1; t <= cfg.slots_per_episode; ++t) {
    step_popularity(pop, popularity_rng);
    ensure_min_popular(pop, cfg.num_users);
    const RequestSet req = draw_requests(pop, cfg.num_users, request_rng);
    const RequestSplit split = split_requests(req, cache);
    const Observation obs = make_observation(cache, req, t);
    const SlotLatencies lat = oracle.evaluate(split);

    int action = 0;
    switch (kind) {
      case PolicyKind::rl:
        action = select_action(agent->w, obs, epsilon, fcfg, explore_rng);
        break;
      case PolicyKind::greedy:
        action = lat.back_total < lat.front_total ? 1 : 0;
        break;
      case PolicyKind::always_fronthaul:
        action = 0;
        break;
      case PolicyKind::always_backhaul:
        action = 1;
        break;
      case PolicyKind::offline_popular:
        action = cfg.offline_always_fronthaul
                     ? 0
                     : (lat.back_total < lat.front_total ? 1 : 0);
        break;
    }

    const double delta_r = action == 1 ? lat.back_r : lat.front_r;
    const double delta_u = action == 1 ? lat.back_u : lat.front_u;
    const double delta = action == 1 ? lat.back_total : lat.front_total;
    const double reward = -delta / r_scale;

    if (kind == PolicyKind::rl && params.learn) {
      FeatureVector x_cur = build_features(obs, action, fcfg);
      if (have_prev)
        sarsa_step(*agent, x_prev, reward_prev, &x_cur, cfg.discount, cfg.trace_decay,
                   sched.beta);
      x_prev = std::move(x_cur);
      reward_prev = reward;
      have_prev = true;
    }

    touch_requests(cache, req, t);
    if (action == 1 && kind != PolicyKind::offline_popular) {
      std::vector<int> new_files;
      new_files.reserve(split.uncached_users.size());
      for (int k : split.uncached_users) new_files.push_back(req.file_of_user[k]);
      cache_insert_lru(cache, new_files, t);
    }

    SlotRecord rec;
    rec.episode = params.episode_index;
    rec.slot = t;
    rec.action = action;
    rec.delta_r = delta_r;
    rec.delta_u = delta_u;
    rec.delta = delta;
    rec.delta_front = lat.front_total;
    rec.delta_back = lat.back_total;
    rec.uncached_count = static_cast<int>(split.uncached_users.size());
    rec.age = observation_age(obs, fcfg);
    rec.cache_hash = cache.fingerprint();
    rec.reward = reward;
    log.slots.push_back(rec);
  }

  if (kind == PolicyKind::rl && params.learn && have_prev)
    sarsa_step(*agent, x_prev, reward_prev, nullptr, cfg.discount, cfg.trace_decay,
               sched.beta);

  double sum = 0.0;
  for (const auto& rec : log.slots) sum += rec.delta;
  log.mean_latency = sum / static_cast<double>(log.slots.size());
  return log;
}

TrainResult run_training(const SystemConfig& cfg, LatencyMemo* memo) {
  validate(cfg);
  LatencyMemo local;
  if (!memo) memo = &local;

  const FeatureConfig fcfg{cfg.library_size, cfg.num_age_bins, cfg.age_cap,
                           cfg.cache_age_literal_formula};
  TrainResult result;
  result.agent = AgentState(feature_dim(fcfg));
  result.episode_mean_latency.reserve(cfg.num_episodes);
  result.logs.reserve(cfg.num_episodes);

  for (int n = 1; n <= cfg.num_episodes; ++n) {
    result.agent.reset_trace();  // episodic traces
    result.agent.episode = n;
    EpisodeParams params{"train", n, n, true};
    EpisodeLog log = run_episode(cfg, PolicyKind::rl, &result.agent, params, memo);
    result.episode_mean_latency.push_back(log.mean_latency);
    result.logs.push_back(std::move(log));
    if (!result.agent.w.allFinite())
      throw std::runtime_error("run_training: weights diverged at episode " +
                               std::to_string(n));
  }
  return result;
}

namespace {

double t_quantile_95(int df) {
  // Two-sided 90% CI <=> one-sided 0.95 quantile of Student t.
  static constexpr double table[] = {6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895,
                                     1.860, 1.833, 1.812, 1.796, 1.782, 1.771, 1.761,
                                     1.753, 1.746, 1.740, 1.734, 1.729, 1.725, 1.721,
                                     1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701,
                                     1.699, 1.697};
  if (df < 1) return 6.314;
  if (df <= 30) return table[df - 1];
  if (df <= 40) return 1.684;
  if (df <= 60) return 1.671;
  return 1.645;
}

}  // namespace

EvalResult evaluate(const SystemConfig& cfg, PolicyKind kind, const AgentState* agent,
                    LatencyMemo* memo) {
  validate(cfg);
  LatencyMemo local;
  if (!memo) memo = &local;

  EvalResult result;
  AgentState greedy_copy;
  if (kind == PolicyKind::rl) {
    if (!agent) throw std::invalid_argument("evaluate: RL evaluation needs an agent");
    greedy_copy = *agent;
  }

  for (int e = 1; e <= cfg.eval_episodes; ++e) {
    EpisodeParams params{"eval", e, 0, false};
    EpisodeLog log = run_episode(cfg, kind, kind == PolicyKind::rl ? &greedy_copy : nullptr,
                                 params, memo);
    result.episode_means.push_back(log.mean_latency);
    result.logs.push_back(std::move(log));
  }

  const int n = static_cast<int>(result.episode_means.size());
  const double mean =
      std::accumulate(result.episode_means.begin(), result.episode_means.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : result.episode_means) ss += (v - mean) * (v - mean);
  const double stderr_ = n > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(double(n)) : 0.0;
  const double half = t_quantile_95(n - 1) * stderr_;
  result.mean = mean;
  result.ci_lo = mean - half;
  result.ci_hi = mean + half;
  return result;
}

std::vector<SweepRow> run_sweep(const SystemConfig& cfg,
                                const std::vector<std::string>& schemes,
                                LatencyMemo* memo) {
  LatencyMemo local;
  if (!memo) memo = &local;

  std::vector<SweepRow> rows;
  for (int size : cfg.sweep_cache_sizes) {
    SystemConfig c = cfg;
    c.cache_capacity = size;
    validate(c);
    for (const auto& scheme : schemes) {
      SweepRow row;
      row.scheme = scheme;
      row.cache_capacity = size;
      if (scheme == "rl") {
        TrainResult tr = run_training(c, memo);
        EvalResult ev = evaluate(c, PolicyKind::rl, &tr.agent, memo);
        row.mean = ev.mean;
        row.ci_lo = ev.ci_lo;
        row.ci_hi = ev.ci_hi;
      } else {
        EvalResult ev = evaluate(c, policy_from_string(scheme), nullptr, memo);
        row.mean = ev.mean;
        row.ci_lo = ev.ci_lo;
        row.ci_hi = ev.ci_hi;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace xhaul
