#pragma once

#include <optional>
#include <span>
#include <vector>

#include "xhaul/channel.hpp"
#include "xhaul/content.hpp"
#include "xhaul/convex.hpp"

namespace xhaul {

enum class DeliveryMode { fronthaul = 0, backhaul = 1 };

/// Everything the per-slot latency problems need: channels of the
/// requesting users, their cache status, and the radio/link budget.
struct RequestContext {
  std::vector<Cmat> h;               // per user: user_antennas x total_antennas
  std::vector<double> noise_var;     // per user, watts
  std::vector<char> cached;          // per user: requested file in cache?
  std::vector<int> errh_antennas;    // per eRRH
  std::vector<double> power_cap_w;   // per eRRH
  std::vector<double> link_capacity; // per eRRH, bits/symbol
  std::vector<int> stream_counts;    // per user, n_k <= user antennas
  double file_size_bits = 0.0;

  int num_users() const { return static_cast<int>(h.size()); }
  int num_errhs() const { return static_cast<int>(errh_antennas.size()); }
  int total_antennas() const;
  int antenna_offset(int errh) const;  // first column of eRRH's block
  int uncached_count() const;
  std::vector<int> uncached_users() const;

  static RequestContext from(const ChannelSet& channels,
                             const RequestSplit& split,
                             const SystemConfig& cfg);
};

/// Solver knobs (mirrors the corresponding SystemConfig fields).
struct SolverConfig {
  int sca_iterations = 10;
  double sca_tol = 1e-4;
  double inner_tol = 1e-6;
  int inner_max_iters = 2000;
  double quant_floor = 1e-8;
  int mu_grid_points = 16;
  double golden_tol = 1e-3;

  static SolverConfig from(const SystemConfig& cfg);
};

struct LatencySolution {
  DeliveryMode mode = DeliveryMode::fronthaul;
  double xhaul_symbols = 0.0;     // transfer part of the slot latency
  double wireless_symbols = 0.0;  // delivery part
  double total_symbols = 0.0;
  std::vector<Cmat> precoder_cov;     // V_k, total_antennas square, per user
  Cmat quant_cov;                     // block-diagonal, fronthaul mode only
  std::vector<double> rates;          // achieved bits/symbol per user
  std::vector<double> fronthaul_bits; // g_m per eRRH, fronthaul mode only
  std::vector<double> sca_trace;      // objective per SCA iteration
  bool converged = true;
  bool rate_floor_clamped = false;
};

/// max_m uncached_count * L / C_m; zero when everything is cached.
double backhaul_xhaul_latency(int uncached_count, double file_size_bits,
                              std::span<const double> capacities);

/// Achievable rate of `user` under cooperative transmission with
/// covariances v (one per user), in bits/symbol.
double rate_backhaul(const RequestContext& ctx, const std::vector<Cmat>& v,
                     int user);

/// Same with quantization noise `omega` added at the eRRH antennas.
double rate_fronthaul(const RequestContext& ctx, const std::vector<Cmat>& v,
                      const Cmat& omega, int user);

/// Compression rate toward eRRH `errh` (bits/symbol) for the uncached
/// users' signals; zero when no user is uncached.
double fronthaul_rate_gm(const RequestContext& ctx, const std::vector<Cmat>& v,
                         const Cmat& omega, int errh);

/// Backhaul-mode minimum instantaneous latency: file transfer plus the
/// max-min-rate cooperative delivery optimized by SCA.
LatencySolution solve_p1(const RequestContext& ctx, const SolverConfig& cfg = {});

/// Fronthaul-mode minimum instantaneous latency: joint precoding and
/// compression, optimized by an outer search over the delivery-rate floor
/// with an SCA inner stage.
LatencySolution solve_p2(const RequestContext& ctx, const SolverConfig& cfg = {});

/// Top-`streams` eigenpair factor of a covariance: G with G G^H = V when
/// rank(V) <= streams, otherwise the best rank-`streams` truncation.
Cmat extract_precoders(const Cmat& v, int streams);

// --- building blocks shared by both modes (exposed for tests/diagnostics)

struct WirelessSolution {
  std::vector<Cmat> v;
  double min_rate = 0.0;
  std::vector<double> rates;
  std::vector<double> sca_trace;  // min rate per SCA iteration (non-decreasing)
  bool converged = true;
};

/// Max-min achievable rate over precoder covariances, no quantization
/// noise. Used by P1 and by P2 when every requested file is cached.
WirelessSolution solve_wireless_maxmin(const RequestContext& ctx,
                                       const SolverConfig& cfg);

struct FixedMuSolution {
  std::vector<Cmat> v;
  Cmat omega;
  double max_g = 0.0;    // max_m g_m at the returned point
  double min_rate = 0.0; // min_k fronthaul rate at the returned point
  std::vector<double> g;
  std::vector<double> rates;
  std::vector<double> sca_trace;  // max_m g per SCA iteration (non-increasing)
  bool rate_feasible = false;     // min_rate >= mu (within tolerance)
};

/// Inner stage of P2: minimize the worst compression rate subject to a
/// per-user rate floor `mu` and the per-eRRH power caps.
FixedMuSolution solve_p2_fixed_mu(const RequestContext& ctx, double mu,
                                  const SolverConfig& cfg,
                                  const FixedMuSolution* warm = nullptr);

/// P2 with the backhaul max-min rate already known (saves recomputing the
/// outer search bracket). Used by the per-episode slot solver.
LatencySolution solve_p2_with_hint(const RequestContext& ctx,
                                   const SolverConfig& cfg,
                                   const WirelessSolution* wireless_hint);

}  // namespace xhaul
