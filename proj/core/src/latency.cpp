#include "xhaul/latency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace xhaul {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double logdet_small(const Cmat& x) {
  if (x.rows() == 1) return std::log(x(0, 0).real());
  Eigen::LLT<Cmat> llt(x);
  if (llt.info() == Eigen::Success) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s += std::log(llt.matrixL()(i, i).real());
    return 2.0 * s;
  }
  // Rounding can push a boundary matrix slightly indefinite.
  Eigen::SelfAdjointEigenSolver<Cmat> es(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    s += std::log(std::max(es.eigenvalues()(i), 1e-300));
  return s;
}

// Re tr(A B) for Hermitian A, B without forming the product.
double herm_ip(const Cmat& a, const Cmat& b) {
  return a.cwiseProduct(b.transpose()).sum().real();
}

Cmat inverse_psd(const Cmat& x) {
  if (x.rows() == 1) return Cmat::Constant(1, 1, 1.0 / x(0, 0).real());
  Eigen::LLT<Cmat> llt(x);
  Cmat inv = llt.solve(Cmat::Identity(x.rows(), x.cols()));
  return 0.5 * (inv + inv.adjoint());
}

void require_psd(const Cmat& v, const char* what) {
  if (v.rows() != v.cols()) throw std::domain_error(std::string(what) + ": matrix not square");
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  if ((v - v.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::domain_error(std::string(what) + ": matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<Cmat> es(v, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8 * scale)
    throw std::domain_error(std::string(what) + ": matrix not PSD");
}

}  // namespace

int RequestContext::total_antennas() const {
  return std::accumulate(errh_antennas.begin(), errh_antennas.end(), 0);
}

int RequestContext::antenna_offset(int errh) const {
  return std::accumulate(errh_antennas.begin(), errh_antennas.begin() + errh, 0);
}

int RequestContext::uncached_count() const {
  int n = 0;
  for (char c : cached) n += (c == 0);
  return n;
}

std::vector<int> RequestContext::uncached_users() const {
  std::vector<int> out;
  for (int k = 0; k < num_users(); ++k)
    if (!cached[k]) out.push_back(k);
  return out;
}

RequestContext RequestContext::from(const ChannelSet& channels,
                                    const RequestSplit& split,
                                    const SystemConfig& cfg) {
  RequestContext ctx;
  ctx.h = channels.h_user;
  ctx.noise_var.assign(cfg.num_users, channels.noise_variance_w);
  ctx.cached.assign(cfg.num_users, 0);
  for (int k : split.cached_users) ctx.cached[k] = 1;
  ctx.errh_antennas.assign(cfg.num_errhs, cfg.errh_antennas);
  ctx.power_cap_w.assign(cfg.num_errhs, cfg.errh_power_watts());
  ctx.link_capacity.assign(cfg.num_errhs, cfg.xhaul_capacity_bits_per_symbol);
  ctx.stream_counts.assign(cfg.num_users, cfg.streams_per_user);
  ctx.file_size_bits = cfg.file_size_bits;
  return ctx;
}

SolverConfig SolverConfig::from(const SystemConfig& cfg) {
  SolverConfig s;
  s.sca_iterations = cfg.sca_iterations;
  s.sca_tol = cfg.sca_tol;
  s.inner_tol = cfg.inner_tol;
  s.inner_max_iters = cfg.inner_max_iters;
  s.quant_floor = cfg.quant_floor;
  s.mu_grid_points = cfg.mu_grid_points;
  s.golden_tol = cfg.golden_tol;
  return s;
}

double backhaul_xhaul_latency(int uncached_count, double file_size_bits,
                              std::span<const double> capacities) {
  if (uncached_count == 0) return 0.0;
  double worst = 0.0;
  for (double c : capacities) {
    if (c <= 0.0) throw std::domain_error("backhaul_xhaul_latency: capacity must be positive");
    worst = std::max(worst, uncached_count * file_size_bits / c);
  }
  return worst;
}

double rate_backhaul(const RequestContext& ctx, const std::vector<Cmat>& v, int user) {
  for (const auto& m : v) require_psd(m, "rate_backhaul");
  const int n = ctx.total_antennas();
  Cmat vsum = Cmat::Zero(n, n);
  for (const auto& m : v) vsum += m;
  const Cmat& h = ctx.h[user];
  const Cmat eye = Cmat::Identity(h.rows(), h.rows());
  const Cmat s_all = ctx.noise_var[user] * eye + h * vsum * h.adjoint();
  const Cmat s_int = s_all - h * v[user] * h.adjoint();
  return (logdet_small(s_all) - logdet_small(0.5 * (s_int + s_int.adjoint()))) / kLn2;
}

double rate_fronthaul(const RequestContext& ctx, const std::vector<Cmat>& v,
                      const Cmat& omega, int user) {
  for (const auto& m : v) require_psd(m, "rate_fronthaul");
  require_psd(omega, "rate_fronthaul");
  Cmat vsum = omega;
  for (const auto& m : v) vsum += m;
  const Cmat& h = ctx.h[user];
  const Cmat eye = Cmat::Identity(h.rows(), h.rows());
  const Cmat s_all = ctx.noise_var[user] * eye + h * vsum * h.adjoint();
  const Cmat s_int = s_all - h * v[user] * h.adjoint();
  return (logdet_small(s_all) - logdet_small(0.5 * (s_int + s_int.adjoint()))) / kLn2;
}

double fronthaul_rate_gm(const RequestContext& ctx, const std::vector<Cmat>& v,
                         const Cmat& omega, int errh) {
  const std::vector<int> nc = ctx.uncached_users();
  if (nc.empty()) return 0.0;
  const int off = ctx.antenna_offset(errh);
  const int nm = ctx.errh_antennas[errh];
  Cmat omega_m = omega.block(off, off, nm, nm);
  Cmat signal = Cmat::Zero(nm, nm);
  for (int k : nc) signal += v[k].block(off, off, nm, nm);
  const Cmat total = omega_m + signal;
  return (logdet_small(0.5 * (total + total.adjoint())) -
          logdet_small(0.5 * (omega_m + omega_m.adjoint()))) /
         kLn2;
}

namespace {

// ---------------------------------------------------------------------------
// Shared SCA plumbing
// ---------------------------------------------------------------------------

struct AntennaLayout {
  std::vector<int> offset;
  std::vector<int> count;
  int total = 0;

  explicit AntennaLayout(const RequestContext& ctx) {
    count = ctx.errh_antennas;
    offset.resize(count.size());
    int acc = 0;
    for (size_t m = 0; m < count.size(); ++m) {
      offset[m] = acc;
      acc += count[m];
    }
    total = acc;
  }
};

double block_power(const Cmat& v, const AntennaLayout& lay, int m) {
  double p = 0.0;
  for (int a = 0; a < lay.count[m]; ++a) p += v(lay.offset[m] + a, lay.offset[m] + a).real();
  return p;
}

// Scale the covariances (and optional quantization blocks) by a diagonal
// congruence so every per-eRRH power cap holds exactly. PSD is preserved
// and, when both signal and quantization scale together, the compression
// ratios are left untouched.
void repair_power(std::vector<Cmat>& v, std::vector<Cmat>* omega,
                  const AntennaLayout& lay, const std::vector<double>& cap) {
  const int m_count = static_cast<int>(lay.count.size());
  Eigen::VectorXd d = Eigen::VectorXd::Ones(lay.total);
  bool any = false;
  for (int m = 0; m < m_count; ++m) {
    double p = 0.0;
    for (const auto& vk : v) p += block_power(vk, lay, m);
    if (omega) p += (*omega)[m].trace().real();
    if (p > cap[m]) {
      const double t = std::sqrt(cap[m] / p);
      for (int a = 0; a < lay.count[m]; ++a) d(lay.offset[m] + a) = t;
      if (omega) (*omega)[m] *= cap[m] / p;
      any = true;
    }
  }
  if (!any) return;
  for (auto& vk : v) vk = d.asDiagonal() * vk * d.asDiagonal();
}

double softmin(const std::vector<double>& vals, double tau,
               std::vector<double>* weights) {
  const double m = *std::min_element(vals.begin(), vals.end());
  double z = 0.0;
  for (double v : vals) z += std::exp(-(v - m) / tau);
  if (weights) {
    weights->resize(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) (*weights)[i] = std::exp(-(vals[i] - m) / tau) / z;
  }
  return m - tau * std::log(z);
}

double softmax_val(const std::vector<double>& vals, double tau,
                   std::vector<double>* weights) {
  const double m = *std::max_element(vals.begin(), vals.end());
  double z = 0.0;
  for (double v : vals) z += std::exp((v - m) / tau);
  if (weights) {
    weights->resize(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) (*weights)[i] = std::exp((vals[i] - m) / tau) / z;
  }
  return m + tau * std::log(z);
}

// ---------------------------------------------------------------------------
// Backhaul wireless stage: maximize the minimum user rate.
// ---------------------------------------------------------------------------

struct MaxMinEvaluator {
  const RequestContext* ctx;
  AntennaLayout lay;
  double softmin_tau = 1e-6;
  // Per-SCA-iteration tangent data for the interference terms.
  std::vector<Cmat> t0;          // H_k^H X0_k^{-1} H_k
  std::vector<double> lin_const; // offset + sigma^2 tr(X0^{-1})

  explicit MaxMinEvaluator(const RequestContext& c) : ctx(&c), lay(c) {}

  int users() const { return ctx->num_users(); }

  void retangent(const std::vector<Cmat>& v) {
    const int k_count = users();
    t0.resize(k_count);
    lin_const.resize(k_count);
    Cmat vsum = Cmat::Zero(lay.total, lay.total);
    for (const auto& vk : v) vsum += vk;
    for (int k = 0; k < k_count; ++k) {
      const Cmat& h = ctx->h[k];
      Cmat x0 = h * (vsum - v[k]) * h.adjoint();
      x0 = 0.5 * (x0 + x0.adjoint());
      x0.diagonal().array() += ctx->noise_var[k];
      const auto tan = convex::linearize_logdet(x0);
      t0[k] = h.adjoint() * tan.grad * h;
      lin_const[k] = tan.offset + ctx->noise_var[k] * tan.grad.trace().real();
    }
  }

  // Surrogate rates (bits/symbol) at v; also true rates if requested.
  void rates_at(const std::vector<Cmat>& v, std::vector<double>* surrogate,
                std::vector<double>* true_rates) const {
    const int k_count = users();
    Cmat vsum = Cmat::Zero(lay.total, lay.total);
    for (const auto& vk : v) vsum += vk;
    if (surrogate) surrogate->resize(k_count);
    if (true_rates) true_rates->resize(k_count);
    for (int k = 0; k < k_count; ++k) {
      const Cmat& h = ctx->h[k];
      Cmat s_all = h * vsum * h.adjoint();
      s_all = 0.5 * (s_all + s_all.adjoint());
      Cmat own = h * v[k] * h.adjoint();
      own = 0.5 * (own + own.adjoint());
      Cmat s_int = s_all - own;
      s_all.diagonal().array() += ctx->noise_var[k];
      s_int.diagonal().array() += ctx->noise_var[k];
      const double ld_all = logdet_small(s_all);
      if (surrogate) {
        const double lin = lin_const[k] + herm_ip(t0[k], vsum) - herm_ip(t0[k], v[k]);
        (*surrogate)[k] = (ld_all - lin) / kLn2;
      }
      if (true_rates) (*true_rates)[k] = (ld_all - logdet_small(s_int)) / kLn2;
    }
  }

  convex::InnerProblem problem() {
    convex::InnerProblem p;
    const int k_count = users();
    const int m_count = ctx->num_errhs();
    const double cap_total = std::accumulate(ctx->power_cap_w.begin(), ctx->power_cap_w.end(), 0.0);
    p.blocks.assign(k_count, convex::BlockSpec{lay.total, cap_total, 0.0});
    p.num_constraints = m_count;

    p.eval = [this, m_count](const std::vector<Cmat>& v, std::vector<double>& cons) {
      std::vector<double> surr;
      rates_at(v, &surr, nullptr);
      for (int m = 0; m < m_count; ++m) {
        double pw = 0.0;
        for (const auto& vk : v) pw += block_power(vk, lay, m);
        cons[m] = 1.0 - pw / ctx->power_cap_w[m];
      }
      return softmin(surr, softmin_tau, nullptr);
    };

    p.grad = [this, m_count](const std::vector<Cmat>& v, const std::vector<double>& w,
                             std::vector<Cmat>& out) {
      const int k_count = users();
      std::vector<double> surr;
      rates_at(v, &surr, nullptr);
      std::vector<double> u;
      softmin(surr, softmin_tau, &u);

      Cmat vsum = Cmat::Zero(lay.total, lay.total);
      for (const auto& vk : v) vsum += vk;
      Cmat ua = Cmat::Zero(lay.total, lay.total);
      Cmat ut = Cmat::Zero(lay.total, lay.total);
      std::vector<Cmat> a(k_count);
      for (int k = 0; k < k_count; ++k) {
        const Cmat& h = ctx->h[k];
        Cmat s_all = h * vsum * h.adjoint();
        s_all = 0.5 * (s_all + s_all.adjoint());
        s_all.diagonal().array() += ctx->noise_var[k];
        a[k] = h.adjoint() * inverse_psd(s_all) * h;
        ua += u[k] * a[k];
        ut += u[k] * t0[k];
      }
      for (int l = 0; l < k_count; ++l) {
        out[l] += (ua - ut + u[l] * t0[l]) / kLn2;
        for (int m = 0; m < m_count; ++m) {
          if (w[m] == 0.0) continue;
          for (int i = 0; i < lay.count[m]; ++i)
            out[l](lay.offset[m] + i, lay.offset[m] + i) -= w[m] / ctx->power_cap_w[m];
        }
      }
    };
    return p;
  }

  std::vector<Cmat> initial_point() const {
    const int k_count = users();
    std::vector<Cmat> v(k_count, Cmat::Zero(lay.total, lay.total));
    for (int k = 0; k < k_count; ++k)
      for (int m = 0; m < ctx->num_errhs(); ++m) {
        const double p = ctx->power_cap_w[m] * (1.0 - 1e-6) / (k_count * lay.count[m]);
        for (int i = 0; i < lay.count[m]; ++i)
          v[k](lay.offset[m] + i, lay.offset[m] + i) = p;
      }
    return v;
  }
};

}  // namespace

WirelessSolution solve_wireless_maxmin(const RequestContext& ctx, const SolverConfig& cfg) {
  if (ctx.num_users() == 0) throw std::invalid_argument("solve_wireless_maxmin: no users");
  for (double p : ctx.power_cap_w)
    if (p <= 0.0) throw std::invalid_argument("solve_wireless_maxmin: nonpositive power cap");

  MaxMinEvaluator ev(ctx);
  std::vector<Cmat> v = ev.initial_point();

  convex::InnerOptions iopts;
  iopts.tol = cfg.inner_tol;
  iopts.max_iters = std::min(cfg.inner_max_iters, 500);

  WirelessSolution best;
  ev.retangent(v);
  std::vector<double> true_rates;
  ev.rates_at(v, nullptr, &true_rates);
  double cur = *std::min_element(true_rates.begin(), true_rates.end());
  best.v = v;
  best.rates = true_rates;
  best.min_rate = cur;
  best.sca_trace.push_back(cur);

  // The min-rate objective is smoothed through a temperature that anneals
  // across SCA iterations: wide early (fast, balances users), sharp late
  // (recovers the exact max-min point).
  constexpr int kAnnealIters = 4;
  for (int it = 0; it < cfg.sca_iterations; ++it) {
    ev.retangent(best.v);
    const double scale = 1.0 + std::abs(best.min_rate);
    ev.softmin_tau = std::max(1e-7 * scale, 0.08 * scale * std::pow(0.2, it));
    auto problem = ev.problem();
    auto inner = convex::solve_inner(problem, best.v, iopts);
    repair_power(inner.blocks, nullptr, ev.lay, ctx.power_cap_w);
    ev.rates_at(inner.blocks, nullptr, &true_rates);
    const double cand = *std::min_element(true_rates.begin(), true_rates.end());
    if (cand < best.min_rate) {
      if (it < kAnnealIters) continue;  // temperature still coarse, try sharper
      break;                            // keep the monotone iterate
    }
    const double gain = cand - best.min_rate;
    best.v = std::move(inner.blocks);
    best.rates = true_rates;
    best.min_rate = cand;
    best.sca_trace.push_back(cand);
    best.converged = inner.converged;
    if (it >= kAnnealIters && gain < cfg.sca_tol * std::max(1e-12, std::abs(cand))) break;
  }
  return best;
}

namespace {

// ---------------------------------------------------------------------------
// Fronthaul stage at a fixed rate floor: minimize the worst compression
// rate subject to per-user rate floors and per-eRRH power caps.
// ---------------------------------------------------------------------------

struct FixedMuEvaluator {
  const RequestContext* ctx;
  AntennaLayout lay;
  std::vector<int> nc;  // uncached users
  double mu = 0.0;
  double quant_floor = 1e-8;
  double softmax_tau = 1e-6;

  // Tangents: user-rate interference terms and per-eRRH signal terms.
  std::vector<Cmat> t0;           // per user
  std::vector<double> lin_const;  // per user
  std::vector<Cmat> g0;           // per eRRH: grad of ln|A_m| at reference
  std::vector<double> g_const;    // per eRRH: offset of the tangent

  FixedMuEvaluator(const RequestContext& c, double mu_, double floor_)
      : ctx(&c), lay(c), nc(c.uncached_users()), mu(mu_), quant_floor(floor_) {}

  int users() const { return ctx->num_users(); }
  int errhs() const { return ctx->num_errhs(); }
  // Block layout: users' covariances first, then one block per eRRH.
  int omega_block(int m) const { return users() + m; }

  void retangent(const std::vector<Cmat>& x) {
    const int k_count = users();
    const int m_count = errhs();
    t0.resize(k_count);
    lin_const.resize(k_count);
    g0.resize(m_count);
    g_const.resize(m_count);

    Cmat vsum = Cmat::Zero(lay.total, lay.total);
    for (int k = 0; k < k_count; ++k) vsum += x[k];
    Cmat omega_full = Cmat::Zero(lay.total, lay.total);
    for (int m = 0; m < m_count; ++m)
      omega_full.block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]) =
          x[omega_block(m)];

    for (int k = 0; k < k_count; ++k) {
      const Cmat& h = ctx->h[k];
      Cmat x0 = h * (vsum - x[k] + omega_full) * h.adjoint();
      x0 = 0.5 * (x0 + x0.adjoint());
      x0.diagonal().array() += ctx->noise_var[k];
      const auto tan = convex::linearize_logdet(x0);
      t0[k] = h.adjoint() * tan.grad * h;
      lin_const[k] = tan.offset + ctx->noise_var[k] * tan.grad.trace().real();
    }
    for (int m = 0; m < m_count; ++m) {
      Cmat a0 = x[omega_block(m)];
      for (int k : nc) a0 += x[k].block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]);
      a0 = 0.5 * (a0 + a0.adjoint());
      const auto tan = convex::linearize_logdet(a0);
      g0[m] = tan.grad;
      g_const[m] = tan.offset;
    }
  }

  // Surrogate compression rates g~_m and surrogate user rates at x.
  void surrogates(const std::vector<Cmat>& x, std::vector<double>* g_surr,
                  std::vector<double>* r_surr) const {
    const int k_count = users();
    const int m_count = errhs();
    Cmat vsum = Cmat::Zero(lay.total, lay.total);
    for (int k = 0; k < k_count; ++k) vsum += x[k];
    Cmat omega_full = Cmat::Zero(lay.total, lay.total);
    for (int m = 0; m < m_count; ++m)
      omega_full.block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]) =
          x[omega_block(m)];

    if (g_surr) {
      g_surr->resize(m_count);
      for (int m = 0; m < m_count; ++m) {
        double lin = g_const[m] + herm_ip(g0[m], x[omega_block(m)]);
        for (int k : nc)
          lin += herm_ip(g0[m], x[k].block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]));
        (*g_surr)[m] = (lin - logdet_small(x[omega_block(m)])) / kLn2;
      }
    }
    if (r_surr) {
      r_surr->resize(k_count);
      const Cmat tot = vsum + omega_full;
      for (int k = 0; k < k_count; ++k) {
        const Cmat& h = ctx->h[k];
        Cmat s_all = h * tot * h.adjoint();
        s_all = 0.5 * (s_all + s_all.adjoint());
        s_all.diagonal().array() += ctx->noise_var[k];
        const double lin = lin_const[k] + herm_ip(t0[k], tot) - herm_ip(t0[k], x[k]);
        (*r_surr)[k] = (logdet_small(s_all) - lin) / kLn2;
      }
    }
  }

  // True compression rates and user rates at x.
  void truths(const std::vector<Cmat>& x, std::vector<double>* g_true,
              std::vector<double>* r_true) const {
    const int k_count = users();
    const int m_count = errhs();
    Cmat vsum = Cmat::Zero(lay.total, lay.total);
    for (int k = 0; k < k_count; ++k) vsum += x[k];
    Cmat omega_full = Cmat::Zero(lay.total, lay.total);
    for (int m = 0; m < m_count; ++m)
      omega_full.block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]) =
          x[omega_block(m)];

    if (g_true) {
      g_true->resize(m_count);
      for (int m = 0; m < m_count; ++m) {
        Cmat a = x[omega_block(m)];
        for (int k : nc) a += x[k].block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]);
        a = 0.5 * (a + a.adjoint());
        (*g_true)[m] = (logdet_small(a) - logdet_small(x[omega_block(m)])) / kLn2;
      }
    }
    if (r_true) {
      r_true->resize(k_count);
      const Cmat tot = vsum + omega_full;
      for (int k = 0; k < k_count; ++k) {
        const Cmat& h = ctx->h[k];
        Cmat s_all = h * tot * h.adjoint();
        s_all = 0.5 * (s_all + s_all.adjoint());
        Cmat own = h * x[k] * h.adjoint();
        Cmat s_int = s_all - 0.5 * (own + own.adjoint());
        s_all.diagonal().array() += ctx->noise_var[k];
        s_int.diagonal().array() += ctx->noise_var[k];
        (*r_true)[k] = (logdet_small(s_all) - logdet_small(s_int)) / kLn2;
      }
    }
  }

  convex::InnerProblem problem() {
    convex::InnerProblem p;
    const int k_count = users();
    const int m_count = errhs();
    const double cap_total = std::accumulate(ctx->power_cap_w.begin(), ctx->power_cap_w.end(), 0.0);
    p.blocks.assign(k_count, convex::BlockSpec{lay.total, cap_total, 0.0});
    for (int m = 0; m < m_count; ++m)
      p.blocks.push_back(convex::BlockSpec{lay.count[m], ctx->power_cap_w[m], quant_floor});
    p.num_constraints = k_count + m_count;  // rate floors, then power caps

    p.eval = [this, k_count, m_count](const std::vector<Cmat>& x, std::vector<double>& cons) {
      std::vector<double> g_surr, r_surr;
      surrogates(x, &g_surr, &r_surr);
      for (int k = 0; k < k_count; ++k) cons[k] = r_surr[k] - mu;
      for (int m = 0; m < m_count; ++m) {
        double pw = x[omega_block(m)].trace().real();
        for (int k = 0; k < k_count; ++k) pw += block_power(x[k], lay, m);
        cons[k_count + m] = 1.0 - pw / ctx->power_cap_w[m];
      }
      return -softmax_val(g_surr, softmax_tau, nullptr);
    };

    p.grad = [this, k_count, m_count](const std::vector<Cmat>& x,
                                      const std::vector<double>& w, std::vector<Cmat>& out) {
      std::vector<double> g_surr;
      surrogates(x, &g_surr, nullptr);
      std::vector<double> gw;
      softmax_val(g_surr, softmax_tau, &gw);

      Cmat vsum = Cmat::Zero(lay.total, lay.total);
      for (int k = 0; k < k_count; ++k) vsum += x[k];
      Cmat omega_full = Cmat::Zero(lay.total, lay.total);
      for (int m = 0; m < m_count; ++m)
        omega_full.block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]) =
            x[omega_block(m)];
      const Cmat tot = vsum + omega_full;

      // Objective: -sum_m gw_m * d g~_m.
      for (int m = 0; m < m_count; ++m) {
        const Cmat go = gw[m] / kLn2 * g0[m];
        for (int k : nc)
          out[k].block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]) -= go;
        out[omega_block(m)] -= go;
        out[omega_block(m)] += gw[m] / kLn2 * inverse_psd(x[omega_block(m)]);
      }

      // Rate-floor constraints.
      std::vector<Cmat> a(k_count);
      for (int k = 0; k < k_count; ++k) {
        if (w[k] == 0.0) { a[k].resize(0, 0); continue; }
        const Cmat& h = ctx->h[k];
        Cmat s_all = h * tot * h.adjoint();
        s_all = 0.5 * (s_all + s_all.adjoint());
        s_all.diagonal().array() += ctx->noise_var[k];
        a[k] = h.adjoint() * inverse_psd(s_all) * h;
      }
      for (int k = 0; k < k_count; ++k) {
        if (w[k] == 0.0) continue;
        const double wk = w[k] / kLn2;
        for (int l = 0; l < k_count; ++l) {
          out[l] += wk * a[k];
          if (l != k) out[l] -= wk * t0[k];
        }
        for (int m = 0; m < m_count; ++m)
          out[omega_block(m)] +=
              wk * (a[k] - t0[k]).block(lay.offset[m], lay.offset[m], lay.count[m], lay.count[m]);
      }

      // Power caps.
      for (int m = 0; m < m_count; ++m) {
        const double wm = w[k_count + m];
        if (wm == 0.0) continue;
        const double scale = wm / ctx->power_cap_w[m];
        for (int l = 0; l < k_count; ++l)
          for (int i = 0; i < lay.count[m]; ++i)
            out[l](lay.offset[m] + i, lay.offset[m] + i) -= scale;
        out[omega_block(m)].diagonal().array() -= scale;
      }
    };
    return p;
  }

  // Uniform-split start: identity-block covariances plus a small slice of
  // each eRRH budget as quantization noise.
  std::vector<Cmat> initial_point() const {
    const int k_count = users();
    const int m_count = errhs();
    std::vector<Cmat> x(k_count + m_count);
    for (int k = 0; k < k_count; ++k) {
      x[k] = Cmat::Zero(lay.total, lay.total);
      for (int m = 0; m < m_count; ++m) {
        const double p = 0.9 * ctx->power_cap_w[m] / (k_count * lay.count[m]);
        for (int i = 0; i < lay.count[m]; ++i)
          x[k](lay.offset[m] + i, lay.offset[m] + i) = p;
      }
    }
    for (int m = 0; m < m_count; ++m) {
      const double residual = 0.1 * ctx->power_cap_w[m];
      x[omega_block(m)] = (0.1 * residual / lay.count[m]) *
                          Cmat::Identity(lay.count[m], lay.count[m]);
    }
    return x;
  }

  // Rank-one start aligned with each user's own channel, with a fraction
  // of every eRRH budget spent on quantization noise. Cheap compression
  // (small omega_frac) and cheap rates (large omega_frac) live in quite
  // different basins, so the cold solve scouts both.
  std::vector<Cmat> mrt_point(double omega_frac) const {
    const int k_count = users();
    const int m_count = errhs();
    std::vector<Cmat> x(k_count + m_count);
    for (int k = 0; k < k_count; ++k) {
      Eigen::VectorXcd beam(lay.total);
      const Cmat& h = ctx->h[k];
      for (int m = 0; m < m_count; ++m) {
        const double amp =
            std::sqrt((1.0 - omega_frac) * 0.999 * ctx->power_cap_w[m] /
                      (k_count * lay.count[m]));
        for (int i = 0; i < lay.count[m]; ++i) {
          const int col = lay.offset[m] + i;
          const std::complex<double> hv = h(0, col);
          const double mag = std::abs(hv);
          beam(col) = amp * (mag > 1e-30 ? std::conj(hv) / mag : 1.0);
        }
      }
      x[k] = beam * beam.adjoint();
    }
    for (int m = 0; m < m_count; ++m)
      x[omega_block(m)] = (omega_frac * ctx->power_cap_w[m] / lay.count[m]) *
                          Cmat::Identity(lay.count[m], lay.count[m]);
    return x;
  }
};

}  // namespace

namespace {

// SCA loop of the fixed-mu stage from a given start. `anneal_iters`
// smooths the max over eRRHs through the first iterations (cold starts
// only); the accepted-iterate trace of the true worst compression rate is
// non-increasing once the rate floor is met.
FixedMuSolution run_fixed_mu_sca(FixedMuEvaluator& ev, const RequestContext& ctx,
                                 const SolverConfig& cfg, std::vector<Cmat> start,
                                 int sca_iters, int anneal_iters) {
  const int k_count = ev.users();
  const int m_count = ev.errhs();

  convex::InnerOptions iopts;
  iopts.tol = cfg.inner_tol;
  iopts.max_iters = std::min(cfg.inner_max_iters, 500);

  auto snapshot = [&](const std::vector<Cmat>& point, FixedMuSolution& out) {
    std::vector<double> g_true, r_true;
    ev.truths(point, &g_true, &r_true);
    out.v.assign(point.begin(), point.begin() + k_count);
    out.omega = Cmat::Zero(ev.lay.total, ev.lay.total);
    for (int m = 0; m < m_count; ++m)
      out.omega.block(ev.lay.offset[m], ev.lay.offset[m], ev.lay.count[m], ev.lay.count[m]) =
          point[k_count + m];
    out.g = g_true;
    out.rates = r_true;
    out.max_g = *std::max_element(g_true.begin(), g_true.end());
    out.min_rate = *std::min_element(r_true.begin(), r_true.end());
    out.rate_feasible = out.min_rate >= ev.mu * (1.0 - 1e-6);
  };

  FixedMuSolution best;
  snapshot(start, best);
  best.sca_trace.push_back(best.max_g);

  std::vector<Cmat> cur = std::move(start);
  for (int it = 0; it < sca_iters; ++it) {
    ev.retangent(cur);
    {
      std::vector<double> g_surr;
      ev.surrogates(cur, &g_surr, nullptr);
      const double mg = *std::max_element(g_surr.begin(), g_surr.end());
      const double scale = 1.0 + std::abs(mg);
      ev.softmax_tau = it < anneal_iters
                           ? std::max(1e-6 * scale, 0.05 * scale * std::pow(0.15, it))
                           : 1e-6 * scale;
    }
    auto problem = ev.problem();
    auto inner = convex::solve_inner(problem, cur, iopts);

    std::vector<Cmat> v_part(inner.blocks.begin(), inner.blocks.begin() + k_count);
    std::vector<Cmat> om_part(inner.blocks.begin() + k_count, inner.blocks.end());
    repair_power(v_part, &om_part, ev.lay, ctx.power_cap_w);
    std::vector<Cmat> cand = v_part;
    cand.insert(cand.end(), om_part.begin(), om_part.end());

    FixedMuSolution snap;
    snapshot(cand, snap);

    bool accept;
    if (!best.rate_feasible) {
      accept = snap.rate_feasible || snap.min_rate > best.min_rate + 1e-12;
    } else {
      accept = snap.rate_feasible && snap.max_g <= best.max_g;
    }
    if (!accept) {
      if (it < anneal_iters) { cur = std::move(cand); continue; }
      break;
    }

    const double gain = best.max_g - snap.max_g;
    const bool gained_feasibility = snap.rate_feasible && !best.rate_feasible;
    snap.sca_trace = best.sca_trace;
    snap.sca_trace.push_back(snap.max_g);
    best = std::move(snap);
    cur = std::move(cand);
    if (it >= anneal_iters && best.rate_feasible && !gained_feasibility &&
        gain < cfg.sca_tol * std::max(1e-12, std::abs(best.max_g)))
      break;
  }
  return best;
}

// Total latency of a fixed-mu point, using the rates it actually achieves.
double fixed_mu_point_total(const RequestContext& ctx, const FixedMuSolution& s) {
  if (s.min_rate <= 0.0) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (int m = 0; m < ctx.num_errhs(); ++m)
    worst = std::max(worst, s.g[m] / ctx.link_capacity[m]);
  return ctx.file_size_bits / s.min_rate * (1.0 + worst);
}

}  // namespace

FixedMuSolution solve_p2_fixed_mu(const RequestContext& ctx, double mu,
                                  const SolverConfig& cfg, const FixedMuSolution* warm) {
  FixedMuEvaluator ev(ctx, mu, cfg.quant_floor);
  const int k_count = ev.users();
  const int m_count = ev.errhs();

  if (warm && static_cast<int>(warm->v.size()) == k_count &&
      warm->omega.rows() == ev.lay.total) {
    std::vector<Cmat> x = warm->v;
    for (int m = 0; m < m_count; ++m) {
      Cmat om = warm->omega.block(ev.lay.offset[m], ev.lay.offset[m], ev.lay.count[m],
                                  ev.lay.count[m]);
      x.push_back(convex::psd_project(om, cfg.quant_floor));
    }
    return run_fixed_mu_sca(ev, ctx, cfg, std::move(x), cfg.sca_iterations, 0);
  }

  // Cold start: scout the candidate initializations with a short SCA run,
  // then give the winner the full budget.
  const int scout_iters = std::min(4, cfg.sca_iterations);
  std::vector<std::vector<Cmat>> starts;
  starts.push_back(ev.mrt_point(0.05));
  starts.push_back(ev.mrt_point(0.45));
  starts.push_back(ev.initial_point());

  FixedMuSolution best;
  double best_total = std::numeric_limits<double>::infinity();
  bool have = false;
  for (auto& s : starts) {
    FixedMuSolution r = run_fixed_mu_sca(ev, ctx, cfg, std::move(s), scout_iters, 3);
    const double total = fixed_mu_point_total(ctx, r);
    const bool better =
        !have || (r.rate_feasible && !best.rate_feasible) ||
        (r.rate_feasible == best.rate_feasible &&
         (r.rate_feasible ? total < best_total : r.min_rate > best.min_rate));
    if (better) {
      best = std::move(r);
      best_total = total;
      have = true;
    }
  }
  return run_fixed_mu_sca(ev, ctx, cfg, [&] {
    std::vector<Cmat> x = best.v;
    for (int m = 0; m < m_count; ++m)
      x.push_back(best.omega.block(ev.lay.offset[m], ev.lay.offset[m], ev.lay.count[m],
                                   ev.lay.count[m]));
    return x;
  }(), cfg.sca_iterations, 0);
}

namespace {

struct FrontPoint {
  FixedMuSolution sol;
  double mu = 0.0;
  double delta_u = std::numeric_limits<double>::infinity();
  double delta_r = std::numeric_limits<double>::infinity();
  double total = std::numeric_limits<double>::infinity();
  bool valid = false;
};

FrontPoint evaluate_front_point(const RequestContext& ctx, double mu,
                                const SolverConfig& cfg, const FixedMuSolution* warm) {
  FrontPoint pt;
  pt.mu = mu;
  pt.sol = solve_p2_fixed_mu(ctx, mu, cfg, warm);
  if (pt.sol.min_rate <= 0.0) return pt;
  pt.delta_u = ctx.file_size_bits / pt.sol.min_rate;
  double worst = 0.0;
  for (int m = 0; m < ctx.num_errhs(); ++m)
    worst = std::max(worst, pt.sol.g[m] / ctx.link_capacity[m]);
  pt.delta_r = pt.delta_u * worst;
  pt.total = pt.delta_u + pt.delta_r;
  pt.valid = true;
  return pt;
}

}  // namespace

LatencySolution solve_p2_with_hint(const RequestContext& ctx, const SolverConfig& cfg,
                                   const WirelessSolution* wireless_hint) {
  if (ctx.num_users() == 0) throw std::invalid_argument("solve_p2: no users");
  const int n = ctx.total_antennas();
  const int m_count = ctx.num_errhs();

  LatencySolution sol;
  sol.mode = DeliveryMode::fronthaul;

  if (ctx.uncached_count() == 0) {
    // Everything requested is cached: no compression, pure cooperative
    // transmission, identical to the backhaul wireless stage.
    WirelessSolution w =
        wireless_hint ? *wireless_hint : solve_wireless_maxmin(ctx, cfg);
    sol.xhaul_symbols = 0.0;
    sol.wireless_symbols = ctx.file_size_bits / w.min_rate;
    sol.total_symbols = sol.wireless_symbols;
    sol.precoder_cov = w.v;
    sol.quant_cov = Cmat::Zero(n, n);
    sol.rates = w.rates;
    sol.fronthaul_bits.assign(m_count, 0.0);
    sol.sca_trace = w.sca_trace;
    sol.converged = w.converged;
    return sol;
  }

  const double r_star =
      wireless_hint ? wireless_hint->min_rate : solve_wireless_maxmin(ctx, cfg).min_rate;
  const double mu_lo = 0.05 * r_star;
  const double mu_hi = 1.2 * r_star;
  const int grid_n = std::max(2, cfg.mu_grid_points);

  FrontPoint best;
  FixedMuSolution warm_sol;
  const FixedMuSolution* warm = nullptr;
  bool any_feasible = false;

  // Coarse grid, geometric spacing, scanned from the high floors down.
  // Floors the solver cannot meet are skipped down to the rate it did
  // achieve; the L/mu lower bound prunes the dominated low end; a run of
  // worsening feasible evaluations means the scan has passed the minimum
  // of the (unimodal in practice) latency curve. Warm starts chain only
  // from rate-feasible incumbents.
  std::vector<double> grid(grid_n);
  for (int i = 0; i < grid_n; ++i)
    grid[i] = mu_lo * std::pow(mu_hi / mu_lo, static_cast<double>(i) / (grid_n - 1));
  int worsening = 0;
  double last_total = std::numeric_limits<double>::infinity();
  for (int i = grid_n - 1; i >= 0; --i) {
    const double mu = grid[i];
    if (best.valid && ctx.file_size_bits / (1.25 * mu) > best.total) break;
    FrontPoint pt = evaluate_front_point(ctx, mu, cfg, warm);
    if (!pt.valid) continue;
    any_feasible = any_feasible || pt.sol.rate_feasible;
    if (pt.sol.rate_feasible) {
      worsening = (best.valid && pt.total > last_total && pt.total > best.total)
                      ? worsening + 1
                      : 0;
      last_total = pt.total;
    }
    const bool better = !best.valid || pt.total < best.total;
    if (pt.sol.rate_feasible && (better || warm == nullptr)) {
      warm_sol = pt.sol;
      warm = &warm_sol;
    }
    if (better) best = std::move(pt);
    if (worsening >= 2) break;
    if (!any_feasible && best.valid && best.sol.min_rate > 0.0) {
      // Everything so far was infeasible: resume just below what the
      // solver actually achieved.
      while (i - 1 >= 0 && grid[i - 1] > best.sol.min_rate) --i;
    }
  }
  if (!best.valid) {
    // Degenerate bracket; fall back to the low floor.
    best = evaluate_front_point(ctx, mu_lo, cfg, nullptr);
    any_feasible = best.sol.rate_feasible;
  }

  // Golden-section refinement (in log mu) around the best grid point.
  {
    auto it = std::lower_bound(grid.begin(), grid.end(), best.mu);
    int idx = static_cast<int>(std::distance(grid.begin(), it));
    idx = std::clamp(idx, 0, grid_n - 1);
    double lo = std::log(grid[std::max(0, idx - 1)]);
    double hi = std::log(grid[std::min(grid_n - 1, idx + 1)]);
    if (hi > lo) {
      constexpr double kInvPhi = 0.6180339887498949;
      double a = lo, b = hi;
      double x1 = b - kInvPhi * (b - a);
      double x2 = a + kInvPhi * (b - a);
      FrontPoint p1 = evaluate_front_point(ctx, std::exp(x1), cfg, &best.sol);
      FrontPoint p2 = evaluate_front_point(ctx, std::exp(x2), cfg, &best.sol);
      auto consider = [&](FrontPoint& p) {
        if (!p.valid) return;
        any_feasible = any_feasible || p.sol.rate_feasible;
        if (p.total < best.total) best = p;
      };
      consider(p1);
      consider(p2);
      int guard = 0;
      while (b - a > cfg.golden_tol && guard++ < 60) {
        if (p1.total <= p2.total) {
          b = x2;
          x2 = x1;
          p2 = p1;
          x1 = b - kInvPhi * (b - a);
          p1 = evaluate_front_point(ctx, std::exp(x1), cfg, &best.sol);
          consider(p1);
        } else {
          a = x1;
          x1 = x2;
          p1 = p2;
          x2 = a + kInvPhi * (b - a);
          p2 = evaluate_front_point(ctx, std::exp(x2), cfg, &best.sol);
          consider(p2);
        }
      }
    }
  }

  // Polish the winner: a fresh multi-start pass at the chosen floor, a
  // warm pass, and a rank-one truncation of the covariances (the relaxed
  // optimum is usually rank one already; truncation can only shed power).
  {
    FrontPoint cold = evaluate_front_point(ctx, best.mu, cfg, nullptr);
    if (cold.valid && cold.total < best.total) best = std::move(cold);
    FrontPoint rewarm = evaluate_front_point(ctx, best.mu, cfg, &best.sol);
    if (rewarm.valid && rewarm.total < best.total) best = std::move(rewarm);

    FixedMuSolution trunc = best.sol;
    bool changed = false;
    for (size_t k = 0; k < trunc.v.size(); ++k) {
      const Cmat g1 = extract_precoders(trunc.v[k], ctx.stream_counts[k]);
      Cmat lowrank = g1 * g1.adjoint();
      if ((lowrank - trunc.v[k]).norm() > 1e-12 * (1.0 + trunc.v[k].norm())) {
        trunc.v[k] = std::move(lowrank);
        changed = true;
      }
    }
    if (changed) {
      FixedMuEvaluator ev(ctx, best.mu, cfg.quant_floor);
      std::vector<double> g_true, r_true;
      std::vector<Cmat> point = trunc.v;
      for (int m = 0; m < m_count; ++m)
        point.push_back(trunc.omega.block(ev.lay.offset[m], ev.lay.offset[m],
                                          ev.lay.count[m], ev.lay.count[m]));
      ev.truths(point, &g_true, &r_true);
      trunc.g = g_true;
      trunc.rates = r_true;
      trunc.max_g = *std::max_element(g_true.begin(), g_true.end());
      trunc.min_rate = *std::min_element(r_true.begin(), r_true.end());
      trunc.rate_feasible = trunc.min_rate >= best.mu * (1.0 - 1e-6);
      FrontPoint tp;
      tp.mu = best.mu;
      tp.sol = std::move(trunc);
      if (tp.sol.min_rate > 0.0) {
        tp.delta_u = ctx.file_size_bits / tp.sol.min_rate;
        double worst = 0.0;
        for (int m = 0; m < ctx.num_errhs(); ++m)
          worst = std::max(worst, tp.sol.g[m] / ctx.link_capacity[m]);
        tp.delta_r = tp.delta_u * worst;
        tp.total = tp.delta_u + tp.delta_r;
        tp.valid = true;
        if (tp.total < best.total) best = std::move(tp);
      }
    }
  }

  sol.xhaul_symbols = best.delta_r;
  sol.wireless_symbols = best.delta_u;
  sol.total_symbols = best.total;
  sol.precoder_cov = best.sol.v;
  sol.quant_cov = best.sol.omega;
  sol.rates = best.sol.rates;
  sol.fronthaul_bits = best.sol.g;
  sol.sca_trace = best.sol.sca_trace;
  sol.rate_floor_clamped = !any_feasible;
  return sol;
}

LatencySolution solve_p2(const RequestContext& ctx, const SolverConfig& cfg) {
  return solve_p2_with_hint(ctx, cfg, nullptr);
}

LatencySolution solve_p1(const RequestContext& ctx, const SolverConfig& cfg) {
  if (ctx.num_users() == 0) throw std::invalid_argument("solve_p1: no users");
  WirelessSolution w = solve_wireless_maxmin(ctx, cfg);
  LatencySolution sol;
  sol.mode = DeliveryMode::backhaul;
  sol.xhaul_symbols =
      backhaul_xhaul_latency(ctx.uncached_count(), ctx.file_size_bits, ctx.link_capacity);
  sol.wireless_symbols = ctx.file_size_bits / w.min_rate;
  sol.total_symbols = sol.xhaul_symbols + sol.wireless_symbols;
  sol.precoder_cov = std::move(w.v);
  sol.rates = std::move(w.rates);
  sol.sca_trace = std::move(w.sca_trace);
  sol.converged = w.converged;
  return sol;
}

Cmat extract_precoders(const Cmat& v, int streams) {
  if (streams < 1) throw std::invalid_argument("extract_precoders: streams must be >= 1");
  Eigen::SelfAdjointEigenSolver<Cmat> es(0.5 * (v + v.adjoint()));
  const int n = static_cast<int>(v.rows());
  const int take = std::min(streams, n);
  Cmat g = Cmat::Zero(n, streams);
  for (int j = 0; j < take; ++j) {
    const int src = n - 1 - j;  // eigenvalues are sorted ascending
    const double lam = std::max(0.0, es.eigenvalues()(src));
    g.col(j) = es.eigenvectors().col(src) * std::sqrt(lam);
  }
  return g;
}

}  // namespace xhaul
