// Euler-Maruyama Monte Carlo over the closed-loop N-agent system, with a
// counter-based RNG, a plain-double kernel for scalar models, fixed-size
// path blocks merged in order so results are independent of thread count,
// discounted cost estimation, and the closed-form social cost.
#include "mfg/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace mfg {

namespace {

constexpr int kBlock = 256;
constexpr double kSimEscape = 1e9;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

double CounterRng::normal(std::uint64_t path, std::uint32_t agent,
                          std::uint32_t step, std::uint32_t lane) const {
  std::uint64_t h = mix64(seed ^ 0x5bf0f3b1d0c4a9e7ull);
  h = mix64(h ^ path);
  h = mix64(h ^ ((static_cast<std::uint64_t>(agent) << 32) | step));
  h = mix64(h ^ lane);
  const std::uint64_t a = mix64(h ^ 0xa0761d6478bd642full);
  const std::uint64_t b = mix64(h ^ 0xe7037ed1a0b428dbull);
  // (0,1] x [0,1) uniforms, then Box-Muller.
  const double u1 = 1.0 - static_cast<double>(a >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

// Symmetric PSD square root, tolerant of zero covariance.
Mat psd_sqrt(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

struct ClassGains {
  const std::vector<Mat>* F_own = nullptr;
  const std::vector<Mat>* F_mean = nullptr;
  const std::vector<Mat>* F_mean2 = nullptr;
  const std::vector<Vec>* bias = nullptr;
  // Dominant agent: F_mean acts on mean2 (its own class) and F_mean2 on
  // the ordinary mean, the mirror of the ordinary pairing.
  bool swap_means = false;
};

ClassGains class_gains(const GainSchedule& g, bool dominant) {
  ClassGains cg;
  cg.swap_means = dominant && g.has_dominant();
  if (dominant && g.has_dominant()) {
    cg.F_own = &g.F_own_dom;
    cg.F_mean = &g.F_mean_dom;
    cg.F_mean2 = &g.F_mean2_dom;
    cg.bias = &g.bias_dom;
  } else {
    cg.F_own = &g.F_own;
    cg.F_mean = &g.F_mean;
    cg.F_mean2 = &g.F_mean2;
    cg.bias = &g.bias;
  }
  return cg;
}

// Everything the stepping kernels need, precomputed per grid point.
struct SimContext {
  const ScenarioConfig* cfg = nullptr;
  TimeGrid grid;
  int N = 0, n = 0, r = 0;
  bool coupled = false;
  bool record = false;
  int tail_start = 0;  // first grid index of the last decile
  CounterRng rng;

  std::vector<double> w;          // trapezoid cost weights, per grid point
  std::vector<Vec> f_t, sigma_t, eta_t;
  std::vector<Vec> m_t, m2_t;     // deterministic mean flows
  // Per agent: which schedule (baseline or deviant) and class slice applies.
  std::vector<ClassGains> agent_gains;

  // Scalar fast path tables (n == r == 1).
  bool scalar = false;
  double a = 0, b = 0, c = 0, d = 0, g = 0, q = 0, rw = 0, gam = 0;
  std::vector<double> alpha;
  std::vector<double> fs, sigs, etas, ms, m2s;
  // Indexed [agent][k].
  std::vector<std::vector<double>> fo, fm, fx, bi;
};

struct BlockPartial {
  std::vector<Vec> sum_xavg;
  std::vector<double> sum_xavg_sq;
  std::vector<double> sum_spread;
  int discarded = 0;
};

// One Monte Carlo path with plain doubles. Returns false on escape.
bool run_path_scalar(const SimContext& ctx, std::uint64_t p, Ensemble& ens,
                     std::vector<double>& xavg_acc,
                     std::vector<double>& xsq_acc,
                     std::vector<double>& spread_acc) {
  const int N = ctx.N;
  const int steps = ctx.grid.steps;
  const double h = ctx.grid.h();
  const double sqrt_h = std::sqrt(h);
  const double invN = 1.0 / N;

  std::vector<double> x(static_cast<size_t>(N));
  std::vector<double> xi, zeta;
  const double sd = std::sqrt(std::max(ctx.cfg->x0_cov(0, 0), 0.0));
  for (int i = 0; i < N; ++i)
    x[static_cast<size_t>(i)] =
        ctx.cfg->x0_mean[0] +
        sd * ctx.rng.normal(p, static_cast<std::uint32_t>(i), 0, 100);
  if (ctx.coupled) {
    xi = x;
    zeta.assign(static_cast<size_t>(N), ctx.cfg->x0_mean[0]);
  }

  std::vector<double> cost(static_cast<size_t>(N), 0.0);
  std::vector<double> tail(static_cast<size_t>(N), 0.0);
  RecordedPath* rec = ctx.record ? &ens.recorded[static_cast<size_t>(p)]
                                 : nullptr;

  for (int k = 0; k <= steps; ++k) {
    double sum = 0.0;
    for (int i = 0; i < N; ++i) sum += x[static_cast<size_t>(i)];
    const double xavg = sum * invN;
    double xalpha = 0.0;
    for (int i = 0; i < N; ++i)
      xalpha += ctx.alpha[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];

    double spread = 0.0;
    for (int i = 0; i < N; ++i) {
      const double dv = x[static_cast<size_t>(i)] - xavg;
      spread += dv * dv;
    }
    xavg_acc[static_cast<size_t>(k)] = xavg;
    xsq_acc[static_cast<size_t>(k)] = xavg * xavg;
    spread_acc[static_cast<size_t>(k)] = spread * invN;

    const double mk = ctx.ms[static_cast<size_t>(k)];
    const double m2k = ctx.m2s[static_cast<size_t>(k)];
    const double fk = ctx.fs[static_cast<size_t>(k)];
    const double sigk = ctx.sigs[static_cast<size_t>(k)];
    const double etak = ctx.etas[static_cast<size_t>(k)];
    const double wk = ctx.w[static_cast<size_t>(k)];

    for (int i = 0; i < N; ++i) {
      const size_t si = static_cast<size_t>(i);
      const size_t sk = static_cast<size_t>(k);
      const bool swap = ctx.agent_gains[si].swap_means;
      const double m_fm = swap ? m2k : mk;
      const double m_fx = swap ? mk : m2k;
      const double z = ctx.coupled ? xi[si] : x[si];
      const double u = ctx.fo[si][sk] * z + ctx.fm[si][sk] * m_fm +
                       ctx.fx[si][sk] * (ctx.coupled ? zeta[si] : m_fx) +
                       ctx.bi[si][sk];
      const double e = x[si] - ctx.gam * xalpha - etak;
      const double run_cost = ctx.q * e * e + ctx.rw * u * u;
      cost[si] += wk * run_cost;
      if (k >= ctx.tail_start) tail[si] += run_cost;
      if (rec) {
        rec->states[si].push_back(Vec::Constant(1, x[si]));
        rec->controls[si].push_back(Vec::Constant(1, u));
        if (ctx.coupled) {
          rec->xi[si].push_back(Vec::Constant(1, xi[si]));
          rec->zeta[si].push_back(Vec::Constant(1, zeta[si]));
        }
      }
      if (k == steps) continue;
      const double dW =
          sqrt_h * ctx.rng.normal(p, static_cast<std::uint32_t>(i),
                                  static_cast<std::uint32_t>(k), 0);
      if (rec) rec->dW[si].push_back(dW);
      x[si] = x[si] + (ctx.a * x[si] + ctx.b * u + ctx.g * xavg + fk) * h +
              (ctx.c * x[si] + ctx.d * u + sigk) * dW;
      if (ctx.coupled) {
        const double Nn = N;
        const double fxi = ctx.fx[si][sk] / (Nn - 1.0);
        const double fzeta =
            ctx.fo[si][sk] + ((Nn - 2.0) / (Nn - 1.0)) * ctx.fx[si][sk];
        const double u_mean = fxi * xi[si] + fzeta * zeta[si] + ctx.bi[si][sk];
        const double xi_new =
            xi[si] + ((ctx.a + ctx.g / Nn) * xi[si] +
                      ((Nn - 1.0) / Nn) * ctx.g * zeta[si] + ctx.b * u + fk) *
                         h +
            (ctx.c * xi[si] + sigk) * dW;
        zeta[si] = zeta[si] + ((ctx.a + ((Nn - 1.0) / Nn) * ctx.g) * zeta[si] +
                               (ctx.g / Nn) * xi[si] + ctx.b * u_mean + fk) *
                                  h;
        xi[si] = xi_new;
      }
    }
    if (k < steps) {
      for (int i = 0; i < N; ++i) {
        const double v = x[static_cast<size_t>(i)];
        if (!std::isfinite(v) || std::abs(v) > kSimEscape) return false;
      }
    }
  }

  const int tail_count = steps - ctx.tail_start + 1;
  for (int i = 0; i < N; ++i) {
    ens.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(i)] =
        cost[static_cast<size_t>(i)];
    ens.tail_integrand[static_cast<size_t>(p)][static_cast<size_t>(i)] =
        tail[static_cast<size_t>(i)] / tail_count;
  }
  return true;
}

bool run_path_generic(const SimContext& ctx, std::uint64_t p, Ensemble& ens,
                      std::vector<Vec>& xavg_acc, std::vector<double>& xsq_acc,
                      std::vector<double>& spread_acc) {
  const ScenarioConfig& cfg = *ctx.cfg;
  const int N = ctx.N, n = ctx.n;
  const int steps = ctx.grid.steps;
  const double h = ctx.grid.h();
  const double sqrt_h = std::sqrt(h);
  const Mat L0 = psd_sqrt(cfg.x0_cov);

  std::vector<Vec> x(static_cast<size_t>(N));
  std::vector<Vec> xi, zeta;
  for (int i = 0; i < N; ++i) {
    Vec zvec(n);
    for (int comp = 0; comp < n; ++comp)
      zvec[comp] = ctx.rng.normal(p, static_cast<std::uint32_t>(i), 0,
                                  100 + static_cast<std::uint32_t>(comp));
    x[static_cast<size_t>(i)] = cfg.x0_mean + L0 * zvec;
  }
  if (ctx.coupled) {
    xi = x;
    zeta.assign(static_cast<size_t>(N), cfg.x0_mean);
  }

  std::vector<double> cost(static_cast<size_t>(N), 0.0);
  std::vector<double> tail(static_cast<size_t>(N), 0.0);
  RecordedPath* rec = ctx.record ? &ens.recorded[static_cast<size_t>(p)]
                                 : nullptr;

  for (int k = 0; k <= steps; ++k) {
    const size_t sk = static_cast<size_t>(k);
    Vec xavg = Vec::Zero(n);
    for (int i = 0; i < N; ++i) xavg += x[static_cast<size_t>(i)];
    xavg /= N;
    Vec xalpha = Vec::Zero(n);
    for (int i = 0; i < N; ++i)
      xalpha += cfg.alpha[i] * x[static_cast<size_t>(i)];

    double spread = 0.0;
    for (int i = 0; i < N; ++i)
      spread += (x[static_cast<size_t>(i)] - xavg).squaredNorm();
    xavg_acc[sk] = xavg;
    xsq_acc[sk] = xavg.squaredNorm();
    spread_acc[sk] = spread / N;

    for (int i = 0; i < N; ++i) {
      const size_t si = static_cast<size_t>(i);
      const ClassGains& cg = ctx.agent_gains[si];
      const Vec& m_fm = cg.swap_means ? ctx.m2_t[sk] : ctx.m_t[sk];
      const Vec& m_fx = cg.swap_means ? ctx.m_t[sk] : ctx.m2_t[sk];
      const Vec& z = ctx.coupled ? xi[si] : x[si];
      Vec u = (*cg.F_own)[sk] * z + (*cg.bias)[sk];
      if (!cg.F_mean->empty()) u += (*cg.F_mean)[sk] * m_fm;
      if (!cg.F_mean2->empty())
        u += (*cg.F_mean2)[sk] * (ctx.coupled ? zeta[si] : m_fx);
      const Vec e = x[si] - cfg.Gamma * xalpha - ctx.eta_t[sk];
      const double run_cost = e.dot(cfg.Q * e) + u.dot(cfg.R * u);
      cost[si] += ctx.w[sk] * run_cost;
      if (k >= ctx.tail_start) tail[si] += run_cost;
      if (rec) {
        rec->states[si].push_back(x[si]);
        rec->controls[si].push_back(u);
        if (ctx.coupled) {
          rec->xi[si].push_back(xi[si]);
          rec->zeta[si].push_back(zeta[si]);
        }
      }
      if (k == steps) continue;
      const double dW =
          sqrt_h * ctx.rng.normal(p, static_cast<std::uint32_t>(i),
                                  static_cast<std::uint32_t>(k), 0);
      if (rec) rec->dW[si].push_back(dW);
      const Vec drift =
          cfg.A * x[si] + cfg.B * u + cfg.G * xavg + ctx.f_t[sk];
      const Vec diff = cfg.C * x[si] + cfg.D * u + ctx.sigma_t[sk];
      x[si] = x[si] + drift * h + diff * dW;
      if (ctx.coupled) {
        const double Nn = N;
        const Mat& Fo = (*cg.F_own)[sk];
        const Mat& Fx = (*cg.F_mean2)[sk];
        const Vec& bi = (*cg.bias)[sk];
        const Vec u_mean = (Fx / (Nn - 1.0)) * xi[si] +
                           (Fo + ((Nn - 2.0) / (Nn - 1.0)) * Fx) * zeta[si] +
                           bi;
        const Vec xi_new =
            xi[si] + ((cfg.A + cfg.G / Nn) * xi[si] +
                      ((Nn - 1.0) / Nn) * cfg.G * zeta[si] + cfg.B * u +
                      ctx.f_t[sk]) *
                         h +
            (cfg.C * xi[si] + ctx.sigma_t[sk]) * dW;
        zeta[si] =
            zeta[si] + ((cfg.A + ((Nn - 1.0) / Nn) * cfg.G) * zeta[si] +
                        (cfg.G / Nn) * xi[si] + cfg.B * u_mean + ctx.f_t[sk]) *
                           h;
        xi[si] = xi_new;
      }
    }
    if (k < steps) {
      for (int i = 0; i < N; ++i) {
        const Vec& v = x[static_cast<size_t>(i)];
        if (!v.allFinite() || v.cwiseAbs().maxCoeff() > kSimEscape)
          return false;
      }
    }
  }

  const int tail_count = steps - ctx.tail_start + 1;
  for (int i = 0; i < N; ++i) {
    ens.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(i)] =
        cost[static_cast<size_t>(i)];
    ens.tail_integrand[static_cast<size_t>(p)][static_cast<size_t>(i)] =
        tail[static_cast<size_t>(i)] / tail_count;
  }
  return true;
}

}  // namespace

Ensemble simulate_ensemble(const ScenarioConfig& cfg,
                           const GainSchedule& gains,
                           const MeanFlow& mean_flow, int paths,
                           std::uint64_t seed, const GainSchedule* deviant,
                           int deviant_agent) {
  if (paths < 1) throw InputError("simulate_ensemble: paths must be positive");
  if (!gains.grid.same_as(mean_flow.grid))
    throw InputError("simulate_ensemble: gain and mean-flow grids differ");

  SimContext ctx;
  ctx.cfg = &cfg;
  ctx.grid = gains.grid;
  ctx.N = cfg.N;
  ctx.n = cfg.n();
  ctx.r = cfg.r();
  ctx.coupled = gains.family == StrategyFamily::SocialCoupledFinite;
  ctx.record = paths <= kRecordMax;
  ctx.tail_start = ctx.grid.steps - ctx.grid.steps / 10;
  ctx.rng.seed = seed;

  const int steps = ctx.grid.steps;
  const double h = ctx.grid.h();
  for (int k = 0; k <= steps; ++k) {
    const double t = ctx.grid.t(k);
    const double edge = (k == 0 || k == steps) ? 0.5 : 1.0;
    ctx.w.push_back(std::exp(-cfg.rho * t) * h * edge);
    ctx.f_t.push_back(cfg.f.at(t));
    ctx.sigma_t.push_back(cfg.sigma.at(t));
    ctx.eta_t.push_back(cfg.eta.at(t));
    ctx.m_t.push_back(mean_flow.mean.at(k));
    ctx.m2_t.push_back(mean_flow.mean2 ? mean_flow.mean2->at(k)
                                       : Vec::Zero(ctx.n));
  }

  const bool hetero = gains.family == StrategyFamily::GameHeterogeneousFinite;
  for (int i = 0; i < ctx.N; ++i) {
    const bool use_dev =
        deviant && (deviant_agent == kAllAgents || deviant_agent == i);
    const GainSchedule& src = use_dev ? *deviant : gains;
    ctx.agent_gains.push_back(class_gains(src, hetero && i == 0));
  }

  ctx.scalar = ctx.n == 1 && ctx.r == 1;
  if (ctx.scalar) {
    ctx.a = cfg.A(0, 0);
    ctx.b = cfg.B(0, 0);
    ctx.c = cfg.C(0, 0);
    ctx.d = cfg.D(0, 0);
    ctx.g = cfg.G(0, 0);
    ctx.q = cfg.Q(0, 0);
    ctx.rw = cfg.R(0, 0);
    ctx.gam = cfg.Gamma(0, 0);
    for (int i = 0; i < ctx.N; ++i) ctx.alpha.push_back(cfg.alpha[i]);
    for (int k = 0; k <= steps; ++k) {
      ctx.fs.push_back(ctx.f_t[static_cast<size_t>(k)][0]);
      ctx.sigs.push_back(ctx.sigma_t[static_cast<size_t>(k)][0]);
      ctx.etas.push_back(ctx.eta_t[static_cast<size_t>(k)][0]);
      ctx.ms.push_back(ctx.m_t[static_cast<size_t>(k)][0]);
      ctx.m2s.push_back(ctx.m2_t[static_cast<size_t>(k)][0]);
    }
    ctx.fo.resize(static_cast<size_t>(ctx.N));
    ctx.fm.resize(static_cast<size_t>(ctx.N));
    ctx.fx.resize(static_cast<size_t>(ctx.N));
    ctx.bi.resize(static_cast<size_t>(ctx.N));
    for (int i = 0; i < ctx.N; ++i) {
      const ClassGains& cg = ctx.agent_gains[static_cast<size_t>(i)];
      for (int k = 0; k <= steps; ++k) {
        const size_t sk = static_cast<size_t>(k);
        ctx.fo[static_cast<size_t>(i)].push_back((*cg.F_own)[sk](0, 0));
        ctx.fm[static_cast<size_t>(i)].push_back(
            cg.F_mean->empty() ? 0.0 : (*cg.F_mean)[sk](0, 0));
        ctx.fx[static_cast<size_t>(i)].push_back(
            cg.F_mean2->empty() ? 0.0 : (*cg.F_mean2)[sk](0, 0));
        ctx.bi[static_cast<size_t>(i)].push_back((*cg.bias)[sk][0]);
      }
    }
  }

  Ensemble ens;
  ens.cfg_hash = scenario_digest(cfg);
  ens.seed = seed;
  ens.paths = paths;
  ens.grid = ctx.grid;
  ens.N = ctx.N;
  ens.n = ctx.n;
  ens.r = ctx.r;
  ens.rho = cfg.rho;
  ens.horizon_kind = cfg.horizon.kind;
  ens.cost_integral.assign(
      static_cast<size_t>(paths),
      std::vector<double>(static_cast<size_t>(ctx.N),
                          std::numeric_limits<double>::quiet_NaN()));
  ens.tail_integrand.assign(
      static_cast<size_t>(paths),
      std::vector<double>(static_cast<size_t>(ctx.N), 0.0));
  if (ctx.record) {
    ens.recorded.resize(static_cast<size_t>(paths));
    for (auto& rp : ens.recorded) {
      rp.states.resize(static_cast<size_t>(ctx.N));
      rp.controls.resize(static_cast<size_t>(ctx.N));
      rp.dW.resize(static_cast<size_t>(ctx.N));
      if (ctx.coupled) {
        rp.xi.resize(static_cast<size_t>(ctx.N));
        rp.zeta.resize(static_cast<size_t>(ctx.N));
      }
    }
  }

  const int nblocks = (paths + kBlock - 1) / kBlock;
  std::vector<BlockPartial> partials(static_cast<size_t>(nblocks));
  std::atomic<int> next_block{0};

  auto worker = [&]() {
    std::vector<Vec> xavg_acc(static_cast<size_t>(steps + 1));
    std::vector<double> xavg_acc_s(static_cast<size_t>(steps + 1));
    std::vector<double> xsq_acc(static_cast<size_t>(steps + 1));
    std::vector<double> spread_acc(static_cast<size_t>(steps + 1));
    for (;;) {
      const int blk = next_block.fetch_add(1);
      if (blk >= nblocks) break;
      BlockPartial& part = partials[static_cast<size_t>(blk)];
      part.sum_xavg.assign(static_cast<size_t>(steps + 1), Vec::Zero(ctx.n));
      part.sum_xavg_sq.assign(static_cast<size_t>(steps + 1), 0.0);
      part.sum_spread.assign(static_cast<size_t>(steps + 1), 0.0);
      const int lo = blk * kBlock;
      const int hi = std::min(paths, lo + kBlock);
      for (int p = lo; p < hi; ++p) {
        bool ok;
        if (ctx.scalar) {
          ok = run_path_scalar(ctx, static_cast<std::uint64_t>(p), ens,
                               xavg_acc_s, xsq_acc, spread_acc);
          if (ok)
            for (int k = 0; k <= steps; ++k)
              part.sum_xavg[static_cast<size_t>(k)][0] +=
                  xavg_acc_s[static_cast<size_t>(k)];
        } else {
          ok = run_path_generic(ctx, static_cast<std::uint64_t>(p), ens,
                                xavg_acc, xsq_acc, spread_acc);
          if (ok)
            for (int k = 0; k <= steps; ++k)
              part.sum_xavg[static_cast<size_t>(k)] +=
                  xavg_acc[static_cast<size_t>(k)];
        }
        if (ok) {
          for (int k = 0; k <= steps; ++k) {
            part.sum_xavg_sq[static_cast<size_t>(k)] +=
                xsq_acc[static_cast<size_t>(k)];
            part.sum_spread[static_cast<size_t>(k)] +=
                spread_acc[static_cast<size_t>(k)];
          }
        } else {
          ++part.discarded;
        }
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int nthreads = static_cast<int>(
      std::min<unsigned>(hw, static_cast<unsigned>(nblocks)));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  ens.sum_xavg.assign(static_cast<size_t>(steps + 1), Vec::Zero(ctx.n));
  ens.sum_xavg_sq.assign(static_cast<size_t>(steps + 1), 0.0);
  ens.sum_spread.assign(static_cast<size_t>(steps + 1), 0.0);
  for (const auto& part : partials) {
    for (int k = 0; k <= steps; ++k) {
      ens.sum_xavg[static_cast<size_t>(k)] +=
          part.sum_xavg[static_cast<size_t>(k)];
      ens.sum_xavg_sq[static_cast<size_t>(k)] +=
          part.sum_xavg_sq[static_cast<size_t>(k)];
      ens.sum_spread[static_cast<size_t>(k)] +=
          part.sum_spread[static_cast<size_t>(k)];
    }
    ens.discarded += part.discarded;
  }
  if (ens.discarded * 100 > paths)
    throw FiniteEscape("more than 1% of simulated paths escaped", ctx.grid.T);
  return ens;
}

CostEstimate estimate_cost(const Ensemble& ens, const ScenarioConfig& cfg,
                           int agent) {
  if (agent != kSocial && (agent < 0 || agent >= ens.N))
    throw InputError("estimate_cost: agent index out of range");
  CostEstimate est;
  double sum = 0.0, sum_sq = 0.0, tail_sum = 0.0;
  int count = 0;
  for (int p = 0; p < ens.paths; ++p) {
    double v = 0.0, tv = 0.0;
    if (agent == kSocial) {
      for (int i = 0; i < ens.N; ++i) {
        v += ens.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(i)];
        tv +=
            ens.tail_integrand[static_cast<size_t>(p)][static_cast<size_t>(i)];
      }
    } else {
      v = ens.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(agent)];
      tv = ens.tail_integrand[static_cast<size_t>(p)]
                             [static_cast<size_t>(agent)];
    }
    if (!std::isfinite(v)) continue;
    sum += v;
    sum_sq += v * v;
    tail_sum += tv;
    ++count;
  }
  if (count == 0)
    throw InternalNumericalFailure("estimate_cost: no completed paths");
  est.paths = count;
  est.value = sum / count;
  if (count > 1) {
    const double var =
        std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
    est.std_error = std::sqrt(var / count);
  }
  if (ens.horizon_kind == HorizonKind::Infinite && cfg.rho > 0.0)
    est.tail_bound = std::exp(-cfg.rho * ens.grid.T) * (tail_sum / count) /
                     cfg.rho;
  return est;
}

double social_cost_closed_form(const ScenarioConfig& cfg,
                               const RiccatiBundle& bundle) {
  if (bundle.family != StrategyFamily::SocialFinite || bundle.Pi.empty())
    throw InputError(
        "social_cost_closed_form needs a finite-horizon social bundle");
  const TimeGrid& grid = bundle.K.grid;
  const Mat K0 = bundle.K.at(0);
  const Mat P0 = K0 + bundle.Pi.at(0);
  const Vec s0 = bundle.s.at(0);
  const double base = (K0 * cfg.x0_cov).trace() +
                      cfg.x0_mean.dot(P0 * cfg.x0_mean) +
                      2.0 * s0.dot(cfg.x0_mean);

  double integral = 0.0;
  for (int k = 0; k <= grid.steps; ++k) {
    const double t = grid.t(k);
    const Vec sig = cfg.sigma.at(t);
    const Vec eta_t = cfg.eta.at(t);
    const Vec f_t = cfg.f.at(t);
    const Mat& K = bundle.K.at(k);
    const Mat P = K + bundle.Pi.at(k);
    const Vec& s = bundle.s.at(k);
    const Vec gvec = cfg.B.transpose() * s + cfg.D.transpose() * K * sig;
    const Mat Ui = bundle.Upsilon.at(k).inverse();
    const double integrand = sig.dot(K * sig) + sig.dot(P * sig) +
                             eta_t.dot(cfg.Q * eta_t) - gvec.dot(Ui * gvec) +
                             2.0 * s.dot(f_t);
    const double edge = (k == 0 || k == grid.steps) ? 0.5 : 1.0;
    integral += std::exp(-cfg.rho * t) * integrand * grid.h() * edge;
  }
  return cfg.N * (base + integral);
}

ConsensusSeries consensus_metrics(const Ensemble& ens, const Vec& x_ref) {
  ConsensusSeries cs;
  const int valid = ens.paths - ens.discarded;
  if (valid < 1)
    throw InternalNumericalFailure("consensus_metrics: no completed paths");
  const int steps = ens.grid.steps;
  for (int k = 0; k <= steps; ++k) {
    const size_t sk = static_cast<size_t>(k);
    cs.t.push_back(ens.grid.t(k));
    const Vec mean_avg = ens.sum_xavg[sk] / valid;
    const double mean_sq = ens.sum_xavg_sq[sk] / valid;
    cs.mse_mean.push_back(mean_sq - 2.0 * x_ref.dot(mean_avg) +
                          x_ref.squaredNorm());
    cs.mse_spread.push_back(ens.sum_spread[sk] / valid);
  }
  // Log-linear decay fit over the second half of the window.
  const int k0 = (steps + 1) / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int k = k0; k <= steps; ++k) {
    const double y = std::log(std::max(cs.mse_spread[static_cast<size_t>(k)],
                                       1e-300));
    sx += cs.t[static_cast<size_t>(k)];
    sy += y;
    sxx += cs.t[static_cast<size_t>(k)] * cs.t[static_cast<size_t>(k)];
    sxy += cs.t[static_cast<size_t>(k)] * y;
    ++m;
  }
  const double denom = m * sxx - sx * sx;
  if (denom > 0.0) {
    const double slope = (m * sxy - sx * sy) / denom;
    cs.fitted_rate = -slope;
    double ss = 0.0;
    const double intercept = (sy - slope * sx) / m;
    for (int k = k0; k <= steps; ++k) {
      const double y = std::log(std::max(cs.mse_spread[static_cast<size_t>(k)],
                                         1e-300));
      const double r = y - (intercept + slope * cs.t[static_cast<size_t>(k)]);
      ss += r * r;
    }
    cs.fit_residual = std::sqrt(ss / m);
  }
  return cs;
}

}  // namespace mfg
