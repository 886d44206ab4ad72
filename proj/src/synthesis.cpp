// Gain assembly from solved Riccati bundles and forward propagation of the
// deterministic mean flows consumed by the decentralized strategies.
#include "mfg/synthesis.hpp"

#include <algorithm>
#include <cmath>

namespace mfg {

namespace {

Mat safe_inverse(const Mat& U, double t) {
  Eigen::FullPivLU<Mat> lu(U);
  if (!lu.isInvertible())
    throw SingularUpsilon("control weight R + D^T K D singular at t = " +
                          std::to_string(t));
  return lu.inverse();
}

}  // namespace

Mat interp_table(const std::vector<Mat>& table, const TimeGrid& grid,
                 double t) {
  const double u = std::clamp(t / grid.T, 0.0, 1.0) * grid.steps;
  const int k0 = std::min(static_cast<int>(u), grid.steps - 1);
  const double frac = u - k0;
  return (1.0 - frac) * table[static_cast<size_t>(k0)] +
         frac * table[static_cast<size_t>(k0 + 1)];
}

Vec interp_table_vec(const std::vector<Vec>& table, const TimeGrid& grid,
                     double t) {
  const double u = std::clamp(t / grid.T, 0.0, 1.0) * grid.steps;
  const int k0 = std::min(static_cast<int>(u), grid.steps - 1);
  const double frac = u - k0;
  return (1.0 - frac) * table[static_cast<size_t>(k0)] +
         frac * table[static_cast<size_t>(k0 + 1)];
}

GainSchedule make_gains(const RiccatiBundle& bundle,
                        const ScenarioConfig& cfg) {
  GainSchedule g;
  g.family = bundle.family;

  switch (bundle.family) {
    case StrategyFamily::GameHomogeneousFinite:
    case StrategyFamily::GameInfinite:
    case StrategyFamily::SocialFinite:
    case StrategyFamily::SocialInfinite:
    case StrategyFamily::ClassicalMeanField: {
      g.grid = bundle.K.grid;
      const bool use_p = bundle.P.has_value();  // infinite game/team bundles
      for (int k = 0; k < g.grid.size(); ++k) {
        const double t = g.grid.t(k);
        const Mat& K = bundle.K.at(k);
        const Mat Ui = safe_inverse(bundle.Upsilon.at(k), t);
        const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
        const Mat mean_kernel =
            use_p ? Mat(*bundle.P - K) : bundle.Pi.at(k);
        g.F_own.push_back(-Ui * Mk);
        g.F_mean.push_back(-Ui * cfg.B.transpose() * mean_kernel);
        g.bias.push_back(-Ui * (cfg.B.transpose() * bundle.s.at(k) +
                                cfg.D.transpose() * K * cfg.sigma.at(t)));
      }
      break;
    }
    case StrategyFamily::GameHeterogeneousFinite: {
      const HeteroPaths& hp = *bundle.hetero;
      g.grid = hp.Kbarj.grid;
      for (int k = 0; k < g.grid.size(); ++k) {
        const double t = g.grid.t(k);
        const Mat& Kj = hp.Kbarj.at(k);
        const Mat& K1 = hp.Kbar1.at(k);
        const Mat Uji =
            safe_inverse(cfg.R + cfg.D.transpose() * Kj * cfg.D, t);
        const Mat U1i =
            safe_inverse(cfg.R + cfg.D.transpose() * K1 * cfg.D, t);
        const Mat Mj = cfg.B.transpose() * Kj + cfg.D.transpose() * Kj * cfg.C;
        const Mat M1 = cfg.B.transpose() * K1 + cfg.D.transpose() * K1 * cfg.C;
        g.F_own.push_back(-Uji * Mj);
        g.F_mean.push_back(-Uji * cfg.B.transpose() * hp.Pibarjj.at(k));
        g.F_mean2.push_back(-Uji * cfg.B.transpose() * hp.Pibarj1.at(k));
        g.bias.push_back(Vec::Zero(cfg.r()));
        g.F_own_dom.push_back(-U1i * M1);
        g.F_mean_dom.push_back(-U1i * cfg.B.transpose() * hp.Pibar11.at(k));
        g.F_mean2_dom.push_back(-U1i * cfg.B.transpose() * hp.Pibar1j.at(k));
        g.bias_dom.push_back(Vec::Zero(cfg.r()));
      }
      break;
    }
    case StrategyFamily::SocialCoupledFinite: {
      const CoupledPaths& cp = *bundle.coupled;
      g.grid = cp.Kbreve.grid;
      const Mat Ri = safe_inverse(cfg.R, 0.0);
      const double N = cfg.N;
      for (int k = 0; k < g.grid.size(); ++k) {
        const Mat KPn = cp.Kbreve.at(k) + cp.Pibreve.at(k) / N;
        g.F_own.push_back(-Ri * cfg.B.transpose() * KPn);
        g.F_mean2.push_back(-Ri * cfg.B.transpose() *
                            Mat(((N - 1.0) / N) * cp.Pibreve.at(k)));
        g.bias.push_back(-Ri * cfg.B.transpose() * cp.sbreve.at(k));
      }
      break;
    }
  }
  return g;
}

MeanFlow propagate_mean(const GainSchedule& gains, const ScenarioConfig& cfg,
                        const TimeGrid& grid) {
  MeanFlow flow;
  flow.grid = grid;
  flow.mean.grid = grid;
  flow.mean.values.resize(static_cast<size_t>(grid.size()));
  flow.mean.values[0] = cfg.x0_mean;
  const double h = grid.h();

  if (gains.family == StrategyFamily::GameHeterogeneousFinite) {
    VectorPath dom;
    dom.grid = grid;
    dom.values.resize(static_cast<size_t>(grid.size()));
    dom.values[0] = cfg.x0_mean;
    // Two coupled class means; state stacked as (ordinary, dominant).
    auto vf = [&](double t, const Vec& ej, const Vec& e1) {
      const Mat Fo = interp_table(gains.F_own, gains.grid, t);
      const Mat Fm = interp_table(gains.F_mean, gains.grid, t);
      const Mat Fx = interp_table(gains.F_mean2, gains.grid, t);
      const Mat Fod = interp_table(gains.F_own_dom, gains.grid, t);
      const Mat Fmd = interp_table(gains.F_mean_dom, gains.grid, t);
      const Mat Fxd = interp_table(gains.F_mean2_dom, gains.grid, t);
      const Vec dj = cfg.A * ej + cfg.B * (Fo * ej + Fm * ej + Fx * e1);
      const Vec d1 = cfg.A * e1 + cfg.B * (Fod * e1 + Fmd * e1 + Fxd * ej);
      Vec out(2 * ej.size());
      out << dj, d1;
      return out;
    };
    const int n = cfg.n();
    for (int k = 0; k < grid.steps; ++k) {
      const double t = grid.t(k);
      Vec y(2 * n);
      y << flow.mean.values[static_cast<size_t>(k)],
          dom.values[static_cast<size_t>(k)];
      auto split = [n](const Vec& v) {
        return std::pair<Vec, Vec>(v.head(n), v.tail(n));
      };
      auto f = [&](double tt, const Vec& v) {
        const auto [ej, e1] = split(v);
        return vf(tt, ej, e1);
      };
      const Vec k1 = f(t, y);
      const Vec k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
      const Vec k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
      const Vec k4 = f(t + h, y + h * k3);
      const Vec yn = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      flow.mean.values[static_cast<size_t>(k + 1)] = yn.head(n);
      dom.values[static_cast<size_t>(k + 1)] = yn.tail(n);
    }
    flow.mean2 = dom;
    return flow;
  }

  const bool coupled = gains.family == StrategyFamily::SocialCoupledFinite;
  auto vf = [&](double t, const Vec& m) {
    const Mat Fo = interp_table(gains.F_own, gains.grid, t);
    Vec u = Fo * m + interp_table_vec(gains.bias, gains.grid, t);
    if (!gains.F_mean.empty())
      u += interp_table(gains.F_mean, gains.grid, t) * m;
    if (!gains.F_mean2.empty())
      u += interp_table(gains.F_mean2, gains.grid, t) * m;
    Vec d = cfg.A * m + cfg.B * u + cfg.f.at(t);
    if (coupled) d += cfg.G * m;
    return d;
  };
  for (int k = 0; k < grid.steps; ++k) {
    const double t = grid.t(k);
    const Vec& y = flow.mean.values[static_cast<size_t>(k)];
    const Vec k1 = vf(t, y);
    const Vec k2 = vf(t + 0.5 * h, y + 0.5 * h * k1);
    const Vec k3 = vf(t + 0.5 * h, y + 0.5 * h * k2);
    const Vec k4 = vf(t + h, y + h * k3);
    flow.mean.values[static_cast<size_t>(k + 1)] =
        y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (coupled) flow.mean2 = flow.mean;
  return flow;
}

}  // namespace mfg
