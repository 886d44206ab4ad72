// Residual checks re-state every solved equation directly from the stored
// paths (4th-order stencil derivatives), independently of the integrator's
// right-hand-side code. Stationarity probes replay perturbed gain schedules
// under common random numbers so the cost differences are nearly noise-free;
// with two perturbation magnitudes the eps^2 part of the central difference
// is extrapolated away, leaving an estimate of the true first-order gap.
#include "mfg/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

namespace mfg {

namespace {

struct ResAcc {
  double max_res = 0.0;
  void add(double r) { max_res = std::max(max_res, r); }
};

// 4th-order centered derivative of a matrix path at interior index k.
Mat stencil(const MatrixPath& p, int k) {
  const double h = p.grid.h();
  return (-p.at(k + 2) + 8.0 * p.at(k + 1) - 8.0 * p.at(k - 1) + p.at(k - 2)) /
         (12.0 * h);
}

Vec stencil_vec(const VectorPath& p, int k) {
  const double h = p.grid.h();
  return (-p.at(k + 2) + 8.0 * p.at(k + 1) - 8.0 * p.at(k - 1) + p.at(k - 2)) /
         (12.0 * h);
}

ResidualReport finish(std::string tag, double max_res, const TimeGrid& grid,
                      double scale, bool diagnostic = false) {
  ResidualReport rep;
  rep.equation_tag = std::move(tag);
  rep.max_residual = max_res;
  rep.grid = grid;
  rep.diagnostic_only = diagnostic;
  rep.passes = max_res <= kResTolScale * (1.0 + scale);
  return rep;
}

// Residual of a matrix differential equation over interior grid points.
// rhs(k) must return d/dt of the path at index k per the equation.
ResidualReport matrix_ode_residual(
    const std::string& tag, const MatrixPath& path,
    const std::function<Mat(int)>& rhs, bool diagnostic = false) {
  ResAcc acc;
  for (int k = 2; k + 2 <= path.grid.steps; ++k)
    acc.add((stencil(path, k) - rhs(k)).norm());
  return finish(tag, acc.max_res, path.grid, path.sup_norm(), diagnostic);
}

ResidualReport vector_ode_residual(const std::string& tag,
                                   const VectorPath& path,
                                   const std::function<Vec(int)>& rhs,
                                   bool diagnostic = false) {
  ResAcc acc;
  for (int k = 2; k + 2 <= path.grid.steps; ++k)
    acc.add((stencil_vec(path, k) - rhs(k)).norm());
  return finish(tag, acc.max_res, path.grid, path.sup_norm(), diagnostic);
}

ResidualReport algebraic_residual(const std::string& tag, const Mat& res,
                                  const TimeGrid& grid, double scale) {
  return finish(tag, res.norm(), grid, scale);
}

std::vector<ResidualReport> residual_game_finite(const RiccatiBundle& b,
                                                 const ScenarioConfig& cfg) {
  const int n = cfg.n();
  const double Nn = cfg.N;
  const Mat I = Mat::Identity(n, n);
  const Mat E = I - cfg.Gamma / Nn;
  const Mat Q1 = E.transpose() * cfg.Q * E;
  const Mat Qc = ((Nn - 1.0) / Nn) * E.transpose() * cfg.Q * cfg.Gamma;

  auto M_of = [&](const Mat& K) -> Mat {
    return cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  };
  auto Ups = [&](const Mat& K) -> Mat {
    return cfg.R + cfg.D.transpose() * K * cfg.D;
  };

  std::vector<ResidualReport> out;
  out.push_back(matrix_ode_residual("K", b.K, [&](int k) -> Mat {
    const Mat& K = b.K.at(k);
    const Mat M = M_of(K);
    return cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
           M.transpose() * Ups(K).inverse() * M -
           cfg.C.transpose() * K * cfg.C - Q1;
  }));
  out.push_back(matrix_ode_residual("Pi", b.Pi, [&](int k) -> Mat {
    const Mat& K = b.K.at(k);
    const Mat& Pi = b.Pi.at(k);
    const Mat M = M_of(K);
    const Mat Ui = Ups(K).inverse();
    return cfg.rho * Pi - cfg.A.transpose() * Pi - Pi * cfg.A +
           Pi * cfg.B * Ui * cfg.B.transpose() * Pi + Pi * cfg.B * Ui * M +
           M.transpose() * Ui * cfg.B.transpose() * Pi + Qc;
  }));
  out.push_back(vector_ode_residual("s", b.s, [&](int k) -> Vec {
    const double t = b.s.grid.t(k);
    const Mat& K = b.K.at(k);
    const Mat P = K + b.Pi.at(k);
    const Mat Ui = Ups(K).inverse();
    const Mat W = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;
    const Mat L = cfg.A - cfg.B * Ui * W;
    const Vec forcing = P * cfg.f.at(t) - E.transpose() * cfg.Q * cfg.eta.at(t) +
                        (cfg.C - cfg.D * Ui * W).transpose() * K *
                            cfg.sigma.at(t);
    return cfg.rho * b.s.at(k) - L.transpose() * b.s.at(k) - forcing;
  }));
  if ((cfg.Gamma - I).norm() < 1e-12) {
    // With Gamma = I the sum P = K + Pi satisfies a single equation with no
    // constant term; this cross-checks the pair against an identity neither
    // integrator used.
    MatrixPath Psum;
    Psum.grid = b.K.grid;
    for (int k = 0; k <= b.K.grid.steps; ++k)
      Psum.values.push_back(b.K.at(k) + b.Pi.at(k));
    out.push_back(matrix_ode_residual("P_sum", Psum, [&](int k) -> Mat {
      const Mat& K = b.K.at(k);
      const Mat& P = Psum.at(k);
      const Mat W = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;
      return cfg.rho * P - cfg.A.transpose() * P - P * cfg.A +
             W.transpose() * Ups(K).inverse() * W -
             cfg.C.transpose() * K * cfg.C;
    }));
  }
  return out;
}

std::vector<ResidualReport> residual_game_infinite(const RiccatiBundle& b,
                                                   const ScenarioConfig& cfg) {
  const int n = cfg.n();
  const Mat I = Mat::Identity(n, n);
  const Mat E = I - cfg.Gamma / static_cast<double>(cfg.N);
  const Mat K = b.K.at(0);
  const Mat P = b.P ? *b.P : K;
  const Vec s = b.s.at(0);
  const Mat Ups = cfg.R + cfg.D.transpose() * K * cfg.D;
  const Mat Ui = Ups.inverse();
  const Mat M = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  const Mat W = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;

  std::vector<ResidualReport> out;
  out.push_back(algebraic_residual(
      "K_are",
      cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
          M.transpose() * Ui * M - cfg.C.transpose() * K * cfg.C -
          E.transpose() * cfg.Q * E,
      b.K.grid, K.norm()));
  out.push_back(algebraic_residual(
      "P_are",
      cfg.rho * P - cfg.A.transpose() * P - P * cfg.A +
          W.transpose() * Ui * W - cfg.C.transpose() * K * cfg.C -
          E.transpose() * cfg.Q * (I - cfg.Gamma),
      b.K.grid, P.norm()));
  const Mat L = cfg.A - cfg.B * Ui * W;
  const Vec forcing = (cfg.C - cfg.D * Ui * W).transpose() * K *
                          cfg.sigma.at(0.0) +
                      P * cfg.f.at(0.0) -
                      E.transpose() * cfg.Q * cfg.eta.at(0.0);
  out.push_back(algebraic_residual(
      "s_stat",
      (cfg.rho * s - L.transpose() * s - forcing).eval(), b.K.grid, s.norm()));
  return out;
}

std::vector<ResidualReport> residual_social_finite(const RiccatiBundle& b,
                                                   const ScenarioConfig& cfg) {
  const double Nn = cfg.N;
  const Mat QG = q_gamma(cfg.Q, cfg.Gamma);
  const Mat Qk = cfg.Q - QG / Nn;
  const Mat Qp = ((Nn - 1.0) / Nn) * QG;

  auto M_of = [&](const Mat& K) -> Mat {
    return cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  };
  auto Ups = [&](const Mat& K) -> Mat {
    return cfg.R + cfg.D.transpose() * K * cfg.D;
  };

  std::vector<ResidualReport> out;
  out.push_back(matrix_ode_residual("K_hat", b.K, [&](int k) -> Mat {
    const Mat& K = b.K.at(k);
    const Mat M = M_of(K);
    return cfg.rho * K - cfg.A.transpose() * K - K * cfg.A -
           cfg.C.transpose() * K * cfg.C +
           M.transpose() * Ups(K).inverse() * M - Qk;
  }));
  out.push_back(matrix_ode_residual("Pi_hat", b.Pi, [&](int k) -> Mat {
    const Mat& K = b.K.at(k);
    const Mat& Pi = b.Pi.at(k);
    const Mat M = M_of(K);
    const Mat Ui = Ups(K).inverse();
    return cfg.rho * Pi - cfg.A.transpose() * Pi - Pi * cfg.A +
           Pi * cfg.B * Ui * cfg.B.transpose() * Pi + Pi * cfg.B * Ui * M +
           M.transpose() * Ui * cfg.B.transpose() * Pi + Qp;
  }));
  out.push_back(vector_ode_residual("s_hat", b.s, [&](int k) -> Vec {
    const double t = b.s.grid.t(k);
    const Mat& K = b.K.at(k);
    const Mat P = K + b.Pi.at(k);
    const Mat Ui = Ups(K).inverse();
    const Mat W = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;
    const Mat L = cfg.A - cfg.B * Ui * W;
    const Vec forcing = P * cfg.f.at(t) - eta_bar(cfg.Q, cfg.Gamma, cfg.eta.at(t)) +
                        (cfg.C - cfg.D * Ui * W).transpose() * K *
                            cfg.sigma.at(t);
    return cfg.rho * b.s.at(k) - L.transpose() * b.s.at(k) - forcing;
  }));
  return out;
}

std::vector<ResidualReport> residual_social_infinite(const RiccatiBundle& b,
                                                     const ScenarioConfig& cfg) {
  const double Nn = cfg.N;
  const Mat QG = q_gamma(cfg.Q, cfg.Gamma);
  const Mat K = b.K.at(0);
  const Mat P = b.P ? *b.P : K;
  const Vec s = b.s.at(0);
  const Mat Ups = cfg.R + cfg.D.transpose() * K * cfg.D;
  const Mat Ui = Ups.inverse();
  const Mat M = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  const Mat W = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;

  std::vector<ResidualReport> out;
  out.push_back(algebraic_residual(
      "K_hat_are",
      cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
          M.transpose() * Ui * M - cfg.C.transpose() * K * cfg.C -
          (cfg.Q - QG / Nn),
      b.K.grid, K.norm()));
  out.push_back(algebraic_residual(
      "P_hat_are",
      cfg.rho * P - cfg.A.transpose() * P - P * cfg.A +
          W.transpose() * Ui * W - cfg.C.transpose() * K * cfg.C -
          (cfg.Q - QG),
      b.K.grid, P.norm()));
  const Mat L = cfg.A - cfg.B * Ui * W;
  const Vec forcing = P * cfg.f.at(0.0) -
                      eta_bar(cfg.Q, cfg.Gamma, cfg.eta.at(0.0)) +
                      (cfg.C - cfg.D * Ui * W).transpose() * K *
                          cfg.sigma.at(0.0);
  out.push_back(algebraic_residual(
      "s_hat_stat",
      (cfg.rho * s - L.transpose() * s - forcing).eval(), b.K.grid, s.norm()));
  return out;
}

std::vector<ResidualReport> residual_hetero(const RiccatiBundle& b,
                                            const ScenarioConfig& cfg) {
  const HeteroPaths& hp = *b.hetero;
  const int n = cfg.n();
  const double Nn = cfg.N;
  const double al = cfg.alpha_dominant;
  const double ga = (1.0 - al) / (Nn - 1.0);
  const Mat I = Mat::Identity(n, n);
  const Mat E1 = I - al * cfg.Gamma;
  const Mat Ej = I - ga * cfg.Gamma;

  auto M_of = [&](const Mat& K) -> Mat {
    return cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  };
  auto Ups_inv = [&](const Mat& K) -> Mat {
    return (cfg.R + cfg.D.transpose() * K * cfg.D).inverse();
  };

  std::vector<ResidualReport> out;
  out.push_back(matrix_ode_residual("Kbar1", hp.Kbar1, [&](int k) -> Mat {
    const Mat& K = hp.Kbar1.at(k);
    const Mat M = M_of(K);
    return cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
           M.transpose() * Ups_inv(K) * M - cfg.C.transpose() * K * cfg.C -
           E1.transpose() * cfg.Q * E1;
  }));
  out.push_back(matrix_ode_residual("Kbarj", hp.Kbarj, [&](int k) -> Mat {
    const Mat& K = hp.Kbarj.at(k);
    const Mat M = M_of(K);
    return cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
           M.transpose() * Ups_inv(K) * M - cfg.C.transpose() * K * cfg.C -
           Ej.transpose() * cfg.Q * Ej;
  }));

  // Shorthand per grid point.
  auto at = [&](int k) {
    struct Slice {
      Mat K1, Kj, P11, P1j, Pj1, Pjj, M1, Mj, U1i, Uji;
    } s;
    s.K1 = hp.Kbar1.at(k);
    s.Kj = hp.Kbarj.at(k);
    s.P11 = hp.Pibar11.at(k);
    s.P1j = hp.Pibar1j.at(k);
    s.Pj1 = hp.Pibarj1.at(k);
    s.Pjj = hp.Pibarjj.at(k);
    s.M1 = M_of(s.K1);
    s.Mj = M_of(s.Kj);
    s.U1i = Ups_inv(s.K1);
    s.Uji = Ups_inv(s.Kj);
    return s;
  };
  const Mat& B = cfg.B;
  const Mat Bt = cfg.B.transpose();

  out.push_back(matrix_ode_residual("Pibar11", hp.Pibar11, [&](int k) -> Mat {
    auto v = at(k);
    return cfg.rho * v.P11 - cfg.A.transpose() * v.P11 - v.P11 * cfg.A +
           v.M1.transpose() * v.U1i * Bt * v.P11 + v.P11 * B * v.U1i * v.M1 +
           v.P11 * B * v.U1i * Bt * v.P11 + v.P1j * B * v.Uji * Bt * v.Pj1;
  }));
  out.push_back(matrix_ode_residual("Pibar1j", hp.Pibar1j, [&](int k) -> Mat {
    auto v = at(k);
    return cfg.rho * v.P1j - cfg.A.transpose() * v.P1j - v.P1j * cfg.A +
           v.M1.transpose() * v.U1i * Bt * v.P1j +
           v.P11 * B * v.U1i * Bt * v.P1j +
           v.P1j * B * v.Uji * (v.Mj + Bt * v.Pjj) +
           (1.0 - al) * E1.transpose() * cfg.Q * cfg.Gamma;
  }));
  out.push_back(matrix_ode_residual("Pibarj1", hp.Pibarj1, [&](int k) -> Mat {
    auto v = at(k);
    return cfg.rho * v.Pj1 - cfg.A.transpose() * v.Pj1 - v.Pj1 * cfg.A +
           v.Mj.transpose() * v.Uji * Bt * v.Pj1 +
           v.Pjj * B * v.Uji * Bt * v.Pj1 +
           v.Pj1 * B * v.U1i * (v.M1 + Bt * v.P11) +
           al * Ej.transpose() * cfg.Q * cfg.Gamma;
  }));
  out.push_back(matrix_ode_residual("Pibarjj", hp.Pibarjj, [&](int k) -> Mat {
    auto v = at(k);
    return cfg.rho * v.Pjj - cfg.A.transpose() * v.Pjj - v.Pjj * cfg.A +
           v.Mj.transpose() * v.Uji * Bt * v.Pjj + v.Pjj * B * v.Uji * v.Mj +
           v.Pjj * B * v.Uji * Bt * v.Pjj + v.Pj1 * B * v.U1i * Bt * v.P1j +
           ((Nn - 2.0) / (Nn - 1.0)) * (1.0 - al) * Ej.transpose() * cfg.Q *
               cfg.Gamma;
  }));

  // As-printed variants of the four cross equations, reported for reference.
  out.push_back(matrix_ode_residual(
      "Pibar11_printed", hp.Pibar11,
      [&](int k) -> Mat {
        auto v = at(k);
        return cfg.rho * v.P11 - cfg.A.transpose() * v.P11 - v.P11 * cfg.A +
               v.P11 * B * v.Uji * Bt * v.P11 +
               v.Mj.transpose() * v.U1i * Bt * v.P11 +
               v.Pj1 * B * v.U1i * (v.M1 + Bt * v.P11) +
               v.P1j * B * v.Uji * Bt * v.Pj1;
      },
      true));
  out.push_back(matrix_ode_residual(
      "Pibar1j_printed", hp.Pibar1j,
      [&](int k) -> Mat {
        auto v = at(k);
        return cfg.rho * v.P1j - cfg.A.transpose() * v.P1j - v.P1j * cfg.A +
               (v.M1 + Bt * v.P11).transpose() * v.U1i * Bt * v.P1j +
               v.P1j * B * v.Uji * (v.Mj + Bt * v.Pjj) +
               (1.0 - al) * E1.transpose() * cfg.Q * cfg.Gamma;
      },
      true));
  out.push_back(matrix_ode_residual(
      "Pibarj1_printed", hp.Pibarj1,
      [&](int k) -> Mat {
        auto v = at(k);
        return cfg.rho * v.Pj1 - cfg.A.transpose() * v.Pj1 - v.Pj1 * cfg.A +
               v.Pjj * B * v.U1i * Bt * v.Pj1 +
               v.M1.transpose() * v.Uji * Bt * v.Pj1 +
               v.Pjj * B * v.U1i * v.M1 +
               al * Ej.transpose() * cfg.Q * cfg.Gamma;
      },
      true));
  out.push_back(matrix_ode_residual(
      "Pibarjj_printed", hp.Pibarjj,
      [&](int k) -> Mat {
        auto v = at(k);
        return cfg.rho * v.Pjj - cfg.A.transpose() * v.Pjj - v.Pjj * cfg.A +
               v.Mj.transpose() * v.Uji * Bt * v.Pjj +
               v.Pjj * B * v.Uji * v.Mj + v.Pjj * B * v.Uji * Bt * v.Pjj +
               v.Pj1 * B * v.U1i * Bt * v.P1j +
               ((Nn - 2.0) / (Nn - 1.0)) * (1.0 - al) * Ej.transpose() * cfg.Q;
      },
      true));
  return out;
}

std::vector<ResidualReport> residual_coupled(const RiccatiBundle& b,
                                             const ScenarioConfig& cfg) {
  const CoupledPaths& cp = *b.coupled;
  const double Nn = cfg.N;
  const Mat Gm = cfg.B * cfg.R.inverse() * cfg.B.transpose();
  const Mat QG = q_gamma(cfg.Q, cfg.Gamma);

  std::vector<ResidualReport> out;
  out.push_back(matrix_ode_residual("Kbreve", cp.Kbreve, [&](int k) -> Mat {
    const Mat& K = cp.Kbreve.at(k);
    const Mat KP = K + cp.Pibreve.at(k) / Nn;
    return cfg.rho * K - cfg.A.transpose() * K - K * cfg.A - cfg.Q +
           K * Gm * K - cfg.C.transpose() * KP * cfg.C;
  }));
  out.push_back(matrix_ode_residual("Pibreve", cp.Pibreve, [&](int k) -> Mat {
    const Mat& K = cp.Kbreve.at(k);
    const Mat& Pi = cp.Pibreve.at(k);
    const Mat P = K + Pi;
    return cfg.rho * Pi - cfg.A.transpose() * Pi - Pi * cfg.A + K * Gm * Pi +
           Pi * Gm * P - cfg.G.transpose() * P - P * cfg.G + QG;
  }));
  out.push_back(vector_ode_residual("sbreve", cp.sbreve, [&](int k) -> Vec {
    const double t = cp.sbreve.grid.t(k);
    const Mat P = cp.Kbreve.at(k) + cp.Pibreve.at(k);
    const Mat KP = cp.Kbreve.at(k) + cp.Pibreve.at(k) / Nn;
    return cfg.rho * cp.sbreve.at(k) -
           (cfg.A + cfg.G).transpose() * cp.sbreve.at(k) +
           P * Gm * cp.sbreve.at(k) - P * cfg.f.at(t) -
           cfg.C.transpose() * KP * cfg.sigma.at(t) +
           eta_bar(cfg.Q, cfg.Gamma, cfg.eta.at(t));
  }));
  return out;
}

std::vector<ResidualReport> residual_classical(const RiccatiBundle& b,
                                               const ScenarioConfig& cfg) {
  auto M_of = [&](const Mat& K) -> Mat {
    return cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  };
  auto Ups = [&](const Mat& K) -> Mat {
    return cfg.R + cfg.D.transpose() * K * cfg.D;
  };
  const bool infinite = cfg.horizon.kind == HorizonKind::Infinite;

  std::vector<ResidualReport> out;
  if (infinite) {
    const Mat K = b.K.at(0);
    const Mat Pi = b.Pi.at(0);
    const Vec s = b.s.at(0);
    const Mat M = M_of(K);
    const Mat Ui = Ups(K).inverse();
    const Mat Abar = cfg.A - cfg.B * Ui * M;
    const Mat Gm = cfg.B * Ui * cfg.B.transpose();
    out.push_back(algebraic_residual(
        "K_are",
        cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
            M.transpose() * Ui * M - cfg.C.transpose() * K * cfg.C - cfg.Q,
        b.K.grid, K.norm()));
    out.push_back(algebraic_residual(
        "Pi_are",
        cfg.rho * Pi - Pi * Abar - Abar.transpose() * Pi + Pi * Gm * Pi +
            cfg.Q * cfg.Gamma,
        b.K.grid, Pi.norm()));
    const Mat L = cfg.A - cfg.B * Ui *
                              (cfg.B.transpose() * (K + Pi) +
                               cfg.D.transpose() * K * cfg.C);
    out.push_back(algebraic_residual(
        "s_stat",
        (cfg.rho * s - L.transpose() * s -
         ((K + Pi) * cfg.f.at(0.0) - cfg.Q * cfg.eta.at(0.0)))
            .eval(),
        b.K.grid, s.norm()));
  } else {
    out.push_back(matrix_ode_residual("K", b.K, [&](int k) -> Mat {
      const Mat& K = b.K.at(k);
      const Mat M = M_of(K);
      return cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
             M.transpose() * Ups(K).inverse() * M -
             cfg.C.transpose() * K * cfg.C - cfg.Q;
    }));
    out.push_back(matrix_ode_residual("Pi", b.Pi, [&](int k) -> Mat {
      const Mat& K = b.K.at(k);
      const Mat& Pi = b.Pi.at(k);
      const Mat M = M_of(K);
      const Mat Ui = Ups(K).inverse();
      const Mat Abar = cfg.A - cfg.B * Ui * M;
      return cfg.rho * Pi - Pi * Abar - Abar.transpose() * Pi +
             Pi * cfg.B * Ui * cfg.B.transpose() * Pi + cfg.Q * cfg.Gamma;
    }));
    out.push_back(vector_ode_residual("s", b.s, [&](int k) -> Vec {
      const double t = b.s.grid.t(k);
      const Mat& K = b.K.at(k);
      const Mat Ui = Ups(K).inverse();
      const Mat L = cfg.A - cfg.B * Ui *
                                (cfg.B.transpose() * (K + b.Pi.at(k)) +
                                 cfg.D.transpose() * K * cfg.C);
      return cfg.rho * b.s.at(k) - L.transpose() * b.s.at(k) -
             ((K + b.Pi.at(k)) * cfg.f.at(t) - cfg.Q * cfg.eta.at(t));
    }));
  }

  // Fixed-point consistency of the mean-field pair (xbar, phi), including
  // both readings of the inverse weight in the mean equation; the R-inverse
  // variant is reported for reference and differs whenever D != 0.
  if (b.xbar && b.phi) {
    const VectorPath& xbar = *b.xbar;
    const VectorPath& phi = *b.phi;
    out.push_back(vector_ode_residual("fp_phi", phi, [&](int k) -> Vec {
      const double t = phi.grid.t(k);
      const Mat& K = b.K.at(k);
      const Mat Abar = cfg.A - cfg.B * Ups(K).inverse() * M_of(K);
      const Mat Arho = Abar - (cfg.rho) * Mat::Identity(cfg.n(), cfg.n());
      return -Arho.transpose() * phi.at(k) - K * cfg.f.at(t) +
             cfg.Q * (cfg.Gamma * xbar.at(k) + cfg.eta.at(t));
    }));
    out.push_back(vector_ode_residual("fp_mean_Upsilon", xbar,
                                      [&](int k) -> Vec {
      const double t = xbar.grid.t(k);
      const Mat& K = b.K.at(k);
      const Mat Ui = Ups(K).inverse();
      const Mat Abar = cfg.A - cfg.B * Ui * M_of(K);
      return Abar * xbar.at(k) -
             cfg.B * Ui *
                 (cfg.B.transpose() * phi.at(k) +
                  cfg.D.transpose() * K * cfg.sigma.at(t)) +
             cfg.f.at(t);
    }));
    out.push_back(vector_ode_residual(
        "fp_mean_R", xbar,
        [&](int k) -> Vec {
          const double t = xbar.grid.t(k);
          const Mat& K = b.K.at(k);
          const Mat Abar = cfg.A - cfg.B * Ups(K).inverse() * M_of(K);
          return Abar * xbar.at(k) -
                 cfg.B * cfg.R.inverse() *
                     (cfg.B.transpose() * phi.at(k) +
                      cfg.D.transpose() * K * cfg.sigma.at(t)) +
                 cfg.f.at(t);
        },
        true));
  }
  return out;
}

}  // namespace

std::vector<ResidualReport> riccati_residual(const RiccatiBundle& bundle,
                                             const ScenarioConfig& cfg,
                                             const TimeGrid& grid) {
  if (!grid.same_as(bundle.K.grid))
    throw InputError("riccati_residual: grid does not match the bundle");
  switch (bundle.family) {
    case StrategyFamily::GameHomogeneousFinite:
      return residual_game_finite(bundle, cfg);
    case StrategyFamily::GameInfinite:
      return residual_game_infinite(bundle, cfg);
    case StrategyFamily::SocialFinite:
      return residual_social_finite(bundle, cfg);
    case StrategyFamily::SocialInfinite:
      return residual_social_infinite(bundle, cfg);
    case StrategyFamily::GameHeterogeneousFinite:
      return residual_hetero(bundle, cfg);
    case StrategyFamily::SocialCoupledFinite:
      return residual_coupled(bundle, cfg);
    case StrategyFamily::ClassicalMeanField:
      return residual_classical(bundle, cfg);
  }
  throw InputError("riccati_residual: unknown family");
}

bool residuals_pass(const std::vector<ResidualReport>& reports) {
  for (const auto& r : reports)
    if (!r.diagnostic_only && !r.passes) return false;
  return true;
}

namespace {

struct DirRef {
  int which = 0;  // 0 F_own, 1 F_mean, 2 F_mean2, 3 bias
  int row = 0, col = 0;
};

std::vector<DirRef> make_directions(const GainSchedule& g, bool dominant,
                                    int cap) {
  const std::vector<Mat>& fo = dominant ? g.F_own_dom : g.F_own;
  const std::vector<Mat>& fm = dominant ? g.F_mean_dom : g.F_mean;
  const std::vector<Mat>& fx = dominant ? g.F_mean2_dom : g.F_mean2;
  const std::vector<Vec>& bi = dominant ? g.bias_dom : g.bias;
  std::vector<DirRef> dirs;
  auto add_mat = [&](int which, const std::vector<Mat>& tab) {
    if (tab.empty()) return;
    for (int i = 0; i < tab[0].rows(); ++i)
      for (int j = 0; j < tab[0].cols(); ++j)
        if (static_cast<int>(dirs.size()) < cap)
          dirs.push_back({which, i, j});
  };
  add_mat(0, fo);
  add_mat(1, fm);
  add_mat(2, fx);
  if (!bi.empty())
    for (int i = 0; i < bi[0].size(); ++i)
      if (static_cast<int>(dirs.size()) < cap) dirs.push_back({3, i, 0});
  return dirs;
}

GainSchedule perturb(const GainSchedule& g, bool dominant, const DirRef& d,
                     double eps) {
  GainSchedule out = g;
  std::vector<Mat>* mats = nullptr;
  std::vector<Vec>* vecs = nullptr;
  if (d.which == 0) mats = dominant ? &out.F_own_dom : &out.F_own;
  if (d.which == 1) mats = dominant ? &out.F_mean_dom : &out.F_mean;
  if (d.which == 2) mats = dominant ? &out.F_mean2_dom : &out.F_mean2;
  if (d.which == 3) vecs = dominant ? &out.bias_dom : &out.bias;
  if (mats)
    for (auto& m : *mats) m(d.row, d.col) += eps;
  if (vecs)
    for (auto& v : *vecs) v[d.row] += eps;
  return out;
}

std::vector<double> path_costs(const Ensemble& e, int agent) {
  if (e.discarded != 0)
    throw InternalNumericalFailure(
        "stationarity probe requires discard-free ensembles");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(e.paths));
  for (int p = 0; p < e.paths; ++p) {
    double v = 0.0;
    if (agent == kSocial) {
      for (int i = 0; i < e.N; ++i)
        v += e.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(i)];
    } else {
      v = e.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(agent)];
    }
    out.push_back(v);
  }
  return out;
}

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

// Single-deviator replay for scalar uncoupled models. The other agents'
// strategies do not depend on the deviator's realization (the mean they feed
// on is the deterministic flow), so their paths are simulated once per sample
// path and every perturbed variant re-integrates only the deviating agent
// against the frozen cross-agent average. Counters match simulate_ensemble,
// so this is the same common-random-numbers estimate at a fraction of the
// work.
struct ReplayCosts {
  std::vector<double> j0;
  std::vector<std::vector<double>> jv;
};

ReplayCosts replay_deviant_scalar(const ScenarioConfig& cfg,
                                  const GainSchedule& gains, const MeanFlow& mf,
                                  int agent,
                                  const std::vector<GainSchedule>& variants,
                                  int paths, std::uint64_t seed) {
  const TimeGrid& grid = gains.grid;
  const int steps = grid.steps;
  const double h = grid.h();
  const double sqrt_h = std::sqrt(h);
  const int N = cfg.N;
  const double a = cfg.A(0, 0), b = cfg.B(0, 0);
  const double c = cfg.C(0, 0), d = cfg.D(0, 0);
  const double q = cfg.Q(0, 0), rw = cfg.R(0, 0), gam = cfg.Gamma(0, 0);
  const double escape = 1e9;

  std::vector<double> fk(static_cast<size_t>(steps) + 1);
  std::vector<double> sigk(fk), etak(fk), mk(fk), w(fk);
  for (int k = 0; k <= steps; ++k) {
    const size_t sk = static_cast<size_t>(k);
    const double t = grid.t(k);
    fk[sk] = cfg.f.at(t)[0];
    sigk[sk] = cfg.sigma.at(t)[0];
    etak[sk] = cfg.eta.at(t)[0];
    mk[sk] = mf.mean.at(k)[0];
    w[sk] = std::exp(-cfg.rho * t) * h * ((k == 0 || k == steps) ? 0.5 : 1.0);
  }
  auto tab = [&](const GainSchedule& g) {
    std::array<std::vector<double>, 3> out;
    for (auto& v : out) v.resize(static_cast<size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
      const size_t sk = static_cast<size_t>(k);
      out[0][sk] = g.F_own[sk](0, 0);
      out[1][sk] = g.F_mean.empty() ? 0.0 : g.F_mean[sk](0, 0);
      out[2][sk] = g.bias.empty() ? 0.0 : g.bias[sk][0];
    }
    return out;
  };
  const auto g0 = tab(gains);
  std::vector<std::array<std::vector<double>, 3>> gv;
  gv.reserve(variants.size());
  for (const auto& v : variants) gv.push_back(tab(v));

  const CounterRng rng{seed};
  const double sd = std::sqrt(std::max(cfg.x0_cov(0, 0), 0.0));
  const double x0m = cfg.x0_mean[0];
  const double alpha_i = cfg.alpha[agent];
  const auto ua = static_cast<std::uint32_t>(agent);

  ReplayCosts out;
  out.j0.assign(static_cast<size_t>(paths), 0.0);
  out.jv.assign(variants.size(),
                std::vector<double>(static_cast<size_t>(paths), 0.0));
  std::vector<double> srest(static_cast<size_t>(steps) + 1);
  std::vector<double> dwv(static_cast<size_t>(steps));

  for (int p = 0; p < paths; ++p) {
    const auto up = static_cast<std::uint64_t>(p);
    std::fill(srest.begin(), srest.end(), 0.0);
    for (int i = 0; i < N; ++i) {
      if (i == agent) continue;
      const auto ui = static_cast<std::uint32_t>(i);
      double x = x0m + sd * rng.normal(up, ui, 0, 100);
      for (int k = 0; k <= steps; ++k) {
        const size_t sk = static_cast<size_t>(k);
        srest[sk] += cfg.alpha[i] * x;
        if (k == steps) break;
        const double u = g0[0][sk] * x + g0[1][sk] * mk[sk] + g0[2][sk];
        const double dW =
            sqrt_h * rng.normal(up, ui, static_cast<std::uint32_t>(k), 0);
        x = x + (a * x + b * u + fk[sk]) * h +
            (c * x + d * u + sigk[sk]) * dW;
        if (!std::isfinite(x) || std::abs(x) > escape)
          throw InternalNumericalFailure(
              "stationarity probe: sample path escaped");
      }
    }
    const double z0 = rng.normal(up, ua, 0, 100);
    for (int k = 0; k < steps; ++k)
      dwv[static_cast<size_t>(k)] =
          sqrt_h * rng.normal(up, ua, static_cast<std::uint32_t>(k), 0);

    auto run_variant = [&](const std::array<std::vector<double>, 3>& g) {
      double x = x0m + sd * z0;
      double cost = 0.0;
      for (int k = 0; k <= steps; ++k) {
        const size_t sk = static_cast<size_t>(k);
        const double u = g[0][sk] * x + g[1][sk] * mk[sk] + g[2][sk];
        const double xalpha = alpha_i * x + srest[sk];
        const double e = x - gam * xalpha - etak[sk];
        cost += w[sk] * (q * e * e + rw * u * u);
        if (k == steps) break;
        x = x + (a * x + b * u + fk[sk]) * h +
            (c * x + d * u + sigk[sk]) * dwv[sk];
        if (!std::isfinite(x) || std::abs(x) > escape)
          throw InternalNumericalFailure(
              "stationarity probe: sample path escaped");
      }
      return cost;
    };
    out.j0[static_cast<size_t>(p)] = run_variant(g0);
    for (size_t v = 0; v < gv.size(); ++v)
      out.jv[v][static_cast<size_t>(p)] = run_variant(gv[v]);
  }
  return out;
}

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  const double nP = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / nP;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  if (v.size() > 1) r.se = std::sqrt(ss / (nP - 1.0) / nP);
  return r;
}

StationarityReport stationarity_probe(const ScenarioConfig& cfg,
                                      const GainSchedule& gains, int agent,
                                      int paths, std::uint64_t seed,
                                      const std::vector<double>& eps_list) {
  const MeanFlow mf = propagate_mean(gains, cfg, gains.grid);
  const bool dominant = gains.has_dominant() && agent == 0;
  const int deviant_agent = agent == kSocial ? kAllAgents : agent;
  const std::vector<DirRef> dirs = make_directions(gains, dominant, 40);

  // Perturbed variants in (direction, eps, {+,-}) order.
  std::vector<GainSchedule> variants;
  variants.reserve(dirs.size() * eps_list.size() * 2);
  for (const DirRef& d : dirs)
    for (double eps : eps_list) {
      variants.push_back(perturb(gains, dominant, d, eps));
      variants.push_back(perturb(gains, dominant, d, -eps));
    }

  std::vector<double> j0;
  std::vector<std::vector<double>> jv;
  const bool replayable =
      agent >= 0 && cfg.n() == 1 && cfg.r() == 1 && !gains.has_dominant() &&
      cfg.family != StrategyFamily::SocialCoupledFinite;
  if (replayable) {
    ReplayCosts rc =
        replay_deviant_scalar(cfg, gains, mf, agent, variants, paths, seed);
    j0 = std::move(rc.j0);
    jv = std::move(rc.jv);
  } else {
    const Ensemble base = simulate_ensemble(cfg, gains, mf, paths, seed);
    j0 = path_costs(base, agent);
    jv.reserve(variants.size());
    for (const GainSchedule& g : variants) {
      const Ensemble e =
          simulate_ensemble(cfg, gains, mf, paths, seed, &g, deviant_agent);
      jv.push_back(path_costs(e, agent));
    }
  }
  const MeanSe base_stat = mean_se(j0);

  StationarityReport rep;
  rep.agent = agent;
  rep.directions = static_cast<int>(dirs.size());
  rep.baseline_cost = base_stat.mean;
  rep.passes = true;
  rep.min_second_order_gain = std::numeric_limits<double>::infinity();

  // Two magnitudes of the same direction give central differences whose
  // eps^2 error (third derivative; large here, because a gain shift moves
  // the closed-loop mean fixed point and the tracking error it causes
  // persists under the discount) can be eliminated pairwise. The combined
  // per-path estimate is what gets compared against its own 3*stderr.
  std::vector<size_t> by_eps(eps_list.size());
  for (size_t i = 0; i < by_eps.size(); ++i) by_eps[i] = i;
  std::sort(by_eps.begin(), by_eps.end(),
            [&](size_t a, size_t b) { return eps_list[a] < eps_list[b]; });

  size_t vi = 0;
  for (size_t di = 0; di < dirs.size(); ++di) {
    std::vector<std::vector<double>> grads(eps_list.size());
    for (size_t ei = 0; ei < eps_list.size(); ++ei) {
      const std::vector<double>& jp = jv[vi++];
      const std::vector<double>& jm = jv[vi++];
      const double eps = eps_list[ei];
      std::vector<double> grad(jp.size()), curv(jp.size());
      for (size_t p = 0; p < jp.size(); ++p) {
        grad[p] = (jp[p] - jm[p]) / (2.0 * eps);
        curv[p] = (jp[p] + jm[p] - 2.0 * j0[p]) / (eps * eps);
      }
      grads[ei] = std::move(grad);
      const MeanSe cs = mean_se(curv);
      rep.min_second_order_gain =
          std::min(rep.min_second_order_gain, cs.mean);
      if (cs.mean < -3.0 * cs.se) rep.passes = false;
    }
    std::vector<double> first(j0.size());
    const size_t ia = by_eps.front();
    const size_t ib = by_eps.size() > 1 ? by_eps[1] : ia;
    const double ea2 = eps_list[ia] * eps_list[ia];
    const double eb2 = eps_list[ib] * eps_list[ib];
    if (ib != ia && eb2 - ea2 > 1e-12) {
      const double wa = eb2 / (eb2 - ea2), wb = -ea2 / (eb2 - ea2);
      for (size_t p = 0; p < first.size(); ++p)
        first[p] = wa * grads[ia][p] + wb * grads[ib][p];
    } else {
      first = grads[ia];
    }
    const MeanSe gs = mean_se(first);
    const double thresh =
        3.0 * gs.se + 1e-9 * (1.0 + std::abs(base_stat.mean));
    rep.max_first_order = std::max(rep.max_first_order, std::abs(gs.mean));
    rep.max_threshold = std::max(rep.max_threshold, thresh);
    if (std::abs(gs.mean) > thresh) rep.passes = false;
  }
  return rep;
}

}  // namespace

StationarityReport nash_stationarity_gap(
    const ScenarioConfig& cfg, const GainSchedule& gains, int agent, int paths,
    std::uint64_t seed, const std::vector<double>& perturbation_magnitudes) {
  if (agent < 0 || agent >= cfg.N)
    throw InputError("nash_stationarity_gap: agent index out of range");
  return stationarity_probe(cfg, gains, agent, paths, seed,
                            perturbation_magnitudes);
}

StationarityReport social_stationarity_gap(
    const ScenarioConfig& cfg, const GainSchedule& gains, int paths,
    std::uint64_t seed, const std::vector<double>& perturbation_magnitudes) {
  return stationarity_probe(cfg, gains, kSocial, paths, seed,
                            perturbation_magnitudes);
}

std::vector<ConvergenceRow> mf_convergence_study(
    const ScenarioConfig& cfg_base, const std::vector<int>& N_list,
    const TimeGrid& grid) {
  ScenarioConfig cfg_cl = cfg_base;
  cfg_cl.family = StrategyFamily::ClassicalMeanField;
  const RiccatiBundle cl = solve_classical_mf(cfg_cl, grid);

  std::vector<ConvergenceRow> rows;
  for (int N : N_list) {
    ScenarioConfig cfg = cfg_base;
    cfg.family = StrategyFamily::GameHomogeneousFinite;
    cfg.N = N;
    cfg.alpha = Vec::Constant(N, 1.0 / N);
    const RiccatiBundle fin = solve_game_finite(cfg, grid);
    ConvergenceRow row;
    row.N = N;
    for (int k = 0; k <= grid.steps; ++k) {
      row.dK = std::max(row.dK, (fin.K.at(k) - cl.K.at(k)).norm());
      row.dPi = std::max(row.dPi, (fin.Pi.at(k) - cl.Pi.at(k)).norm());
      row.ds = std::max(row.ds, (fin.s.at(k) - cl.s.at(k)).norm());
    }
    rows.push_back(row);
  }
  return rows;
}

CostCrossCheck cost_formula_cross_check(const ScenarioConfig& cfg,
                                        const RiccatiBundle& b, int paths,
                                        std::uint64_t seed) {
  CostCrossCheck out;
  out.closed_form = social_cost_closed_form(cfg, b);
  const GainSchedule gains = make_gains(b, cfg);
  const MeanFlow mf = propagate_mean(gains, cfg, gains.grid);
  const Ensemble ens = simulate_ensemble(cfg, gains, mf, paths, seed);
  out.simulated = estimate_cost(ens, cfg, kSocial);
  out.passes = std::abs(out.closed_form - out.simulated.value) <=
               3.0 * out.simulated.std_error + 1e-6;
  return out;
}

}  // namespace mfg
