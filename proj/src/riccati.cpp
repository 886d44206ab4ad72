// Backward RK4 integration of the coupled Riccati systems for each strategy
// family, algebraic Riccati solves via ordered Schur + Newton refinement, and
// the spectral solvability checks.
#include "mfg/riccati.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace mfg {

namespace {

using MatState = std::vector<Mat>;
using CMat = Eigen::MatrixXcd;

void check_finite(const MatState& state, double t) {
  for (const auto& m : state)
    if (!m.allFinite() || m.cwiseAbs().maxCoeff() > kEscapeThreshold)
      throw FiniteEscape("backward Riccati integration escaped", t);
}

MatState axpy(const MatState& a, double c, const MatState& b) {
  MatState r = a;
  for (size_t i = 0; i < r.size(); ++i) r[i] += c * b[i];
  return r;
}

// Classical RK4 run backward from the terminal slot; rhs returns forward-time
// derivatives. Values never symmetrized: symmetry of the result is a check on
// the equations, not an assumption.
std::vector<MatState> integrate_backward_stacked(
    const MatState& terminal,
    const std::function<MatState(double, const MatState&)>& rhs,
    const TimeGrid& grid) {
  std::vector<MatState> out(static_cast<size_t>(grid.size()));
  out[static_cast<size_t>(grid.steps)] = terminal;
  const double h = grid.h();
  for (int k = grid.steps; k > 0; --k) {
    const double t = grid.t(k);
    const MatState& M = out[static_cast<size_t>(k)];
    const MatState k1 = rhs(t, M);
    const MatState k2 = rhs(t - 0.5 * h, axpy(M, -0.5 * h, k1));
    const MatState k3 = rhs(t - 0.5 * h, axpy(M, -0.5 * h, k2));
    const MatState k4 = rhs(t - h, axpy(M, -h, k3));
    MatState next = M;
    for (size_t i = 0; i < next.size(); ++i)
      next[i] -= (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    check_finite(next, grid.t(k - 1));
    out[static_cast<size_t>(k - 1)] = std::move(next);
  }
  return out;
}

Mat as_col(const Vec& v) { return v; }

}  // namespace

// ---- paths ----

Mat MatrixPath::eval(double t) const {
  const double u = std::clamp(t / grid.T, 0.0, 1.0) * grid.steps;
  const int k0 = std::min(static_cast<int>(u), grid.steps - 1);
  const double frac = u - k0;
  return (1.0 - frac) * values[static_cast<size_t>(k0)] +
         frac * values[static_cast<size_t>(k0 + 1)];
}

double MatrixPath::sup_norm() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

MatrixPath MatrixPath::constant(const Mat& m, const TimeGrid& grid) {
  MatrixPath p;
  p.grid = grid;
  p.values.assign(static_cast<size_t>(grid.size()), m);
  return p;
}

Vec VectorPath::eval(double t) const {
  const double u = std::clamp(t / grid.T, 0.0, 1.0) * grid.steps;
  const int k0 = std::min(static_cast<int>(u), grid.steps - 1);
  const double frac = u - k0;
  return (1.0 - frac) * values[static_cast<size_t>(k0)] +
         frac * values[static_cast<size_t>(k0 + 1)];
}

double VectorPath::sup_norm() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

VectorPath VectorPath::constant(const Vec& v, const TimeGrid& grid) {
  VectorPath p;
  p.grid = grid;
  p.values.assign(static_cast<size_t>(grid.size()), v);
  return p;
}

// ---- shared helpers ----

Mat q_gamma(const Mat& Q, const Mat& Gamma) {
  return Gamma.transpose() * Q + Q * Gamma - Gamma.transpose() * Q * Gamma;
}

Vec eta_bar(const Mat& Q, const Mat& Gamma, const Vec& eta) {
  return Q * eta - Gamma.transpose() * Q * eta;
}

// ---- generic integrators ----

MatrixPath integrate_matrix_dre(const Mat& terminal, const DreRhs& rhs,
                                const TimeGrid& grid) {
  const auto vals = integrate_backward_stacked(
      {terminal},
      [&rhs](double t, const MatState& S) { return MatState{rhs(t, S[0])}; },
      grid);
  MatrixPath path;
  path.grid = grid;
  path.values.reserve(vals.size());
  for (const auto& v : vals) path.values.push_back(v[0]);
  return path;
}

VectorPath integrate_affine_backward(const Vec& terminal,
                                     const std::function<Mat(double)>& coeff,
                                     const std::function<Vec(double)>& forcing,
                                     double rho, const TimeGrid& grid) {
  const auto vals = integrate_backward_stacked(
      {as_col(terminal)},
      [&](double t, const MatState& S) {
        const Vec s = S[0].col(0);
        return MatState{as_col(rho * s - coeff(t) * s - forcing(t))};
      },
      grid);
  VectorPath path;
  path.grid = grid;
  path.values.reserve(vals.size());
  for (const auto& v : vals) path.values.push_back(v[0].col(0));
  return path;
}

// ---- finite-horizon game, homogeneous ----

RiccatiBundle solve_game_finite(const ScenarioConfig& cfg,
                                const TimeGrid& grid) {
  const int n = cfg.n();
  const double N = cfg.N;
  const Mat I = Mat::Identity(n, n);
  const Mat Gn = I - cfg.Gamma / N;
  const Mat Q1 = Gn.transpose() * cfg.Q * Gn;
  const Mat Qc = ((N - 1.0) / N) * Gn.transpose() * cfg.Q * cfg.Gamma;

  auto rhs = [&](double t, const MatState& S) {
    const Mat& K = S[0];
    const Mat& Pi = S[1];
    const Vec s = S[2].col(0);
    const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
    const Mat Ui = U.inverse();
    const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
    const Mat Kdot = cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
                     Mk.transpose() * Ui * Mk -
                     cfg.C.transpose() * K * cfg.C - Q1;
    const Mat BUiB = cfg.B * Ui * cfg.B.transpose();
    const Mat Pidot = cfg.rho * Pi - cfg.A.transpose() * Pi - Pi * cfg.A +
                      Pi * BUiB * Pi + Pi * cfg.B * Ui * Mk +
                      Mk.transpose() * Ui * cfg.B.transpose() * Pi + Qc;
    const Mat Gain = cfg.B.transpose() * (K + Pi) +
                     cfg.D.transpose() * K * cfg.C;
    const Mat L = cfg.A - cfg.B * Ui * Gain;
    const Mat Ceff = cfg.C - cfg.D * Ui * Gain;
    const Vec forcing = (K + Pi) * cfg.f.at(t) -
                        Gn.transpose() * cfg.Q * cfg.eta.at(t) +
                        Ceff.transpose() * K * cfg.sigma.at(t);
    const Vec sdot = cfg.rho * s - L.transpose() * s - forcing;
    return MatState{Kdot, Pidot, as_col(sdot)};
  };

  const MatState terminal{Mat::Zero(n, n), Mat::Zero(n, n),
                          as_col(Vec::Zero(n))};
  const auto vals = integrate_backward_stacked(terminal, rhs, grid);

  RiccatiBundle b;
  b.family = StrategyFamily::GameHomogeneousFinite;
  b.N = cfg.N;
  b.K.grid = b.Pi.grid = b.Upsilon.grid = b.s.grid = grid;
  for (const auto& v : vals) {
    b.K.values.push_back(v[0]);
    b.Pi.values.push_back(v[1]);
    b.s.values.push_back(v[2].col(0));
    b.Upsilon.values.push_back(cfg.R + cfg.D.transpose() * v[0] * cfg.D);
  }
  return b;
}

// ---- determinant test for game solvability ----

A2Report check_a2_determinant(const ScenarioConfig& cfg, const TimeGrid& grid) {
  const int n = cfg.n();
  const double N = cfg.N;
  const Mat I = Mat::Identity(n, n);
  const Mat Gn = I - cfg.Gamma / N;
  const Mat Q1 = Gn.transpose() * cfg.Q * Gn;
  const Mat Qc = ((N - 1.0) / N) * Gn.transpose() * cfg.Q * cfg.Gamma;

  // The K equation alone stays bounded for positive semidefinite Q, so the
  // test is available even when the full system escapes.
  auto k_rhs = [&](double, const Mat& K) {
    const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
    const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
    return Mat(cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
               Mk.transpose() * U.inverse() * Mk -
               cfg.C.transpose() * K * cfg.C - Q1);
  };
  const MatrixPath Kpath =
      integrate_matrix_dre(Mat::Zero(n, n), k_rhs, grid);

  Mat Phi = Mat::Identity(2 * n, 2 * n);
  A2Report rep;
  rep.min_det = Phi.block(n, n, n, n).determinant();
  const double h = grid.h();
  // Time-to-go runs 0..T; cell midpoints map back to the adjacent K values.
  for (int k = 0; k < grid.steps; ++k) {
    const Mat Kmid = 0.5 * (Kpath.at(grid.steps - k) +
                            Kpath.at(grid.steps - k - 1));
    const Mat U = cfg.R + cfg.D.transpose() * Kmid * cfg.D;
    const Mat Ui = U.inverse();
    const Mat Mk = cfg.B.transpose() * Kmid + cfg.D.transpose() * Kmid * cfg.C;
    const Mat Ash = cfg.A - cfg.B * Ui * Mk - 0.5 * cfg.rho * I;
    Mat calA(2 * n, 2 * n);
    calA.topLeftCorner(n, n) = Ash;
    calA.topRightCorner(n, n) = -cfg.B * Ui * cfg.B.transpose();
    calA.bottomLeftCorner(n, n) = Qc;
    calA.bottomRightCorner(n, n) = -Ash.transpose();
    Phi = (calA * h).exp() * Phi;
    rep.min_det = std::min(rep.min_det, Phi.block(n, n, n, n).determinant());
  }
  rep.passes = rep.min_det > kDetTol;
  return rep;
}

// ---- finite-horizon game, two-class population ----

RiccatiBundle solve_game_hetero(const ScenarioConfig& cfg,
                                double alpha_dominant, const TimeGrid& grid) {
  if (!cfg.f.is_zero() || !cfg.sigma.is_zero() || !cfg.eta.is_zero())
    throw InputError("two-class game requires f = sigma = eta = 0");
  if (cfg.N < 2) throw InputError("two-class game requires N >= 2");
  if (alpha_dominant <= 0.0 || alpha_dominant >= 1.0)
    throw InputError("alpha_dominant must lie in (0, 1)");

  const int n = cfg.n();
  const double N = cfg.N;
  const double a = alpha_dominant;
  const double g = (1.0 - a) / (N - 1.0);
  const Mat I = Mat::Identity(n, n);
  const Mat Ia = I - a * cfg.Gamma;
  const Mat Ig = I - g * cfg.Gamma;
  const Mat Qa = Ia.transpose() * cfg.Q * Ia;
  const Mat Qg = Ig.transpose() * cfg.Q * Ig;
  const Mat Xa = Ia.transpose() * cfg.Q * cfg.Gamma;
  const Mat Xg = Ig.transpose() * cfg.Q * cfg.Gamma;

  auto rhs = [&](double, const MatState& S) {
    const Mat& K1 = S[0];
    const Mat& P11 = S[1];
    const Mat& P1j = S[2];
    const Mat& Kj = S[3];
    const Mat& Pj1 = S[4];
    const Mat& Pjj = S[5];
    const Mat U1 = cfg.R + cfg.D.transpose() * K1 * cfg.D;
    const Mat Uj = cfg.R + cfg.D.transpose() * Kj * cfg.D;
    const Mat U1i = U1.inverse();
    const Mat Uji = Uj.inverse();
    const Mat M1 = cfg.B.transpose() * K1 + cfg.D.transpose() * K1 * cfg.C;
    const Mat Mj = cfg.B.transpose() * Kj + cfg.D.transpose() * Kj * cfg.C;
    const Mat& A = cfg.A;
    const Mat& B = cfg.B;
    const Mat& C = cfg.C;
    const double rho = cfg.rho;

    const Mat K1dot = rho * K1 - A.transpose() * K1 - K1 * A +
                      M1.transpose() * U1i * M1 -
                      C.transpose() * K1 * C - Qa;
    const Mat P11dot = rho * P11 - A.transpose() * P11 - P11 * A +
                       M1.transpose() * U1i * B.transpose() * P11 +
                       P11 * B * U1i * M1 +
                       P11 * B * U1i * B.transpose() * P11 +
                       P1j * B * Uji * B.transpose() * Pj1;
    const Mat P1jdot = rho * P1j - A.transpose() * P1j - P1j * A +
                       M1.transpose() * U1i * B.transpose() * P1j +
                       P11 * B * U1i * B.transpose() * P1j +
                       P1j * B * Uji * (Mj + B.transpose() * Pjj) +
                       (1.0 - a) * Xa;
    const Mat Kjdot = rho * Kj - A.transpose() * Kj - Kj * A +
                      Mj.transpose() * Uji * Mj -
                      C.transpose() * Kj * C - Qg;
    const Mat Pj1dot = rho * Pj1 - A.transpose() * Pj1 - Pj1 * A +
                       Mj.transpose() * Uji * B.transpose() * Pj1 +
                       Pjj * B * Uji * B.transpose() * Pj1 +
                       Pj1 * B * U1i * (M1 + B.transpose() * P11) +
                       a * Xg;
    const Mat Pjjdot = rho * Pjj - A.transpose() * Pjj - Pjj * A +
                       Mj.transpose() * Uji * B.transpose() * Pjj +
                       Pjj * B * Uji * Mj +
                       Pjj * B * Uji * B.transpose() * Pjj +
                       Pj1 * B * U1i * B.transpose() * P1j +
                       ((N - 2.0) / (N - 1.0)) * (1.0 - a) * Xg;
    return MatState{K1dot, P11dot, P1jdot, Kjdot, Pj1dot, Pjjdot};
  };

  const Mat Z = Mat::Zero(n, n);
  const auto vals = integrate_backward_stacked({Z, Z, Z, Z, Z, Z}, rhs, grid);

  RiccatiBundle b;
  b.family = StrategyFamily::GameHeterogeneousFinite;
  b.N = cfg.N;
  b.hetero.emplace();
  HeteroPaths& hp = *b.hetero;
  hp.Kbar1.grid = hp.Pibar11.grid = hp.Pibar1j.grid = grid;
  hp.Kbarj.grid = hp.Pibarj1.grid = hp.Pibarjj.grid = grid;
  b.Upsilon.grid = b.s.grid = grid;
  for (const auto& v : vals) {
    hp.Kbar1.values.push_back(v[0]);
    hp.Pibar11.values.push_back(v[1]);
    hp.Pibar1j.values.push_back(v[2]);
    hp.Kbarj.values.push_back(v[3]);
    hp.Pibarj1.values.push_back(v[4]);
    hp.Pibarjj.values.push_back(v[5]);
    b.Upsilon.values.push_back(cfg.R + cfg.D.transpose() * v[3] * cfg.D);
    b.s.values.push_back(Vec::Zero(n));
  }
  return b;
}

// ---- finite-horizon social optimum ----

RiccatiBundle solve_social_finite(const ScenarioConfig& cfg,
                                  const TimeGrid& grid) {
  const int n = cfg.n();
  const double N = cfg.N;
  const Mat QG = q_gamma(cfg.Q, cfg.Gamma);
  const Mat Qk = cfg.Q - QG / N;
  const Mat Qp = ((N - 1.0) / N) * QG;

  auto rhs = [&](double t, const MatState& S) {
    const Mat& K = S[0];
    const Mat& Pi = S[1];
    const Vec s = S[2].col(0);
    const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
    const Mat Ui = U.inverse();
    const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
    const Mat Kdot = cfg.rho * K - cfg.A.transpose() * K - K * cfg.A -
                     cfg.C.transpose() * K * cfg.C +
                     Mk.transpose() * Ui * Mk - Qk;
    const Mat Pidot = cfg.rho * Pi - cfg.A.transpose() * Pi - Pi * cfg.A +
                      Pi * cfg.B * Ui * cfg.B.transpose() * Pi +
                      Pi * cfg.B * Ui * Mk +
                      Mk.transpose() * Ui * cfg.B.transpose() * Pi + Qp;
    const Mat Gain = cfg.B.transpose() * (K + Pi) +
                     cfg.D.transpose() * K * cfg.C;
    const Mat L = cfg.A - cfg.B * Ui * Gain;
    const Mat Ceff = cfg.C - cfg.D * Ui * Gain;
    const Vec forcing = (K + Pi) * cfg.f.at(t) -
                        eta_bar(cfg.Q, cfg.Gamma, cfg.eta.at(t)) +
                        Ceff.transpose() * K * cfg.sigma.at(t);
    const Vec sdot = cfg.rho * s - L.transpose() * s - forcing;
    return MatState{Kdot, Pidot, as_col(sdot)};
  };

  const MatState terminal{Mat::Zero(n, n), Mat::Zero(n, n),
                          as_col(Vec::Zero(n))};
  std::vector<MatState> vals;
  try {
    vals = integrate_backward_stacked(terminal, rhs, grid);
  } catch (const FiniteEscape& e) {
    // The team system has a bounded value function, so an escape here can
    // only be a numerical artifact (grid far too coarse), not a model
    // property.
    throw InternalNumericalFailure(
        std::string("social backward integration escaped: ") + e.what());
  }

  RiccatiBundle b;
  b.family = StrategyFamily::SocialFinite;
  b.N = cfg.N;
  b.K.grid = b.Pi.grid = b.Upsilon.grid = b.s.grid = grid;
  for (const auto& v : vals) {
    b.K.values.push_back(v[0]);
    b.Pi.values.push_back(v[1]);
    b.s.values.push_back(v[2].col(0));
    b.Upsilon.values.push_back(cfg.R + cfg.D.transpose() * v[0] * cfg.D);
  }
  return b;
}

// ---- finite-horizon social optimum with state-coupled drift ----

RiccatiBundle solve_coupled_social(const ScenarioConfig& cfg,
                                   const TimeGrid& grid) {
  if (cfg.D.cwiseAbs().maxCoeff() != 0.0)
    throw InputError("state-coupled social family requires D = 0");
  const int n = cfg.n();
  const double N = cfg.N;
  const Mat Gm = cfg.B * cfg.R.inverse() * cfg.B.transpose();
  const Mat QG = q_gamma(cfg.Q, cfg.Gamma);

  auto rhs = [&](double t, const MatState& S) {
    const Mat& K = S[0];
    const Mat& Pi = S[1];
    const Vec s = S[2].col(0);
    const Mat KP = K + Pi;
    const Mat Kdot = cfg.rho * K - cfg.A.transpose() * K - K * cfg.A -
                     cfg.Q + K * Gm * K -
                     cfg.C.transpose() * (K + Pi / N) * cfg.C;
    const Mat Pidot = cfg.rho * Pi - cfg.A.transpose() * Pi - Pi * cfg.A +
                      K * Gm * Pi + Pi * Gm * KP -
                      cfg.G.transpose() * KP - KP * cfg.G + QG;
    const Vec sdot = cfg.rho * s - (cfg.A + cfg.G).transpose() * s +
                     KP * Gm * s - KP * cfg.f.at(t) -
                     cfg.C.transpose() * (K + Pi / N) * cfg.sigma.at(t) +
                     eta_bar(cfg.Q, cfg.Gamma, cfg.eta.at(t));
    return MatState{Kdot, Pidot, as_col(sdot)};
  };

  const MatState terminal{Mat::Zero(n, n), Mat::Zero(n, n),
                          as_col(Vec::Zero(n))};
  std::vector<MatState> vals;
  try {
    vals = integrate_backward_stacked(terminal, rhs, grid);
  } catch (const FiniteEscape& e) {
    throw InternalNumericalFailure(
        std::string("coupled social backward integration escaped: ") +
        e.what());
  }

  RiccatiBundle b;
  b.family = StrategyFamily::SocialCoupledFinite;
  b.N = cfg.N;
  b.coupled.emplace();
  CoupledPaths& cp = *b.coupled;
  cp.Kbreve.grid = cp.Pibreve.grid = cp.sbreve.grid = grid;
  b.Upsilon = MatrixPath::constant(cfg.R, grid);
  for (const auto& v : vals) {
    cp.Kbreve.values.push_back(v[0]);
    cp.Pibreve.values.push_back(v[1]);
    cp.sbreve.values.push_back(v[2].col(0));
  }
  return b;
}

// ---- classical mean-field baseline ----

namespace {

// Forward RK4 for the deterministic mean using coefficient paths sampled on a
// doubled grid, so the half-step stage values are integration-accurate rather
// than interpolated.
VectorPath propagate_mean_doubled(
    const ScenarioConfig& cfg, const TimeGrid& grid,
    const std::vector<MatState>& vals2,
    const std::function<Vec(double, const Vec&, const MatState&)>& vf) {
  VectorPath xbar;
  xbar.grid = grid;
  xbar.values.resize(static_cast<size_t>(grid.size()));
  xbar.values[0] = cfg.x0_mean;
  const double h = grid.h();
  for (int k = 0; k < grid.steps; ++k) {
    const double t = grid.t(k);
    const Vec& y = xbar.values[static_cast<size_t>(k)];
    const MatState& c0 = vals2[static_cast<size_t>(2 * k)];
    const MatState& ch = vals2[static_cast<size_t>(2 * k + 1)];
    const MatState& c1 = vals2[static_cast<size_t>(2 * k + 2)];
    const Vec k1 = vf(t, y, c0);
    const Vec k2 = vf(t + 0.5 * h, y + 0.5 * h * k1, ch);
    const Vec k3 = vf(t + 0.5 * h, y + 0.5 * h * k2, ch);
    const Vec k4 = vf(t + h, y + h * k3, c1);
    xbar.values[static_cast<size_t>(k + 1)] =
        y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return xbar;
}

RiccatiBundle classical_finite(const ScenarioConfig& cfg,
                               const TimeGrid& grid) {
  const int n = cfg.n();
  const Mat QGam = cfg.Q * cfg.Gamma;

  auto rhs = [&](double t, const MatState& S) {
    const Mat& K = S[0];
    const Mat& Pi = S[1];
    const Vec s = S[2].col(0);
    const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
    const Mat Ui = U.inverse();
    const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
    const Mat Abar = cfg.A - cfg.B * Ui * Mk;
    const Mat Gm = cfg.B * Ui * cfg.B.transpose();
    const Mat Kdot = cfg.rho * K - cfg.A.transpose() * K - K * cfg.A +
                     Mk.transpose() * Ui * Mk -
                     cfg.C.transpose() * K * cfg.C - cfg.Q;
    const Mat Pidot = cfg.rho * Pi - Pi * Abar - Abar.transpose() * Pi +
                      Pi * Gm * Pi + QGam;
    const Mat L = cfg.A - cfg.B * Ui * (cfg.B.transpose() * K +
                                        cfg.B.transpose() * Pi +
                                        cfg.D.transpose() * K * cfg.C);
    const Vec forcing = (K + Pi) * cfg.f.at(t) - cfg.Q * cfg.eta.at(t);
    const Vec sdot = cfg.rho * s - L.transpose() * s - forcing;
    return MatState{Kdot, Pidot, as_col(sdot)};
  };

  // Doubled grid so the forward mean pass has exact half-step coefficients.
  const TimeGrid grid2{grid.T, 2 * grid.steps};
  const MatState terminal{Mat::Zero(n, n), Mat::Zero(n, n),
                          as_col(Vec::Zero(n))};
  const auto vals2 = integrate_backward_stacked(terminal, rhs, grid2);

  RiccatiBundle b;
  b.family = StrategyFamily::ClassicalMeanField;
  b.N = cfg.N;
  b.K.grid = b.Pi.grid = b.Upsilon.grid = b.s.grid = grid;
  for (int k = 0; k <= grid.steps; ++k) {
    const MatState& v = vals2[static_cast<size_t>(2 * k)];
    b.K.values.push_back(v[0]);
    b.Pi.values.push_back(v[1]);
    b.s.values.push_back(v[2].col(0));
    b.Upsilon.values.push_back(cfg.R + cfg.D.transpose() * v[0] * cfg.D);
  }

  auto mean_rhs = [&](double t, const Vec& y, const MatState& c) {
    const Mat& K = c[0];
    const Mat& Pi = c[1];
    const Vec s = c[2].col(0);
    const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
    const Mat Ui = U.inverse();
    const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
    const Mat Abar = cfg.A - cfg.B * Ui * Mk;
    const Vec phi = Pi * y + s;
    return Vec(Abar * y -
               cfg.B * Ui * (cfg.B.transpose() * phi +
                             cfg.D.transpose() * K * cfg.sigma.at(t)) +
               cfg.f.at(t));
  };
  b.xbar = propagate_mean_doubled(cfg, grid, vals2, mean_rhs);

  VectorPath phi;
  phi.grid = grid;
  for (int k = 0; k <= grid.steps; ++k)
    phi.values.push_back(b.Pi.at(k) * b.xbar->at(k) + b.s.at(k));
  b.phi = phi;
  return b;
}

}  // namespace

// ---- algebraic Riccati machinery ----

namespace {

struct CanonicalAre {
  Mat Ash;   // Abar - (rho/2) I
  Mat Gm;    // B Upsilon_f^{-1} B^T
  Mat Stot;  // effective constant term
};

CanonicalAre canonicalize(const AreProblem& p, const Mat& Kf) {
  const Mat Uf = p.R + p.D.transpose() * Kf * p.D;
  const Mat Ufi = Uf.inverse();
  const Mat W = p.D.transpose() * Kf * p.C;
  CanonicalAre c;
  c.Gm = p.B * Ufi * p.B.transpose();
  c.Ash = p.A - p.B * Ufi * W -
          0.5 * p.rho * Mat::Identity(p.A.rows(), p.A.cols());
  c.Stot = p.Sconst + p.C.transpose() * Kf * p.C - W.transpose() * Ufi * W;
  return c;
}

Mat canonical_residual(const CanonicalAre& c, const Mat& X) {
  return c.Ash.transpose() * X + X * c.Ash - X * c.Gm * X + c.Stot;
}

// Swap the diagonal entries (k, k+1) of a complex Schur form via a unitary
// similarity, keeping T triangular and updating U.
void schur_swap(CMat& T, CMat& U, int k) {
  const std::complex<double> a = T(k, k);
  const std::complex<double> b = T(k, k + 1);
  const std::complex<double> c = T(k + 1, k + 1);
  if (std::abs(c - a) <= 1e-14 * (std::abs(a) + std::abs(c))) return;
  // First column of Z = eigenvector of [a b; 0 c] for eigenvalue c.
  Eigen::Vector2cd v(b, c - a);
  const double nv = v.norm();
  Eigen::Matrix2cd Z;
  Z.col(0) = v / nv;
  Z(0, 1) = -std::conj(v(1)) / nv;
  Z(1, 1) = std::conj(v(0)) / nv;
  T.middleCols(k, 2) = T.middleCols(k, 2) * Z;
  T.middleRows(k, 2) = Z.adjoint() * T.middleRows(k, 2);
  U.middleCols(k, 2) = U.middleCols(k, 2) * Z;
  T(k + 1, k) = 0.0;
}

void classify_spectrum(const std::vector<std::complex<double>>& eigs,
                       int* left, int* right, int* axis) {
  *left = *right = *axis = 0;
  for (const auto& ev : eigs) {
    if (std::abs(ev.real()) <= kAxisTol) ++*axis;
    else if (ev.real() < 0.0) ++*left;
    else ++*right;
  }
}

SplittingReport classify_hamiltonian(const Mat& H, int n) {
  SplittingReport rep;
  rep.matrix_tag = "are";
  Eigen::EigenSolver<Mat> es(H);
  for (int i = 0; i < H.rows(); ++i)
    rep.eigenvalues.push_back(es.eigenvalues()[i]);
  classify_spectrum(rep.eigenvalues, &rep.left_count, &rep.right_count,
                    &rep.axis_count);
  rep.passes = rep.axis_count == 0 && rep.left_count == n &&
               rep.right_count == n;
  rep.alt_eigenvalues = rep.eigenvalues;
  rep.alt_left_count = rep.left_count;
  rep.alt_right_count = rep.right_count;
  rep.alt_axis_count = rep.axis_count;
  rep.alt_passes = rep.passes;
  return rep;
}

// Long-window backward integration of the canonical equation, used when the
// invariant-subspace basis is too ill-conditioned to invert.
Mat dre_fallback(const CanonicalAre& c) {
  const int n = static_cast<int>(c.Ash.rows());
  auto rhs = [&c](double, const Mat& X) {
    return Mat(-canonical_residual(c, X));
  };
  const TimeGrid grid{300.0, 60000};
  const MatrixPath path = integrate_matrix_dre(Mat::Zero(n, n), rhs, grid);
  const double drift = (path.at(0) - path.at(200)).cwiseAbs().maxCoeff();
  if (drift > 1e-9 * (1.0 + path.at(0).cwiseAbs().maxCoeff()))
    throw InternalNumericalFailure(
        "stationary Riccati fallback integration did not settle");
  return path.at(0);
}

Mat solve_canonical(const CanonicalAre& c) {
  const int n = static_cast<int>(c.Ash.rows());
  Mat H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = c.Ash;
  H.topRightCorner(n, n) = -c.Gm;
  H.bottomLeftCorner(n, n) = -c.Stot;
  H.bottomRightCorner(n, n) = -c.Ash.transpose();

  Eigen::ComplexSchur<CMat> schur(H.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success)
    throw InternalNumericalFailure("Schur decomposition failed");
  CMat T = schur.matrixT();
  CMat U = schur.matrixU();

  // Bubble the strictly stable eigenvalues to the leading positions.
  const int m = 2 * n;
  for (int pass = 0; pass < m; ++pass) {
    bool moved = false;
    for (int k = 0; k < m - 1; ++k) {
      if (T(k, k).real() >= 0.0 && T(k + 1, k + 1).real() < 0.0) {
        schur_swap(T, U, k);
        moved = true;
      }
    }
    if (!moved) break;
  }
  int stable = 0;
  for (int k = 0; k < m; ++k)
    if (T(k, k).real() < 0.0) ++stable;
  if (stable != n)
    throw NoStabilizingSolution(
        "stable subspace has dimension " + std::to_string(stable) +
            ", expected " + std::to_string(n),
        classify_hamiltonian(H, n));

  const CMat U1 = U.topLeftCorner(n, n);
  const CMat U2 = U.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<CMat> svd(U1);
  const double cond = svd.singularValues()(0) /
                      std::max(svd.singularValues()(n - 1), 1e-300);
  Mat X;
  if (cond > 1e10) {
    X = dre_fallback(c);
  } else {
    X = (U2 * U1.inverse()).real();
  }

  // Newton sweeps on the canonical residual.
  for (int it = 0; it < 12; ++it) {
    const Mat Res = canonical_residual(c, X);
    const double rn = Res.cwiseAbs().maxCoeff();
    if (rn <= 1e-14 * (1.0 + X.cwiseAbs().maxCoeff())) break;
    const Mat Acl = c.Ash - c.Gm * X;
    const Mat In = Mat::Identity(n, n);
    const Mat Lop = Eigen::kroneckerProduct(In, Acl.transpose()) +
                    Eigen::kroneckerProduct(Acl.transpose(), In);
    const Vec rv = Res.reshaped();
    const Vec dv = Lop.fullPivLu().solve(-rv);
    const Mat Delta = dv.reshaped(n, n);
    const Mat Xn = X + Delta;
    if (canonical_residual(c, Xn).cwiseAbs().maxCoeff() >= rn) break;
    X = Xn;
  }
  return X;
}

Mat self_coupled_residual(const AreProblem& p, const Mat& X) {
  const Mat U = p.R + p.D.transpose() * X * p.D;
  const Mat M = p.B.transpose() * X + p.D.transpose() * X * p.C;
  return p.A.transpose() * X + X * p.A - M.transpose() * U.inverse() * M +
         p.C.transpose() * X * p.C + p.Sconst - p.rho * X;
}

}  // namespace

AreResult solve_are(const AreProblem& prob) {
  const int n = static_cast<int>(prob.A.rows());
  Mat X;
  if (prob.form == AreForm::GivenK) {
    X = solve_canonical(canonicalize(prob, prob.Kfixed));
  } else {
    // Outer fixed point on the kernel matrix, then Newton on the full
    // residual (the fixed point alone converges only linearly when D != 0).
    Mat Kf = Mat::Zero(n, n);
    for (int it = 0; it < 200; ++it) {
      X = solve_canonical(canonicalize(prob, Kf));
      if ((X - Kf).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + X.cwiseAbs().maxCoeff()))
        break;
      Kf = X;
    }
    const Mat In = Mat::Identity(n, n);
    for (int it = 0; it < 20; ++it) {
      const Mat Res = self_coupled_residual(prob, X);
      const double rn = Res.cwiseAbs().maxCoeff();
      if (rn <= 1e-14 * (1.0 + X.cwiseAbs().maxCoeff())) break;
      const Mat U = prob.R + prob.D.transpose() * X * prob.D;
      const Mat M = prob.B.transpose() * X + prob.D.transpose() * X * prob.C;
      const Mat L = U.inverse() * M;
      const Mat Ac = prob.A - prob.B * L;
      const Mat Cc = prob.C - prob.D * L;
      const Mat Lop = Eigen::kroneckerProduct(In, Ac.transpose()) +
                      Eigen::kroneckerProduct(Ac.transpose(), In) +
                      Eigen::kroneckerProduct(Cc.transpose(), Cc.transpose()) -
                      prob.rho * Mat::Identity(n * n, n * n);
      const Vec rv = Res.reshaped();
      const Vec dv = Lop.fullPivLu().solve(-rv);
      const Mat Delta = dv.reshaped(n, n);
      const Mat Xn = X + Delta;
      if (self_coupled_residual(prob, Xn).cwiseAbs().maxCoeff() >= rn) break;
      X = Xn;
    }
  }

  AreResult res;
  res.X = X;
  const Mat U = prob.R + prob.D.transpose() *
                             (prob.form == AreForm::GivenK ? prob.Kfixed : X) *
                             prob.D;
  const Mat W = prob.D.transpose() *
                (prob.form == AreForm::GivenK ? prob.Kfixed : X) * prob.C;
  const Mat L = U.inverse() * (prob.B.transpose() * X + W);
  const Mat Acl = prob.A - prob.B * L -
                  0.5 * prob.rho * Mat::Identity(n, n);
  Eigen::EigenSolver<Mat> es(Acl);
  bool det_stable = true;
  for (int i = 0; i < n; ++i) {
    res.closed_loop_spectrum.push_back(es.eigenvalues()[i]);
    if (es.eigenvalues()[i].real() >= 0.0) det_stable = false;
  }

  if (prob.form == AreForm::GivenK) {
    res.residual = canonical_residual(canonicalize(prob, prob.Kfixed), X)
                       .cwiseAbs()
                       .maxCoeff();
    // The kernel-given form governs deterministic mean dynamics, so the
    // deterministic certificate is the operative one.
    res.stabilizing = det_stable;
  } else {
    res.residual = self_coupled_residual(prob, X).cwiseAbs().maxCoeff();
    const Mat Ac = prob.A - prob.B * L;
    const Mat Cc = prob.C - prob.D * L;
    const int nn = n * n;
    const Mat In = Mat::Identity(n, n);
    const Mat Lyap = Eigen::kroneckerProduct(In, Ac) +
                     Eigen::kroneckerProduct(Ac, In) +
                     Eigen::kroneckerProduct(Cc, Cc) -
                     prob.rho * Mat::Identity(nn, nn);
    Eigen::EigenSolver<Mat> ms(Lyap);
    double abscissa = -1e300;
    for (int i = 0; i < nn; ++i)
      abscissa = std::max(abscissa, ms.eigenvalues()[i].real());
    res.stabilizing = det_stable && abscissa < 0.0;
  }
  return res;
}

// ---- infinite-horizon solvers ----

namespace {

AreResult game_state_are(const ScenarioConfig& cfg) {
  const int n = cfg.n();
  const Mat Gn = Mat::Identity(n, n) - cfg.Gamma / cfg.N;
  AreProblem p;
  p.A = cfg.A;
  p.B = cfg.B;
  p.C = cfg.C;
  p.D = cfg.D;
  p.R = cfg.R;
  p.rho = cfg.rho;
  p.form = AreForm::SelfCoupled;
  p.Sconst = Gn.transpose() * cfg.Q * Gn;
  return solve_are(p);
}

AreResult social_state_are(const ScenarioConfig& cfg) {
  AreProblem p;
  p.A = cfg.A;
  p.B = cfg.B;
  p.C = cfg.C;
  p.D = cfg.D;
  p.R = cfg.R;
  p.rho = cfg.rho;
  p.form = AreForm::SelfCoupled;
  p.Sconst = cfg.Q - q_gamma(cfg.Q, cfg.Gamma) / cfg.N;
  return solve_are(p);
}

// Stationary affine offset: (rho I - L^T) s = forcing, with a long-window
// integration fallback when the coefficient is singular.
Vec stationary_offset(const Mat& L, const Vec& forcing, double rho) {
  const int n = static_cast<int>(L.rows());
  const Mat Msys = rho * Mat::Identity(n, n) - L.transpose();
  Eigen::FullPivLU<Mat> lu(Msys);
  if (lu.isInvertible()) return lu.solve(forcing);
  const VectorPath p = integrate_affine_backward(
      Vec::Zero(n), [&L](double) { return Mat(L.transpose()); },
      [&forcing](double) { return forcing; }, rho, TimeGrid{300.0, 60000});
  return p.at(0);
}

}  // namespace

RiccatiBundle solve_game_infinite(const ScenarioConfig& cfg,
                                  int steps_override) {
  const int n = cfg.n();
  const Mat I = Mat::Identity(n, n);
  const Mat Gn = I - cfg.Gamma / cfg.N;
  const TimeGrid grid = default_grid(cfg, steps_override);

  const AreResult kres = game_state_are(cfg);
  const Mat& K = kres.X;
  const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
  const Mat Ui = U.inverse();

  AreProblem pp;
  pp.A = cfg.A;
  pp.B = cfg.B;
  pp.C = cfg.C;
  pp.D = cfg.D;
  pp.R = cfg.R;
  pp.rho = cfg.rho;
  pp.form = AreForm::GivenK;
  pp.Kfixed = K;
  pp.Sconst = Gn.transpose() * cfg.Q * (I - cfg.Gamma);
  const AreResult pres = solve_are(pp);
  const Mat& P = pres.X;

  const Mat Gain = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;
  const Mat L = cfg.A - cfg.B * Ui * Gain;
  const Mat Ceff = cfg.C - cfg.D * Ui * Gain;
  const Vec forcing = Ceff.transpose() * K * cfg.sigma.at(0.0) +
                      P * cfg.f.at(0.0) -
                      Gn.transpose() * cfg.Q * cfg.eta.at(0.0);
  const Vec s = stationary_offset(L, forcing, cfg.rho);

  RiccatiBundle b;
  b.family = StrategyFamily::GameInfinite;
  b.N = cfg.N;
  b.K = MatrixPath::constant(K, grid);
  b.P = P;
  b.s = VectorPath::constant(s, grid);
  b.Upsilon = MatrixPath::constant(U, grid);
  b.closed_loop_spectrum = kres.closed_loop_spectrum;
  b.splitting = check_c_splitting(cfg, "M_Gamma");
  return b;
}

RiccatiBundle solve_social_infinite(const ScenarioConfig& cfg,
                                    int steps_override) {
  const int n = cfg.n();
  const Mat I = Mat::Identity(n, n);
  const TimeGrid grid = default_grid(cfg, steps_override);

  const AreResult kres = social_state_are(cfg);
  const Mat& K = kres.X;
  const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
  const Mat Ui = U.inverse();

  AreProblem pp;
  pp.A = cfg.A;
  pp.B = cfg.B;
  pp.C = cfg.C;
  pp.D = cfg.D;
  pp.R = cfg.R;
  pp.rho = cfg.rho;
  pp.form = AreForm::GivenK;
  pp.Kfixed = K;
  pp.Sconst = cfg.Q - q_gamma(cfg.Q, cfg.Gamma);
  const AreResult pres = solve_are(pp);
  const Mat& P = pres.X;

  const Mat Gain = cfg.B.transpose() * P + cfg.D.transpose() * K * cfg.C;
  const Mat L = cfg.A - cfg.B * Ui * Gain;
  const Mat Ceff = cfg.C - cfg.D * Ui * Gain;
  const Vec forcing = P * cfg.f.at(0.0) -
                      eta_bar(cfg.Q, cfg.Gamma, cfg.eta.at(0.0)) +
                      Ceff.transpose() * K * cfg.sigma.at(0.0);
  const Vec s = stationary_offset(L, forcing, cfg.rho);

  RiccatiBundle b;
  b.family = StrategyFamily::SocialInfinite;
  b.N = cfg.N;
  b.K = MatrixPath::constant(K, grid);
  b.P = P;
  b.s = VectorPath::constant(s, grid);
  b.Upsilon = MatrixPath::constant(U, grid);
  b.closed_loop_spectrum = kres.closed_loop_spectrum;
  b.splitting = check_c_splitting(cfg, "M_hat_Gamma");
  return b;
}

RiccatiBundle solve_classical_mf(const ScenarioConfig& cfg,
                                 const TimeGrid& grid) {
  if (cfg.horizon.kind == HorizonKind::Finite) return classical_finite(cfg, grid);

  const int n = cfg.n();
  AreProblem kp;
  kp.A = cfg.A;
  kp.B = cfg.B;
  kp.C = cfg.C;
  kp.D = cfg.D;
  kp.R = cfg.R;
  kp.rho = cfg.rho;
  kp.form = AreForm::SelfCoupled;
  kp.Sconst = cfg.Q;
  const AreResult kres = solve_are(kp);
  const Mat& K = kres.X;
  const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
  const Mat Ui = U.inverse();
  const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
  const Mat Abar = cfg.A - cfg.B * Ui * Mk;

  // rho Pi = Pi Abar + Abar^T Pi - Pi G Pi - Q Gamma, solved in the
  // kernel-given form with the control weight frozen at Upsilon(K).
  AreProblem pp;
  pp.A = Abar;
  pp.B = cfg.B;
  pp.C = Mat::Zero(n, n);
  pp.D = Mat::Zero(n, cfg.r());
  pp.R = U;
  pp.rho = cfg.rho;
  pp.form = AreForm::GivenK;
  pp.Kfixed = Mat::Zero(n, n);
  pp.Sconst = -cfg.Q * cfg.Gamma;
  const AreResult pres = solve_are(pp);
  const Mat& Pi = pres.X;

  const Mat L = cfg.A - cfg.B * Ui * (cfg.B.transpose() * K +
                                      cfg.B.transpose() * Pi +
                                      cfg.D.transpose() * K * cfg.C);
  const Vec forcing = (K + Pi) * cfg.f.at(0.0) - cfg.Q * cfg.eta.at(0.0);
  const Vec s = stationary_offset(L, forcing, cfg.rho);

  RiccatiBundle b;
  b.family = StrategyFamily::ClassicalMeanField;
  b.N = cfg.N;
  b.K = MatrixPath::constant(K, grid);
  b.Pi = MatrixPath::constant(Pi, grid);
  b.s = VectorPath::constant(s, grid);
  b.Upsilon = MatrixPath::constant(U, grid);
  b.closed_loop_spectrum = kres.closed_loop_spectrum;

  // Constant-coefficient forward pass for the mean and the costate.
  VectorPath xbar;
  xbar.grid = grid;
  xbar.values.resize(static_cast<size_t>(grid.size()));
  xbar.values[0] = cfg.x0_mean;
  const double h = grid.h();
  auto vf = [&](double t, const Vec& y) {
    const Vec phi = Pi * y + s;
    return Vec(Abar * y -
               cfg.B * Ui * (cfg.B.transpose() * phi +
                             cfg.D.transpose() * K * cfg.sigma.at(t)) +
               cfg.f.at(t));
  };
  for (int k = 0; k < grid.steps; ++k) {
    const double t = grid.t(k);
    const Vec& y = xbar.values[static_cast<size_t>(k)];
    const Vec k1 = vf(t, y);
    const Vec k2 = vf(t + 0.5 * h, y + 0.5 * h * k1);
    const Vec k3 = vf(t + 0.5 * h, y + 0.5 * h * k2);
    const Vec k4 = vf(t + h, y + h * k3);
    xbar.values[static_cast<size_t>(k + 1)] =
        y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  b.xbar = xbar;
  VectorPath phi;
  phi.grid = grid;
  for (int k = 0; k <= grid.steps; ++k)
    phi.values.push_back(Pi * xbar.at(k) + s);
  b.phi = phi;
  return b;
}

// ---- spectral splitting checks ----

SplittingReport check_c_splitting(const ScenarioConfig& cfg,
                                  const std::string& which,
                                  ShiftConvention conv) {
  const int n = cfg.n();
  const Mat I = Mat::Identity(n, n);

  Mat K;
  if (which == "M_hat_Gamma") {
    K = social_state_are(cfg).X;
  } else if (which == "M_Gamma" || which == "M_I" || which == "calA") {
    K = game_state_are(cfg).X;
  } else {
    throw InputError("unknown splitting matrix tag: " + which);
  }
  const Mat U = cfg.R + cfg.D.transpose() * K * cfg.D;
  const Mat Ui = U.inverse();

  Mat top_left, top_right, bottom_left;
  if (which == "calA") {
    const Mat Mk = cfg.B.transpose() * K + cfg.D.transpose() * K * cfg.C;
    top_left = cfg.A - cfg.B * Ui * Mk - 0.5 * cfg.rho * I;
    top_right = -cfg.B * Ui * cfg.B.transpose();
    bottom_left = ((cfg.N - 1.0) / cfg.N) *
                  (I - cfg.Gamma / cfg.N).transpose() * cfg.Q * cfg.Gamma;
  } else {
    const Mat Ahat =
        cfg.A - 0.5 * cfg.rho * I - cfg.B * Ui * cfg.D.transpose() * K * cfg.C;
    const Mat Chat = cfg.C.transpose() * K * cfg.C -
                     cfg.C.transpose() * K * cfg.D * Ui *
                         cfg.D.transpose() * K * cfg.C;
    top_left = Ahat;
    top_right = cfg.B * Ui * cfg.B.transpose();
    if (which == "M_Gamma") {
      bottom_left = Chat + (I - cfg.Gamma / cfg.N).transpose() * cfg.Q *
                               (I - cfg.Gamma);
    } else if (which == "M_I") {
      bottom_left = Chat;
    } else {
      bottom_left = Chat + cfg.Q - q_gamma(cfg.Q, cfg.Gamma);
    }
  }

  auto build = [&](bool extra_shift) {
    Mat M(2 * n, 2 * n);
    const Mat shift = extra_shift ? Mat(0.5 * cfg.rho * I) : Mat(Mat::Zero(n, n));
    M.topLeftCorner(n, n) = top_left - shift;
    M.topRightCorner(n, n) = top_right;
    M.bottomLeftCorner(n, n) = bottom_left;
    M.bottomRightCorner(n, n) = -top_left.transpose() + shift;
    return M;
  };
  auto spectrum = [](const Mat& M) {
    Eigen::EigenSolver<Mat> es(M);
    std::vector<std::complex<double>> eigs;
    for (int i = 0; i < M.rows(); ++i) eigs.push_back(es.eigenvalues()[i]);
    return eigs;
  };

  const auto single = spectrum(build(false));
  const auto dbl = spectrum(build(true));

  SplittingReport rep;
  rep.matrix_tag = which;
  rep.convention = conv;
  const auto& primary = conv == ShiftConvention::SingleShift ? single : dbl;
  const auto& alt = conv == ShiftConvention::SingleShift ? dbl : single;
  rep.eigenvalues = primary;
  classify_spectrum(primary, &rep.left_count, &rep.right_count,
                    &rep.axis_count);
  rep.passes = rep.axis_count == 0 && rep.left_count == n &&
               rep.right_count == n;
  rep.alt_eigenvalues = alt;
  classify_spectrum(alt, &rep.alt_left_count, &rep.alt_right_count,
                    &rep.alt_axis_count);
  rep.alt_passes = rep.alt_axis_count == 0 && rep.alt_left_count == n &&
                   rep.alt_right_count == n;
  return rep;
}

}  // namespace mfg
