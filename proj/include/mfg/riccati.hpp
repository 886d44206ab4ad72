// Differential and algebraic Riccati solvers for every strategy family, plus
// the spectral solvability tests (determinant test for the finite-horizon
// game, c-splitting tests for the infinite-horizon equations).
#pragma once

#include "mfg/model.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

// A backward integration left the admissible range (entry above 1e12 or
// non-finite) before reaching t = 0.
struct FiniteEscape : std::runtime_error {
  double t_escape;
  FiniteEscape(const std::string& what, double t)
      : std::runtime_error(what), t_escape(t) {}
};

struct InternalNumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MatrixPath {
  TimeGrid grid;
  std::vector<Mat> values;  // one per grid point, index 0..steps

  [[nodiscard]] bool empty() const { return values.empty(); }
  [[nodiscard]] const Mat& at(int k) const {
    return values[static_cast<size_t>(k)];
  }
  // Linear interpolation between grid points.
  [[nodiscard]] Mat eval(double t) const;
  [[nodiscard]] double sup_norm() const;
  static MatrixPath constant(const Mat& m, const TimeGrid& grid);
};

struct VectorPath {
  TimeGrid grid;
  std::vector<Vec> values;

  [[nodiscard]] bool empty() const { return values.empty(); }
  [[nodiscard]] const Vec& at(int k) const {
    return values[static_cast<size_t>(k)];
  }
  [[nodiscard]] Vec eval(double t) const;
  [[nodiscard]] double sup_norm() const;
  static VectorPath constant(const Vec& v, const TimeGrid& grid);
};

// The printed 2n x 2n block matrices place A_hat_N -(rho/2)I on the diagonal
// even though A_hat_N is defined with the -(rho/2)I discount shift already
// inside, which shifts the drift twice. Both conventions are computed; the
// single-shift verdict is the operative one (it agrees with the C=0
// reduction and with the long-window DRE limit on disagreement scenarios).
enum class ShiftConvention { SingleShift, DoubleShift };

struct SplittingReport {
  std::string matrix_tag;  // M_Gamma | M_I | M_hat_Gamma | calA
  ShiftConvention convention = ShiftConvention::SingleShift;
  std::vector<std::complex<double>> eigenvalues;
  int left_count = 0;
  int right_count = 0;
  int axis_count = 0;
  bool passes = false;
  // Same classification under the other convention, for cross-validation.
  std::vector<std::complex<double>> alt_eigenvalues;
  int alt_left_count = 0;
  int alt_right_count = 0;
  int alt_axis_count = 0;
  bool alt_passes = false;

  [[nodiscard]] bool conventions_agree() const { return passes == alt_passes; }
};

// An algebraic-Riccati solve found no rho-stabilizing solution.
struct NoStabilizingSolution : std::runtime_error {
  SplittingReport report;
  NoStabilizingSolution(const std::string& what, SplittingReport rep)
      : std::runtime_error(what), report(std::move(rep)) {}
};

struct HeteroPaths {
  MatrixPath Kbar1, Pibar11, Pibar1j;  // dominant agent
  MatrixPath Kbarj, Pibarj1, Pibarjj;  // representative ordinary agent
};

struct CoupledPaths {
  MatrixPath Kbreve, Pibreve;
  VectorPath sbreve;
};

struct RiccatiBundle {
  StrategyFamily family = StrategyFamily::GameHomogeneousFinite;
  int N = 2;
  MatrixPath K;   // finite families; infinite families replicate the constant
  MatrixPath Pi;  // empty where the family stores P = K + Pi instead
  std::optional<Mat> P;  // infinite-horizon constant
  VectorPath s;
  std::optional<HeteroPaths> hetero;
  std::optional<CoupledPaths> coupled;
  MatrixPath Upsilon;  // R + D^T K D along the path
  // Classical mean-field fixed point: phi = Pi xbar + s and the mean path.
  std::optional<VectorPath> phi;
  std::optional<VectorPath> xbar;
  // Infinite-horizon diagnostics.
  std::vector<std::complex<double>> closed_loop_spectrum;
  std::optional<SplittingReport> splitting;
};

// ---- generic integrators ----

// Forward-time derivative of the matrix ODE; integrated backward from the
// terminal condition at t = T with classical RK4 on a fixed grid.
using DreRhs = std::function<Mat(double, const Mat&)>;
[[nodiscard]] MatrixPath integrate_matrix_dre(const Mat& terminal,
                                              const DreRhs& rhs,
                                              const TimeGrid& grid);

// Backward affine ODE  ds/dt = rho s - coeff(t) s - forcing(t),  s(T) given.
// coeff is the full matrix applied to s (callers pass any transpose
// themselves).
[[nodiscard]] VectorPath integrate_affine_backward(
    const Vec& terminal, const std::function<Mat(double)>& coeff,
    const std::function<Vec(double)>& forcing, double rho,
    const TimeGrid& grid);

// ---- finite-horizon solvers ----

[[nodiscard]] RiccatiBundle solve_game_finite(const ScenarioConfig& cfg,
                                              const TimeGrid& grid);

struct A2Report {
  bool passes = false;
  double min_det = 0.0;
};

// Determinant test for solvability of the finite-horizon game system: the
// lower-right n x n block of the transition matrix of the linearized flow
// must keep a positive determinant over the horizon. Needs only the K path,
// so it works on scenarios where the Pi integration escapes.
[[nodiscard]] A2Report check_a2_determinant(const ScenarioConfig& cfg,
                                            const TimeGrid& grid);

// Two-class population: agent 1 has weight alpha_dominant, the other N-1
// agents share the rest equally. Requires f = sigma = eta = 0.
[[nodiscard]] RiccatiBundle solve_game_hetero(const ScenarioConfig& cfg,
                                              double alpha_dominant,
                                              const TimeGrid& grid);

[[nodiscard]] RiccatiBundle solve_social_finite(const ScenarioConfig& cfg,
                                                const TimeGrid& grid);

[[nodiscard]] RiccatiBundle solve_coupled_social(const ScenarioConfig& cfg,
                                                 const TimeGrid& grid);

// Classical (infinite-population) baseline; branches on cfg.horizon.
[[nodiscard]] RiccatiBundle solve_classical_mf(const ScenarioConfig& cfg,
                                               const TimeGrid& grid);

// ---- algebraic Riccati equations ----

enum class AreForm {
  // rho X = A^T X + X A - M(X)^T Upsilon(X)^{-1} M(X) + C^T X C + Sconst,
  // with M(X) = B^T X + D^T X C and Upsilon(X) = R + D^T X D.
  SelfCoupled,
  // rho X = A^T X + X A - (B^T X + D^T Kf C)^T Upsilon_f^{-1} (B^T X +
  // D^T Kf C) + C^T Kf C + Sconst, with Kf fixed and Upsilon_f = R + D^T Kf D.
  GivenK,
};

struct AreProblem {
  Mat A, B, C, D, R;
  Mat Sconst;  // constant term, possibly nonsymmetric
  double rho = 0.0;
  AreForm form = AreForm::SelfCoupled;
  Mat Kfixed;  // used by GivenK
};

struct AreResult {
  Mat X;
  std::vector<std::complex<double>> closed_loop_spectrum;  // rho/2-shifted
  double residual = 0.0;
  bool stabilizing = false;  // deterministic + mean-square certificate
};

// Ordered-Schur invariant-subspace construction on the 2n x 2n block matrix,
// Newton refinement, long-window DRE fallback. Throws NoStabilizingSolution
// when no rho-stabilizing solution exists.
[[nodiscard]] AreResult solve_are(const AreProblem& prob);

// ---- infinite-horizon solvers ----

[[nodiscard]] RiccatiBundle solve_game_infinite(const ScenarioConfig& cfg,
                                                int steps_override = 0);
[[nodiscard]] RiccatiBundle solve_social_infinite(const ScenarioConfig& cfg,
                                                  int steps_override = 0);

// Builds the requested block matrix (M_Gamma, M_I, M_hat_Gamma, or calA) and
// classifies its spectrum against the imaginary axis (axis_tol = 1e-8 on
// |Re|). The report carries both shift conventions; `conv` selects which one
// fills the primary fields.
[[nodiscard]] SplittingReport check_c_splitting(
    const ScenarioConfig& cfg, const std::string& which,
    ShiftConvention conv = ShiftConvention::SingleShift);

// ---- shared helpers ----

// Q_Gamma = Gamma^T Q + Q Gamma - Gamma^T Q Gamma.
[[nodiscard]] Mat q_gamma(const Mat& Q, const Mat& Gamma);
// eta_bar(t) = Q eta - Gamma^T Q eta.
[[nodiscard]] Vec eta_bar(const Mat& Q, const Mat& Gamma, const Vec& eta);

inline constexpr double kEscapeThreshold = 1e12;
inline constexpr double kAxisTol = 1e-8;
inline constexpr double kDetTol = 1e-10;

}  // namespace mfg
