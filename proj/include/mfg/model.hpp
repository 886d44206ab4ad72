// Problem data for linear-quadratic mean-field games and teams on a finite
// population: scenario configuration, validation of the standing assumptions
// at the data level, time grids, and the flat key=value scenario file format.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Thrown on malformed user input (scenario files, graph files, CLI values).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform grid on [0, T]. t(k) is computed as T*k/steps so t(steps) == T
// exactly in floating point.
struct TimeGrid {
  double T = 1.0;
  int steps = 200;

  [[nodiscard]] double h() const { return T / steps; }
  [[nodiscard]] double t(int k) const { return T * k / steps; }
  [[nodiscard]] int size() const { return steps + 1; }
  [[nodiscard]] bool same_as(const TimeGrid& o) const {
    return T == o.T && steps == o.steps;
  }
};

enum class HorizonKind { Finite, Infinite };

struct Horizon {
  HorizonKind kind = HorizonKind::Finite;
  double T = 1.0;         // finite-horizon length
  double T_trunc = 10.0;  // simulation/solve window for the infinite horizon
  double tail_tol = 1e-3;

  // Length of the time window a solver or simulator actually works on.
  [[nodiscard]] double window() const {
    return kind == HorizonKind::Finite ? T : T_trunc;
  }
};

// Piecewise-constant tabulated time function (used for f, sigma, eta).
// A single entry is a constant function; otherwise the table covers [0, T]
// with equal cells and is constant on each cell.
struct TimeVec {
  std::vector<Vec> values;
  double T = 0.0;

  static TimeVec constant(const Vec& v) {
    TimeVec tv;
    tv.values.push_back(v);
    return tv;
  }
  [[nodiscard]] bool is_constant() const { return values.size() == 1; }
  [[nodiscard]] const Vec& at(double t) const {
    if (values.size() == 1) return values[0];
    const int cells = static_cast<int>(values.size());
    int idx = static_cast<int>(t / T * cells);
    if (idx < 0) idx = 0;
    if (idx >= cells) idx = cells - 1;
    return values[static_cast<size_t>(idx)];
  }
  [[nodiscard]] bool is_zero() const {
    for (const auto& v : values)
      if (v.cwiseAbs().maxCoeff() != 0.0) return false;
    return !values.empty();
  }
};

enum class StrategyFamily {
  GameHomogeneousFinite,
  GameHeterogeneousFinite,
  GameInfinite,
  SocialFinite,
  SocialInfinite,
  SocialCoupledFinite,
  ClassicalMeanField,
};

[[nodiscard]] std::string to_string(StrategyFamily f);
[[nodiscard]] StrategyFamily family_from_string(const std::string& s);

// Full problem instance. Dynamics of agent i:
//   dx_i = (A x_i + B u_i + G x^(N) + f) dt + (C x_i + D u_i + sigma) dw_i
// with G = 0 except for the state-coupled social family. Cost of agent i:
//   J_i = E int e^{-rho t} ( |x_i - Gamma x^(alpha) - eta|^2_Q + |u_i|^2_R ) dt
// where x^(alpha) is the alpha-weighted population average.
struct ScenarioConfig {
  Mat A, B, C, D;
  TimeVec f, sigma, eta;
  Mat Q, R, Gamma;
  double rho = 0.0;
  Mat G;  // state-coupling drift; zero unless the coupled family is used
  int N = 2;
  Vec alpha;  // population weights, length N
  Horizon horizon;
  Vec x0_mean;
  Mat x0_cov;
  StrategyFamily family = StrategyFamily::GameHomogeneousFinite;
  double alpha_dominant = 0.0;  // heterogeneous family: weight of agent 1

  [[nodiscard]] int n() const { return static_cast<int>(A.rows()); }
  [[nodiscard]] int r() const { return static_cast<int>(B.cols()); }
  [[nodiscard]] bool uniform_alpha() const;
};

struct ValidationReport {
  std::vector<std::string> violations;
  [[nodiscard]] bool passes() const { return violations.empty(); }
};

// Checks weights, symmetry/PSD/PD of the cost matrices, dimension
// consistency, and per-family compatibility. Report-style: never throws.
[[nodiscard]] ValidationReport validate_scenario(const ScenarioConfig& cfg);

// x^(alpha) = sum_j alpha_j x_j. Throws InputError on size mismatch.
[[nodiscard]] Vec weighted_average(const std::vector<Vec>& states,
                                   const Vec& alpha);

// Uniform weights 1/N.
[[nodiscard]] Vec uniform_weights(int N);

// Simulation/solve grid for a scenario: steps_override if positive, else
// ceil(200 * window) (at least 2).
[[nodiscard]] TimeGrid default_grid(const ScenarioConfig& cfg,
                                    int steps_override = 0);

// Flat key=value scenario files; matrices row-major, space separated,
// %.17g formatting so save/load round-trips exactly.
[[nodiscard]] std::string scenario_to_string(const ScenarioConfig& cfg);
[[nodiscard]] ScenarioConfig parse_scenario(const std::string& text);
[[nodiscard]] ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

// FNV-1a digest of the serialized scenario; identifies ensembles.
[[nodiscard]] std::uint64_t scenario_digest(const ScenarioConfig& cfg);

}  // namespace mfg
