// Monte Carlo engine for the N-agent closed loops: Euler-Maruyama stepping
// with counter-based per-agent noise streams, discounted cost estimation,
// consensus metrics, and the closed-form social cost.
#pragma once

#include "mfg/model.hpp"
#include "mfg/riccati.hpp"
#include "mfg/synthesis.hpp"

#include <cstdint>
#include <vector>

namespace mfg {

// Counter-based generator: every normal draw is a pure function of
// (seed, path, agent, step, lane), so agent streams are independent,
// replayable in any order, and identical across thread counts.
struct CounterRng {
  std::uint64_t seed = 0;

  [[nodiscard]] double normal(std::uint64_t path, std::uint32_t agent,
                              std::uint32_t step, std::uint32_t lane) const;
};

// One fully recorded Monte Carlo path (small runs only).
struct RecordedPath {
  // states[agent][k], k = 0..steps; controls[agent][k], k = 0..steps (the
  // final entry is the terminal-cost evaluation control); dW[agent][k],
  // k = 0..steps-1. The coupled family also records the two filters.
  std::vector<std::vector<Vec>> states;
  std::vector<std::vector<Vec>> controls;
  std::vector<std::vector<double>> dW;
  std::vector<std::vector<Vec>> xi;    // coupled family only
  std::vector<std::vector<Vec>> zeta;  // coupled family only
};

struct Ensemble {
  std::uint64_t cfg_hash = 0;
  std::uint64_t seed = 0;
  int paths = 0;
  TimeGrid grid;
  int N = 0, n = 0, r = 0;
  double rho = 0.0;
  HorizonKind horizon_kind = HorizonKind::Finite;

  // All paths when paths <= kRecordMax, else none.
  std::vector<RecordedPath> recorded;

  // Discounted running-cost integral over the window, per (path, agent).
  std::vector<std::vector<double>> cost_integral;
  // Mean undiscounted integrand over the last decile, per (path, agent);
  // feeds the truncation tail bound on infinite horizons.
  std::vector<std::vector<double>> tail_integrand;

  // Consensus accumulators, one entry per grid point: sums over paths of the
  // unweighted population average, its squared norm, and the mean per-agent
  // squared deviation from it.
  std::vector<Vec> sum_xavg;
  std::vector<double> sum_xavg_sq;
  std::vector<double> sum_spread;

  int discarded = 0;
};

inline constexpr int kRecordMax = 16;

// Closed-loop Euler-Maruyama over cfg's window on the gain grid. Controls
// use interpolated gains, the agent's own state (own filters for the coupled
// family), and the deterministic mean flow, never the realized sample
// average. Escaping paths are discarded and counted; more than 1% discards
// throws FiniteEscape. `deviant` (optional) substitutes a different schedule
// for one agent, or for every agent when deviant_agent == kAllAgents.
inline constexpr int kAllAgents = -2;
[[nodiscard]] Ensemble simulate_ensemble(const ScenarioConfig& cfg,
                                         const GainSchedule& gains,
                                         const MeanFlow& mean_flow, int paths,
                                         std::uint64_t seed,
                                         const GainSchedule* deviant = nullptr,
                                         int deviant_agent = -1);

struct CostEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int paths = 0;
  double tail_bound = 0.0;  // infinite horizon only
};

// agent >= 0 estimates J_agent; agent == kSocial estimates the unweighted
// sum over agents.
inline constexpr int kSocial = -1;
[[nodiscard]] CostEstimate estimate_cost(const Ensemble& ens,
                                         const ScenarioConfig& cfg, int agent);

// Value of the finite-horizon social optimum from the solved bundle:
// N [ tr(Khat(0) Sigma0) + x0bar^T Phat(0) x0bar + 2 shat(0)^T x0bar ] plus
// N times the discounted integral correction term.
[[nodiscard]] double social_cost_closed_form(const ScenarioConfig& cfg,
                                             const RiccatiBundle& bundle);

struct ConsensusSeries {
  std::vector<double> t;
  std::vector<double> mse_mean;    // E |xavg(t) - x_ref|^2
  std::vector<double> mse_spread;  // mean_i E |x_i(t) - xavg(t)|^2
  double fitted_rate = 0.0;        // log-linear fit on the second half
  double fit_residual = 0.0;
};

[[nodiscard]] ConsensusSeries consensus_metrics(const Ensemble& ens,
                                                const Vec& x_ref);

}  // namespace mfg
