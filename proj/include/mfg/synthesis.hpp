// Turns Riccati bundles into executable decentralized feedback laws and
// propagates the deterministic mean flows the laws consume.
#pragma once

#include "mfg/model.hpp"
#include "mfg/riccati.hpp"

#include <optional>
#include <vector>

namespace mfg {

struct SingularUpsilon : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Time-indexed affine feedback law
//   u_i(t) = F_own(t) z_i(t) + F_mean(t) m(t) + F_mean2(t) m2(t) + bias(t)
// where z_i is the agent's own state (or, for the coupled family, its own
// conditional-mean filter, with F_mean2 acting on the cross filter).
// The heterogeneous family stores the representative ordinary agent in the
// main fields (F_mean on the own-class mean, F_mean2 on the dominant mean)
// and the dominant agent's gains in the *_dom fields (F_mean_dom on the
// dominant mean, F_mean2_dom on the ordinary-class mean).
struct GainSchedule {
  StrategyFamily family = StrategyFamily::GameHomogeneousFinite;
  TimeGrid grid;
  std::vector<Mat> F_own;    // r x n per grid point
  std::vector<Mat> F_mean;   // r x n per grid point (empty for coupled)
  std::vector<Mat> F_mean2;  // empty unless heterogeneous or coupled
  std::vector<Vec> bias;     // r per grid point
  std::vector<Mat> F_own_dom, F_mean_dom, F_mean2_dom;
  std::vector<Vec> bias_dom;

  [[nodiscard]] bool has_mean2() const { return !F_mean2.empty(); }
  [[nodiscard]] bool has_dominant() const { return !F_own_dom.empty(); }
};

[[nodiscard]] GainSchedule make_gains(const RiccatiBundle& bundle,
                                      const ScenarioConfig& cfg);

// Deterministic mean flow started at x0_mean. `mean2` carries the dominant
// mean for the heterogeneous family; the coupled family's two filters share
// one deterministic mean, mirrored into mean2.
struct MeanFlow {
  TimeGrid grid;
  VectorPath mean;
  std::optional<VectorPath> mean2;
};

[[nodiscard]] MeanFlow propagate_mean(const GainSchedule& gains,
                                      const ScenarioConfig& cfg,
                                      const TimeGrid& grid);

// Piecewise-linear evaluation of a per-grid-point table at an arbitrary time.
[[nodiscard]] Mat interp_table(const std::vector<Mat>& table,
                               const TimeGrid& grid, double t);
[[nodiscard]] Vec interp_table_vec(const std::vector<Vec>& table,
                                   const TimeGrid& grid, double t);

}  // namespace mfg
