// Gain assembly and mean-flow propagation: closed-form scalar gain values,
// the two-class pipeline collapsing onto the homogeneous one at equal
// weights, and the stationary mean of the benchmark tracking scenario.
#include "doctest.h"

#include "mfg/model.hpp"
#include "mfg/riccati.hpp"
#include "mfg/synthesis.hpp"

#include <cmath>
#include <string>

using namespace mfg;

namespace {

std::string scenario_path(const char* name) {
  return std::string(MFG_SCENARIO_DIR) + "/" + name;
}

ScenarioConfig scalar_game() {
  ScenarioConfig cfg;
  cfg.A = Mat::Zero(1, 1);
  cfg.B = Mat::Identity(1, 1);
  cfg.C = Mat::Zero(1, 1);
  cfg.D = Mat::Zero(1, 1);
  cfg.Q = Mat::Identity(1, 1);
  cfg.R = Mat::Identity(1, 1);
  cfg.Gamma = Mat::Identity(1, 1);
  cfg.G = Mat::Zero(1, 1);
  cfg.f = TimeVec::constant(Vec::Zero(1));
  cfg.sigma = TimeVec::constant(Vec::Zero(1));
  cfg.eta = TimeVec::constant(Vec::Zero(1));
  cfg.rho = 0.0;
  cfg.N = 2;
  cfg.alpha = uniform_weights(2);
  cfg.horizon.kind = HorizonKind::Finite;
  cfg.horizon.T = 1.0;
  cfg.x0_mean = Vec::Zero(1);
  cfg.x0_cov = Mat::Identity(1, 1);
  cfg.family = StrategyFamily::GameHomogeneousFinite;
  return cfg;
}

double pos_root(double a2, double a1, double a0) {
  return (-a1 + std::sqrt(a1 * a1 - 4.0 * a2 * a0)) / (2.0 * a2);
}

}  // namespace

TEST_CASE("integrator model gains: own and mean channels cancel") {
  const ScenarioConfig cfg =
      load_scenario(scenario_path("integrator_game.cfg"));
  const RiccatiBundle b = solve_game_infinite(cfg);
  const GainSchedule g = make_gains(b, cfg);

  // rho K = -K^2/(1+K) + Q1 with Q1 = (1 - 1/N)^2.
  const double Q1 = std::pow(1.0 - 1.0 / cfg.N, 2);
  const double K = pos_root(1.2, cfg.rho - Q1, -Q1);
  const double fo = -K / (1.0 + K);

  for (int k = 0; k < g.grid.size(); ++k) {
    CHECK(g.F_own[k](0, 0) == doctest::Approx(fo).epsilon(1e-9));
    CHECK(g.F_mean[k](0, 0) == doctest::Approx(-fo).epsilon(1e-9));
    CHECK(g.bias[k].norm() == 0.0);
  }
  CHECK_FALSE(g.has_mean2());
  CHECK_FALSE(g.has_dominant());
}

TEST_CASE("classical baseline on the benchmark data") {
  const ScenarioConfig cfg = load_scenario(scenario_path("classical_n6.cfg"));
  const TimeGrid grid = default_grid(cfg);
  const RiccatiBundle b = solve_classical_mf(cfg, grid);

  // rho K = -K^2 + 1  =>  K^2 + 0.2 K - 1 = 0.
  const double K = pos_root(1.0, 0.2, -1.0);
  CHECK(K == doctest::Approx(0.90498756211209).epsilon(1e-10));
  CHECK(b.K.at(0)(0, 0) == doctest::Approx(K).epsilon(1e-9));
  // The mean-consistency equation puts Pi = -K, so own and mean gains cancel
  // and the mean flow is stationary.
  CHECK(b.Pi.at(0)(0, 0) == doctest::Approx(-K).epsilon(1e-9));
  REQUIRE(b.xbar.has_value());
  CHECK(b.xbar->at(grid.steps)[0] == doctest::Approx(5.0).epsilon(1e-8));

  const GainSchedule g = make_gains(b, cfg);
  CHECK(g.F_own[0](0, 0) == doctest::Approx(-K).epsilon(1e-9));
  CHECK(g.F_mean[0](0, 0) == doctest::Approx(K).epsilon(1e-9));

  const MeanFlow flow = propagate_mean(g, cfg, grid);
  for (int k = 0; k < grid.size(); ++k)
    CHECK(std::abs(flow.mean.at(k)[0] - 5.0) < 1e-8);
}

TEST_CASE("benchmark game mean flow stays at its start") {
  const ScenarioConfig cfg = load_scenario(scenario_path("game_n6.cfg"));
  const RiccatiBundle b = solve_game_infinite(cfg);
  const GainSchedule g = make_gains(b, cfg);
  const MeanFlow flow = propagate_mean(g, cfg, b.K.grid);
  for (int k = 0; k < flow.grid.size(); ++k)
    CHECK(std::abs(flow.mean.at(k)[0] - 5.0) < 1e-8);
  CHECK_FALSE(flow.mean2.has_value());
}

TEST_CASE("two-class solve with equal weights collapses to homogeneous") {
  ScenarioConfig cfg = scalar_game();
  cfg.A(0, 0) = 0.1;
  cfg.Gamma(0, 0) = 0.8;
  cfg.rho = 0.05;
  cfg.family = StrategyFamily::GameHeterogeneousFinite;
  cfg.alpha_dominant = 0.5;
  const TimeGrid grid{1.0, 200};

  const RiccatiBundle het = solve_game_hetero(cfg, 0.5, grid);
  ScenarioConfig hom = cfg;
  hom.family = StrategyFamily::GameHomogeneousFinite;
  const RiccatiBundle ref = solve_game_finite(hom, grid);

  const GainSchedule gh = make_gains(het, cfg);
  const GainSchedule gr = make_gains(ref, hom);
  REQUIRE(gh.has_mean2());
  REQUIRE(gh.has_dominant());

  for (int k = 0; k < grid.size(); ++k) {
    CAPTURE(k);
    CHECK(std::abs(gh.F_own[k](0, 0) - gr.F_own[k](0, 0)) <= 1e-8);
    CHECK(std::abs(gh.F_own_dom[k](0, 0) - gr.F_own[k](0, 0)) <= 1e-8);
    // The two mean channels split the homogeneous mean gain between the
    // class means; their sum is the observable quantity.
    const double mean_sum = gh.F_mean[k](0, 0) + gh.F_mean2[k](0, 0);
    const double mean_sum_dom =
        gh.F_mean_dom[k](0, 0) + gh.F_mean2_dom[k](0, 0);
    CHECK(std::abs(mean_sum - gr.F_mean[k](0, 0)) <= 1e-8);
    CHECK(std::abs(mean_sum_dom - gr.F_mean[k](0, 0)) <= 1e-8);
    CHECK(gh.bias[k].norm() == 0.0);
    CHECK(gh.bias_dom[k].norm() == 0.0);
  }
}

TEST_CASE("two-class example: dominant state equation has a tanh solution") {
  const ScenarioConfig cfg = load_scenario(scenario_path("hetero_example.cfg"));
  const TimeGrid grid = default_grid(cfg);
  const RiccatiBundle b = solve_game_hetero(cfg, cfg.alpha_dominant, grid);
  REQUIRE(b.hetero.has_value());
  // Kbar1' = Kbar1^2 - (1 - alpha_1)^2, terminal 0, so
  // Kbar1(0) = c tanh(c T) with c = 1 - alpha_1 = 0.3.
  const double c = 1.0 - cfg.alpha_dominant;
  CHECK(b.hetero->Kbar1.at(0)(0, 0) ==
        doctest::Approx(c * std::tanh(c)).epsilon(1e-8));
}

TEST_CASE("long finite window reproduces the stationary gains") {
  const ScenarioConfig cfg = load_scenario(scenario_path("game_n6.cfg"));
  const GainSchedule ginf = make_gains(solve_game_infinite(cfg), cfg);

  ScenarioConfig fin = cfg;
  fin.horizon.kind = HorizonKind::Finite;
  fin.horizon.T = 50.0 / cfg.rho;
  fin.family = StrategyFamily::GameHomogeneousFinite;
  const TimeGrid grid{fin.horizon.T, 50000};
  const GainSchedule gfin = make_gains(solve_game_finite(fin, grid), fin);

  CHECK(std::abs(gfin.F_own[0](0, 0) - ginf.F_own[0](0, 0)) <= 1e-4);
  CHECK(std::abs(gfin.F_mean[0](0, 0) - ginf.F_mean[0](0, 0)) <= 1e-4);
}

TEST_CASE("table interpolation is linear between grid points") {
  const TimeGrid grid{1.0, 2};
  const std::vector<Mat> table = {Mat::Constant(1, 1, 1.0),
                                  Mat::Constant(1, 1, 3.0),
                                  Mat::Constant(1, 1, 2.0)};
  CHECK(interp_table(table, grid, 0.0)(0, 0) == 1.0);
  CHECK(interp_table(table, grid, 0.25)(0, 0) == doctest::Approx(2.0));
  CHECK(interp_table(table, grid, 0.5)(0, 0) == 3.0);
  CHECK(interp_table(table, grid, 0.75)(0, 0) == doctest::Approx(2.5));
  CHECK(interp_table(table, grid, 1.0)(0, 0) == 2.0);

  const std::vector<Vec> vtab = {Vec::Constant(1, 0.0), Vec::Constant(1, 4.0),
                                 Vec::Constant(1, 4.0)};
  CHECK(interp_table_vec(vtab, grid, 0.125)[0] == doctest::Approx(1.0));
}

TEST_CASE("singular control weight is refused") {
  ScenarioConfig cfg = scalar_game();
  cfg.D = Mat::Identity(1, 1);
  const TimeGrid grid{1.0, 2};

  RiccatiBundle b;
  b.family = StrategyFamily::GameHomogeneousFinite;
  b.N = 2;
  b.K = MatrixPath::constant(Mat::Constant(1, 1, -1.0), grid);
  b.Pi = MatrixPath::constant(Mat::Zero(1, 1), grid);
  b.s = VectorPath::constant(Vec::Zero(1), grid);
  b.Upsilon = MatrixPath::constant(Mat::Zero(1, 1), grid);  // R + D^T K D = 0
  CHECK_THROWS_AS((void)make_gains(b, cfg), SingularUpsilon);
}
