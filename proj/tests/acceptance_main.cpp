// Acceptance gate: eleven end-to-end checks of the solver, the synthesized
// strategies, the Monte Carlo verification layer, the figures, and the graph
// averaging. Prints one PASS/FAIL line per criterion and exits nonzero if
// any criterion fails. Tolerances are pinned here, next to each check.
#include "mfg/consensus.hpp"
#include "mfg/csv.hpp"
#include "mfg/model.hpp"
#include "mfg/riccati.hpp"
#include "mfg/simulate.hpp"
#include "mfg/synthesis.hpp"
#include "mfg/verify.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace mfg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string scen(const char* name) {
  return std::string(MFG_SCENARIO_DIR) + "/" + name;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(4) << v;
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(MFG_CLI_PATH) + " " + args + " >acc_cli_out.txt 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double pos_root(double a2, double a1, double a0) {
  return (-a1 + std::sqrt(a1 * a1 - 4.0 * a2 * a0)) / (2.0 * a2);
}

ScenarioConfig scalar_cfg() {
  ScenarioConfig c;
  c.A = Mat::Zero(1, 1);
  c.B = Mat::Identity(1, 1);
  c.C = Mat::Zero(1, 1);
  c.D = Mat::Zero(1, 1);
  c.Q = Mat::Identity(1, 1);
  c.R = Mat::Identity(1, 1);
  c.Gamma = Mat::Identity(1, 1);
  c.G = Mat::Zero(1, 1);
  c.f = TimeVec::constant(Vec::Zero(1));
  c.sigma = TimeVec::constant(Vec::Zero(1));
  c.eta = TimeVec::constant(Vec::Zero(1));
  c.rho = 0.0;
  c.N = 2;
  c.alpha = uniform_weights(2);
  c.horizon.kind = HorizonKind::Finite;
  c.horizon.T = 1.0;
  c.x0_mean = Vec::Zero(1);
  c.x0_cov = Mat::Identity(1, 1);
  c.family = StrategyFamily::GameHomogeneousFinite;
  return c;
}

RiccatiBundle solve_any(const ScenarioConfig& cfg, const TimeGrid& grid) {
  switch (cfg.family) {
    case StrategyFamily::GameHomogeneousFinite:
      return solve_game_finite(cfg, grid);
    case StrategyFamily::GameHeterogeneousFinite:
      return solve_game_hetero(cfg, cfg.alpha_dominant, grid);
    case StrategyFamily::GameInfinite:
      return solve_game_infinite(cfg, grid.steps);
    case StrategyFamily::SocialFinite:
      return solve_social_finite(cfg, grid);
    case StrategyFamily::SocialInfinite:
      return solve_social_infinite(cfg, grid.steps);
    case StrategyFamily::SocialCoupledFinite:
      return solve_coupled_social(cfg, grid);
    case StrategyFamily::ClassicalMeanField:
      return solve_classical_mf(cfg, grid);
  }
  throw InputError("unhandled family");
}

// Ordinary least-squares slope of log(y) against t.
double log_slope(const std::vector<double>& t, const std::vector<double>& y,
                 size_t from) {
  double st = 0, sl = 0, stt = 0, stl = 0;
  int m = 0;
  for (size_t k = from; k < t.size(); ++k) {
    if (y[k] <= 0.0) continue;
    const double l = std::log(y[k]);
    st += t[k];
    sl += l;
    stt += t[k] * t[k];
    stl += t[k] * l;
    ++m;
  }
  return (m * stl - st * sl) / (m * stt - st * st);
}

// ---- criterion 1: residuals of every solved bundle ----

Outcome c1_residuals() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double worst = 0.0;
  int count = 0;

  auto check = [&](const ScenarioConfig& cfg, const TimeGrid& grid) {
    const RiccatiBundle b = solve_any(cfg, grid);
    const TimeGrid rgrid = b.K.empty() ? grid : b.K.grid;
    const auto reports = riccati_residual(b, cfg, rgrid);
    ok = ok && residuals_pass(reports);
    for (const auto& r : reports)
      if (!r.diagnostic_only) worst = std::max(worst, r.max_residual);
    ++count;
  };

  for (const char* name :
       {"game_n6.cfg", "social_n6.cfg", "social_n6_finite.cfg",
        "integrator_game.cfg", "hetero_example.cfg", "coupled_example.cfg",
        "classical_n6.cfg"}) {
    const ScenarioConfig cfg = load_scenario(scen(name));
    check(cfg, default_grid(cfg));
  }

  std::mt19937 gen(20260822u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = trial % 2 + 1;
    ScenarioConfig c;
    auto rnd = [&](double scale) {
      Mat m(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = scale * u(gen);
      return m;
    };
    c.A = rnd(1.0);
    c.B = Mat::Identity(n, n) + rnd(0.3);
    c.C = rnd(0.3);
    c.D = rnd(0.3);
    const Mat W = rnd(1.0);
    c.Q = 0.5 * W.transpose() * W;
    const Mat V = rnd(0.5);
    c.R = V.transpose() * V + Mat::Identity(n, n);
    c.Gamma = rnd(0.6);
    c.G = Mat::Zero(n, n);
    Vec fv(n), sv(n), ev(n);
    for (int i = 0; i < n; ++i) {
      fv[i] = 0.2 * u(gen);
      sv[i] = 0.2 * u(gen);
      ev[i] = 0.2 * u(gen);
    }
    c.f = TimeVec::constant(fv);
    c.sigma = TimeVec::constant(sv);
    c.eta = TimeVec::constant(ev);
    c.rho = 0.15 * (u(gen) + 1.0);
    c.N = 2 + trial % 5;
    c.alpha = uniform_weights(c.N);
    c.horizon.kind = HorizonKind::Finite;
    c.horizon.T = 1.0;
    c.x0_mean = Vec::Zero(n);
    c.x0_cov = Mat::Identity(n, n);
    c.family = trial % 4 < 2 ? StrategyFamily::GameHomogeneousFinite
                             : StrategyFamily::SocialFinite;
    check(c, TimeGrid{1.0, 400});
  }

  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok && secs < 10.0;
  o.detail = std::to_string(count) + " bundles, worst residual " + fmt(worst) +
             ", " + fmt(secs) + " s";
  return o;
}

// ---- criterion 2: closed-form solution values ----

Outcome c2_oracles() {
  const double tol = 1e-6;

  ScenarioConfig ca = scalar_cfg();
  const RiccatiBundle ba = solve_game_finite(ca, TimeGrid{1.0, 400});
  const double k_fin = ba.K.at(0)(0, 0);
  const double want_fin = 0.5 * std::tanh(0.5);  // two agents, unit horizon

  const ScenarioConfig ci = load_scenario(scen("integrator_game.cfg"));
  const RiccatiBundle bi = solve_game_infinite(ci);
  const double gN = 1.0 - 1.0 / ci.N;
  const double q1 = gN * gN;  // game constant at Gamma = I
  const double want_int = pos_root(1.0 + ci.rho, ci.rho - q1, -q1);
  const double k_int = bi.K.at(0)(0, 0);
  const double p_int = (*bi.P)(0, 0);
  const double s_int = bi.s.sup_norm();

  const ScenarioConfig cs = load_scenario(scen("social_n6.cfg"));
  const RiccatiBundle bs = solve_social_infinite(cs);
  const double qs = 1.0 - 1.0 / cs.N;  // social constant at Gamma = I
  const double want_soc = pos_root(1.0 + cs.rho, cs.rho - qs, -qs);
  const double k_soc = bs.K.at(0)(0, 0);

  Outcome o;
  o.pass = std::abs(k_fin - want_fin) <= tol &&
           std::abs(k_int - want_int) <= tol && std::abs(p_int) <= tol &&
           s_int <= tol && std::abs(k_soc - want_soc) <= tol;
  o.detail = "K(0) = " + fmt(k_fin) + " vs " + fmt(want_fin) +
             ", K = " + fmt(k_int) + " vs " + fmt(want_int) +
             " (P = " + fmt(p_int) + "), Khat = " + fmt(k_soc) + " vs " +
             fmt(want_soc);
  return o;
}

// ---- criterion 3: identities that hold when Gamma = I ----

Outcome c3_gamma_identities() {
  ScenarioConfig ca = scalar_cfg();
  const TimeGrid grid{1.0, 400};
  const RiccatiBundle ba = solve_game_finite(ca, grid);
  const auto reports = riccati_residual(ba, ca, grid);
  bool psum_ok = false;
  double psum_res = -1.0;
  for (const auto& r : reports)
    if (r.equation_tag == "P_sum") {
      psum_ok = r.passes;
      psum_res = r.max_residual;
    }

  // The game P equation and the social P equation coincide at Gamma = I,
  // so their stabilizing solutions must match on matched coefficients.
  auto pair_diff = [](const ScenarioConfig& game_cfg) {
    ScenarioConfig sc = game_cfg;
    sc.family = StrategyFamily::SocialInfinite;
    const Mat Pg = *solve_game_infinite(game_cfg).P;
    const Mat Ps = *solve_social_infinite(sc).P;
    return std::pair<double, double>((Pg - Ps).cwiseAbs().maxCoeff(),
                                     Pg(0, 0));
  };

  const auto [d1, p1] = pair_diff(load_scenario(scen("game_n6.cfg")));
  const auto [d2, p2] = pair_diff(load_scenario(scen("integrator_game.cfg")));

  ScenarioConfig cm = scalar_cfg();
  cm.A(0, 0) = 0.3;
  cm.rho = 0.2;
  cm.N = 4;
  cm.alpha = uniform_weights(4);
  cm.horizon.kind = HorizonKind::Infinite;
  cm.horizon.T_trunc = 10.0;
  cm.family = StrategyFamily::GameInfinite;
  const auto [d3, p3] = pair_diff(cm);
  const double want3 = 2.0 * cm.A(0, 0) - cm.rho;  // scalar root 2A - rho

  Outcome o;
  o.pass = psum_ok && d1 <= 1e-9 && d2 <= 1e-9 && d3 <= 1e-9 &&
           std::abs(p1) <= 1e-9 && std::abs(p3 - want3) <= 1e-9;
  o.detail = "P_sum residual " + fmt(psum_res) + ", pair gaps " + fmt(d1) +
             " / " + fmt(d2) + " / " + fmt(d3) + " (P = " + fmt(p3) + ")";
  return o;
}

// ---- criterion 4: two-class gains collapse at equal weights ----

Outcome c4_hetero_reduction() {
  ScenarioConfig c = scalar_cfg();
  c.A(0, 0) = 0.1;
  c.C(0, 0) = 0.3;
  c.D(0, 0) = 0.2;
  c.Gamma(0, 0) = 0.7;
  c.rho = 0.1;
  c.N = 4;
  c.alpha = uniform_weights(4);
  c.alpha_dominant = 0.25;
  const TimeGrid grid{1.0, 400};

  ScenarioConfig ch = c;
  ch.family = StrategyFamily::GameHeterogeneousFinite;
  const GainSchedule gh =
      make_gains(solve_game_hetero(ch, ch.alpha_dominant, grid), ch);

  ScenarioConfig cg = c;
  cg.family = StrategyFamily::GameHomogeneousFinite;
  const GainSchedule gg = make_gains(solve_game_finite(cg, grid), cg);

  double dmax = 0.0;
  for (int k = 0; k <= grid.steps; ++k) {
    const size_t sk = static_cast<size_t>(k);
    auto upd = [&](const Mat& a, const Mat& b) {
      dmax = std::max(dmax, (a - b).cwiseAbs().maxCoeff());
    };
    upd(gh.F_own[sk], gg.F_own[sk]);
    upd(gh.F_own_dom[sk], gg.F_own[sk]);
    upd(gh.F_mean[sk] + gh.F_mean2[sk], gg.F_mean[sk]);
    upd(gh.F_mean_dom[sk] + gh.F_mean2_dom[sk], gg.F_mean[sk]);
    dmax = std::max(dmax, gh.bias[sk].cwiseAbs().maxCoeff());
    dmax = std::max(dmax, gh.bias_dom[sk].cwiseAbs().maxCoeff());
  }

  Outcome o;
  o.pass = dmax <= 1e-8;
  o.detail = "max gain gap " + fmt(dmax) + " over " +
             std::to_string(grid.steps + 1) + " grid points";
  return o;
}

// ---- criterion 5: finite-N solutions approach the classical limit ----

Outcome c5_convergence() {
  ScenarioConfig cfg = load_scenario(scen("game_n6.cfg"));
  cfg.family = StrategyFamily::GameHomogeneousFinite;
  cfg.horizon.kind = HorizonKind::Finite;
  cfg.horizon.T = 2.0;
  const std::vector<int> Ns{2, 4, 8, 16, 32, 64};
  const auto rows = mf_convergence_study(cfg, Ns, TimeGrid{2.0, 400});

  bool ok = rows.size() == Ns.size();
  for (size_t i = 0; ok && i + 1 < rows.size(); ++i)
    ok = rows[i].total() > rows[i + 1].total();
  if (ok) ok = rows.back().total() > 0.0;

  Outcome o;
  o.pass = ok;
  o.detail = "distance " + fmt(rows.front().total()) + " at N=2 down to " +
             fmt(rows.back().total()) + " at N=64";
  return o;
}

// ---- criterion 6: equilibrium stationarity under common random numbers ----

Outcome c6_nash() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = load_scenario(scen("game_n6.cfg"));
  const RiccatiBundle b = solve_game_infinite(cfg);
  const GainSchedule gains = make_gains(b, cfg);
  const std::vector<double> eps{0.02, 0.05};
  const int paths = 10000;

  const StationarityReport pos =
      nash_stationarity_gap(cfg, gains, 0, paths, 424242ULL, eps);

  GainSchedule bad = gains;
  for (auto& F : bad.F_own) F *= 1.5;
  const StationarityReport neg =
      nash_stationarity_gap(cfg, bad, 0, paths, 424242ULL, eps);

  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = pos.passes && !neg.passes && secs < 120.0;
  o.detail = "gap " + fmt(pos.max_first_order) + " <= " +
             fmt(pos.max_threshold) + ", control gap " +
             fmt(neg.max_first_order) + ", " + fmt(secs) + " s";
  return o;
}

// ---- criterion 7: social optimality and the closed-form cost ----

Outcome c7_social() {
  const ScenarioConfig cs = load_scenario(scen("social_n6.cfg"));
  const RiccatiBundle bs = solve_social_infinite(cs);
  const StationarityReport st = social_stationarity_gap(
      cs, make_gains(bs, cs), 10000, 515151ULL, {0.02, 0.05});

  const ScenarioConfig cf = load_scenario(scen("social_n6_finite.cfg"));
  const RiccatiBundle bf = solve_social_finite(cf, default_grid(cf));
  const CostCrossCheck cc = cost_formula_cross_check(cf, bf, 10000, 616161ULL);

  Outcome o;
  o.pass = st.passes && cc.passes;
  o.detail = "team gap " + fmt(st.max_first_order) + " <= " +
             fmt(st.max_threshold) + "; cost " + fmt(cc.closed_form) +
             " vs " + fmt(cc.simulated.value) + " +- " +
             fmt(cc.simulated.std_error);
  return o;
}

// ---- criterion 8: consensus decay vs additive-noise plateau ----

Outcome c8_consensus_behavior() {
  const ScenarioConfig ci = load_scenario(scen("integrator_game.cfg"));
  const GainSchedule gi = make_gains(solve_game_infinite(ci), ci);
  const MeanFlow mi = propagate_mean(gi, ci, gi.grid);
  const Ensemble ei = simulate_ensemble(ci, gi, mi, 2000, 717171ULL);
  const ConsensusSeries si = consensus_metrics(ei, mi.mean.at(mi.grid.steps));
  const double rate = -log_slope(si.t, si.mse_mean, si.t.size() / 2);
  const double ratio = si.mse_mean.back() / si.mse_mean.front();

  const ScenarioConfig cg = load_scenario(scen("game_n6.cfg"));
  const GainSchedule gg = make_gains(solve_game_infinite(cg), cg);
  const MeanFlow mg = propagate_mean(gg, cg, gg.grid);
  const Ensemble eg = simulate_ensemble(cg, gg, mg, 2000, 727272ULL);
  const ConsensusSeries sg = consensus_metrics(eg, mg.mean.at(mg.grid.steps));
  const double spread_T = sg.mse_spread.back();
  const double spread_half = sg.mse_spread[sg.mse_spread.size() / 2];

  Outcome o;
  o.pass = rate > 0.0 && ratio <= 0.01 && spread_T >= 1e-3 &&
           spread_T >= 0.3 * spread_half;
  o.detail = "decay rate " + fmt(rate) + ", reduction x" + fmt(1.0 / ratio) +
             "; plateau " + fmt(spread_half) + " -> " + fmt(spread_T);
  return o;
}

// ---- criterion 9: figure series shapes, orderings, determinism ----

Outcome c9_figures() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string game = scen("game_n6.cfg");
  for (const char* d : {"acc_fig_a", "acc_fig_b", "acc_fig_sweep",
                        "acc_fig_h2", "acc_dup_a", "acc_dup_b"})
    std::filesystem::remove_all(d);

  bool ok = true;
  std::string note;

  const std::string single =
      "figures fig1 fig3 fig4 --scenario " + game + " --seed 20260822 --out ";
  ok = ok && run_cli(single + "acc_fig_a") == 0;
  ok = ok && run_cli(single + "acc_fig_b") == 0;
  for (const char* f : {"fig1.csv", "fig1.svg", "fig3.csv", "fig3.svg",
                        "fig4.csv", "fig4.svg"}) {
    const std::string a = slurp(std::string("acc_fig_a/") + f);
    if (a.empty() || a != slurp(std::string("acc_fig_b/") + f)) {
      ok = false;
      note += std::string(" rerun mismatch ") + f + ";";
    }
  }

  if (ok) {
    const CsvTable f1 = read_csv("acc_fig_a/fig1.csv");
    double mean_dev = 0.0, xbar_dev = 0.0;
    for (double v : f1.col("mean"))
      mean_dev = std::max(mean_dev, std::abs(v - 5.0));
    for (double v : f1.col("xbar"))
      xbar_dev = std::max(xbar_dev, std::abs(v - 5.0));
    ok = ok && mean_dev <= 1e-8 && xbar_dev > 1e-3;

    const CsvTable f3 = read_csv("acc_fig_a/fig3.csv");
    auto spread_at = [&](size_t row) {
      double lo = f3.rows[row][1], hi = f3.rows[row][1];
      for (size_t j = 1; j < f3.rows[row].size(); ++j) {
        lo = std::min(lo, f3.rows[row][j]);
        hi = std::max(hi, f3.rows[row][j]);
      }
      return hi - lo;
    };
    const double s0 = spread_at(0);
    const double sT = spread_at(f3.rows.size() - 1);
    ok = ok && sT < 0.1 * s0;
    note += " fig1 mean dev " + fmt(mean_dev) + ", fig3 collapse " + fmt(s0) +
            " -> " + fmt(sT) + ";";
  }

  const std::string sweep_common =
      " --scenario " + game + " --seed 20260822 --paths 10000 --out ";
  const bool sweeps_ran =
      run_cli("figures fig2" + sweep_common + "acc_fig_sweep") == 0 &&
      run_cli("figures fig5" + sweep_common + "acc_fig_sweep") == 0 &&
      run_cli("figures fig2 --grid-steps 4000" + sweep_common + "acc_fig_h2") == 0;
  ok = ok && sweeps_ran;

  // fig5: the team-vs-classical gap is large enough to resolve directly at
  // this path count, so demand a significant gap at N=2, no significant
  // ordering violation anywhere, and decay to near zero at the largest N.
  {
    const CsvTable t = read_csv("acc_fig_sweep/fig5.csv");
    const auto gap = t.col("gap");
    const auto gap_se = t.col("gap_se");
    bool fig_ok = !gap.empty();
    for (size_t i = 0; i < gap.size(); ++i)
      fig_ok = fig_ok && gap[i] >= -3.0 * gap_se[i];
    fig_ok = fig_ok && gap.front() > 3.0 * gap_se.front();
    fig_ok = fig_ok && gap.back() <= 0.15 * gap.front() + 3.0 * gap_se.back();
    ok = ok && fig_ok;
    note += " fig5 gap " + fmt(gap.front()) + " -> " + fmt(gap.back()) +
            (fig_ok ? "" : " ORDERING FAIL") + ";";
  }

  // fig2: the equilibrium-vs-classical gap is second order small (about
  // 1.2e-3 at N=2 falling to 1e-8 at N=64, under 1 sigma at this path count
  // even at the front) and the Euler cost bias, linear in the step size with
  // a coefficient proportional to the gain difference, exceeds it at every N.
  // Runs at two step sizes extrapolate that bias away; the combined estimate
  // must show no ordering violation at any N and a tail gap indistinguishable
  // from zero. Standard errors are combined as if the runs were independent,
  // which overstates the error of the combination (shared initial-state draws
  // correlate them), so both thresholds are conservative.
  {
    const CsvTable tc = read_csv("acc_fig_sweep/fig2.csv");
    const CsvTable tf = read_csv("acc_fig_h2/fig2.csv");
    const auto gc = tc.col("gap"), gc_se = tc.col("gap_se");
    const auto gf = tf.col("gap"), gf_se = tf.col("gap_se");
    bool fig_ok = !gc.empty() && gc.size() == gf.size();
    if (fig_ok)
      for (size_t i = 0; i < gc.size(); ++i)
        fig_ok = fig_ok && tc.rows[i][0] == tf.rows[i][0];
    double front = 0.0, back = 0.0, min_z = 0.0;
    if (fig_ok) {
      for (size_t i = 0; i < gc.size(); ++i) {
        const double g = 2.0 * gf[i] - gc[i];
        const double se =
            std::sqrt(4.0 * gf_se[i] * gf_se[i] + gc_se[i] * gc_se[i]);
        if (i == 0) front = g;
        if (i + 1 == gc.size()) {
          back = g;
          fig_ok = fig_ok && std::abs(g) <= 3.0 * se;
        }
        fig_ok = fig_ok && g >= -3.0 * se;
        min_z = std::min(min_z, g / se);
      }
    }
    ok = ok && fig_ok;
    note += " fig2 extrap gap " + fmt(front) + " -> " + fmt(back) +
            ", min z " + fmt(min_z) + (fig_ok ? "" : " ORDERING FAIL") + ";";
  }

  // Determinism of the sweep pipeline, exercised at a cheap path count.
  // Run unconditionally so an ordering failure above cannot cascade into a
  // spurious determinism complaint.
  const std::string dup = "figures fig2 fig5 --scenario " + game +
                          " --seed 20260822 --paths 500 --sweep-n 2,6,32 --out ";
  const bool dup_ran =
      run_cli(dup + "acc_dup_a") == 0 && run_cli(dup + "acc_dup_b") == 0;
  ok = ok && dup_ran;
  for (const char* f : {"fig2.csv", "fig2.svg", "fig5.csv", "fig5.svg"}) {
    const std::string a = slurp(std::string("acc_dup_a/") + f);
    if (a.empty() || a != slurp(std::string("acc_dup_b/") + f)) {
      ok = false;
      note += std::string(" sweep rerun mismatch ") + f + ";";
    }
  }

  Outcome o;
  o.pass = ok;
  o.detail = note + " " + fmt(seconds_since(t0)) + " s";
  return o;
}

// ---- criterion 10: graph averaging on the shipped graphs ----

Outcome c10_graph_average() {
  Mat init(6, 1);
  init << 1, 2, 3, 4, 5, 6;

  const Graph path = load_graph(scen("path6.graph"));
  const ConsensusRun r1 = average_consensus(path, init, 2000, 1e-10);
  const bool ok1 = r1.converged_at.has_value() && r1.final_error <= 1e-10 &&
                   std::abs(r1.average[0] - 3.5) <= 1e-12;

  const Graph disc = load_graph(scen("disconnected6.graph"));
  const ConsensusRun r2 = average_consensus(disc, init, 3000, 1e-10);
  bool ok2 = !r2.converged_at.has_value() && r2.final_error > 1e-3;
  const Mat& last = r2.iterates.back();
  for (int i = 0; i < 6; ++i) {
    const double want = i < 3 ? 2.0 : 5.0;  // component averages of 1..6
    ok2 = ok2 && std::abs(last(i, 0) - want) <= 1e-8;
  }

  Outcome o;
  o.pass = ok1 && ok2;
  o.detail = "path graph converged at step " +
             std::to_string(r1.converged_at.value_or(-1)) +
             " (error " + fmt(r1.final_error) +
             "), split graph error " + fmt(r2.final_error);
  return o;
}

// ---- criterion 11: spectral test vs the two-by-two closed form ----

Outcome c11_spectral() {
  std::mt19937 gen(46104610u);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  ScenarioConfig base;
  const Mat I2 = Mat::Identity(2, 2);
  base.A = Mat::Zero(2, 2);
  base.B = I2;
  base.C = Mat::Zero(2, 2);
  base.D = Mat::Zero(2, 2);
  base.Q = I2;
  base.R = I2;
  base.Gamma = I2;
  base.G = Mat::Zero(2, 2);
  base.f = TimeVec::constant(Vec::Zero(2));
  base.sigma = TimeVec::constant(Vec::Zero(2));
  base.eta = TimeVec::constant(Vec::Zero(2));
  base.rho = 0.0;
  base.N = 2;
  base.alpha = uniform_weights(2);
  base.x0_mean = Vec::Zero(2);
  base.x0_cov = I2;
  base.family = StrategyFamily::GameInfinite;

  int disagreements = 0, generic = 0, degenerate = 0;
  auto probe = [&](double a, double b, double c, double d) {
    ScenarioConfig cfg = base;
    cfg.A << a, b, c, d;
    // With Gamma = I and C = 0 the block matrix is block triangular, so the
    // solvability verdict reduces to the drift spectrum.
    const bool predicted = (a + d != 0.0) || (a * d - b * c < 0.0);
    Eigen::EigenSolver<Mat> es(cfg.A);
    double min_re = 1e300;
    for (int i = 0; i < 2; ++i)
      min_re = std::min(min_re, std::abs(es.eigenvalues()[i].real()));
    const bool direct = min_re > kAxisTol;
    const SplittingReport rep = check_c_splitting(cfg, "M_Gamma");
    if (predicted != rep.passes || predicted != direct) ++disagreements;
  };

  while (generic < 90) {
    const double a = u(gen), b = u(gen), c = u(gen), d = u(gen);
    Mat A(2, 2);
    A << a, b, c, d;
    Eigen::EigenSolver<Mat> es(A);
    double min_re = 1e300;
    for (int i = 0; i < 2; ++i)
      min_re = std::min(min_re, std::abs(es.eigenvalues()[i].real()));
    if (min_re <= 1e-3) continue;  // keep the sweep away from the boundary
    probe(a, b, c, d);
    ++generic;
  }
  while (degenerate < 10) {
    // Exact zero trace with positive determinant puts the spectrum on the
    // imaginary axis, so the solvability test must fail.
    const double a = u(gen) / 2.0;
    const double delta = 0.25 + 0.5 * u01(gen);
    probe(a, 1.0, -(a * a + delta), -a);
    ++degenerate;
  }

  Outcome o;
  o.pass = disagreements == 0;
  o.detail = std::to_string(generic) + " generic + " +
             std::to_string(degenerate) + " axis points, " +
             std::to_string(disagreements) + " disagreements";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "riccati-residuals", c1_residuals},
      {2, "closed-form-oracles", c2_oracles},
      {3, "gamma-identities", c3_gamma_identities},
      {4, "heterogeneous-reduction", c4_hetero_reduction},
      {5, "mean-field-convergence", c5_convergence},
      {6, "nash-stationarity", c6_nash},
      {7, "social-optimality", c7_social},
      {8, "consensus-behavior", c8_consensus_behavior},
      {9, "figure-reproduction", c9_figures},
      {10, "graph-averaging", c10_graph_average},
      {11, "spectral-solvability", c11_spectral},
  };

  int passed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << c.id << " (" << c.name
              << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << "\n"
              << std::flush;
    if (o.pass) ++passed;
  }
  std::cout << "acceptance: " << passed << "/" << criteria.size()
            << " criteria passed\n";
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
