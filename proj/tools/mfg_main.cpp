// Command-line front end: solve a scenario, simulate its closed loop,
// verify optimality numerically, regenerate the report figures, and run
// graph average-consensus. Exit codes: 0 ok, 1 verification failure,
// 2 input error, 3 numerical failure.
#include "CLI11.hpp"

#include "mfg/consensus.hpp"
#include "mfg/csv.hpp"
#include "mfg/model.hpp"
#include "mfg/riccati.hpp"
#include "mfg/simulate.hpp"
#include "mfg/svg.hpp"
#include "mfg/synthesis.hpp"
#include "mfg/verify.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace mfg;

struct Opts {
  std::string scenario;
  std::string social_scenario;
  std::string graph;
  std::string out;
  std::string init;
  std::string sweep_n = "2,3,4,6,10,16,32,64";
  std::uint64_t seed = 12345;
  int paths = 0;
  int grid_steps = 0;
  int steps = 500;
  double tol = 1e-10;
  std::vector<std::string> figs;
};

std::string resolve_out(const std::string& out) {
  std::string dir = out;
  if (dir.empty()) {
    const char* env = std::getenv("MFG_OUT_DIR");
    dir = env ? env : ".";
  }
  std::filesystem::create_directories(dir);
  return dir;
}

ScenarioConfig load_checked(const std::string& path) {
  if (path.empty()) throw InputError("--scenario is required");
  ScenarioConfig cfg = load_scenario(path);
  const ValidationReport rep = validate_scenario(cfg);
  if (!rep.passes()) {
    std::string msg = "invalid scenario " + path + ":";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw InputError(msg);
  }
  return cfg;
}

RiccatiBundle solve_bundle(const ScenarioConfig& cfg, int grid_steps) {
  const TimeGrid grid = default_grid(cfg, grid_steps);
  switch (cfg.family) {
    case StrategyFamily::GameHomogeneousFinite:
      return solve_game_finite(cfg, grid);
    case StrategyFamily::GameHeterogeneousFinite:
      return solve_game_hetero(cfg, cfg.alpha_dominant, grid);
    case StrategyFamily::GameInfinite:
      return solve_game_infinite(cfg, grid_steps);
    case StrategyFamily::SocialFinite:
      return solve_social_finite(cfg, grid);
    case StrategyFamily::SocialInfinite:
      return solve_social_infinite(cfg, grid_steps);
    case StrategyFamily::SocialCoupledFinite:
      return solve_coupled_social(cfg, grid);
    case StrategyFamily::ClassicalMeanField:
      return solve_classical_mf(cfg, grid);
  }
  throw InputError("unknown strategy family");
}

void add_mat_cols(std::vector<std::string>& hdr, const std::string& name,
                  const Mat& sample) {
  for (int i = 0; i < sample.rows(); ++i)
    for (int j = 0; j < sample.cols(); ++j)
      hdr.push_back(name + "_" + std::to_string(i) + std::to_string(j));
}

void push_mat(std::vector<double>& row, const Mat& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

std::string fmt_mat(const Mat& m) {
  std::ostringstream ss;
  if (m.rows() == 1 && m.cols() == 1) {
    ss << format_double(m(0, 0));
    return ss.str();
  }
  ss << "[";
  for (int i = 0; i < m.rows(); ++i) {
    if (i) ss << "; ";
    for (int j = 0; j < m.cols(); ++j) {
      if (j) ss << " ";
      ss << format_double(m(i, j));
    }
  }
  ss << "]";
  return ss.str();
}

std::string fmt_spectrum(const std::vector<std::complex<double>>& ev) {
  std::ostringstream ss;
  for (size_t i = 0; i < ev.size(); ++i) {
    if (i) ss << ", ";
    ss << format_double(ev[i].real());
    if (std::abs(ev[i].imag()) > 0) ss << (ev[i].imag() < 0 ? "-" : "+")
                                       << format_double(std::abs(ev[i].imag()))
                                       << "i";
  }
  return ss.str();
}

void describe_splitting(std::ostream& os, const SplittingReport& sp) {
  os << "splitting " << sp.matrix_tag << ": left=" << sp.left_count
     << " right=" << sp.right_count << " axis=" << sp.axis_count << " -> "
     << (sp.passes ? "PASS" : "FAIL")
     << (sp.conventions_agree() ? "" : " (conventions disagree)") << "\n";
}

// Named matrix/vector paths a family exposes, for the solution CSV.
struct NamedPaths {
  std::vector<std::pair<std::string, const MatrixPath*>> mats;
  std::vector<std::pair<std::string, const VectorPath*>> vecs;
};

NamedPaths named_paths(const RiccatiBundle& b) {
  NamedPaths np;
  if (b.hetero) {
    np.mats = {{"Kbar1", &b.hetero->Kbar1},   {"Pibar11", &b.hetero->Pibar11},
               {"Pibar1j", &b.hetero->Pibar1j}, {"Kbarj", &b.hetero->Kbarj},
               {"Pibarj1", &b.hetero->Pibarj1}, {"Pibarjj", &b.hetero->Pibarjj}};
    return np;
  }
  if (b.coupled) {
    np.mats = {{"Kbreve", &b.coupled->Kbreve}, {"Pibreve", &b.coupled->Pibreve}};
    np.vecs = {{"sbreve", &b.coupled->sbreve}};
    return np;
  }
  np.mats.push_back({"K", &b.K});
  if (!b.Pi.empty()) np.mats.push_back({"Pi", &b.Pi});
  np.vecs.push_back({"s", &b.s});
  return np;
}

int cmd_solve(const Opts& o) {
  const ScenarioConfig cfg = load_checked(o.scenario);
  const std::string out = resolve_out(o.out);
  const RiccatiBundle b = solve_bundle(cfg, o.grid_steps);
  const GainSchedule gains = make_gains(b, cfg);

  std::vector<std::string> hdr{"t"};
  const NamedPaths np = named_paths(b);
  for (const auto& [name, mp] : np.mats) add_mat_cols(hdr, name, mp->at(0));
  for (const auto& [name, vp] : np.vecs)
    for (int i = 0; i < vp->at(0).size(); ++i)
      hdr.push_back(name + "_" + std::to_string(i));
  if (b.P) add_mat_cols(hdr, "P", *b.P);
  std::vector<std::vector<double>> rows;
  const TimeGrid& grid = b.K.grid;
  for (int k = 0; k <= grid.steps; ++k) {
    std::vector<double> row{grid.t(k)};
    for (const auto& [name, mp] : np.mats) push_mat(row, mp->at(k));
    for (const auto& [name, vp] : np.vecs)
      for (int i = 0; i < vp->at(0).size(); ++i) row.push_back(vp->at(k)[i]);
    if (b.P) push_mat(row, *b.P);
    rows.push_back(std::move(row));
  }
  write_csv(out + "/solution.csv", hdr, rows);

  std::vector<std::string> ghdr{"t"};
  add_mat_cols(ghdr, "F_own", gains.F_own[0]);
  if (!gains.F_mean.empty()) add_mat_cols(ghdr, "F_mean", gains.F_mean[0]);
  if (gains.has_mean2()) add_mat_cols(ghdr, "F_mean2", gains.F_mean2[0]);
  for (int i = 0; i < gains.bias[0].size(); ++i)
    ghdr.push_back("bias_" + std::to_string(i));
  if (gains.has_dominant()) {
    add_mat_cols(ghdr, "F_own_dom", gains.F_own_dom[0]);
    add_mat_cols(ghdr, "F_mean_dom", gains.F_mean_dom[0]);
    add_mat_cols(ghdr, "F_mean2_dom", gains.F_mean2_dom[0]);
    for (int i = 0; i < gains.bias_dom[0].size(); ++i)
      ghdr.push_back("bias_dom_" + std::to_string(i));
  }
  std::vector<std::vector<double>> grows;
  for (int k = 0; k <= gains.grid.steps; ++k) {
    const size_t sk = static_cast<size_t>(k);
    std::vector<double> row{gains.grid.t(k)};
    push_mat(row, gains.F_own[sk]);
    if (!gains.F_mean.empty()) push_mat(row, gains.F_mean[sk]);
    if (gains.has_mean2()) push_mat(row, gains.F_mean2[sk]);
    for (int i = 0; i < gains.bias[sk].size(); ++i)
      row.push_back(gains.bias[sk][i]);
    if (gains.has_dominant()) {
      push_mat(row, gains.F_own_dom[sk]);
      push_mat(row, gains.F_mean_dom[sk]);
      push_mat(row, gains.F_mean2_dom[sk]);
      for (int i = 0; i < gains.bias_dom[sk].size(); ++i)
        row.push_back(gains.bias_dom[sk][i]);
    }
    grows.push_back(std::move(row));
  }
  write_csv(out + "/gains.csv", ghdr, grows);

  std::ostringstream rep;
  rep << "family = " << to_string(cfg.family) << "\n";
  rep << "grid = [0, " << format_double(grid.T) << "] with " << grid.steps
      << " steps\n";
  for (const auto& [name, mp] : np.mats)
    rep << name << "(0) = " << fmt_mat(mp->at(0)) << "\n";
  for (const auto& [name, vp] : np.vecs)
    rep << name << "(0) = " << fmt_mat(vp->at(0)) << "\n";
  if (b.P) rep << "P = " << fmt_mat(*b.P) << "\n";
  rep << "F_own(0) = " << fmt_mat(gains.F_own[0]) << "\n";
  if (!gains.F_mean.empty())
    rep << "F_mean(0) = " << fmt_mat(gains.F_mean[0]) << "\n";
  if (gains.has_mean2())
    rep << "F_mean2(0) = " << fmt_mat(gains.F_mean2[0]) << "\n";
  rep << "bias(0) = " << fmt_mat(gains.bias[0]) << "\n";
  if (!b.closed_loop_spectrum.empty())
    rep << "closed_loop_spectrum = " << fmt_spectrum(b.closed_loop_spectrum)
        << "\n";
  if (b.splitting) describe_splitting(rep, *b.splitting);
  if (cfg.family == StrategyFamily::GameHomogeneousFinite) {
    const A2Report a2 = check_a2_determinant(cfg, grid);
    rep << "determinant_test: min_det = " << format_double(a2.min_det)
        << " -> " << (a2.passes ? "PASS" : "FAIL") << "\n";
  }
  std::cout << rep.str();
  std::ofstream(out + "/solve_report.txt") << rep.str();
  return 0;
}

int cmd_simulate(const Opts& o) {
  const ScenarioConfig cfg = load_checked(o.scenario);
  const std::string out = resolve_out(o.out);
  const int paths = o.paths > 0 ? o.paths : 1000;
  const RiccatiBundle b = solve_bundle(cfg, o.grid_steps);
  const GainSchedule gains = make_gains(b, cfg);
  const MeanFlow mf = propagate_mean(gains, cfg, gains.grid);
  const Ensemble ens = simulate_ensemble(cfg, gains, mf, paths, o.seed);

  std::vector<std::pair<std::string, std::string>> kv;
  kv.push_back({"scenario", o.scenario});
  kv.push_back({"family", to_string(cfg.family)});
  kv.push_back({"paths", std::to_string(paths)});
  kv.push_back({"seed", std::to_string(o.seed)});
  kv.push_back({"discarded", std::to_string(ens.discarded)});
  std::ostringstream con;
  for (int i = 0; i < cfg.N; ++i) {
    const CostEstimate est = estimate_cost(ens, cfg, i);
    kv.push_back({"J_" + std::to_string(i + 1), format_double(est.value)});
    kv.push_back(
        {"J_" + std::to_string(i + 1) + "_se", format_double(est.std_error)});
  }
  const CostEstimate soc = estimate_cost(ens, cfg, kSocial);
  kv.push_back({"J_social", format_double(soc.value)});
  kv.push_back({"J_social_se", format_double(soc.std_error)});
  if (cfg.horizon.kind == HorizonKind::Infinite)
    kv.push_back({"tail_bound", format_double(soc.tail_bound)});

  const Vec x_ref = mf.mean.at(mf.grid.steps);
  const ConsensusSeries cs = consensus_metrics(ens, x_ref);
  kv.push_back({"consensus_rate", format_double(cs.fitted_rate)});
  kv.push_back({"consensus_fit_residual", format_double(cs.fit_residual)});
  write_summary(out + "/simulate_summary.txt", kv);

  std::vector<std::string> hdr{"t", "mse_mean", "mse_spread"};
  for (int i = 0; i < cfg.n(); ++i) hdr.push_back("mean_" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= ens.grid.steps; ++k) {
    std::vector<double> row{cs.t[static_cast<size_t>(k)],
                            cs.mse_mean[static_cast<size_t>(k)],
                            cs.mse_spread[static_cast<size_t>(k)]};
    const Vec m = mf.mean.at(k);
    for (int i = 0; i < cfg.n(); ++i) row.push_back(m[i]);
    rows.push_back(std::move(row));
  }
  write_csv(out + "/consensus_series.csv", hdr, rows);

  for (const auto& [k, v] : kv) std::cout << k << " = " << v << "\n";
  return 0;
}

int cmd_verify(const Opts& o) {
  const ScenarioConfig cfg = load_checked(o.scenario);
  const std::string out = resolve_out(o.out);
  const int paths = o.paths > 0 ? o.paths : 2000;
  const std::vector<double> eps{0.02, 0.05};
  const RiccatiBundle b = solve_bundle(cfg, o.grid_steps);

  bool ok = true;
  std::ostringstream rep;
  const auto residuals = riccati_residual(b, cfg, b.K.grid);
  for (const auto& r : residuals) {
    rep << "residual " << r.equation_tag << ": max = "
        << format_double(r.max_residual)
        << (r.diagnostic_only ? " [reference only]"
                              : (r.passes ? " PASS" : " FAIL"))
        << "\n";
  }
  ok = ok && residuals_pass(residuals);

  const GainSchedule gains = make_gains(b, cfg);
  const bool is_game = cfg.family == StrategyFamily::GameHomogeneousFinite ||
                       cfg.family == StrategyFamily::GameInfinite ||
                       cfg.family == StrategyFamily::GameHeterogeneousFinite;
  const bool is_social = cfg.family == StrategyFamily::SocialFinite ||
                         cfg.family == StrategyFamily::SocialInfinite ||
                         cfg.family == StrategyFamily::SocialCoupledFinite;
  if (is_game) {
    const StationarityReport st =
        nash_stationarity_gap(cfg, gains, 0, paths, o.seed, eps);
    rep << "nash_stationarity agent 1: directions = " << st.directions
        << ", max_first_order = " << format_double(st.max_first_order)
        << ", threshold = " << format_double(st.max_threshold)
        << ", min_curvature = " << format_double(st.min_second_order_gain)
        << (st.passes ? " PASS" : " FAIL") << "\n";
    ok = ok && st.passes;
  } else if (is_social) {
    const StationarityReport st =
        social_stationarity_gap(cfg, gains, paths, o.seed, eps);
    rep << "social_stationarity: directions = " << st.directions
        << ", max_first_order = " << format_double(st.max_first_order)
        << ", threshold = " << format_double(st.max_threshold)
        << ", min_curvature = " << format_double(st.min_second_order_gain)
        << (st.passes ? " PASS" : " FAIL") << "\n";
    ok = ok && st.passes;
  } else {
    rep << "stationarity probe skipped: the infinite-population strategy is "
           "not optimal in a finite population\n";
  }
  if (cfg.family == StrategyFamily::SocialFinite) {
    const CostCrossCheck cc = cost_formula_cross_check(cfg, b, paths, o.seed);
    rep << "social_cost_cross_check: closed_form = "
        << format_double(cc.closed_form)
        << ", simulated = " << format_double(cc.simulated.value) << " +- "
        << format_double(cc.simulated.std_error)
        << (cc.passes ? " PASS" : " FAIL") << "\n";
    ok = ok && cc.passes;
  }
  rep << "verify: " << (ok ? "PASS" : "FAIL") << "\n";
  std::cout << rep.str();
  std::ofstream(out + "/verify_report.txt") << rep.str();
  return ok ? 0 : 1;
}

std::vector<int> parse_sweep(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw InputError("empty --sweep-n list");
  return out;
}

std::string sibling_social(const std::string& scenario_path) {
  const std::filesystem::path p(scenario_path);
  return (p.parent_path() / "social_n6.cfg").string();
}

// Per-path average over agents of the discounted cost (NaN for escapes).
std::vector<double> per_path_avg(const Ensemble& e) {
  std::vector<double> out;
  for (int p = 0; p < e.paths; ++p) {
    double v = 0.0;
    for (int i = 0; i < e.N; ++i)
      v += e.cost_integral[static_cast<size_t>(p)][static_cast<size_t>(i)];
    out.push_back(v / e.N);
  }
  return out;
}

struct SweepPoint {
  double mean_a = 0.0, se_a = 0.0, mean_b = 0.0, se_b = 0.0;
  double gap = 0.0, gap_se = 0.0;  // b - a, paired
};

SweepPoint paired_costs(const Ensemble& ea, const Ensemble& eb) {
  const std::vector<double> a = per_path_avg(ea);
  const std::vector<double> bb = per_path_avg(eb);
  SweepPoint sp;
  double sa = 0, saa = 0, sb = 0, sbb = 0, sd = 0, sdd = 0;
  int m = 0;
  for (size_t p = 0; p < a.size(); ++p) {
    if (!std::isfinite(a[p]) || !std::isfinite(bb[p])) continue;
    const double d = bb[p] - a[p];
    sa += a[p];
    saa += a[p] * a[p];
    sb += bb[p];
    sbb += bb[p] * bb[p];
    sd += d;
    sdd += d * d;
    ++m;
  }
  if (m < 2) throw InternalNumericalFailure("paired cost estimate starved");
  auto fin = [m](double s, double ss, double& mean, double& se) {
    mean = s / m;
    const double var = std::max(0.0, (ss - s * s / m) / (m - 1));
    se = std::sqrt(var / m);
  };
  fin(sa, saa, sp.mean_a, sp.se_a);
  fin(sb, sbb, sp.mean_b, sp.se_b);
  fin(sd, sdd, sp.gap, sp.gap_se);
  return sp;
}

int fig_single_path(const ScenarioConfig& cfg0, const RiccatiBundle& b,
                    const std::string& out, const std::string& stem,
                    std::uint64_t seed, bool agent_columns,
                    const std::string& title) {
  const ScenarioConfig& cfg = cfg0;
  const GainSchedule gains = make_gains(b, cfg);
  const MeanFlow mf = propagate_mean(gains, cfg, gains.grid);
  const Ensemble ens = simulate_ensemble(cfg, gains, mf, 1, seed);
  const RecordedPath& rp = ens.recorded[0];

  std::vector<std::string> hdr{"t"};
  ChartSpec spec;
  spec.x_col = "t";
  spec.title = title;
  spec.x_label = "t";
  if (agent_columns) {
    for (int i = 0; i < cfg.N; ++i) {
      hdr.push_back("x" + std::to_string(i + 1));
      spec.y_cols.push_back(hdr.back());
    }
    spec.y_label = "agent states";
  } else {
    hdr.push_back("xbar");
    hdr.push_back("mean");
    spec.y_cols = {"xbar", "mean"};
    spec.y_label = "population average";
  }
  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= ens.grid.steps; ++k) {
    std::vector<double> row{ens.grid.t(k)};
    if (agent_columns) {
      for (int i = 0; i < cfg.N; ++i)
        row.push_back(rp.states[static_cast<size_t>(i)][static_cast<size_t>(k)]
                          [0]);
    } else {
      double avg = 0.0;
      for (int i = 0; i < cfg.N; ++i)
        avg += rp.states[static_cast<size_t>(i)][static_cast<size_t>(k)][0];
      row.push_back(avg / cfg.N);
      row.push_back(mf.mean.at(k)[0]);
    }
    rows.push_back(std::move(row));
  }
  const std::string csv = out + "/" + stem + ".csv";
  write_csv(csv, hdr, rows);
  svg_from_csv(csv, spec, out + "/" + stem + ".svg");
  return 0;
}

int fig_sweep(const ScenarioConfig& base, bool social, const Opts& o,
              const std::string& out, const std::string& stem) {
  ScenarioConfig cfg0 = base;
  cfg0.horizon.T_trunc = 20.0;
  const int steps = o.grid_steps > 0 ? o.grid_steps : 2000;
  const int paths = o.paths > 0 ? o.paths : 10000;
  const std::vector<int> Ns = parse_sweep(o.sweep_n);

  const std::string finite_col = social ? "cost_social" : "cost_nash";
  std::vector<std::string> hdr{"N",          finite_col, finite_col + "_se",
                               "cost_classical", "cost_classical_se",
                               "gap",        "gap_se"};
  std::vector<std::vector<double>> rows;
  for (int N : Ns) {
    ScenarioConfig cfg = cfg0;
    cfg.N = N;
    cfg.alpha = uniform_weights(N);
    cfg.family = social ? StrategyFamily::SocialInfinite
                        : StrategyFamily::GameInfinite;
    const RiccatiBundle bf = social ? solve_social_infinite(cfg, steps)
                                    : solve_game_infinite(cfg, steps);
    const GainSchedule gf = make_gains(bf, cfg);
    const MeanFlow mff = propagate_mean(gf, cfg, gf.grid);
    const Ensemble ef = simulate_ensemble(cfg, gf, mff, paths, o.seed);

    ScenarioConfig ccl = cfg;
    ccl.family = StrategyFamily::ClassicalMeanField;
    const RiccatiBundle bc = solve_classical_mf(ccl, TimeGrid{20.0, steps});
    const GainSchedule gc = make_gains(bc, ccl);
    const MeanFlow mfc = propagate_mean(gc, ccl, gc.grid);
    const Ensemble ec = simulate_ensemble(ccl, gc, mfc, paths, o.seed);

    const SweepPoint sp = paired_costs(ef, ec);
    rows.push_back({static_cast<double>(N), sp.mean_a, sp.se_a, sp.mean_b,
                    sp.se_b, sp.gap, sp.gap_se});
  }
  const std::string csv = out + "/" + stem + ".csv";
  write_csv(csv, hdr, rows);
  ChartSpec spec;
  spec.x_col = "N";
  spec.y_cols = {finite_col, "cost_classical"};
  spec.title = social ? "Per-agent social cost vs population size"
                      : "Per-agent equilibrium cost vs population size";
  spec.x_label = "N";
  spec.y_label = "per-agent cost";
  svg_from_csv(csv, spec, out + "/" + stem + ".svg");
  return 0;
}

int cmd_figures(const Opts& o) {
  const std::string out = resolve_out(o.out);
  const std::string game_path =
      o.scenario.empty() ? "scenarios/game_n6.cfg" : o.scenario;
  const std::string social_path = o.social_scenario.empty()
                                      ? sibling_social(game_path)
                                      : o.social_scenario;
  std::vector<std::string> which = o.figs;
  if (which.empty() || (which.size() == 1 && which[0] == "all"))
    which = {"fig1", "fig2", "fig3", "fig4", "fig5"};

  for (const std::string& f : which) {
    if (f == "fig1") {
      ScenarioConfig cfg = load_checked(game_path);
      cfg.horizon.T_trunc = 10.0;
      const RiccatiBundle b = solve_game_infinite(cfg, o.grid_steps);
      fig_single_path(cfg, b, out, "fig1", o.seed, false,
                      "Realized population average under the equilibrium");
    } else if (f == "fig2") {
      fig_sweep(load_checked(game_path), false, o, out, "fig2");
    } else if (f == "fig3") {
      const ScenarioConfig cfg = load_checked(social_path);
      const RiccatiBundle b = solve_social_infinite(cfg, o.grid_steps);
      fig_single_path(cfg, b, out, "fig3", o.seed, true,
                      "Agent states under the social optimum");
    } else if (f == "fig4") {
      const ScenarioConfig cfg = load_checked(social_path);
      const RiccatiBundle b = solve_social_infinite(cfg, o.grid_steps);
      fig_single_path(cfg, b, out, "fig4", o.seed, false,
                      "Population average vs deterministic mean");
    } else if (f == "fig5") {
      fig_sweep(load_checked(social_path), true, o, out, "fig5");
    } else {
      throw InputError("unknown figure: " + f);
    }
    std::cout << "wrote " << out << "/" << f << ".csv and .svg\n";
  }
  return 0;
}

int cmd_consensus(const Opts& o) {
  if (o.graph.empty()) throw InputError("--graph is required");
  const Graph g = load_graph(o.graph);
  const std::string out = resolve_out(o.out);

  Mat initial(g.n_nodes, 1);
  if (o.init.empty()) {
    for (int i = 0; i < g.n_nodes; ++i) initial(i, 0) = i + 1;
  } else {
    std::stringstream ss(o.init);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',')) {
      if (i >= g.n_nodes) throw InputError("--init has too many values");
      initial(i++, 0) = std::stod(tok);
    }
    if (i != g.n_nodes)
      throw InputError("--init needs one value per node (" +
                       std::to_string(g.n_nodes) + ")");
  }

  const ConsensusRun run = average_consensus(g, initial, o.steps, o.tol);
  std::vector<std::string> hdr{"iter"};
  for (int i = 0; i < g.n_nodes; ++i) hdr.push_back("y" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < run.iterates.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (int i = 0; i < g.n_nodes; ++i) row.push_back(run.iterates[k](i, 0));
    rows.push_back(std::move(row));
  }
  write_csv(out + "/consensus_run.csv", hdr, rows);

  std::cout << "nodes = " << g.n_nodes << ", edges = " << g.edges.size()
            << "\n";
  std::cout << "average = " << format_double(run.average[0]) << "\n";
  if (run.converged_at)
    std::cout << "converged_at = " << *run.converged_at << "\n";
  else
    std::cout << "converged_at = never (within " << o.steps << " steps)\n";
  std::cout << "final_error = " << format_double(run.final_error) << "\n";
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NoStabilizingSolution& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    describe_splitting(std::cerr, e.report);
    return 3;
  } catch (const FiniteEscape& e) {
    std::cerr << "numerical failure: " << e.what() << " (t = " << e.t_escape
              << ")\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-population linear-quadratic mean-field games and "
               "teams: solve, simulate, verify, figures, consensus"};
  app.require_subcommand(1);
  Opts o;

  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    if (needs_scenario)
      sub->add_option("--scenario", o.scenario, "scenario file");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--paths", o.paths, "Monte Carlo paths");
    sub->add_option("--out", o.out,
                    "output directory (default $MFG_OUT_DIR or .)");
    sub->add_option("--grid-steps", o.grid_steps, "time grid steps override");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve a scenario");
  add_common(solve, true);
  CLI::App* simulate = app.add_subcommand("simulate", "simulate a closed loop");
  add_common(simulate, true);
  CLI::App* verify =
      app.add_subcommand("verify", "residuals and optimality probes");
  add_common(verify, true);
  CLI::App* figures = app.add_subcommand("figures", "regenerate the figures");
  add_common(figures, true);
  figures->add_option("figs", o.figs, "fig1..fig5 or all");
  figures->add_option("--social-scenario", o.social_scenario,
                      "social scenario (default: social_n6.cfg beside "
                      "--scenario)");
  figures->add_option("--sweep-n", o.sweep_n, "population sizes for sweeps");
  CLI::App* consensus =
      app.add_subcommand("consensus", "graph average-consensus");
  consensus->add_option("--graph", o.graph, "edge-list graph file");
  consensus->add_option("--init", o.init, "comma-separated initial values");
  consensus->add_option("--steps", o.steps, "max iterations");
  consensus->add_option("--tol", o.tol, "convergence tolerance");
  consensus->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (figures->parsed() && figures->count("--seed") == 0) o.seed = 20260822;
  if (solve->parsed()) return guarded([&] { return cmd_solve(o); });
  if (simulate->parsed()) return guarded([&] { return cmd_simulate(o); });
  if (verify->parsed()) return guarded([&] { return cmd_verify(o); });
  if (figures->parsed()) return guarded([&] { return cmd_figures(o); });
  if (consensus->parsed()) return guarded([&] { return cmd_consensus(o); });
  return 2;
}
