#include "mfg/model.hpp"

#include <Eigen/Eigenvalues>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace mfg {

namespace {

constexpr double kPsdTolQ = 1e-12;   // relative to the largest eigenvalue
constexpr double kPdTolR = 1e-10;
constexpr double kWeightTol = 1e-12;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool is_symmetric(const Mat& M, double tol) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <=
         tol * (1.0 + M.cwiseAbs().maxCoeff());
}

double min_sym_eig(const Mat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace

std::string to_string(StrategyFamily f) {
  switch (f) {
    case StrategyFamily::GameHomogeneousFinite: return "GameHomogeneousFinite";
    case StrategyFamily::GameHeterogeneousFinite:
      return "GameHeterogeneousFinite";
    case StrategyFamily::GameInfinite: return "GameInfinite";
    case StrategyFamily::SocialFinite: return "SocialFinite";
    case StrategyFamily::SocialInfinite: return "SocialInfinite";
    case StrategyFamily::SocialCoupledFinite: return "SocialCoupledFinite";
    case StrategyFamily::ClassicalMeanField: return "ClassicalMeanField";
  }
  return "GameHomogeneousFinite";
}

StrategyFamily family_from_string(const std::string& s) {
  if (s == "GameHomogeneousFinite") return StrategyFamily::GameHomogeneousFinite;
  if (s == "GameHeterogeneousFinite")
    return StrategyFamily::GameHeterogeneousFinite;
  if (s == "GameInfinite") return StrategyFamily::GameInfinite;
  if (s == "SocialFinite") return StrategyFamily::SocialFinite;
  if (s == "SocialInfinite") return StrategyFamily::SocialInfinite;
  if (s == "SocialCoupledFinite") return StrategyFamily::SocialCoupledFinite;
  if (s == "ClassicalMeanField") return StrategyFamily::ClassicalMeanField;
  throw InputError("unknown strategy family: " + s);
}

bool ScenarioConfig::uniform_alpha() const {
  if (alpha.size() != N) return false;
  const double u = 1.0 / N;
  for (int i = 0; i < N; ++i)
    if (std::abs(alpha[i] - u) > kWeightTol * N) return false;
  return true;
}

ValidationReport validate_scenario(const ScenarioConfig& cfg) {
  ValidationReport rep;
  auto flag = [&rep](const std::string& msg) { rep.violations.push_back(msg); };

  const int n = cfg.n();
  const int r = cfg.r();
  if (n < 1) flag("A must be a nonempty square matrix");
  if (cfg.A.rows() != cfg.A.cols()) flag("A must be square");
  if (cfg.B.rows() != n) flag("B row count must match A");
  if (r < 1) flag("B must have at least one column");
  if (cfg.C.rows() != n || cfg.C.cols() != n) flag("C must be n x n");
  if (cfg.D.rows() != n || cfg.D.cols() != r) flag("D must be n x r");
  if (cfg.Q.rows() != n || cfg.Q.cols() != n) flag("Q must be n x n");
  if (cfg.R.rows() != r || cfg.R.cols() != r) flag("R must be r x r");
  if (cfg.Gamma.rows() != n || cfg.Gamma.cols() != n) flag("Gamma must be n x n");
  if (cfg.G.rows() != n || cfg.G.cols() != n) flag("G must be n x n");
  if (cfg.x0_mean.size() != n) flag("x0_mean must be an n-vector");
  if (cfg.x0_cov.rows() != n || cfg.x0_cov.cols() != n)
    flag("x0_cov must be n x n");

  for (const auto* tv : {&cfg.f, &cfg.sigma, &cfg.eta}) {
    if (tv->values.empty()) {
      flag("f, sigma, eta must each have at least one table entry");
      break;
    }
    for (const auto& v : tv->values)
      if (v.size() != n) {
        flag("f, sigma, eta entries must be n-vectors");
        break;
      }
  }
  if (!rep.passes()) return rep;  // dimension errors make the rest unreliable

  if (cfg.rho < 0.0) flag("rho must be nonnegative");
  if (cfg.N < 1) flag("N must be positive");

  if (cfg.alpha.size() != cfg.N) {
    flag("alpha must have length N");
  } else {
    double sum = 0.0;
    bool neg = false;
    for (int i = 0; i < cfg.N; ++i) {
      sum += cfg.alpha[i];
      if (cfg.alpha[i] < 0.0) neg = true;
    }
    if (neg) flag("alpha has a negative weight");
    if (std::abs(sum - 1.0) > 1e-9) flag("alpha must sum to 1");
  }

  if (!is_symmetric(cfg.Q, 1e-12)) flag("Q must be symmetric");
  else {
    Eigen::SelfAdjointEigenSolver<Mat> es(cfg.Q);
    const double lmax = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -kPsdTolQ * lmax)
      flag("Q must be positive semidefinite");
  }
  if (!is_symmetric(cfg.R, 1e-12)) flag("R must be symmetric");
  else if (min_sym_eig(cfg.R) <= kPdTolR) flag("R must be positive definite");
  if (!is_symmetric(cfg.x0_cov, 1e-12) || min_sym_eig(cfg.x0_cov) < -kPsdTolQ)
    flag("x0_cov must be symmetric positive semidefinite");

  const bool finite = cfg.horizon.kind == HorizonKind::Finite;
  if (finite && cfg.horizon.T <= 0.0) flag("finite horizon needs T > 0");
  if (!finite && cfg.horizon.T_trunc <= 0.0)
    flag("infinite horizon needs T_trunc > 0");
  if (!finite && cfg.rho <= 0.0)
    flag("infinite horizon needs a positive discount rate");
  if (!finite &&
      (!cfg.f.is_constant() || !cfg.sigma.is_constant() ||
       !cfg.eta.is_constant()))
    flag("infinite horizon needs constant f, sigma, eta");

  switch (cfg.family) {
    case StrategyFamily::GameHeterogeneousFinite:
      if (!cfg.f.is_zero() || !cfg.sigma.is_zero() || !cfg.eta.is_zero())
        flag("heterogeneous family requires f = sigma = eta = 0");
      if (cfg.N < 2) flag("heterogeneous family requires N >= 2");
      if (cfg.alpha_dominant <= 0.0 || cfg.alpha_dominant >= 1.0)
        flag("alpha_dominant must lie in (0, 1)");
      if (!finite) flag("heterogeneous family is finite-horizon only");
      break;
    case StrategyFamily::SocialCoupledFinite:
      if (cfg.D.cwiseAbs().maxCoeff() != 0.0)
        flag("coupled family requires D = 0");
      if (cfg.N < 2) flag("coupled family requires N >= 2");
      if (!finite) flag("coupled family is finite-horizon only");
      break;
    case StrategyFamily::GameHomogeneousFinite:
    case StrategyFamily::SocialFinite:
      if (!finite) flag(to_string(cfg.family) + " needs a finite horizon");
      break;
    case StrategyFamily::GameInfinite:
    case StrategyFamily::SocialInfinite:
      if (finite) flag(to_string(cfg.family) + " needs an infinite horizon");
      break;
    case StrategyFamily::ClassicalMeanField:
      break;
  }
  if (cfg.family != StrategyFamily::SocialCoupledFinite &&
      cfg.G.cwiseAbs().maxCoeff() != 0.0)
    flag("G must be zero outside the coupled family");

  return rep;
}

Vec weighted_average(const std::vector<Vec>& states, const Vec& alpha) {
  if (static_cast<int>(states.size()) != alpha.size())
    throw InputError("weighted_average: state count does not match weights");
  if (states.empty()) throw InputError("weighted_average: empty state list");
  Vec out = Vec::Zero(states[0].size());
  for (size_t j = 0; j < states.size(); ++j) {
    if (states[j].size() != out.size())
      throw InputError("weighted_average: inconsistent state dimensions");
    out += alpha[static_cast<int>(j)] * states[j];
  }
  return out;
}

Vec uniform_weights(int N) {
  return Vec::Constant(N, 1.0 / N);
}

TimeGrid default_grid(const ScenarioConfig& cfg, int steps_override) {
  TimeGrid grid;
  grid.T = cfg.horizon.window();
  grid.steps = steps_override > 0
                   ? steps_override
                   : std::max(2, static_cast<int>(std::ceil(200.0 * grid.T)));
  return grid;
}

namespace {

void emit_matrix(std::ostringstream& out, const std::string& key, const Mat& M) {
  out << key << " =";
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) out << ' ' << fmt(M(i, j));
  out << '\n';
}

void emit_timevec(std::ostringstream& out, const std::string& key,
                  const TimeVec& tv) {
  // Constant tables on one line; tabulated ones as "T | v0 | v1 | ...".
  out << key << " =";
  if (!tv.is_constant()) out << ' ' << fmt(tv.T) << " |";
  for (size_t c = 0; c < tv.values.size(); ++c) {
    const Vec& v = tv.values[c];
    for (int i = 0; i < v.size(); ++i) out << ' ' << fmt(v[i]);
    if (c + 1 < tv.values.size()) out << " |";
  }
  out << '\n';
}

std::vector<double> parse_numbers(const std::string& text,
                                  const std::string& key) {
  std::vector<double> vals;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw InputError("scenario key '" + key + "': bad number '" + tok + "'");
    }
    if (pos != tok.size())
      throw InputError("scenario key '" + key + "': bad number '" + tok + "'");
    vals.push_back(v);
  }
  return vals;
}

Mat matrix_from(const std::vector<double>& vals, int rows, int cols,
                const std::string& key) {
  if (static_cast<int>(vals.size()) != rows * cols)
    throw InputError("scenario key '" + key + "': expected " +
                     std::to_string(rows * cols) + " entries, got " +
                     std::to_string(vals.size()));
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = vals[static_cast<size_t>(i * cols + j)];
  return M;
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::string scenario_to_string(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out << "family = " << to_string(cfg.family) << '\n';
  out << "n = " << cfg.n() << '\n';
  out << "r = " << cfg.r() << '\n';
  out << "N = " << cfg.N << '\n';
  out << "rho = " << fmt(cfg.rho) << '\n';
  if (cfg.horizon.kind == HorizonKind::Finite) {
    out << "horizon = finite\n";
    out << "T = " << fmt(cfg.horizon.T) << '\n';
  } else {
    out << "horizon = infinite\n";
    out << "T_trunc = " << fmt(cfg.horizon.T_trunc) << '\n';
    out << "tail_tol = " << fmt(cfg.horizon.tail_tol) << '\n';
  }
  emit_matrix(out, "A", cfg.A);
  emit_matrix(out, "B", cfg.B);
  emit_matrix(out, "C", cfg.C);
  emit_matrix(out, "D", cfg.D);
  emit_matrix(out, "Q", cfg.Q);
  emit_matrix(out, "R", cfg.R);
  emit_matrix(out, "Gamma", cfg.Gamma);
  emit_matrix(out, "G", cfg.G);
  emit_timevec(out, "f", cfg.f);
  emit_timevec(out, "sigma", cfg.sigma);
  emit_timevec(out, "eta", cfg.eta);
  emit_matrix(out, "x0_mean", cfg.x0_mean);
  emit_matrix(out, "x0_cov", cfg.x0_cov);
  if (cfg.uniform_alpha()) {
    out << "alpha = uniform\n";
  } else {
    emit_matrix(out, "alpha", cfg.alpha);
  }
  if (cfg.alpha_dominant > 0.0)
    out << "alpha_dominant = " << fmt(cfg.alpha_dominant) << '\n';
  return out.str();
}

ScenarioConfig parse_scenario(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError("scenario line without '=': " + t);
    const std::string key = trim(t.substr(0, eq));
    if (kv.count(key)) throw InputError("duplicate scenario key: " + key);
    kv[key] = trim(t.substr(eq + 1));
  }

  auto need = [&kv](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw InputError("scenario missing key: " + key);
    return it->second;
  };
  auto get_or = [&kv](const std::string& key, const std::string& dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  };
  auto scalar = [](const std::string& raw, const std::string& key) {
    const auto vals = parse_numbers(raw, key);
    if (vals.size() != 1)
      throw InputError("scenario key '" + key + "' must be a single number");
    return vals[0];
  };

  ScenarioConfig cfg;
  const int n = static_cast<int>(scalar(need("n"), "n"));
  const int r = static_cast<int>(scalar(need("r"), "r"));
  if (n < 1 || r < 1) throw InputError("n and r must be positive");
  cfg.N = static_cast<int>(scalar(need("N"), "N"));
  cfg.rho = scalar(need("rho"), "rho");
  cfg.family = family_from_string(need("family"));

  const std::string hor = need("horizon");
  if (hor == "finite") {
    cfg.horizon.kind = HorizonKind::Finite;
    cfg.horizon.T = scalar(need("T"), "T");
  } else if (hor == "infinite") {
    cfg.horizon.kind = HorizonKind::Infinite;
    cfg.horizon.T_trunc = kv.count("T_trunc")
                              ? scalar(kv["T_trunc"], "T_trunc")
                              : std::max(10.0, 8.0 / std::max(cfg.rho, 1e-12));
    cfg.horizon.tail_tol = scalar(get_or("tail_tol", "0.001"), "tail_tol");
  } else {
    throw InputError("horizon must be 'finite' or 'infinite'");
  }

  auto mat = [&](const std::string& key, int rows, int cols) {
    return matrix_from(parse_numbers(need(key), key), rows, cols, key);
  };
  cfg.A = mat("A", n, n);
  cfg.B = mat("B", n, r);
  cfg.C = mat("C", n, n);
  cfg.D = mat("D", n, r);
  cfg.Q = mat("Q", n, n);
  cfg.R = mat("R", r, r);
  cfg.Gamma = mat("Gamma", n, n);
  cfg.G = kv.count("G") ? mat("G", n, n) : Mat::Zero(n, n);

  auto timevec = [&](const std::string& key) {
    const std::string raw = need(key);
    TimeVec tv;
    if (raw.find('|') == std::string::npos) {
      const auto vals = parse_numbers(raw, key);
      tv = TimeVec::constant(
          matrix_from(vals, n, 1, key).col(0));
      return tv;
    }
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream ps(raw);
    std::string tok;
    while (std::getline(ps, tok, '|')) parts.push_back(tok);
    if (parts.size() < 2)
      throw InputError("scenario key '" + key + "': bad table syntax");
    tv.T = scalar(parts[0], key);
    for (size_t c = 1; c < parts.size(); ++c)
      tv.values.push_back(
          matrix_from(parse_numbers(parts[c], key), n, 1, key).col(0));
    return tv;
  };
  cfg.f = timevec("f");
  cfg.sigma = timevec("sigma");
  cfg.eta = timevec("eta");

  cfg.x0_mean = mat("x0_mean", n, 1).col(0);
  cfg.x0_cov = mat("x0_cov", n, n);

  const std::string alpha_raw = need("alpha");
  if (alpha_raw == "uniform") {
    cfg.alpha = uniform_weights(cfg.N);
  } else {
    cfg.alpha = matrix_from(parse_numbers(alpha_raw, "alpha"), cfg.N, 1,
                            "alpha")
                    .col(0);
  }
  if (kv.count("alpha_dominant"))
    cfg.alpha_dominant = scalar(kv["alpha_dominant"], "alpha_dominant");

  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write scenario file: " + path);
  out << scenario_to_string(cfg);
}

std::uint64_t scenario_digest(const ScenarioConfig& cfg) {
  const std::string s = scenario_to_string(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace mfg
