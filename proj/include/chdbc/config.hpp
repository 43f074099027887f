#ifndef CHDBC_CONFIG_HPP
#define CHDBC_CONFIG_HPP

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chdbc/errors.hpp"
#include "chdbc/model.hpp"

namespace chdbc {

enum class InitialKind { step_x, sine_product, uniform_random };

struct InitialDataSpec {
  InitialKind kind = InitialKind::step_x;
  double lo = 0, hi = 0;            // uniform_random bounds
  unsigned long long seed = 0;      // uniform_random seed

  bool operator==(const InitialDataSpec&) const = default;
};

struct RunConfig {
  ModelKind model = ModelKind::robin;
  int n_cells = 16;
  double tau = 1e-5;
  int n_steps = 10;
  double eps = 0.02;
  double delta = 0.02;
  double kappa = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  double K = 0.1;
  std::string potential_f = "double_well";
  std::string potential_g = "double_well";
  std::string transmission = "affine";
  InitialDataSpec initial_data;
  std::string output_dir;
  int snapshot_every = 0;

  bool operator==(const RunConfig&) const = default;
};

struct SweepConfig {
  RunConfig base;               // a Robin config; base.K is superseded by K_list
  std::vector<double> K_list;   // strictly descending
  bool reference_is_limit = true;
  double reference_K = 1e-5;    // used when the reference is a Robin run

  bool operator==(const SweepConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline InitialDataSpec parse_initial_data(const std::string& v) {
  InitialDataSpec d;
  if (v == "step_x") {
    d.kind = InitialKind::step_x;
    return d;
  }
  if (v == "sine_product") {
    d.kind = InitialKind::sine_product;
    return d;
  }
  if (v.rfind("uniform_random(", 0) == 0 && v.back() == ')') {
    d.kind = InitialKind::uniform_random;
    const std::string args = v.substr(15, v.size() - 16);
    std::vector<std::string> parts;
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(trim(item));
    if (parts.size() != 3) throw ConfigError("config: uniform_random needs (lo, hi, seed)");
    d.lo = parse_double("initial_data lo", parts[0]);
    d.hi = parse_double("initial_data hi", parts[1]);
    try {
      d.seed = std::stoull(parts[2]);
    } catch (const std::exception&) {
      throw ConfigError("config: bad seed: '" + parts[2] + "'");
    }
    if (!(d.lo < d.hi)) throw ConfigError("config: uniform_random needs lo < hi");
    return d;
  }
  throw ConfigError("config: unknown initial_data: '" + v + "'");
}

inline std::string format_initial_data(const InitialDataSpec& d) {
  switch (d.kind) {
    case InitialKind::step_x: return "step_x";
    case InitialKind::sine_product: return "sine_product";
    case InitialKind::uniform_random:
      return "uniform_random(" + format_double(d.lo) + ", " + format_double(d.hi) + ", " +
             std::to_string(d.seed) + ")";
  }
  throw std::logic_error("unreachable");
}

// Flat "key = value" lines; '#' starts a comment; blank lines are skipped.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: line " + std::to_string(lineno) + " has an empty key or value");
    if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

inline void apply_run_keys(RunConfig& c, std::map<std::string, std::string>& kv) {
  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("model"); !v.empty()) {
    if (v == "robin") c.model = ModelKind::robin;
    else if (v == "limit") c.model = ModelKind::limit;
    else throw ConfigError("config: unknown model: '" + v + "'");
  }
  if (auto v = take("n_cells"); !v.empty()) c.n_cells = parse_int("n_cells", v);
  if (auto v = take("tau"); !v.empty()) c.tau = parse_double("tau", v);
  if (auto v = take("n_steps"); !v.empty()) c.n_steps = parse_int("n_steps", v);
  if (auto v = take("eps"); !v.empty()) c.eps = parse_double("eps", v);
  if (auto v = take("delta"); !v.empty()) c.delta = parse_double("delta", v);
  if (auto v = take("kappa"); !v.empty()) c.kappa = parse_double("kappa", v);
  if (auto v = take("alpha"); !v.empty()) c.alpha = parse_double("alpha", v);
  if (auto v = take("beta"); !v.empty()) c.beta = parse_double("beta", v);
  if (auto v = take("K"); !v.empty()) c.K = parse_double("K", v);
  if (auto v = take("potential_f"); !v.empty()) c.potential_f = v;
  if (auto v = take("potential_g"); !v.empty()) c.potential_g = v;
  if (auto v = take("transmission"); !v.empty()) c.transmission = v;
  if (auto v = take("initial_data"); !v.empty()) c.initial_data = parse_initial_data(v);
  if (auto v = take("output_dir"); !v.empty()) c.output_dir = v;
  if (auto v = take("snapshot_every"); !v.empty()) c.snapshot_every = parse_int("snapshot_every", v);
}

inline void validate_run_config(const RunConfig& c) {
  if (c.n_cells < 1) throw ConfigError("config: n_cells must be >= 1");
  if (c.tau <= 0) throw ConfigError("config: tau must be positive");
  if (c.n_steps < 1) throw ConfigError("config: n_steps must be >= 1");
  if (c.eps <= 0 || c.delta <= 0) throw ConfigError("config: eps and delta must be positive");
  if (c.kappa < 0) throw ConfigError("config: kappa must be nonnegative");
  if (c.alpha == 0) throw ConfigError("config: alpha must be nonzero");
  if (c.model == ModelKind::robin && c.K <= 0)
    throw ConfigError("config: K must be positive for the robin model");
  if (c.snapshot_every < 0) throw ConfigError("config: snapshot_every must be >= 0");
  try {
    potential_by_label(c.potential_f);
    potential_by_label(c.potential_g);
    if (c.model == ModelKind::robin) transmission_by_label(c.transmission, c.alpha, c.beta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  auto kv = detail::parse_key_values(text);
  RunConfig c;
  detail::apply_run_keys(c, kv);
  if (!kv.empty()) throw ConfigError("config: unknown key '" + kv.begin()->first + "'");
  detail::validate_run_config(c);
  return c;
}

inline SweepConfig parse_sweep_config(const std::string& text) {
  auto kv = detail::parse_key_values(text);
  SweepConfig s;
  if (auto it = kv.find("K_list"); it != kv.end()) {
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (!item.empty()) s.K_list.push_back(detail::parse_double("K_list", item));
    }
    kv.erase(it);
  } else {
    throw ConfigError("config: sweep needs K_list");
  }
  if (auto it = kv.find("reference"); it != kv.end()) {
    if (it->second == "limit") s.reference_is_limit = true;
    else if (it->second == "robin") s.reference_is_limit = false;
    else throw ConfigError("config: reference must be 'limit' or 'robin'");
    kv.erase(it);
  }
  if (auto it = kv.find("reference_K"); it != kv.end()) {
    s.reference_K = detail::parse_double("reference_K", it->second);
    kv.erase(it);
  }
  detail::apply_run_keys(s.base, kv);
  if (!kv.empty()) throw ConfigError("config: unknown key '" + kv.begin()->first + "'");
  detail::validate_run_config(s.base);
  if (s.base.model != ModelKind::robin) throw ConfigError("config: sweep base model must be robin");
  if (s.K_list.empty()) throw ConfigError("config: K_list must not be empty");
  for (size_t i = 0; i < s.K_list.size(); ++i) {
    if (s.K_list[i] <= 0) throw ConfigError("config: K_list entries must be positive");
    if (i > 0 && !(s.K_list[i] < s.K_list[i - 1]))
      throw ConfigError("config: K_list must be strictly descending");
  }
  if (s.reference_is_limit && s.base.transmission != "affine")
    throw ConfigError("config: a limit reference requires the affine transmission");
  if (!s.reference_is_limit && s.reference_K <= 0)
    throw ConfigError("config: reference_K must be positive");
  return s;
}

inline std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "model = " << (c.model == ModelKind::robin ? "robin" : "limit") << "\n";
  out << "n_cells = " << c.n_cells << "\n";
  out << "tau = " << detail::format_double(c.tau) << "\n";
  out << "n_steps = " << c.n_steps << "\n";
  out << "eps = " << detail::format_double(c.eps) << "\n";
  out << "delta = " << detail::format_double(c.delta) << "\n";
  out << "kappa = " << detail::format_double(c.kappa) << "\n";
  out << "alpha = " << detail::format_double(c.alpha) << "\n";
  out << "beta = " << detail::format_double(c.beta) << "\n";
  out << "K = " << detail::format_double(c.K) << "\n";
  out << "potential_f = " << c.potential_f << "\n";
  out << "potential_g = " << c.potential_g << "\n";
  out << "transmission = " << c.transmission << "\n";
  out << "initial_data = " << detail::format_initial_data(c.initial_data) << "\n";
  if (!c.output_dir.empty()) out << "output_dir = " << c.output_dir << "\n";
  out << "snapshot_every = " << c.snapshot_every << "\n";
  return out.str();
}

inline std::string serialize_sweep_config(const SweepConfig& s) {
  std::ostringstream out;
  out << serialize_run_config(s.base);
  out << "K_list = ";
  for (size_t i = 0; i < s.K_list.size(); ++i)
    out << (i ? ", " : "") << detail::format_double(s.K_list[i]);
  out << "\n";
  out << "reference = " << (s.reference_is_limit ? "limit" : "robin") << "\n";
  out << "reference_K = " << detail::format_double(s.reference_K) << "\n";
  return out.str();
}

// Builds the solver-facing parameter pack from a parsed config.
inline ModelParams make_model_params(const RunConfig& c) {
  ModelParams p;
  p.kind = c.model;
  p.eps = c.eps;
  p.delta = c.delta;
  p.kappa = c.kappa;
  p.tau = c.tau;
  p.K = c.K;
  p.alpha = c.alpha;
  p.beta = c.beta;
  p.F = potential_by_label(c.potential_f);
  p.G = potential_by_label(c.potential_g);
  if (c.model == ModelKind::robin) p.H = transmission_by_label(c.transmission, c.alpha, c.beta);
  return p;
}

}  // namespace chdbc

#endif
