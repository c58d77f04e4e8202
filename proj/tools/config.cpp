#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "choquard/io.hpp"

namespace choquard::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

const KeyInfo* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw ConfigError("malformed number for " + key + ": '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError("malformed integer for " + key + ": '" + v + "'");
  return static_cast<int>(x);
}

Rational to_rational(const std::string& key, const std::string& v) {
  auto r = Rational::parse(v);
  if (!r) throw ConfigError("malformed exponent for " + key + ": '" + v + "' (integer, decimal or a/b)");
  return *r;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("malformed boolean for " + key + ": '" + v + "'");
}

std::string rational_text(const Rational& r) {
  return r.den() == 1 ? std::to_string(r.num()) : std::to_string(r.num()) + "/" + std::to_string(r.den());
}

}  // namespace

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = {
      {"N", "params", "space dimension (>= 3)"},
      {"alpha", "params", "Riesz order, 0 < alpha < N; integer, decimal or a/b"},
      {"p", "params", "nonlocal exponent"},
      {"q", "params", "local exponent (> 2)"},
      {"eps", "params", "mass coefficient"},
      {"local-weight", "params", "coefficient of |u|^{q-2}u; 0 solves the Choquard equation"},
      {"m", "tf", "Thomas-Fermi exponent"},
      {"explicit-check", "tf", "run the closed-form GPP validation suite", true},
      {"grid-n", "grid", "number of radial nodes"},
      {"rmax", "grid", "truncation radius"},
      {"stretch", "grid", "uniform | geometric"},
      {"ratio", "grid", "spacing ratio of geometric grids"},
      {"tol", "solver", "relative strong residual target"},
      {"max-iters", "solver", "iteration budget"},
      {"seed-profile", "solver", "gaussian | paper-profile | file"},
      {"seed-file", "solver", "CSV with r and u columns for --seed-profile file"},
      {"jobs", "solver", "parallel independent solves"},
      {"schedule", "sweep", "comma-separated eps values (>= 4, strictly monotone)"},
      {"direction", "sweep", "to-zero | to-infinity"},
      {"norms", "sweep", "comma-separated subset of D1, L2, Lq"},
      {"p-range", "classify", "lo:hi:step"},
      {"q-range", "classify", "lo:hi:step"},
      {"input", "verify", "directory of a saved result"},
      {"out", "output", "output directory"},
  };
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyInfo* k = find_key(key);
    if (!k) throw ConfigError(where + ": unknown key '" + key + "'");
    if (section != k->section)
      throw ConfigError(where + ": key '" + key + "' belongs to section [" + k->section + "]");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    out[section + "." + key] = value;
  }
  return out;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  ProblemParams& P = c.params;
  if (key == "N") {
    P.N = to_int(key, value);
  } else if (key == "alpha") {
    P.alpha_exact = to_rational(key, value);
    P.alpha = P.alpha_exact->value();
  } else if (key == "p") {
    P.p_exact = to_rational(key, value);
    P.p = P.p_exact->value();
  } else if (key == "q") {
    P.q_exact = to_rational(key, value);
    P.q = P.q_exact->value();
  } else if (key == "eps") {
    P.eps = to_double(key, value);
  } else if (key == "local-weight") {
    P.local_weight = to_double(key, value);
  } else if (key == "m") {
    c.m = to_double(key, value);
  } else if (key == "explicit-check") {
    c.explicit_check = to_bool(key, value);
  } else if (key == "grid-n") {
    c.grid_n = to_int(key, value);
  } else if (key == "rmax") {
    c.rmax = to_double(key, value);
  } else if (key == "stretch") {
    if (value == "uniform") c.stretch = Stretch::uniform;
    else if (value == "geometric") c.stretch = Stretch::geometric;
    else throw ConfigError("stretch must be uniform or geometric, got '" + value + "'");
  } else if (key == "ratio") {
    c.ratio = to_double(key, value);
  } else if (key == "tol") {
    c.solver.tol = to_double(key, value);
  } else if (key == "max-iters") {
    c.solver.max_iters = to_int(key, value);
  } else if (key == "seed-profile") {
    try {
      c.solver.seed_profile = parse_seed_profile(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "seed-file") {
    c.seed_file = value;
  } else if (key == "jobs") {
    c.jobs = to_int(key, value);
  } else if (key == "schedule") {
    c.schedule.clear();
    for (const auto& s : split(value, ',')) c.schedule.push_back(to_double(key, s));
  } else if (key == "direction") {
    try {
      c.direction = parse_direction(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "norms") {
    c.norms.clear();
    for (const auto& s : split(value, ',')) {
      try {
        c.norms.push_back(parse_norm(s));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (key == "p-range" || key == "q-range") {
    const auto parts = split(value, ':');
    if (parts.size() != 3) throw ConfigError(key + " must be lo:hi:step, got '" + value + "'");
    RangeSpec r{to_rational(key, parts[0]), to_rational(key, parts[1]), to_rational(key, parts[2])};
    (key == "p-range" ? c.p_range : c.q_range) = r;
  } else if (key == "input") {
    c.input = value;
  } else if (key == "out") {
    c.out = value;
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

RunConfig resolve(const std::string& command, const std::map<std::string, std::string>& file_settings,
                  const std::map<std::string, std::string>& flag_settings) {
  RunConfig c;
  c.command = command;
  for (const auto& [k, v] : file_settings) {
    const auto dot = k.find('.');
    apply_setting(c, dot == std::string::npos ? k : k.substr(dot + 1), v);
  }
  for (const auto& [k, v] : flag_settings) apply_setting(c, k, v);
  return c;
}

std::string canonical(const RunConfig& c) {
  std::map<std::string, std::string> kv;
  const ProblemParams& P = c.params;
  auto exact_or = [](const std::optional<Rational>& r, double x) {
    return r ? rational_text(*r) : format_double(x);
  };
  kv["command"] = c.command;
  kv["N"] = std::to_string(P.N);
  kv["alpha"] = exact_or(P.alpha_exact, P.alpha);
  kv["p"] = exact_or(P.p_exact, P.p);
  kv["q"] = exact_or(P.q_exact, P.q);
  kv["eps"] = format_double(P.eps);
  kv["local-weight"] = format_double(P.local_weight);
  kv["m"] = format_double(c.m);
  kv["explicit-check"] = c.explicit_check ? "true" : "false";
  kv["grid-n"] = std::to_string(c.grid_n);
  kv["rmax"] = c.rmax ? format_double(*c.rmax) : "auto";
  kv["stretch"] = to_string(c.stretch);
  kv["ratio"] = c.ratio ? format_double(*c.ratio) : "auto";
  kv["tol"] = format_double(c.solver.tol);
  kv["max-iters"] = std::to_string(c.solver.max_iters);
  kv["seed-profile"] = to_string(c.solver.seed_profile);
  kv["seed-file"] = c.seed_file;
  std::string sched;
  for (double e : c.schedule) sched += (sched.empty() ? "" : ",") + format_double(e);
  kv["schedule"] = sched;
  kv["direction"] = to_string(c.direction);
  std::string norms;
  for (Norm n : c.norms) norms += (norms.empty() ? "" : ",") + to_string(n);
  kv["norms"] = norms;
  auto range = [](const std::optional<RangeSpec>& r) {
    return r ? rational_text(r->lo) + ":" + rational_text(r->hi) + ":" + rational_text(r->step) : std::string();
  };
  kv["p-range"] = range(c.p_range);
  kv["q-range"] = range(c.q_range);
  kv["input"] = c.input;
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string config_hash(const RunConfig& c) { return hash_hex(fnv1a(canonical(c))); }

std::vector<Rational> expand(const RangeSpec& r) {
  if (compare(r.step, Rational(0)) <= 0) return {};
  std::vector<Rational> out;
  for (Rational x = r.lo; compare(x, r.hi) <= 0; x = x + r.step) {
    out.push_back(x);
    if (out.size() > 100000) throw ConfigError("range has more than 100000 points");
  }
  return out;
}

}  // namespace choquard::cli
