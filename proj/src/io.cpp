#include "choquard/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef CHOQUARD_VERSION
#define CHOQUARD_VERSION "0.0.0"
#endif

namespace choquard {

namespace fs = std::filesystem;

std::string tool_version() { return CHOQUARD_VERSION; }

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void ensure_parent(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

Json stamp_json(const RunStamp& s) {
  return Json{{"command", s.command}, {"tool_version", tool_version()}, {"config_hash", s.config_hash}};
}

Json optional_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

}  // namespace

std::vector<double> CsvTable::column(const std::string& name) const {
  Eigen::Index idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) idx = static_cast<Eigen::Index>(i);
  if (idx < 0) throw IoError("CSV has no column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const std::string& cell = row[static_cast<std::size_t>(idx)];
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw IoError("non-numeric CSV cell '" + cell + "' in column " + name);
    out.push_back(x);
  }
  return out;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("CSV header and column count differ");
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw std::invalid_argument("CSV columns differ in length");
  CsvTable t;
  t.header = header;
  t.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& c : columns) t.rows[i].push_back(format_double(c[i]));
  write_csv(path, t);
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  finish(out, path);
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty; a header row is required");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw IoError(path.string() + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                    std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_json(const fs::path& path, const Json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Json to_json(const ProblemParams& p) {
  Json j{{"N", p.N},
         {"alpha", p.alpha},
         {"p", p.p},
         {"q", p.q},
         {"eps", p.eps},
         {"kinetic_weight", p.kinetic_weight},
         {"local_weight", p.local_weight}};
  auto exact = [](const std::optional<Rational>& r) {
    return r ? Json(std::to_string(r->num()) + "/" + std::to_string(r->den())) : Json(nullptr);
  };
  j["alpha_exact"] = exact(p.alpha_exact);
  j["p_exact"] = exact(p.p_exact);
  j["q_exact"] = exact(p.q_exact);
  return j;
}

ProblemParams params_from_json(const Json& j) {
  try {
    ProblemParams p;
    p.N = j.at("N").get<int>();
    p.alpha = j.at("alpha").get<double>();
    p.p = j.at("p").get<double>();
    p.q = j.at("q").get<double>();
    p.eps = j.at("eps").get<double>();
    p.kinetic_weight = j.value("kinetic_weight", 1.0);
    p.local_weight = j.value("local_weight", 1.0);
    auto exact = [&](const char* key) -> std::optional<Rational> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      auto r = Rational::parse(j[key].get<std::string>());
      if (!r) throw IoError(std::string("malformed rational in ") + key);
      return r;
    };
    p.alpha_exact = exact("alpha_exact");
    p.p_exact = exact("p_exact");
    p.q_exact = exact("q_exact");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed params: ") + e.what());
  }
}

Json to_json(const GridSpec& g) {
  return Json{{"N", g.N}, {"R_max", g.R_max}, {"n", g.n}, {"stretch", to_string(g.stretch)}, {"ratio", g.ratio}};
}

GridSpec grid_spec_from_json(const Json& j) {
  try {
    GridSpec g;
    g.N = j.at("N").get<int>();
    g.R_max = j.at("R_max").get<double>();
    g.n = j.at("n").get<int>();
    const std::string s = j.at("stretch").get<std::string>();
    if (s != "uniform" && s != "geometric") throw IoError("unknown stretch '" + s + "'");
    g.stretch = s == "uniform" ? Stretch::uniform : Stretch::geometric;
    g.ratio = j.at("ratio").get<double>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed grid: ") + e.what());
  }
}

Json to_json(const SolverOptions& s) {
  return Json{{"max_iters", s.max_iters},     {"tol", s.tol},
              {"step", s.step},               {"precond_shift", s.precond_shift},
              {"seed_profile", to_string(s.seed_profile)}, {"newton_switch", s.newton_switch},
              {"max_descent_iters", s.max_descent_iters},  {"newton", s.newton}};
}

Json to_json(const GroundstateResult& r) {
  Json j;
  j["params"] = to_json(r.params);
  j["grid"] = to_json(r.field.grid().spec());
  j["converged"] = true;
  j["c_level"] = r.c_level;
  j["u0"] = r.field[0];
  j["iterations"] = r.iterations;
  j["energy"] = Json{{"kinetic", r.energy.kinetic},
                     {"mass", r.energy.mass},
                     {"nonlocal", r.energy.nonlocal},
                     {"local", r.energy.local},
                     {"total", r.energy.total}};
  j["parts"] = Json{{"grad_sq", r.parts.a}, {"l2_sq", r.parts.b}, {"lq_q", r.parts.c}, {"riesz", r.parts.d}};
  j["residuals"] = Json{{"pohozaev", r.residuals.pohozaev},
                        {"nehari", r.residuals.nehari},
                        {"strong", r.residuals.strong}};
  j["energy_monotone"] = r.energy_monotone;
  if (r.tail) {
    const TailFit& t = *r.tail;
    j["tail"] = Json{{"regime", to_string(t.regime)},
                     {"exponent", t.exponent},
                     {"amplitude", t.amplitude},
                     {"predicted_exponent", t.predicted_exponent},
                     {"predicted_amplitude", optional_number(t.predicted_amplitude)},
                     {"window", Json::array({t.window_lo, t.window_hi})}};
  } else {
    j["tail"] = nullptr;
  }
  return j;
}

Json to_json(const TFProfile& p) {
  return Json{{"N", p.N},
              {"alpha", p.alpha},
              {"m", p.m},
              {"s_tf", p.s_tf},
              {"lambda", p.lambda},
              {"support_radius", p.support_radius},
              {"rho0", p.rho[0]},
              {"iterations", p.iterations},
              {"virial_residual", virial_residual(p)},
              {"grid", to_json(p.rho.grid().spec())}};
}

Json to_json(const SweepReport& r) {
  Json j;
  j["params"] = to_json(r.params);
  j["direction"] = to_string(r.direction);
  j["regime"] = to_string(r.regime.kind);
  j["eps"] = r.eps;
  Json errs = Json::object();
  for (Norm n : r.norms) errs[to_string(n)] = r.errors.at(n);
  j["errors"] = errs;
  j["lambda"] = r.lambda;
  j["levels"] = r.levels;
  j["mass_term"] = r.mass_term;
  j["fitted_exponent"] = optional_number(r.fitted_exponent);
  j["fitted_exponent_last3"] = optional_number(r.fitted_exponent_last3);
  j["predicted_exponent"] = optional_number(r.predicted_exponent);
  j["predicted_band"] =
      r.predicted_band ? Json::array({r.predicted_band->first, r.predicted_band->second}) : Json(nullptr);
  j["fit_abscissa"] = r.fit_abscissa;
  j["complete"] = r.complete;
  j["failures"] = r.failures;
  j["warnings"] = r.warnings;
  if (r.regime.kind == RegimeKind::formal_limit_p0)
    j["mass_vanishing"] = r.mass_term.size() >= 4 ? Json(mass_vanishing_check(r)) : Json(nullptr);
  return j;
}

void write_solve_bundle(const fs::path& dir, const GroundstateResult& result, const SolverOptions& solver,
                        const RunStamp& stamp) {
  const auto& r = result.field.grid().nodes();
  std::vector<double> rv(r.data(), r.data() + r.size());
  std::vector<double> uv(result.field.values().data(), result.field.values().data() + result.field.size());
  write_csv(dir / "field.csv", {"r", "u"}, {rv, uv});

  CsvTable h;
  h.header = {"iteration", "phase", "energy", "residual", "step"};
  for (const auto& t : result.trace)
    h.rows.push_back({std::to_string(t.iteration), t.phase, format_double(t.energy), format_double(t.residual),
                      format_double(t.step)});
  write_csv(dir / "residual_history.csv", h);

  Json j = stamp_json(stamp);
  j.update(to_json(result));
  j["solver"] = to_json(solver);
  write_json(dir / "summary.json", j);
}

void write_solve_failure(const fs::path& dir, const ProblemParams& params, const GridSpec& grid,
                         const std::string& reason, const std::vector<double>& history, const RunStamp& stamp) {
  std::vector<double> it(history.size());
  for (std::size_t i = 0; i < it.size(); ++i) it[i] = static_cast<double>(i);
  write_csv(dir / "residual_history.csv", {"iteration", "residual"}, {it, history});
  Json j = stamp_json(stamp);
  j["params"] = to_json(params);
  j["grid"] = to_json(grid);
  j["converged"] = false;
  j["reason"] = reason;
  write_json(dir / "summary.json", j);
}

void write_tf_bundle(const fs::path& dir, const TFProfile& profile, const Field& v0, double q, const Json& checks,
                     const RunStamp& stamp) {
  auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  write_csv(dir / "density.csv", {"r", "rho"}, {to_vec(profile.rho.grid().nodes()), to_vec(profile.rho.values())});
  write_csv(dir / "v0.csv", {"r", "v0"}, {to_vec(v0.grid().nodes()), to_vec(v0.values())});
  Json j = stamp_json(stamp);
  j.update(to_json(profile));
  j["q"] = q;
  j["v0_support_radius"] = support_radius(v0);
  if (!checks.is_null()) j["checks"] = checks;
  write_json(dir / "tf.json", j);
}

void write_sweep_bundle(const fs::path& dir, const SweepReport& report, const RunStamp& stamp) {
  Json j = stamp_json(stamp);
  j.update(to_json(report));
  write_json(dir / "sweep.json", j);

  std::vector<std::string> header{"eps", "level", "mass_term"};
  std::vector<std::vector<double>> cols{report.eps, report.levels, report.mass_term};
  if (report.lambda.size() == report.eps.size() && !report.lambda.empty()) {
    header.push_back("lambda");
    cols.push_back(report.lambda);
  }
  for (Norm n : report.norms) {
    const auto& e = report.errors.at(n);
    write_csv(dir / ("sweep_" + to_string(n) + ".csv"), {"eps", "error"}, {report.eps, e});
    header.push_back("error_" + to_string(n));
    cols.push_back(e);
  }
  write_csv(dir / "sweep.csv", header, cols);
}

Field read_field_csv(const fs::path& path, const GridPtr<double>& grid, const std::string& value, bool nonnegative) {
  const CsvTable t = read_csv(path);
  const std::vector<double> r = t.column("r"), u = t.column(value);
  if (static_cast<Eigen::Index>(r.size()) != grid->size())
    throw IoError(path.string() + " has " + std::to_string(r.size()) + " rows, grid has " +
                  std::to_string(grid->size()) + " nodes");
  const auto& nodes = grid->nodes();
  for (std::size_t i = 0; i < r.size(); ++i)
    if (std::abs(r[i] - nodes(static_cast<Eigen::Index>(i))) > 1e-12 * grid->r_max())
      throw IoError(path.string() + ": r column does not reproduce the stored grid");
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  return Field(grid, std::move(v), nonnegative);
}

}  // namespace choquard
