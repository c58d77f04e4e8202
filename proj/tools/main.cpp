#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <string>

#include "choquard/asymptotics.hpp"
#include "choquard/errors.hpp"
#include "choquard/functionals.hpp"
#include "choquard/groundstate.hpp"
#include "choquard/interp.hpp"
#include "choquard/io.hpp"
#include "choquard/riesz.hpp"
#include "choquard/thomas_fermi.hpp"
#include "config.hpp"

using namespace choquard;
using choquard::cli::RunConfig;
namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_nonconvergence = 2;
constexpr int exit_rejected = 3;
constexpr int exit_io = 4;

RunStamp stamp_for(const RunConfig& c) { return {c.command, cli::config_hash(c)}; }

GridSpec solve_grid(const RunConfig& c) {
  GridSpec s = default_grid_spec(c.params.N, c.params.eps, c.grid_n > 0 ? c.grid_n : 2048);
  if (c.rmax) s.R_max = *c.rmax;
  s.stretch = c.stretch;
  s.ratio = c.stretch == Stretch::geometric ? c.ratio.value_or(1.003) : 1.0;
  return s;
}

Field read_seed_file(const RunConfig& c) {
  const CsvTable t = read_csv(c.seed_file);
  const std::vector<double> r = t.column("r"), u = t.column("u");
  Eigen::VectorXd nodes = Eigen::Map<const Eigen::VectorXd>(r.data(), Eigen::Index(r.size()));
  Eigen::VectorXd vals = Eigen::Map<const Eigen::VectorXd>(u.data(), Eigen::Index(u.size()));
  GridSpec spec;
  spec.N = c.params.N;
  auto g = std::make_shared<const Grid>(c.params.N, std::move(nodes), spec);
  return Field(g, vals.cwiseMax(0.0), true);
}

// The regime's limit profile mapped back to ε, on the solve grid.
Field paper_seed(const ProblemParams& P, const GridPtr<double>& g, const SolverOptions& so) {
  const Direction dir = P.eps <= 1.0 ? Direction::to_zero : Direction::to_infinity;
  const RegimeKind kind = classify(P, dir).kind;
  SolverOptions inner = so;
  inner.seed_profile = SeedProfile::gaussian;
  inner.seed.reset();
  switch (kind) {
    case RegimeKind::choquard:
    case RegimeKind::self_similar: {
      const RieszOperator op = build_default_operator(make_grid<double>(default_grid_spec(P.N, 1.0)), P.alpha);
      const GroundstateResult v = solve_choquard(P, op, inner);
      return resample(unscale_first(v.field, P.eps, P), g);
    }
    case RegimeKind::thomas_fermi: {
      const RieszOperator op = build_default_operator(make_grid<double>({P.N, 8.0, 1024, Stretch::uniform, 1.0}), P.alpha);
      const TFProfile tf = solve_tf(P.q / 2.0, op);
      return resample(unscale_second(tf_groundstate(tf, P.q), P.eps, P), g);
    }
    case RegimeKind::formal_limit_p0: {
      ProblemParams p0 = P;
      p0.eps = 0.0;
      const RieszOperator op = build_default_operator(make_grid<double>({P.N, 400.0, 2048, Stretch::geometric, 1.003}), P.alpha);
      return resample(solve(p0, op, inner).field, g);
    }
    default:
      throw std::invalid_argument("paper-profile seeds in critical regimes come from sweep continuation; use gaussian");
  }
}

int cmd_solve(const RunConfig& c) {
  c.params.validate();
  const GridSpec spec = solve_grid(c);
  const auto g = make_grid<double>(spec);
  const RieszOperator op = build_default_operator(g, c.params.alpha);
  SolverOptions so = c.solver;
  if (so.seed_profile == SeedProfile::file) {
    if (c.seed_file.empty()) throw std::invalid_argument("--seed-profile file needs --seed-file");
    so.seed = read_seed_file(c);
  } else if (so.seed_profile == SeedProfile::paper_profile) {
    require_solvable(c.params);
    so.seed = paper_seed(c.params, g, so);
  }
  const fs::path out = c.out;
  try {
    const GroundstateResult r = solve(c.params, op, so);
    write_solve_bundle(out, r, so, stamp_for(c));
    std::printf("converged: c = %.12g, u(0) = %.12g, nehari = %.3e, pohozaev = %.3e, strong = %.3e\n", r.c_level,
                r.field[0], r.residuals.nehari, r.residuals.pohozaev, r.residuals.strong);
    return exit_ok;
  } catch (const NonConvergence& e) {
    write_solve_failure(out, c.params, spec, e.what(), e.history(), stamp_for(c));
    std::fprintf(stderr, "not converged: %s\n", e.what());
    return exit_nonconvergence;
  }
}

struct Check {
  std::string name;
  double value;
  double tolerance;
};

Json checks_json(const std::vector<Check>& cs, bool& all) {
  Json arr = Json::array();
  all = true;
  for (const auto& ch : cs) {
    const bool pass = ch.value <= ch.tolerance;
    all = all && pass;
    arr.push_back(Json{{"name", ch.name}, {"value", ch.value}, {"tolerance", ch.tolerance}, {"pass", pass}});
    std::printf("%-40s %.3e (tol %.1e) %s\n", ch.name.c_str(), ch.value, ch.tolerance, pass ? "PASS" : "FAIL");
  }
  return arr;
}

std::vector<Check> gpp_checks(const TFProfile& tf) {
  using std::numbers::pi;
  auto g = tf.rho.grid_ptr();
  const RieszOperator op = build_operator(g, 2.0, RieszMode::exact_newton);
  const ExplicitGPP e = explicit_gpp(g);
  const double h = g->nodes()(1) - g->nodes()(0);
  std::vector<Check> cs;
  cs.push_back({"v0 TF residual on r < pi", tf_equation_residual(e.v0, 4.0, op, pi), 1e-6});
  cs.push_back({"v0 support radius - pi", std::abs(support_radius(e.v0) - pi), h});
  cs.push_back({"rho_* |D_2 - 1|", std::abs(dalpha(op, e.rho) - 1.0), 1e-5});
  TFProfile closed = tf;
  closed.rho = e.rho;
  closed.s_tf = lp_power(e.rho, 2.0) + integrate(e.rho);
  cs.push_back({"rho_* functional vs 5k^2/3 (rel)", std::abs(closed.s_tf - e.s_tf) / e.s_tf, 1e-5});
  cs.push_back({"rho_* virial identity (rel)", virial_residual(closed), 1e-3});
  cs.push_back({"rho_* Euler-Lagrange sup residual", el_residual(closed, op), 1e-5});
  cs.push_back({"solved s_TF vs closed form (rel)", std::abs(tf.s_tf - e.s_tf) / e.s_tf, 1e-4});
  cs.push_back({"solved support vs pi/k", std::abs(tf.support_radius - e.R_rho), 2 * h});
  const Field v = tf_groundstate(tf, 4.0, g);
  double worst = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(v[i] - e.v0[i]));
  cs.push_back({"solved v0 vs sqrt(sin r / r) (sup)", worst, 1e-2});
  return cs;
}

int cmd_tf(const RunConfig& c) {
  ProblemParams P = c.params;
  if (P.N < 3) throw std::invalid_argument("dimension N must be at least 3");
  if (!(P.alpha > 0 && P.alpha < P.N)) throw std::invalid_argument("alpha must lie in (0, N)");
  if (c.explicit_check && !(P.N == 3 && P.alpha == 2.0 && c.m == 2.0))
    throw std::invalid_argument("--explicit-check needs N = 3, alpha = 2, m = 2");
  if (!(c.m > 2.0 * P.N / (P.N + P.alpha)))
    throw UnsupportedParameters("Thomas-Fermi minimization needs m > 2N/(N+alpha) = " +
                                format_double(2.0 * P.N / (P.N + P.alpha)));
  const int n = c.grid_n > 0 ? c.grid_n : 1024;
  double R = c.rmax.value_or(4.0);
  TFOptions opts;
  opts.max_iters = c.solver.max_iters > 400 ? c.solver.max_iters : opts.max_iters;
  TFProfile tf;
  for (int attempt = 0;; ++attempt) {
    GridSpec s{P.N, R, n, c.stretch, c.stretch == Stretch::geometric ? c.ratio.value_or(1.003) : 1.0};
    const RieszOperator op = build_default_operator(make_grid<double>(s), P.alpha);
    try {
      tf = solve_tf(c.m, op, opts);
      break;
    } catch (const DomainTruncation&) {
      if (c.rmax || attempt >= 8) throw;
      R *= 2.0;
    }
  }
  const double q = 2.0 * c.m;
  const Field v0 = tf_groundstate(tf, q);
  Json checks;
  bool all = true;
  if (c.explicit_check) checks = checks_json(gpp_checks(tf), all);
  write_tf_bundle(c.out, tf, v0, q, checks, stamp_for(c));
  std::printf("s_TF = %.12g, support = %.6g, virial = %.3e, iterations = %d\n", tf.s_tf, tf.support_radius,
              virial_residual(tf), tf.iterations);
  return all ? exit_ok : exit_nonconvergence;
}

int cmd_sweep(const RunConfig& c) {
  c.params.validate();
  SweepOptions so;
  so.solver = c.solver;
  so.jobs = c.jobs;
  if (c.grid_n > 0) so.grid_n = c.grid_n;
  const SweepReport rep = sweep(c.params, c.direction, c.schedule, c.norms, so);
  write_sweep_bundle(c.out, rep, stamp_for(c));
  std::printf("regime %s, %zu of %zu points\n", to_string(rep.regime.kind).c_str(), rep.eps.size(),
              c.schedule.size());
  for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& f : rep.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
  if (rep.fitted_exponent)
    std::printf("fitted exponent %.6g (last three %.6g), predicted %s\n", *rep.fitted_exponent,
                rep.fitted_exponent_last3.value_or(NAN),
                rep.predicted_exponent ? format_double(*rep.predicted_exponent).c_str() : "band");
  return rep.complete ? exit_ok : exit_nonconvergence;
}

int cmd_classify(const RunConfig& c) {
  if (!c.p_range || !c.q_range) throw std::invalid_argument("classify needs --p-range and --q-range");
  const auto ps = cli::expand(*c.p_range), qs = cli::expand(*c.q_range);
  if (ps.empty() || qs.empty()) throw std::invalid_argument("classify range is empty");
  CsvTable t;
  t.header = {"p", "q", "regime_to_zero", "regime_to_infinity"};
  for (const Rational& p : ps) {
    for (const Rational& q : qs) {
      ProblemParams P = c.params;
      P.p = p.value();
      P.q = q.value();
      P.p_exact = p;
      P.q_exact = q;
      P.eps = 1.0;
      P.validate();
      t.rows.push_back({format_double(P.p), format_double(P.q), to_string(classify(P, Direction::to_zero).kind),
                        to_string(classify(P, Direction::to_infinity).kind)});
    }
  }
  const fs::path out = c.out;
  write_csv(out / "classify.csv", t);
  Json j{{"command", c.command}, {"tool_version", tool_version()}, {"config_hash", cli::config_hash(c)}};
  j["N"] = c.params.N;
  j["alpha"] = c.params.alpha;
  j["points"] = t.rows.size();
  write_json(out / "classify.json", j);
  std::printf("%zu lattice points written to %s\n", t.rows.size(), (out / "classify.csv").string().c_str());
  return exit_ok;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

int cmd_profiles(const RunConfig& c) {
  const int N = c.params.N;
  ProblemParams P = c.params;
  P.eps = 1.0;
  P.validate();
  const fs::path out = c.out;
  Json j{{"command", c.command}, {"tool_version", tool_version()}, {"config_hash", cli::config_hash(c)}};
  j["N"] = N;
  j["alpha"] = P.alpha;
  j["riesz_constant"] = riesz_constant(N, P.alpha);

  const auto gg = make_grid<double>({N, c.rmax.value_or(2000.0), c.grid_n > 0 ? c.grid_n : 2048, Stretch::geometric,
                                     c.ratio.value_or(1.004)});
  // Emden-Fowler bubble −ΔU = U^{2*−1}.
  const double aef = std::pow(N * (N - 2.0), (N - 2.0) / 4.0);
  const Field U = Field::from_function(gg, [&](double r) { return aef * std::pow(1 + r * r, -(N - 2.0) / 2.0); });
  write_csv(out / "emden_fowler.csv", {"r", "U"}, {to_vec(gg->nodes()), to_vec(U.values())});

  const RieszOperator op = build_default_operator(gg, P.alpha);
  ProblemParams Pc = P;
  Pc.p_exact = P.alpha_exact ? std::optional<Rational>((Rational(N) + *P.alpha_exact) / Rational(N - 2)) : std::nullopt;
  Pc.p = P.upper_choquard();
  const LimitProfile V = limit_profile(LimitKind::v_critical, Pc, op);
  write_csv(out / "V.csv", {"r", "V"}, {to_vec(gg->nodes()), to_vec(V.field.values())});
  Json vj(V.constants);
  vj["residual"] = critical_choquard_residual(V.field, Pc, op, 50.0);
  j["V_critical"] = vj;

  if (choquard_admissible(P)) {
    ProblemParams Pt = P;
    Pt.q = P.hls_critical_q();
    if (P.alpha_exact && P.p_exact)
      Pt.q_exact = Rational(2) * Rational(N) * *P.p_exact / (Rational(N) + *P.alpha_exact);
    const LimitProfile Vt = limit_profile(LimitKind::vtilde_critical, Pt, op);
    write_csv(out / "Vtilde.csv", {"r", "Vtilde"}, {to_vec(gg->nodes()), to_vec(Vt.field.values())});
    Json tj(Vt.constants);
    tj["p"] = Pt.p;
    tj["q"] = Pt.q;
    // Ṽ = Ũ(μ·) solves the equation only up to the factor μ^{−α}; check the undilated Ũ.
    const Field Ut = dilate(Vt.field, Vt.constants.at("match_scale"));
    tj["residual_undilated"] = critical_tf_residual(Ut, Pt, op, 50.0);
    j["Vtilde_critical"] = tj;
  } else {
    j["Vtilde_critical"] = nullptr;
  }

  if (N == 3 && P.alpha == 2.0) {
    const auto g = make_grid<double>({3, 4.0, 1024, Stretch::uniform, 1.0});
    const ExplicitGPP e = explicit_gpp(g);
    write_csv(out / "gpp.csv", {"r", "rho", "v0"}, {to_vec(g->nodes()), to_vec(e.rho.values()), to_vec(e.v0.values())});
    j["gpp_explicit"] = Json{{"k", e.k}, {"s_tf", e.s_tf}, {"lambda", e.lambda}, {"R_rho", e.R_rho}, {"R_v", e.R_v}};
  } else {
    j["gpp_explicit"] = nullptr;
  }
  write_json(out / "profiles.json", j);
  std::printf("closed-form profiles written to %s\n", out.string().c_str());
  return exit_ok;
}

int verify_solve(const RunConfig& c, const Json& s) {
  if (!s.value("converged", false)) {
    std::fprintf(stderr, "saved solve did not converge\n");
    return exit_nonconvergence;
  }
  const ProblemParams P = params_from_json(s.at("params"));
  const auto g = make_grid<double>(grid_spec_from_json(s.at("grid")));
  const Field u = read_field_csv(fs::path(c.input) / "field.csv", g, "u", true);
  const RieszOperator op = build_default_operator(g, P.alpha);
  const Residuals r = compute_residuals(u, P, op);
  const double c_level = energy(u, P, op).total;
  const double tol = s.at("solver").value("tol", 1e-10);
  bool all = true;
  Json checks = checks_json({{"nehari |N|/M", r.nehari, 1e-6},
                             {"pohozaev |P|/M", r.pohozaev, 1e-6},
                             {"strong residual", r.strong, tol},
                             {"level vs stored (rel)", std::abs(c_level - s.at("c_level").get<double>()) /
                                                           std::abs(c_level), 1e-12}},
                            all);
  Json j{{"command", c.command}, {"tool_version", tool_version()}, {"config_hash", cli::config_hash(c)}};
  j["verified"] = s.value("command", "");
  j["checks"] = checks;
  j["pass"] = all;
  write_json(fs::path(c.out) / "verify.json", j);
  return all ? exit_ok : exit_nonconvergence;
}

int verify_tf(const RunConfig& c, const Json& s) {
  const auto g = make_grid<double>(grid_spec_from_json(s.at("grid")));
  TFProfile tf;
  tf.N = s.at("N").get<int>();
  tf.alpha = s.at("alpha").get<double>();
  tf.m = s.at("m").get<double>();
  tf.rho = read_field_csv(fs::path(c.input) / "density.csv", g, "rho", true);
  tf.s_tf = lp_power(tf.rho, tf.m) + integrate(tf.rho);
  const RieszOperator op = build_default_operator(g, tf.alpha);
  bool all = true;
  Json checks = checks_json({{"D_alpha(rho) - 1", std::abs(dalpha(op, tf.rho) - 1.0), 1e-8},
                             {"virial identity (rel)", virial_residual(tf), 1e-3},
                             {"s_TF vs stored (rel)", std::abs(tf.s_tf - s.at("s_tf").get<double>()) / tf.s_tf, 1e-12}},
                            all);
  Json j{{"command", c.command}, {"tool_version", tool_version()}, {"config_hash", cli::config_hash(c)}};
  j["verified"] = s.value("command", "");
  j["checks"] = checks;
  j["pass"] = all;
  write_json(fs::path(c.out) / "verify.json", j);
  return all ? exit_ok : exit_nonconvergence;
}

int verify_sweep(const RunConfig& c, const Json& s) {
  const auto eps = s.at("eps").get<std::vector<double>>();
  const auto lam = s.at("lambda").get<std::vector<double>>();
  std::vector<Check> cs;
  if (!s.at("fitted_exponent").is_null() && lam.size() == eps.size() && eps.size() >= 2 &&
      s.value("fit_abscissa", "log eps") == "log eps") {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double x = std::log(eps[i]), y = std::log(lam[i]);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    cs.push_back({"refit exponent vs stored", std::abs(slope - s.at("fitted_exponent").get<double>()), 1e-9});
  }
  cs.push_back({"incomplete points", s.at("complete").get<bool>() ? 0.0 : 1.0, 0.0});
  bool all = true;
  Json checks = checks_json(cs, all);
  Json j{{"command", c.command}, {"tool_version", tool_version()}, {"config_hash", cli::config_hash(c)}};
  j["verified"] = s.value("command", "");
  j["checks"] = checks;
  j["pass"] = all;
  write_json(fs::path(c.out) / "verify.json", j);
  return all ? exit_ok : exit_nonconvergence;
}

int cmd_verify(const RunConfig& c) {
  if (c.input.empty()) throw std::invalid_argument("verify needs --input");
  const fs::path in = c.input;
  try {
    if (fs::exists(in / "summary.json")) return verify_solve(c, read_json(in / "summary.json"));
    if (fs::exists(in / "tf.json")) return verify_tf(c, read_json(in / "tf.json"));
    if (fs::exists(in / "sweep.json")) return verify_sweep(c, read_json(in / "sweep.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed saved result: ") + e.what());
  }
  throw IoError("no summary.json, tf.json or sweep.json in " + in.string());
}

int dispatch(const RunConfig& c) {
  if (c.command == "solve") return cmd_solve(c);
  if (c.command == "tf") return cmd_tf(c);
  if (c.command == "sweep") return cmd_sweep(c);
  if (c.command == "classify") return cmd_classify(c);
  if (c.command == "profiles") return cmd_profiles(c);
  return cmd_verify(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial groundstates of Choquard equations with local repulsion and their limit problems"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> raw;
  std::map<std::string, std::vector<CLI::Option*>> opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve", "groundstate of the full equation"},
      {"tf", "Thomas-Fermi minimizer and its groundstate"},
      {"sweep", "asymptotic sweep over an eps schedule"},
      {"classify", "regime lattice over p and q"},
      {"profiles", "closed-form limit profiles and constants"},
      {"verify", "re-check identities of a saved result"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "key-value file with [section] headers; flags override it");
    for (const auto& k : cli::config_keys()) {
      CLI::Option* o = k.is_flag ? sub->add_flag("--" + k.name, k.help)
                                 : sub->add_option("--" + k.name, raw[k.name], k.help);
      opts[k.name].push_back(o);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_io;
  }

  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();
  std::map<std::string, std::string> flags;
  for (const auto& [key, list] : opts)
    for (const CLI::Option* o : list)
      if (o->count() > 0) flags[key] = o->get_expected_min() == 0 ? "true" : raw[key];

  try {
    const auto file = config_path.empty() ? std::map<std::string, std::string>{} : cli::load_config_file(config_path);
    const RunConfig cfg = cli::resolve(command, file, flags);
    return dispatch(cfg);
  } catch (const cli::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return exit_io;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return exit_io;
  } catch (const UnsupportedParameters& e) {
    std::fprintf(stderr, "rejected: %s\n", e.what());
    return exit_rejected;
  } catch (const ResourceLimit& e) {
    std::fprintf(stderr, "rejected: %s\n", e.what());
    return exit_rejected;
  } catch (const DomainTruncation& e) {
    std::fprintf(stderr, "rejected: %s\n", e.what());
    return exit_rejected;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "rejected: %s\n", e.what());
    return exit_rejected;
  } catch (const NonConvergence& e) {
    std::fprintf(stderr, "not converged: %s\n", e.what());
    return exit_nonconvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failed: %s\n", e.what());
    return exit_nonconvergence;
  }
}
