#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "../tools/config.hpp"
#include "choquard/io.hpp"

using namespace choquard;
using namespace choquard::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path d = [] {
    fs::path p = fs::temp_directory_path() / ("choquard_cli_io_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHOQUARD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string gpp = "--N 3 --alpha 2 --p 2 --q 4";

}  // namespace

TEST_CASE("config text parsing") {
  const auto kv = parse_config_text(
      "# comment\n[params]\nN = 3\nalpha = 1/2\n  p=2  \n; other comment\n\n[grid]\ngrid-n = 512\n[output]\nout = x\n");
  CHECK(kv.at("params.N") == "3");
  CHECK(kv.at("params.alpha") == "1/2");
  CHECK(kv.at("params.p") == "2");
  CHECK(kv.at("grid.grid-n") == "512");
  CHECK(kv.size() == 5);

  CHECK_THROWS_AS(parse_config_text("[params]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[grid]\nN = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("N = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[params]\nN =\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[params\nN = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[params]\nN 3\n"), ConfigError);
  CHECK_THROWS_AS(load_config_file(scratch_dir() / "missing.ini"), ConfigError);
}

TEST_CASE("settings resolve with flags over file values") {
  const RunConfig c = resolve("solve", {{"params.eps", "2"}, {"params.q", "7/2"}, {"grid.stretch", "geometric"}},
                              {{"eps", "0.5"}, {"alpha", "1/2"}, {"schedule", "1, 0.5,0.25"}, {"norms", "D1,L2"}});
  CHECK(c.params.eps == 0.5);
  REQUIRE(c.params.alpha_exact.has_value());
  CHECK(compare(*c.params.alpha_exact, Rational(1, 2)) == 0);
  CHECK(c.params.alpha == 0.5);
  CHECK(c.params.q == 3.5);
  CHECK(c.stretch == Stretch::geometric);
  CHECK(c.schedule == std::vector<double>{1.0, 0.5, 0.25});
  CHECK(c.norms == std::vector<Norm>{Norm::d1, Norm::l2});

  RunConfig d;
  CHECK_THROWS_AS(apply_setting(d, "eps", "1e"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "N", "3.5"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "stretch", "log"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "p", "1/0"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "norms", "L7"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "p-range", "1:2"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "explicit-check", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_setting(d, "nope", "1"), ConfigError);
}

TEST_CASE("every key maps to exactly one section") {
  std::set<std::string> names;
  for (const auto& k : config_keys()) {
    CHECK(names.insert(k.name).second);
    CHECK_FALSE(k.section.empty());
    CHECK_FALSE(k.help.empty());
  }
}

TEST_CASE("config hash ignores out and jobs only") {
  RunConfig a = resolve("solve", {}, {{"eps", "1"}, {"p", "2"}});
  RunConfig b = a;
  b.out = "elsewhere";
  b.jobs = 4;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  RunConfig c = a;
  c.params.eps = 1.0000000000000002;
  CHECK(config_hash(a) != config_hash(c));
  RunConfig d = a;
  d.command = "tf";
  CHECK(config_hash(a) != config_hash(d));
  CHECK(canonical(a).find("out=") == std::string::npos);
  CHECK(canonical(a).find("jobs=") == std::string::npos);
  CHECK(canonical(a).find("p=2\n") != std::string::npos);
}

TEST_CASE("rational ranges") {
  CHECK(expand({Rational(2), Rational(3), Rational(1, 2)}).size() == 3);
  CHECK(expand({Rational(3), Rational(2), Rational(1, 2)}).empty());
  CHECK(expand({Rational(2), Rational(3), Rational(0)}).empty());
  const auto xs = expand({Rational(1), Rational(2), Rational(1, 3)});
  REQUIRE(xs.size() == 4);
  CHECK(compare(xs.back(), Rational(2)) == 0);
}

TEST_CASE("number formatting and hashing") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 4.897846286679}) CHECK(std::stod(format_double(x)) == x);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hash_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("CSV and JSON round trips") {
  const fs::path dir = scratch_dir() / "rt";
  fs::create_directories(dir);
  const std::vector<double> a{0.1, 1.0 / 3.0, -7e-12}, b{1, 2, 3};
  write_csv(dir / "t.csv", {"a", "b"}, {a, b});
  const CsvTable t = read_csv(dir / "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.column("a") == a);
  CHECK(t.column("b") == b);
  CHECK_THROWS_AS(t.column("c"), IoError);
  CHECK_THROWS_AS(read_csv(dir / "none.csv"), IoError);
  CHECK_THROWS_AS(write_csv(dir / "bad.csv", {"a", "b"}, {a, {1.0}}), std::invalid_argument);

  ProblemParams P;
  P.N = 5;
  P.alpha_exact = Rational(2);
  P.alpha = 2;
  P.p_exact = Rational(7, 3);
  P.p = 7.0 / 3.0;
  P.q = 4;
  P.eps = 1e-3;
  P.local_weight = 0.5;
  write_json(dir / "sub" / "p.json", to_json(P));
  const ProblemParams Q = params_from_json(read_json(dir / "sub" / "p.json"));
  CHECK(Q.N == 5);
  CHECK(Q.p == P.p);
  CHECK(Q.eps == P.eps);
  CHECK(Q.local_weight == 0.5);
  REQUIRE(Q.p_exact.has_value());
  CHECK(compare(*Q.p_exact, Rational(7, 3)) == 0);
  CHECK_FALSE(Q.q_exact.has_value());

  const GridSpec g{3, 40.0, 300, Stretch::geometric, 1.01};
  const GridSpec h = grid_spec_from_json(to_json(g));
  CHECK(make_grid<double>(h)->same_nodes(*make_grid<double>(g)));

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(read_json(dir / "broken.json"), IoError);

  const auto grid = make_grid<double>(g);
  const std::vector<double> r(grid->nodes().data(), grid->nodes().data() + grid->size());
  write_csv(dir / "f.csv", {"r", "u"}, {r, std::vector<double>(r.size(), 2.0)});
  CHECK(read_field_csv(dir / "f.csv", grid, "u")[7] == 2.0);
  CHECK_THROWS_AS(read_field_csv(dir / "f.csv", make_grid<double>({3, 41.0, 300, Stretch::geometric, 1.01}), "u"),
                  IoError);
}

TEST_CASE("solve command: outputs, stamps, determinism, verify") {
  const fs::path a = scratch_dir() / "solve_a", b = scratch_dir() / "solve_b";
  CHECK(run_cli("solve " + gpp + " --eps 1 --grid-n 512 --out " + a.string()) == 0);
  CHECK(run_cli("solve " + gpp + " --eps 1 --grid-n 512 --out " + b.string()) == 0);
  const Json s = read_json(a / "summary.json");
  CHECK(s.at("converged").get<bool>());
  CHECK(s.at("residuals").at("nehari").get<double>() < 1e-6);
  CHECK(s.at("residuals").at("pohozaev").get<double>() < 1e-6);
  CHECK(s.at("tool_version").get<std::string>() == tool_version());
  CHECK(s.at("config_hash").get<std::string>().size() == 16);
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  CHECK(slurp(a / "field.csv") == slurp(b / "field.csv"));
  CHECK(read_csv(a / "residual_history.csv").header.size() == 5);
  CHECK(read_csv(a / "field.csv").rows.size() == 512);
  CHECK(run_cli("verify --input " + a.string() + " --out " + (scratch_dir() / "verify_a").string()) == 0);
  CHECK(read_json(scratch_dir() / "verify_a" / "verify.json").at("pass").get<bool>());

  // A config file supplies the parameters; the flag overrides its eps.
  const fs::path ini = scratch_dir() / "gpp.ini";
  std::ofstream(ini) << "[params]\nN = 3\nalpha = 2\np = 2\nq = 4\neps = 4\n[grid]\ngrid-n = 512\n";
  CHECK(run_cli("solve --config " + ini.string() + " --eps 1 --out " + (scratch_dir() / "solve_c").string()) == 0);
  CHECK(read_json(scratch_dir() / "solve_c" / "summary.json").at("params").at("eps").get<double>() == 1.0);
  CHECK(read_json(scratch_dir() / "solve_c" / "summary.json").at("c_level") == s.at("c_level"));
}

TEST_CASE("exit-code contract") {
  const std::string out = " --out " + (scratch_dir() / "codes").string();
  CHECK(run_cli("solve --N 3 --alpha 2 --p 1.2 --q 3 --eps 1" + out) == 3);
  CHECK(run_cli("solve --N 3 --alpha 2 --p 5 --q 6 --eps 1" + out) == 3);
  CHECK(run_cli("solve " + gpp + " --eps 1 --grid-n 512 --max-iters 1" + out) == 2);
  CHECK(run_cli("solve --N 3 --bogus 1" + out) == 4);
  CHECK(run_cli("solve --config " + (scratch_dir() / "absent.ini").string() + out) == 4);
  const fs::path bad = scratch_dir() / "bad.ini";
  std::ofstream(bad) << "[params]\nN = three\n";
  CHECK(run_cli("solve --config " + bad.string() + out) == 4);
  CHECK(run_cli("tf --N 3 --alpha 2 --m 1.1" + out) == 3);
  CHECK(run_cli("sweep " + gpp + " --schedule 1,0.5" + out) == 3);
  CHECK(run_cli("classify --N 3 --alpha 2 --p-range 3:2:1 --q-range 3:4:1" + out) == 3);
  CHECK(run_cli("verify --input " + (scratch_dir() / "nothing").string() + out) == 4);
  CHECK(run_cli("solve " + gpp + " --eps 1 --grid-n 256 --out /proc/choquard_unwritable") == 4);
}

TEST_CASE("tf command and the explicit GPP suite") {
  const fs::path d = scratch_dir() / "tfx";
  CHECK(run_cli("tf --N 3 --alpha 2 --m 2 --explicit-check --out " + d.string()) == 0);
  const Json j = read_json(d / "tf.json");
  CHECK(j.at("s_tf").get<double>() == doctest::Approx(4.89785).epsilon(1e-4));
  for (const auto& c : j.at("checks")) CHECK(c.at("pass").get<bool>());
  CHECK(read_csv(d / "density.csv").column("rho").size() == 1024);
  CHECK(run_cli("verify --input " + d.string() + " --out " + (scratch_dir() / "verify_tf").string()) == 0);
  CHECK(run_cli("tf --N 4 --alpha 2 --m 2 --explicit-check --out " + d.string()) == 3);
}

TEST_CASE("classify lattice") {
  const fs::path d = scratch_dir() / "cls";
  CHECK(run_cli("classify --N 3 --alpha 2 --p-range 2:5:1 --q-range 3:7:1 --out " + d.string()) == 0);
  const CsvTable t = read_csv(d / "classify.csv");
  CHECK(t.header == std::vector<std::string>{"p", "q", "regime_to_zero", "regime_to_infinity"});
  CHECK(t.rows.size() == 20);
  auto row = [&](const std::string& p, const std::string& q) {
    for (const auto& r : t.rows)
      if (r[0] == p && r[1] == q) return r;
    FAIL("missing lattice point " << p << "," << q);
    return std::vector<std::string>{};
  };
  CHECK(row("2", "3")[2] == "self-similar");
  CHECK(row("2", "3")[3] == "self-similar");
  CHECK(row("5", "7")[2] == "critical-choquard");
  CHECK(row("5", "6")[2] == "nonexistence-boundary");
  CHECK(read_json(d / "classify.json").at("points").get<int>() == 20);
}

TEST_CASE("sweep command writes the report bundle") {
  const fs::path d = scratch_dir() / "sw";
  CHECK(run_cli("sweep --N 5 --alpha 2 --p 2 --q 20/7 --schedule 0.1,0.03,0.01,0.003 --norms Lq --out " +
                d.string()) == 0);
  const Json j = read_json(d / "sweep.json");
  CHECK(j.at("regime").get<std::string>() == "critical-thomas-fermi");
  CHECK(j.at("fitted_exponent").is_number());
  CHECK(j.at("predicted_exponent").is_number());
  CHECK(j.at("lambda").size() == 4);
  CHECK(read_csv(d / "sweep_Lq.csv").column("error").size() == 4);
  CHECK(run_cli("verify --input " + d.string() + " --out " + (scratch_dir() / "verify_sw").string()) == 0);
}
