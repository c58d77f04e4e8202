#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "choquard/asymptotics.hpp"
#include "choquard/grid.hpp"
#include "choquard/groundstate.hpp"
#include "choquard/params.hpp"

namespace choquard::cli {

// Unreadable or malformed config file or flag value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every key is both a `[section] key = value` line and a `--key value` flag.
struct KeyInfo {
  std::string name;
  std::string section;
  std::string help;
  bool is_flag = false;  // boolean switch without a value
};

const std::vector<KeyInfo>& config_keys();

// lo:hi:step, all rationals; hi included when reached exactly.
struct RangeSpec {
  Rational lo, hi, step;
};

struct RunConfig {
  std::string command;
  ProblemParams params;

  int grid_n = 0;                // 0: command default
  std::optional<double> rmax;    // absent: command default
  Stretch stretch = Stretch::uniform;
  std::optional<double> ratio;   // geometric grids only

  SolverOptions solver;
  std::string seed_file;
  int jobs = 1;

  double m = 2.0;
  bool explicit_check = false;

  std::vector<double> schedule;
  Direction direction = Direction::to_zero;
  std::vector<Norm> norms{Norm::lq, Norm::l2};

  std::optional<RangeSpec> p_range, q_range;

  std::string input;
  std::string out = "out";
};

// "section.key" → value. Lines: `[section]`, `key = value`, blank, `#` or `;` comments.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::string& path);

// Applies one setting by bare key name; throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// File settings first, then flag overrides, both keyed by bare name.
RunConfig resolve(const std::string& command, const std::map<std::string, std::string>& file_settings,
                  const std::map<std::string, std::string>& flag_settings);

// Sorted key=value lines of every resolved setting except out and jobs, which do not
// change results.
std::string canonical(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Lattice points of a range; empty when lo > hi.
std::vector<Rational> expand(const RangeSpec& r);

}  // namespace choquard::cli
