#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasetherm/montecarlo.hpp"

namespace phasetherm {

enum class Model { mc, exact, cw, mft, hte };

const char* to_string(Model m);
Model model_from_string(const std::string& s);

/// Thrown when a scan stops early on `stop_after_sweeps`; checkpoints are on disk.
class Interrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a scan command needs. Field names match the config-file keys.
struct RunConfig {
  std::string command = "qfi-scan";  ///< qfi-scan | local-fi-scan | scaling | fid
  Model model = Model::mc;
  double J = 0.25;
  double h = 0.0;
  double g_over_J = 0.4;  ///< hbar g / J
  double omega_p = 0.0;
  int L = 20;
  int N = 400;  ///< Curie-Weiss system size
  /// beta / beta_c (Onsager for lattice models, 1/J for Curie-Weiss).
  std::vector<double> beta_grid{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  /// Times as g t; empty picks a grid per scan point.
  std::vector<double> t_grid;
  std::size_t t_points = 400;
  std::vector<double> radii{0.0, 1.0, 1.4142135623730951, 2.0};
  SamplerConfig sampler{Algorithm::automatic, 1000000, 10000, 1, 1, false, 64, true, 1, 1, 13};
  std::string out;           ///< empty writes to stdout
  std::string format = "csv";
  std::string resume;        ///< checkpoint directory for mc scans
  std::uint64_t checkpoint_every = 100000;
  std::uint64_t stop_after_sweeps = 0;  ///< testing aid: interrupt after this many sweeps
  bool strict = false;
  unsigned threads = 1;

  double g() const { return g_over_J * J; }
  double beta_c() const;
  void validate() const;
};

/// Reads a JSON config file on top of the defaults; unknown keys are errors.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, RunConfig base = {});
std::string dump_run_config(const RunConfig& cfg);

/// "a:b:n" (n evenly spaced points) or a comma list.
std::vector<double> parse_grid(const std::string& spec);
/// Comma list of radii, each a number or sqrt(k).
std::vector<double> parse_radii(const std::string& spec);

struct LinearFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
};
/// Ordinary least squares of log y on log x; needs >= 4 points.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

struct Dataset {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::string extra_json = "{}";  ///< fits, decay times
  std::vector<std::string> warnings;
  bool undersampled = false;
};

Dataset cmd_qfi_scan(const RunConfig& cfg);
Dataset cmd_local_fi_scan(const RunConfig& cfg);
Dataset cmd_scaling(const RunConfig& cfg);
Dataset cmd_fid(const RunConfig& cfg);
Dataset run_command(const RunConfig& cfg);

std::string format_csv(const Dataset& d);
std::string format_json(const Dataset& d);
/// Sidecar metadata: config, its hash, version, seeds, runtime, warnings.
std::string format_metadata(const RunConfig& cfg, const Dataset& d, double runtime_seconds);

std::string version_string();

}  // namespace phasetherm
