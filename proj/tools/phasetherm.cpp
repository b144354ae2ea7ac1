// phasetherm command-line front end.
//
//   phasetherm qfi-scan      --model mc --L 20 --beta-grid 0.7:1.3:13 --radii 0,1,sqrt(2),2
//   phasetherm local-fi-scan --model mc --radii 1 --symmetrize
//   phasetherm scaling       --beta-grid 0.9,1,1.1 --radii 0,1,sqrt(2),2,sqrt(5),sqrt(8)
//   phasetherm fid           --model cw --beta-grid 0:2:41
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical-domain error,
// 4 under-sampled marginal with --strict, 75 stopped by --stop-after.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "phasetherm/scan.hpp"

namespace {

using phasetherm::RunConfig;

struct Flags {
  std::string config, model, beta_grid, t_grid, radii, out, format, resume, algorithm;
  int L = 0, N = 0;
  std::uint64_t sweeps = 0, burn_in = 0, seed = 0, stop_after = 0;
  bool seed_set = false;
  bool symmetrize = false, strict = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (unknown keys are rejected)");
  cmd->add_option("--model", f.model, "mc | exact | cw | mft | hte");
  cmd->add_option("--L", f.L, "lattice side length");
  cmd->add_option("--N", f.N, "Curie-Weiss system size");
  cmd->add_option("--beta-grid", f.beta_grid, "beta/beta_c values: a:b:n or a comma list");
  cmd->add_option("--t-grid", f.t_grid, "g t values: a:b:n or a comma list");
  cmd->add_option("--radii", f.radii, "cluster radii, e.g. 0,1,sqrt(2),2");
  cmd->add_option("--sweeps", f.sweeps, "Monte-Carlo measurement sweeps per chain");
  cmd->add_option("--burn-in", f.burn_in, "Monte-Carlo burn-in sweeps");
  cmd->add_option("--algorithm", f.algorithm, "metropolis | wolff | auto");
  cmd->add_option("--seed", f.seed, "base seed")->each([&f](const std::string&) { f.seed_set = true; });
  cmd->add_flag("--symmetrize", f.symmetrize, "count every sample with its global spin flip");
  cmd->add_option("--out", f.out, "output path (stdout when omitted)");
  cmd->add_option("--format", f.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--resume", f.resume, "checkpoint directory for Monte-Carlo scans");
  cmd->add_option("--stop-after", f.stop_after, "interrupt after this many sweeps (testing)");
  cmd->add_flag("--strict", f.strict, "exit 4 when a marginal is under-sampled");
}

RunConfig build_config(const std::string& command, const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : phasetherm::load_run_config(f.config);
  cfg.command = command;
  if (!f.model.empty()) cfg.model = phasetherm::model_from_string(f.model);
  if (f.L) cfg.L = f.L;
  if (f.N) cfg.N = f.N;
  if (!f.beta_grid.empty()) cfg.beta_grid = phasetherm::parse_grid(f.beta_grid);
  if (!f.t_grid.empty()) cfg.t_grid = phasetherm::parse_grid(f.t_grid);
  if (!f.radii.empty()) cfg.radii = phasetherm::parse_radii(f.radii);
  if (f.sweeps) cfg.sampler.sweeps = f.sweeps;
  if (f.burn_in) cfg.sampler.burn_in = f.burn_in;
  if (!f.algorithm.empty()) cfg.sampler.algorithm = phasetherm::algorithm_from_string(f.algorithm);
  if (f.seed_set) cfg.sampler.seed = f.seed;
  if (f.symmetrize) cfg.sampler.symmetrize = true;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.format.empty()) cfg.format = f.format;
  if (!f.resume.empty()) cfg.resume = f.resume;
  if (f.stop_after) cfg.stop_after_sweeps = f.stop_after;
  if (f.strict) cfg.strict = true;
  if (const char* t = std::getenv("THREADS")) {
    try {
      const long v = std::stol(t);
      if (v < 1) throw std::invalid_argument("THREADS");
      cfg.threads = static_cast<unsigned>(v);
    } catch (const std::exception&) {
      throw phasetherm::ConfigError(std::string("THREADS must be a positive integer, got '") + t + "'");
    }
  }
  cfg.validate();
  return cfg;
}

int fail(int code, const char* kind, const std::string& message) {
  nlohmann::json err{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
  return code;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw phasetherm::ConfigError("cannot write " + path);
  out << text;
  if (!out) throw phasetherm::ConfigError("failed writing " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase thermometry of the 2D Ising lattice: probe QFI scans"};
  app.require_subcommand(1);
  app.set_version_flag("--version", phasetherm::version_string());
  Flags flags;
  for (const char* name : {"qfi-scan", "local-fi-scan", "scaling", "fid"}) {
    auto* cmd = app.add_subcommand(name);
    add_flags(cmd, flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "config", e.what());
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const RunConfig cfg = build_config(command, flags);
    const auto start = std::chrono::steady_clock::now();
    const phasetherm::Dataset data = phasetherm::run_command(cfg);
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string body =
        cfg.format == "json" ? phasetherm::format_json(data) : phasetherm::format_csv(data);
    if (cfg.out.empty()) {
      std::cout << body;
    } else {
      write_file(cfg.out, body);
      write_file(cfg.out + ".meta.json", phasetherm::format_metadata(cfg, data, runtime));
    }
    for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
    if (data.undersampled && cfg.strict)
      return fail(4, "undersampled", "under-sampled cluster marginal (see warnings)");
    return 0;
  } catch (const phasetherm::ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const phasetherm::DomainError& e) {
    return fail(3, "domain", e.what());
  } catch (const phasetherm::Interrupted& e) {
    return fail(75, "interrupted", e.what());
  } catch (const std::exception& e) {
    return fail(3, "domain", e.what());
  }
}
