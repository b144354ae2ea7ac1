#include "phasetherm/scan.hpp"

#include <fmt/format.h>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "phasetherm/analytic.hpp"
#include "phasetherm/enumerate.hpp"

namespace phasetherm {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Lattice time grids stop a little past g t = pi/2: for real r the QFI is
// mirror-symmetric about that point.
double lattice_time_cap(double g) { return 0.55 * std::numbers::pi / g; }

}  // namespace

std::string version_string() { return kVersion; }

const char* to_string(Model m) {
  switch (m) {
    case Model::mc: return "mc";
    case Model::exact: return "exact";
    case Model::cw: return "cw";
    case Model::mft: return "mft";
    case Model::hte: return "hte";
  }
  return "?";
}

Model model_from_string(const std::string& s) {
  if (s == "mc") return Model::mc;
  if (s == "exact") return Model::exact;
  if (s == "cw") return Model::cw;
  if (s == "mft") return Model::mft;
  if (s == "hte") return Model::hte;
  throw ConfigError("unknown model '" + s + "' (mc, exact, cw, mft, hte)");
}

double RunConfig::beta_c() const {
  return model == Model::cw ? curie_weiss_beta_c(J) : onsager_beta_c(J);
}

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"qfi-scan", "local-fi-scan", "scaling", "fid"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw ConfigError("unknown command '" + command + "'");
  if (!(J > 0.0)) throw ConfigError("J must be > 0");
  if (!(g_over_J > 0.0)) throw ConfigError("g_over_J must be > 0");
  if (h != 0.0 && model != Model::cw) throw ConfigError("h != 0 is only supported by model cw");
  if (L < 2) throw ConfigError("L must be >= 2");
  if (N < 1) throw ConfigError("N must be >= 1");
  if (beta_grid.empty()) throw ConfigError("beta grid is empty");
  for (double b : beta_grid)
    if (!(b >= 0.0)) throw ConfigError("beta grid values must be >= 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw ConfigError("t grid must be strictly increasing");
  if (!t_grid.empty() && t_grid.front() < 0.0) throw ConfigError("t grid must be >= 0");
  if (t_points < 3) throw ConfigError("t_points must be >= 3");
  if (radii.empty()) throw ConfigError("radii list is empty");
  for (double r : radii)
    if (!(r >= 0.0)) throw ConfigError("radii must be >= 0");
  if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be >= 1");
  if (command == "fid" && model != Model::cw && model != Model::exact && model != Model::mc)
    throw ConfigError("fid supports models cw, exact and mc");
  if (command == "local-fi-scan" && model != Model::cw && model != Model::exact &&
      model != Model::mc)
    throw ConfigError("local-fi-scan supports models cw, exact and mc");
  if (command == "scaling" && model == Model::cw)
    throw ConfigError("scaling needs a lattice model (cluster size varies)");
  if (command == "scaling" && radii.size() < 4)
    throw ConfigError("scaling fit needs at least 4 cluster radii");
  if (model == Model::mc) sampler.validate();
}

// ---------------------------------------------------------------------------
// Grids and config parsing.

std::vector<double> parse_grid(const std::string& spec) {
  auto number = [](const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + s + "'");
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw ConfigError("cannot parse number '" + s + "'");
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("grid range must be a:b:n, got '" + spec + "'");
    const double lo = number(parts[0]), hi = number(parts[1]);
    const double n = number(parts[2]);
    if (n < 1 || n != std::floor(n)) throw ConfigError("grid point count must be a positive integer");
    if (n > 1 && !(hi > lo)) throw ConfigError("grid range needs b > a");
    return linspace(lo, hi, static_cast<std::size_t>(n));
  }
  std::vector<double> out;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

namespace {

double parse_radius(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s.rfind("sqrt(", 0) == 0 && s.back() == ')') {
    const auto inner = parse_grid(s.substr(5, s.size() - 6));
    if (inner.size() != 1 || inner[0] < 0.0) throw ConfigError("bad radius '" + s + "'");
    return std::sqrt(inner[0]);
  }
  const auto v = parse_grid(s);
  if (v.size() != 1) throw ConfigError("bad radius '" + s + "'");
  return v[0];
}

std::vector<double> grid_from_json(const json& j, const char* key) {
  if (j.is_string()) return parse_grid(j.get<std::string>());
  if (!j.is_array()) throw ConfigError(std::string(key) + " must be an array or a range string");
  return j.get<std::vector<double>>();
}

void reject_unknown(const json& obj, const std::vector<std::string>& known, const char* where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(std::string("unknown key '") + key + "' in " + where);
}

json sampler_to_json(const SamplerConfig& s) {
  return json{{"algorithm", to_string(s.algorithm)},
              {"sweeps", s.sweeps},
              {"burn_in", s.burn_in},
              {"thinning", s.thinning},
              {"seed", s.seed},
              {"symmetrize", s.symmetrize},
              {"blocks", s.blocks},
              {"translation_average", s.translation_average},
              {"chains", s.chains},
              {"threads", s.threads},
              {"marginal_cap", s.marginal_cap}};
}

json config_to_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"model", to_string(c.model)},
              {"J", c.J},
              {"h", c.h},
              {"g_over_J", c.g_over_J},
              {"omega_p", c.omega_p},
              {"L", c.L},
              {"N", c.N},
              {"beta_grid", c.beta_grid},
              {"t_grid", c.t_grid},
              {"t_points", c.t_points},
              {"radii", c.radii},
              {"sampler", sampler_to_json(c.sampler)},
              {"out", c.out},
              {"format", c.format},
              {"resume", c.resume},
              {"checkpoint_every", c.checkpoint_every},
              {"stop_after_sweeps", c.stop_after_sweeps},
              {"strict", c.strict},
              {"threads", c.threads}};
}

}  // namespace

std::vector<double> parse_radii(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_radius(p));
  if (out.empty()) throw ConfigError("empty radii list");
  return out;
}

RunConfig parse_run_config(const std::string& json_text, RunConfig c) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"command", "model", "J", "h", "g_over_J", "omega_p", "L", "N", "beta_grid",
                  "t_grid", "t_points", "radii", "sampler", "out", "format", "resume",
                  "checkpoint_every", "stop_after_sweeps", "strict", "threads"},
                 "config");
  try {
    if (j.contains("command")) c.command = j["command"].get<std::string>();
    if (j.contains("model")) c.model = model_from_string(j["model"].get<std::string>());
    if (j.contains("J")) c.J = j["J"].get<double>();
    if (j.contains("h")) c.h = j["h"].get<double>();
    if (j.contains("g_over_J")) c.g_over_J = j["g_over_J"].get<double>();
    if (j.contains("omega_p")) c.omega_p = j["omega_p"].get<double>();
    if (j.contains("L")) c.L = j["L"].get<int>();
    if (j.contains("N")) c.N = j["N"].get<int>();
    if (j.contains("beta_grid")) c.beta_grid = grid_from_json(j["beta_grid"], "beta_grid");
    if (j.contains("t_grid")) c.t_grid = grid_from_json(j["t_grid"], "t_grid");
    if (j.contains("t_points")) c.t_points = j["t_points"].get<std::size_t>();
    if (j.contains("radii")) {
      const auto& r = j["radii"];
      if (r.is_string()) {
        c.radii = parse_radii(r.get<std::string>());
      } else if (r.is_array()) {
        c.radii.clear();
        for (const auto& v : r)
          c.radii.push_back(v.is_string() ? parse_radius(v.get<std::string>()) : v.get<double>());
      } else {
        throw ConfigError("radii must be an array or a string");
      }
    }
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      reject_unknown(s,
                     {"algorithm", "sweeps", "burn_in", "thinning", "seed", "symmetrize",
                      "blocks", "translation_average", "chains", "threads", "marginal_cap"},
                     "sampler");
      auto& o = c.sampler;
      if (s.contains("algorithm"))
        o.algorithm = algorithm_from_string(s["algorithm"].get<std::string>());
      if (s.contains("sweeps")) o.sweeps = s["sweeps"].get<std::uint64_t>();
      if (s.contains("burn_in")) o.burn_in = s["burn_in"].get<std::uint64_t>();
      if (s.contains("thinning")) o.thinning = s["thinning"].get<std::uint64_t>();
      if (s.contains("seed")) o.seed = s["seed"].get<std::uint64_t>();
      if (s.contains("symmetrize")) o.symmetrize = s["symmetrize"].get<bool>();
      if (s.contains("blocks")) o.blocks = s["blocks"].get<std::uint32_t>();
      if (s.contains("translation_average"))
        o.translation_average = s["translation_average"].get<bool>();
      if (s.contains("chains")) o.chains = s["chains"].get<std::uint32_t>();
      if (s.contains("threads")) o.threads = s["threads"].get<std::uint32_t>();
      if (s.contains("marginal_cap")) o.marginal_cap = s["marginal_cap"].get<std::uint32_t>();
    }
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("format")) c.format = j["format"].get<std::string>();
    if (j.contains("resume")) c.resume = j["resume"].get<std::string>();
    if (j.contains("checkpoint_every"))
      c.checkpoint_every = j["checkpoint_every"].get<std::uint64_t>();
    if (j.contains("stop_after_sweeps"))
      c.stop_after_sweeps = j["stop_after_sweeps"].get<std::uint64_t>();
    if (j.contains("strict")) c.strict = j["strict"].get<bool>();
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("fit needs matching x and y");
  if (x.size() < 4) throw ConfigError("log-log fit needs at least 4 points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log-log fit needs positive data");
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (!(sxx > 0.0)) throw DomainError("log-log fit needs at least two distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = std::log(y[i]) - (f.intercept + f.slope * std::log(x[i]));
    rss += e * e;
  }
  f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return f;
}

// ---------------------------------------------------------------------------
// Scan machinery.

namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers. The exception of
// the lowest failing index is rethrown so errors do not depend on scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(std::max(1u, threads), count);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ThermoParams point_params(const RunConfig& cfg, double beta, double radius) {
  ThermoParams p;
  p.J = cfg.J;
  p.h = cfg.h;
  p.g = cfg.g();
  p.omega_p = cfg.omega_p;
  p.L = cfg.L;
  p.beta = beta;
  p.cluster = make_disk_cluster(Lattice(cfg.L), {0, 0}, radius);
  return p;
}

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  return Xoshiro256::stream(seed, index)();
}

std::vector<double> lattice_grid(const RunConfig& cfg, const DecoherenceModel& model,
                                 double cap) {
  if (!cfg.t_grid.empty()) {
    std::vector<double> t;
    for (double gt : cfg.t_grid) t.push_back(gt / cfg.g());
    return t;
  }
  return default_time_grid(model, cap, cfg.t_points);
}

DecoherenceModel spectrum_model(ClusterSpectrum spec, double g) {
  return [spec = std::move(spec), g](double t) { return spec.evaluate(g, t); };
}

class StopBudget {
 public:
  explicit StopBudget(std::uint64_t limit) : limit_(limit) {}
  bool limited() const { return limit_ > 0; }
  // Claims up to `want` sweeps; 0 once the budget is spent.
  std::uint64_t claim(std::uint64_t want) {
    if (!limited()) return want;
    std::lock_guard lock(mu_);
    const std::uint64_t give = std::min(want, limit_ - used_);
    used_ += give;
    return give;
  }

 private:
  std::uint64_t limit_;
  std::uint64_t used_ = 0;
  std::mutex mu_;
};

SampleStats run_mc_point(const RunConfig& cfg, std::size_t index, const ThermoParams& params,
                         const std::vector<ClusterSpec>& clusters, StopBudget& budget) {
  SamplerConfig sc = cfg.sampler;
  sc.seed = point_seed(cfg.sampler.seed, index);
  std::string ck;
  if (!cfg.resume.empty()) {
    std::filesystem::create_directories(cfg.resume);
    ck = (std::filesystem::path(cfg.resume) / fmt::format("point_{:04d}.ptck", index)).string();
  }
  std::optional<Sampler> sampler;
  if (!ck.empty() && std::filesystem::exists(ck)) {
    sampler.emplace(Sampler::load(ck));
    const auto& p = sampler->params();
    const auto& c = sampler->config();
    if (p.beta != params.beta || p.L != params.L || p.J != params.J || p.g != params.g ||
        c.seed != sc.seed || c.sweeps != sc.sweeps || c.burn_in != sc.burn_in ||
        c.symmetrize != sc.symmetrize || c.algorithm != sc.algorithm ||
        sampler->clusters().size() != clusters.size())
      throw ConfigError("checkpoint " + ck + " does not match the current configuration");
  } else {
    sampler.emplace(params, clusters, sc);
  }
  while (!sampler->finished()) {
    const std::uint64_t chunk = ck.empty() && !budget.limited() ? ~std::uint64_t{0}
                                                                : cfg.checkpoint_every;
    const std::uint64_t allowed = budget.claim(chunk);
    if (allowed > 0) sampler->run(allowed);
    if (!ck.empty()) sampler->save(ck);
    if (allowed < chunk && !sampler->finished())
      throw Interrupted("stopped after the requested sweep budget; resume from " +
                        (ck.empty() ? std::string("(no checkpoint directory)") : cfg.resume));
  }
  if (!ck.empty() && !std::filesystem::exists(ck)) sampler->save(ck);
  return sampler->stats();
}

std::vector<ClusterSpec> scan_clusters(const RunConfig& cfg) {
  const Lattice lattice(cfg.L);
  std::vector<ClusterSpec> out;
  for (double r : cfg.radii) out.push_back(make_disk_cluster(lattice, {0, 0}, r));
  return out;
}

struct QfiPoint {
  double ratio = 0.0;
  double beta = 0.0;
  int n = 0;
  double t_opt = 0.0;
  double qfi_opt = 0.0;
  double qfi_se = 0.0;
  bool boundary = false;
  double local = std::numeric_limits<double>::quiet_NaN();
  double local_se = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
  bool undersampled = false;
};

QfiPoint from_curve(double ratio, int n, const QfiCurve& c) {
  QfiPoint p;
  p.ratio = ratio;
  p.beta = c.beta;
  p.n = n;
  p.t_opt = c.t_opt;
  p.qfi_opt = c.qfi_opt;
  p.qfi_se = c.qfi_opt_se;
  p.boundary = c.boundary_warning;
  for (const auto& w : c.warnings) p.warnings.push_back(fmt::format("beta/beta_c={} n={}: {}", ratio, n, w));
  return p;
}

// One row per (beta, cluster), in grid order. `with_local` adds the local FI.
std::vector<QfiPoint> scan_points(const RunConfig& cfg, bool with_local) {
  cfg.validate();
  const double bc = cfg.beta_c();
  const std::size_t nb = cfg.beta_grid.size();
  std::vector<std::vector<QfiPoint>> per_beta(nb);
  StopBudget budget(cfg.stop_after_sweeps);

  if (cfg.model == Model::mc) {
    const auto clusters = scan_clusters(cfg);
    if (with_local)
      for (const auto& c : clusters)
        if (c.size() > static_cast<int>(cfg.sampler.marginal_cap))
          throw ConfigError(fmt::format("cluster n = {} exceeds marginal_cap = {}", c.size(),
                                        cfg.sampler.marginal_cap));
    parallel_for(nb, cfg.threads, [&](std::size_t i) {
      const double ratio = cfg.beta_grid[i];
      ThermoParams params = point_params(cfg, ratio * bc, cfg.radii.front());
      const SampleStats stats = run_mc_point(cfg, i, params, clusters, budget);
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto model = spectrum_model(stats.spectrum(c), params.g);
        const auto grid = lattice_grid(cfg, model, lattice_time_cap(params.g));
        QfiPoint p = from_curve(ratio, clusters[c].size(), mc_optimal_qfi(stats, c, grid));
        if (with_local) {
          const LocalFi lf = local_fi(stats, c);
          p.local = lf.value;
          p.local_se = lf.se;
          p.undersampled = lf.undersampled;
          for (const auto& w : lf.warnings)
            p.warnings.push_back(fmt::format("beta/beta_c={} n={}: {}", ratio, p.n, w));
        }
        per_beta[i].push_back(std::move(p));
      }
    });
  } else if (cfg.model == Model::cw) {
    parallel_for(nb, cfg.threads, [&](std::size_t i) {
      const double ratio = cfg.beta_grid[i];
      ThermoParams params = point_params(cfg, ratio * bc, 0.0);
      const CwSolution sol = cw_saddle_point(params, cfg.N);
      if (sol.critical)
        throw DomainError(fmt::format("Curie-Weiss QFI is singular at beta/beta_c = {}", ratio));
      QfiPoint p;
      if (sol.tau.infinite) {
        p.ratio = ratio;
        p.beta = params.beta;
        p.n = cfg.N;
      } else {
        std::vector<double> grid;
        if (!cfg.t_grid.empty())
          for (double gt : cfg.t_grid) grid.push_back(gt / params.g);
        else
          grid = linspace(0.0, 6.0 * sol.tau.value, cfg.t_points);
        p = from_curve(ratio, cfg.N,
                       optimize_function([&](double t) { return cw_qfi(sol, params, t); }, grid,
                                         params.beta));
      }
      if (with_local) {
        p.local = cw_local_fi(sol);
        p.local_se = 0.0;
        p.n = 1;
        p.qfi_opt = std::numeric_limits<double>::quiet_NaN();
        p.t_opt = std::numeric_limits<double>::quiet_NaN();
      }
      per_beta[i].push_back(std::move(p));
    });
  } else {
    // exact, mft, hte: one independent computation per (beta, radius).
    const std::size_t nr = cfg.radii.size();
    std::vector<QfiPoint> flat(nb * nr);
    parallel_for(nb * nr, cfg.threads, [&](std::size_t k) {
      const std::size_t i = k / nr, j = k % nr;
      const double ratio = cfg.beta_grid[i];
      const ThermoParams params = point_params(cfg, ratio * bc, cfg.radii[j]);
      const int n = params.cluster.size();
      const double cap = lattice_time_cap(params.g);
      if (cfg.model == Model::exact) {
        const auto model = spectrum_model(exact_cluster_spectrum(params), params.g);
        QfiPoint p = from_curve(ratio, n, optimize_qfi(model, lattice_grid(cfg, model, cap), params.beta));
        if (with_local) {
          p.local = marginal_fisher_information(exact_cluster_marginal(params));
          p.local_se = 0.0;
        }
        flat[k] = std::move(p);
      } else if (cfg.model == Model::mft) {
        const MftSolution sol = mft_solve(params);
        const auto model = mft_model(sol, params);
        QfiPoint p = from_curve(ratio, n, optimize_qfi(model, lattice_grid(cfg, model, cap), params.beta));
        if (sol.critical) p.warnings.push_back(fmt::format("beta/beta_c={}: MFT critical point", ratio));
        flat[k] = std::move(p);
      } else {
        const BondCounts counts = bond_counts(Lattice(cfg.L), params.cluster);
        const HteOptions opts;
        const DecoherenceModel model = [&](double t) {
          return hte_decoherence_point(counts, params, t);
        };
        auto grid = lattice_grid(cfg, model, hte_time_limit(params));
        bool broken = false;
        QfiPoint p = from_curve(ratio, n,
                                optimize_function(
                                    [&](double t) {
                                      const HteQfi q = hte_qfi(counts, params, t, opts);
                                      if (!q.domain_ok) {
                                        broken = true;
                                        return 0.0;
                                      }
                                      return q.closed_form;
                                    },
                                    grid, params.beta));
        if (params.beta * params.J > opts.beta_j_limit)
          p.warnings.push_back(fmt::format("beta/beta_c={}: HTE extrapolated beyond beta J = {}",
                                           ratio, opts.beta_j_limit));
        if (broken)
          p.warnings.push_back(
              fmt::format("beta/beta_c={} n={}: HTE denominator <= 0 on part of the grid", ratio, n));
        flat[k] = std::move(p);
      }
    });
    for (std::size_t k = 0; k < flat.size(); ++k) per_beta[k / nr].push_back(std::move(flat[k]));
  }

  std::vector<QfiPoint> out;
  for (auto& v : per_beta)
    for (auto& p : v) out.push_back(std::move(p));
  return out;
}

void collect(Dataset& d, const std::vector<QfiPoint>& pts) {
  for (const auto& p : pts) {
    d.warnings.insert(d.warnings.end(), p.warnings.begin(), p.warnings.end());
    d.undersampled = d.undersampled || p.undersampled;
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Dataset cmd_qfi_scan(const RunConfig& cfg) {
  const auto pts = scan_points(cfg, false);
  Dataset d;
  d.header = {"beta_over_beta_c", "beta", "n", "t_opt", "scaled_qfi_opt", "stderr", "qfi_opt",
              "boundary"};
  for (const auto& p : pts)
    d.rows.push_back({p.ratio, p.beta, static_cast<double>(p.n), p.t_opt,
                      p.beta * p.beta * p.qfi_opt, p.beta * p.beta * p.qfi_se, p.qfi_opt,
                      p.boundary ? 1.0 : 0.0});
  collect(d, pts);
  return d;
}

Dataset cmd_local_fi_scan(const RunConfig& cfg) {
  const auto pts = scan_points(cfg, true);
  Dataset d;
  d.header = {"beta_over_beta_c", "beta", "n", "local_fi", "stderr", "qfi_opt", "qfi_stderr",
              "ratio"};
  for (const auto& p : pts)
    d.rows.push_back({p.ratio, p.beta, static_cast<double>(p.n), p.local, p.local_se, p.qfi_opt,
                      p.qfi_se, p.local > 0.0 ? p.qfi_opt / p.local
                                              : std::numeric_limits<double>::quiet_NaN()});
  collect(d, pts);
  return d;
}

Dataset cmd_scaling(const RunConfig& cfg) {
  cfg.validate();
  const auto pts = scan_points(cfg, false);
  Dataset d;
  d.header = {"beta_over_beta_c", "n", "qfi_opt", "stderr"};
  json fits = json::array();
  const std::size_t nr = cfg.radii.size();
  for (std::size_t i = 0; i < cfg.beta_grid.size(); ++i) {
    std::vector<double> n, f;
    double fmax = 0.0;
    for (std::size_t j = 0; j < nr; ++j) fmax = std::max(fmax, pts[i * nr + j].qfi_opt);
    for (std::size_t j = 0; j < nr; ++j) {
      const auto& p = pts[i * nr + j];
      d.rows.push_back({p.ratio, static_cast<double>(p.n), p.qfi_opt, p.qfi_se});
      // A single symmetrized spin carries no beta dependence; its QFI is rounding noise.
      if (p.qfi_opt > 1e-9 * fmax) {
        n.push_back(p.n);
        f.push_back(p.qfi_opt);
      } else {
        d.warnings.push_back(
            fmt::format("beta/beta_c={} n={}: QFI numerically zero, left out of the fit", p.ratio, p.n));
      }
    }
    const LinearFit fit = loglog_fit(n, f);
    fits.push_back({{"beta_over_beta_c", cfg.beta_grid[i]},
                    {"slope", fit.slope},
                    {"slope_se", fit.slope_se},
                    {"intercept", fit.intercept},
                    {"points", n.size()}});
  }
  d.extra_json = json{{"fits", fits}}.dump();
  collect(d, pts);
  return d;
}

Dataset cmd_fid(const RunConfig& cfg) {
  cfg.validate();
  const double bc = cfg.beta_c();
  const std::size_t nb = cfg.beta_grid.size();
  struct Trace {
    std::vector<std::vector<double>> rows;
    json decay = json::array();
  };
  std::vector<Trace> traces(nb);
  StopBudget budget(cfg.stop_after_sweeps);
  const double level = std::exp(-0.5);

  auto emit = [&](Trace& tr, double ratio, int n, const DecoherenceModel& model,
                  const std::vector<double>& grid, std::optional<DecayTime> known) {
    for (double t : grid) {
      const cplx r = model(t).r;
      tr.rows.push_back({ratio, static_cast<double>(n), t, fid(r), std::abs(r)});
    }
    DecayTime tau;
    if (known) {
      tau = *known;
    } else {
      const auto ct = coherence_time(model, grid.back(), level);
      tau = ct ? DecayTime{*ct, false} : DecayTime{0.0, true};
    }
    tr.decay.push_back({{"beta_over_beta_c", ratio},
                        {"n", n},
                        {"tau", tau.infinite ? json(nullptr) : json(tau.value)},
                        {"infinite", tau.infinite}});
  };

  if (cfg.model == Model::cw) {
    // Common grid for the whole beta scan: 6 tau of the infinite-temperature decay.
    std::vector<double> grid;
    if (!cfg.t_grid.empty())
      for (double gt : cfg.t_grid) grid.push_back(gt / cfg.g());
    else
      grid = linspace(0.0, 6.0 / (cfg.g() * std::sqrt(static_cast<double>(cfg.N))), cfg.t_points);
    parallel_for(nb, cfg.threads, [&](std::size_t i) {
      const double ratio = cfg.beta_grid[i];
      const ThermoParams params = point_params(cfg, ratio * bc, 0.0);
      const CwSolution sol = cw_saddle_point(params, cfg.N);
      emit(traces[i], ratio, cfg.N, cw_model(sol, params), grid, sol.tau);
    });
  } else if (cfg.model == Model::exact) {
    parallel_for(nb, cfg.threads, [&](std::size_t i) {
      const double ratio = cfg.beta_grid[i];
      for (double radius : cfg.radii) {
        const ThermoParams params = point_params(cfg, ratio * bc, radius);
        const auto model = spectrum_model(exact_cluster_spectrum(params), params.g);
        emit(traces[i], ratio, params.cluster.size(), model,
             lattice_grid(cfg, model, lattice_time_cap(params.g)), std::nullopt);
      }
    });
  } else {
    const auto clusters = scan_clusters(cfg);
    parallel_for(nb, cfg.threads, [&](std::size_t i) {
      const double ratio = cfg.beta_grid[i];
      const ThermoParams params = point_params(cfg, ratio * bc, cfg.radii.front());
      const SampleStats stats = run_mc_point(cfg, i, params, clusters, budget);
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto model = spectrum_model(stats.spectrum(c), params.g);
        emit(traces[i], ratio, clusters[c].size(), model,
             lattice_grid(cfg, model, lattice_time_cap(params.g)), std::nullopt);
      }
    });
  }

  Dataset d;
  d.header = {"beta_over_beta_c", "n", "t", "fid", "abs_r"};
  json decay = json::array();
  for (auto& tr : traces) {
    for (auto& r : tr.rows) d.rows.push_back(std::move(r));
    for (auto& x : tr.decay) decay.push_back(std::move(x));
  }
  d.extra_json = json{{"decay_times", decay}, {"decay_level", level}}.dump();
  return d;
}

Dataset run_command(const RunConfig& cfg) {
  if (cfg.command == "qfi-scan") return cmd_qfi_scan(cfg);
  if (cfg.command == "local-fi-scan") return cmd_local_fi_scan(cfg);
  if (cfg.command == "scaling") return cmd_scaling(cfg);
  if (cfg.command == "fid") return cmd_fid(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

std::string format_csv(const Dataset& d) {
  std::string out;
  for (std::size_t i = 0; i < d.header.size(); ++i) {
    if (i) out += ',';
    out += d.header[i];
  }
  out += '\n';
  for (const auto& row : d.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += fmt::format("{}", row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string format_json(const Dataset& d) {
  json rows = json::array();
  for (const auto& row : d.rows) {
    json r = json::array();
    for (double v : row) r.push_back(finite_or_null(v));
    rows.push_back(std::move(r));
  }
  json j{{"columns", d.header},
         {"rows", rows},
         {"extra", json::parse(d.extra_json)},
         {"warnings", d.warnings},
         {"undersampled", d.undersampled}};
  return j.dump(2) + "\n";
}

std::string format_metadata(const RunConfig& cfg, const Dataset& d, double runtime_seconds) {
  const std::string canonical = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  json seeds = json::array();
  if (cfg.model == Model::mc)
    for (std::size_t i = 0; i < cfg.beta_grid.size(); ++i)
      seeds.push_back(point_seed(cfg.sampler.seed, i));
  json j{{"command", cfg.command},
         {"model", to_string(cfg.model)},
         {"version", kVersion},
         {"config", config_to_json(cfg)},
         {"config_hash", fmt::format("{:016x}", h)},
         {"base_seed", cfg.sampler.seed},
         {"point_seeds", seeds},
         {"beta_c", cfg.beta_c()},
         {"runtime_seconds", runtime_seconds},
         {"columns", d.header},
         {"rows", d.rows.size()},
         {"warnings", d.warnings},
         {"undersampled", d.undersampled},
         {"extra", json::parse(d.extra_json)}};
  return j.dump(2) + "\n";
}

}  // namespace phasetherm
