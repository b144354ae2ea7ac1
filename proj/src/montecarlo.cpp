#include "phasetherm/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <thread>

namespace phasetherm {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::metropolis: return "metropolis";
    case Algorithm::wolff: return "wolff";
    case Algorithm::automatic: return "auto";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "metropolis") return Algorithm::metropolis;
  if (s == "wolff") return Algorithm::wolff;
  if (s == "auto" || s == "automatic") return Algorithm::automatic;
  throw ConfigError("unknown algorithm '" + s + "' (metropolis, wolff, auto)");
}

void SamplerConfig::validate() const {
  if (sweeps == 0) throw ConfigError("sweeps must be > 0");
  if (thinning == 0) throw ConfigError("thinning must be >= 1");
  if (burn_in >= sweeps) throw ConfigError("burn_in must be smaller than sweeps");
  if (blocks < 2) throw ConfigError("at least 2 blocks are needed for error bars");
  if (sweeps / thinning < blocks)
    throw ConfigError("fewer measurements per chain than blocks; raise sweeps or lower blocks");
  if (chains == 0) throw ConfigError("chains must be >= 1");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (marginal_cap > 32) throw ConfigError("marginal_cap above 32 does not fit the key type");
}

Algorithm resolve_algorithm(const SamplerConfig& cfg, const ThermoParams& params) {
  if (cfg.algorithm != Algorithm::automatic) return cfg.algorithm;
  const double ratio = params.beta / onsager_beta_c(params.J);
  return std::abs(ratio - 1.0) < 0.2 ? Algorithm::wolff : Algorithm::metropolis;
}

std::uint64_t metropolis_sweep(const Lattice& lattice, SpinConfig& config,
                               const ThermoParams& params, Xoshiro256& rng) {
  const int n = lattice.size();
  // Boltzmann factors for local = s_i * sum_nb s_j in {1, ..., 4} at h = 0.
  std::array<double, 5> accept{};
  for (int k = 0; k <= 4; ++k) accept[k] = std::exp(-2.0 * params.beta * params.J * k);
  std::uint64_t accepted = 0;
  for (int step = 0; step < n; ++step) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint32_t>(n)));
    const int s = config.spin(i);
    int nb = 0;
    for (int j : lattice.neighbours(i)) nb += config.spin(j);
    const int local = s * nb;
    bool flip;
    if (params.h == 0.0) {
      flip = local <= 0 || rng.uniform() < accept[local];
    } else {
      const double de = 2.0 * s * (params.J * nb + params.h);
      flip = de <= 0.0 || rng.uniform() < std::exp(-params.beta * de);
    }
    if (flip) {
      config.flip(i);
      ++accepted;
    }
  }
  return accepted;
}

int wolff_step(const Lattice& lattice, SpinConfig& config, const ThermoParams& params,
               Xoshiro256& rng, std::vector<int>& stack) {
  if (params.h != 0.0) throw ConfigError("the Wolff update requires h = 0");
  const double p_add = -std::expm1(-2.0 * params.beta * params.J);
  const int seed = static_cast<int>(rng.below(static_cast<std::uint32_t>(lattice.size())));
  const std::uint8_t b0 = config.bit(seed);
  stack.clear();
  stack.push_back(seed);
  config.flip(seed);
  int size = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j : lattice.neighbours(i)) {
      // Flipped members no longer match b0, so each joins at most once.
      if (config.bit(j) == b0 && rng.uniform() < p_add) {
        config.flip(j);
        stack.push_back(j);
        ++size;
      }
    }
  }
  return size;
}

std::uint64_t wolff_sweep(const Lattice& lattice, SpinConfig& config, const ThermoParams& params,
                          Xoshiro256& rng, std::vector<int>& stack) {
  std::uint64_t flipped = 0, steps = 0;
  while (flipped < static_cast<std::uint64_t>(lattice.size())) {
    flipped += static_cast<std::uint64_t>(wolff_step(lattice, config, params, rng, stack));
    ++steps;
  }
  return steps;
}

// ---------------------------------------------------------------------------

MarginalTable::MarginalTable(int n) : n_(n) {
  if (n < 0 || n > 32) throw ConfigError("marginal table supports 0 <= n <= 32");
  if (dense()) dense_.resize(std::size_t{1} << n);
}

void MarginalTable::insert(std::uint32_t key, const MarginalCell& cell) {
  if (dense())
    dense_[key] = cell;
  else
    sparse_[key] = cell;
}

MarginalTable& MarginalTable::operator+=(const MarginalTable& o) {
  if (o.n_ != n_) throw ConfigError("merging marginal tables of different size");
  if (dense()) {
    for (std::size_t k = 0; k < dense_.size(); ++k) dense_[k] += o.dense_[k];
  } else {
    for (const auto& [key, c] : o.sparse_) sparse_[key] += c;
  }
  return *this;
}

std::map<std::uint32_t, MarginalCell> MarginalTable::cells() const {
  std::map<std::uint32_t, MarginalCell> out;
  if (dense()) {
    for (std::size_t k = 0; k < dense_.size(); ++k)
      if (dense_[k].count > 0) out.emplace(static_cast<std::uint32_t>(k), dense_[k]);
  } else {
    for (const auto& [key, c] : sparse_)
      if (c.count > 0) out.emplace(key, c);
  }
  return out;
}

std::size_t MarginalTable::occupied() const {
  if (!dense()) return sparse_.size();
  return static_cast<std::size_t>(
      std::count_if(dense_.begin(), dense_.end(), [](const auto& c) { return c.count > 0; }));
}

ClusterAccumulator& ClusterAccumulator::operator+=(const ClusterAccumulator& o) {
  for (std::size_t k = 0; k < count.size(); ++k) {
    count[k] += o.count[k];
    sum_bond[k] += o.sum_bond[k];
    sum_mag[k] += o.sum_mag[k];
  }
  if (has_marginal) marginal += o.marginal;
  return *this;
}

BlockAccumulator& BlockAccumulator::operator+=(const BlockAccumulator& o) {
  measurements += o.measurements;
  sum_bond += o.sum_bond;
  sum_mag += o.sum_mag;
  sum_bond2 += o.sum_bond2;
  for (std::size_t c = 0; c < clusters.size(); ++c) clusters[c] += o.clusters[c];
  return *this;
}

// ---------------------------------------------------------------------------

double SampleStats::mean_energy(int drop) const {
  std::int64_t bond = 0, mag = 0;
  std::uint64_t m = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (static_cast<int>(b) == drop) continue;
    bond += blocks[b].sum_bond;
    mag += blocks[b].sum_mag;
    m += blocks[b].measurements;
  }
  return (-params.J * static_cast<double>(bond) - params.h * static_cast<double>(mag)) /
         static_cast<double>(m);
}

double SampleStats::mean_energy_se() const {
  return jackknife_se(blocks.size(), [this](int d) {
    return std::vector<double>{mean_energy(d)};
  })[0];
}

ClusterSpectrum SampleStats::spectrum(std::size_t cluster, int drop) const {
  const int n = clusters.at(cluster).size();
  const auto size = static_cast<std::size_t>(n + 1);
  std::vector<std::uint64_t> count(size, 0);
  std::vector<std::int64_t> bond(size, 0), mag(size, 0);
  std::uint64_t total = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (static_cast<int>(b) == drop) continue;
    const auto& acc = blocks[b].clusters[cluster];
    for (std::size_t k = 0; k < size; ++k) {
      count[k] += acc.count[k];
      bond[k] += acc.sum_bond[k];
      mag[k] += acc.sum_mag[k];
      total += acc.count[k];
    }
  }
  ClusterSpectrum s;
  s.n = n;
  s.prob.resize(size);
  s.energy_weighted.resize(size);
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t k = 0; k < size; ++k) {
    s.prob[k] = static_cast<double>(count[k]) * inv;
    s.energy_weighted[k] =
        (-params.J * static_cast<double>(bond[k]) - params.h * static_cast<double>(mag[k])) * inv;
  }
  return s;
}

bool SampleStats::has_marginal(std::size_t cluster) const {
  return !blocks.empty() && blocks.front().clusters.at(cluster).has_marginal;
}

namespace {

ClusterMarginal to_marginal(int n, const std::map<std::uint32_t, MarginalCell>& cells,
                            const ThermoParams& params) {
  std::uint64_t total = 0;
  for (const auto& [key, c] : cells) total += c.count;
  ClusterMarginal m;
  m.n = n;
  const double inv = 1.0 / static_cast<double>(total);
  for (const auto& [key, c] : cells) {
    if (c.count == 0) continue;
    m.probs[key] = static_cast<double>(c.count) * inv;
    m.energy_weighted[key] =
        (-params.J * static_cast<double>(c.sum_bond) - params.h * static_cast<double>(c.sum_mag)) *
        inv;
  }
  return m;
}

}  // namespace

ClusterMarginal SampleStats::cluster_marginal(std::size_t cluster, int drop) const {
  if (!has_marginal(cluster))
    throw ConfigError("cluster marginal not recorded (n above marginal_cap)");
  MarginalTable merged(clusters.at(cluster).size());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (static_cast<int>(b) != drop) merged += blocks[b].clusters[cluster].marginal;
  return to_marginal(merged.n(), merged.cells(), params);
}

std::vector<double> jackknife_se(std::size_t blocks,
                                 const std::function<std::vector<double>(int drop)>& f) {
  if (blocks < 2) throw ConfigError("jackknife needs at least 2 blocks");
  std::vector<std::vector<double>> vals;
  vals.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) vals.push_back(f(static_cast<int>(b)));
  const std::size_t m = vals.front().size();
  std::vector<double> se(m, 0.0);
  const double nb = static_cast<double>(blocks);
  for (std::size_t k = 0; k < m; ++k) {
    double mean = 0.0;
    for (const auto& v : vals) mean += v[k];
    mean /= nb;
    double ss = 0.0;
    for (const auto& v : vals) ss += (v[k] - mean) * (v[k] - mean);
    se[k] = std::sqrt((nb - 1.0) / nb * ss);
  }
  return se;
}

// ---------------------------------------------------------------------------

namespace {

const ThermoParams& checked(const ThermoParams& p) {
  p.validate();
  return p;
}

}  // namespace

Sampler::Sampler(ThermoParams params, std::vector<ClusterSpec> clusters, SamplerConfig cfg)
    : params_(std::move(params)),
      clusters_(std::move(clusters)),
      cfg_(cfg),
      lattice_(checked(params_).L) {
  cfg_.validate();
  if (clusters_.empty()) throw ConfigError("sampler needs at least one cluster");
  for (const auto& c : clusters_)
    if (c.size() < 1 || c.size() > 32) throw ConfigError("cluster size must be 1..32");
  algorithm_ = resolve_algorithm(cfg_, params_);
  if (algorithm_ == Algorithm::wolff && params_.h != 0.0)
    throw ConfigError("the Wolff update requires h = 0");
  measurements_per_chain_ = cfg_.sweeps / cfg_.thinning;
  build_placements();
  chains_.resize(cfg_.chains);
  for (std::size_t i = 0; i < chains_.size(); ++i) init_chain(i);
}

void Sampler::build_placements() {
  placement_sites_.clear();
  for (const auto& c : clusters_) {
    std::vector<int> sites;
    if (cfg_.translation_average) {
      sites.reserve(static_cast<std::size_t>(lattice_.size() * c.size()));
      for (int p = 0; p < lattice_.size(); ++p) {
        const Site at = lattice_.site(p);
        const Site shifted{at.row + c.center.row, at.col + c.center.col};
        for (int s : c.translated(lattice_, shifted)) sites.push_back(s);
      }
    } else {
      sites = c.sites;
    }
    placement_sites_.push_back(std::move(sites));
  }
}

void Sampler::init_chain(std::size_t index) {
  ChainState& ch = chains_[index];
  ch = ChainState{};
  ch.rng = Xoshiro256::stream(cfg_.seed, index);
  const int n = lattice_.size();
  ch.spins = SpinConfig(n);
  // Ordered start in the ferromagnetic phase, disordered otherwise.
  if (!(params_.beta > onsager_beta_c(params_.J)))
    for (int i = 0; i < n; ++i) ch.spins.set_bit(i, static_cast<std::uint8_t>(ch.rng() >> 63));
  ch.mag_hist.assign(static_cast<std::size_t>(n + 1), 0);
  BlockAccumulator proto;
  for (const auto& c : clusters_) {
    ClusterAccumulator acc;
    const auto size = static_cast<std::size_t>(c.size() + 1);
    acc.count.assign(size, 0);
    acc.sum_bond.assign(size, 0);
    acc.sum_mag.assign(size, 0);
    acc.has_marginal = c.size() <= static_cast<int>(cfg_.marginal_cap);
    if (acc.has_marginal) acc.marginal = MarginalTable(c.size());
    proto.clusters.push_back(std::move(acc));
  }
  ch.blocks.assign(cfg_.blocks, proto);
}

bool Sampler::finished() const {
  return std::all_of(chains_.begin(), chains_.end(),
                     [this](const ChainState& c) { return c.sweeps_done >= cfg_.sweeps; });
}

void Sampler::sweep(ChainState& chain, std::vector<int>& stack, bool measuring) const {
  if (algorithm_ == Algorithm::wolff) {
    const auto N = static_cast<std::uint64_t>(lattice_.size());
    std::uint64_t flipped = 0, steps = 0;
    if (measuring) {
      for (; steps < chain.wolff_steps; ++steps)
        flipped += static_cast<std::uint64_t>(wolff_step(lattice_, chain.spins, params_, chain.rng, stack));
    } else {
      for (; flipped < N; ++steps)
        flipped += static_cast<std::uint64_t>(wolff_step(lattice_, chain.spins, params_, chain.rng, stack));
    }
    chain.accepted += flipped;
    chain.attempts += steps;
  } else {
    chain.accepted += metropolis_sweep(lattice_, chain.spins, params_, chain.rng);
    chain.attempts += static_cast<std::uint64_t>(lattice_.size());
  }
}

void Sampler::measure(ChainState& chain) const {
  const auto block_index = static_cast<std::size_t>(chain.measurements * cfg_.blocks /
                                                    measurements_per_chain_);
  BlockAccumulator& blk = chain.blocks[block_index];
  ++chain.measurements;

  const std::int64_t B = bond_sum(lattice_, chain.spins);
  const std::int64_t M = chain.spins.magnetization();
  const int N = lattice_.size();
  const bool sym = cfg_.symmetrize;
  blk.measurements += sym ? 2 : 1;
  blk.sum_bond += sym ? 2 * B : B;
  blk.sum_mag += sym ? 0 : M;
  blk.sum_bond2 += (sym ? 2 : 1) * B * B;
  ++chain.mag_hist[static_cast<std::size_t>((M + N) / 2)];
  if (sym) ++chain.mag_hist[static_cast<std::size_t>((N - M) / 2)];

  const auto& bits = chain.spins.bits();
  std::vector<std::uint64_t> local;
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    ClusterAccumulator& acc = blk.clusters[c];
    const int n = clusters_[c].size();
    const std::uint32_t mask = n == 32 ? ~0u : ((1u << n) - 1u);
    const auto& sites = placement_sites_[c];
    const std::size_t placements = sites.size() / static_cast<std::size_t>(n);
    local.assign(static_cast<std::size_t>(n + 1), 0);
    for (std::size_t p = 0; p < placements; ++p) {
      const int* s = sites.data() + p * static_cast<std::size_t>(n);
      std::uint32_t key = 0;
      for (int k = 0; k < n; ++k) key |= static_cast<std::uint32_t>(bits[s[k]]) << k;
      // Number of up spins; Z = 2k - n.
      ++local[static_cast<std::size_t>(n - std::popcount(key))];
      if (acc.has_marginal) {
        acc.marginal.add(key, B, M);
        if (sym) acc.marginal.add(~key & mask, B, -M);
      }
    }
    for (std::size_t k = 0; k < local.size(); ++k) {
      if (local[k] == 0) continue;
      const auto cnt = static_cast<std::int64_t>(local[k]);
      acc.count[k] += local[k];
      acc.sum_bond[k] += cnt * B;
      acc.sum_mag[k] += cnt * M;
      if (sym) {
        const std::size_t mk = static_cast<std::size_t>(n) - k;
        acc.count[mk] += local[k];
        acc.sum_bond[mk] += cnt * B;
        acc.sum_mag[mk] -= cnt * M;
      }
    }
  }
}

std::uint64_t Sampler::advance(ChainState& chain, std::uint64_t budget) const {
  std::vector<int> stack;
  std::uint64_t done = 0;
  while (done < budget && chain.burn_done < cfg_.burn_in) {
    sweep(chain, stack, false);
    ++chain.burn_done;
    ++done;
  }
  if (algorithm_ == Algorithm::wolff && chain.wolff_steps == 0 && done < budget &&
      chain.sweeps_done < cfg_.sweeps) {
    // Without burn-in one uncounted sweep calibrates the cluster size.
    if (chain.attempts == 0) sweep(chain, stack, false);
    const double steps = static_cast<double>(lattice_.size()) *
                         static_cast<double>(chain.attempts) / static_cast<double>(chain.accepted);
    chain.wolff_steps = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(steps)));
  }
  while (done < budget && chain.sweeps_done < cfg_.sweeps) {
    sweep(chain, stack, true);
    ++chain.sweeps_done;
    ++done;
    if (chain.sweeps_done % cfg_.thinning == 0 && chain.measurements < measurements_per_chain_)
      measure(chain);
  }
  return done;
}

std::uint64_t Sampler::run(std::uint64_t max_sweeps) {
  const bool unlimited = max_sweeps == ~std::uint64_t{0};
  if (unlimited && cfg_.threads > 1 && chains_.size() > 1) {
    // Chains are independent; each worker takes every `threads`-th chain.
    const std::size_t workers = std::min<std::size_t>(cfg_.threads, chains_.size());
    std::vector<std::uint64_t> done(workers, 0);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([this, w, workers, max_sweeps, &done] {
        for (std::size_t c = w; c < chains_.size(); c += workers)
          done[w] += advance(chains_[c], max_sweeps);
      });
    for (auto& t : pool) t.join();
    std::uint64_t total = 0;
    for (auto d : done) total += d;
    return total;
  }
  std::uint64_t total = 0;
  for (auto& chain : chains_) {
    if (total >= max_sweeps) break;
    total += advance(chain, max_sweeps - total);
  }
  return total;
}

SampleStats Sampler::stats() const {
  SampleStats s;
  s.params = params_;
  s.clusters = clusters_;
  s.algorithm = algorithm_;
  s.symmetrize = cfg_.symmetrize;
  s.placements = cfg_.translation_average ? static_cast<std::uint64_t>(lattice_.size()) : 1;
  s.blocks = chains_.front().blocks;
  for (std::size_t c = 1; c < chains_.size(); ++c)
    for (std::size_t b = 0; b < s.blocks.size(); ++b) s.blocks[b] += chains_[c].blocks[b];
  for (const auto& b : s.blocks) s.samples_used += b.measurements;
  const int N = lattice_.size();
  std::uint64_t accepted = 0, attempts = 0;
  for (const auto& ch : chains_) {
    for (std::size_t k = 0; k < ch.mag_hist.size(); ++k)
      if (ch.mag_hist[k] > 0) s.magnetization_hist[2 * static_cast<int>(k) - N] += ch.mag_hist[k];
    accepted += ch.accepted;
    attempts += ch.attempts;
  }
  if (attempts > 0) {
    if (algorithm_ == Algorithm::wolff) {
      // Mean cluster size as a fraction of the lattice.
      s.acceptance = static_cast<double>(accepted) /
                     (static_cast<double>(attempts) * static_cast<double>(N));
    } else {
      s.acceptance = static_cast<double>(accepted) / static_cast<double>(attempts);
    }
  }
  if (!finished()) s.warnings.push_back("sampler has not finished all sweeps");
  return s;
}

// ---------------------------------------------------------------------------

SamplerResult run_sampler(const ThermoParams& params, const SamplerConfig& cfg,
                          std::span<const double> t_grid) {
  if (t_grid.empty()) throw ConfigError("time grid must be nonempty");
  Sampler sampler(params, {params.cluster}, cfg);
  sampler.run();
  SamplerResult out{sampler.stats(), {}};
  out.series = mc_decoherence(out.stats, 0, t_grid);
  return out;
}

DecoherenceSeries mc_decoherence(const SampleStats& stats, std::size_t cluster,
                                 std::span<const double> t_grid) {
  const double g = stats.params.g;
  auto eval = [&](const ClusterSpectrum& spec) {
    std::vector<double> v;
    v.reserve(4 * t_grid.size());
    for (double t : t_grid) {
      const auto p = spec.evaluate(g, t);
      v.insert(v.end(), {p.r.real(), p.r.imag(), p.dr.real(), p.dr.imag()});
    }
    return v;
  };
  const auto full = eval(stats.spectrum(cluster));
  const auto se = jackknife_se(stats.blocks.size(),
                               [&](int d) { return eval(stats.spectrum(cluster, d)); });
  DecoherenceSeries out;
  out.beta = stats.params.beta;
  out.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out.t[i] = t_grid[i];
    out.r[i] = {full[4 * i], full[4 * i + 1]};
    out.dr[i] = {full[4 * i + 2], full[4 * i + 3]};
    out.se_r[i] = {se[4 * i], se[4 * i + 1]};
    out.se_dr[i] = {se[4 * i + 2], se[4 * i + 3]};
  }
  return out;
}

namespace {

DecoherenceModel spectrum_model(ClusterSpectrum spec, double g) {
  return [spec = std::move(spec), g](double t) { return spec.evaluate(g, t); };
}

}  // namespace

QfiCurve mc_optimal_qfi(const SampleStats& stats, std::size_t cluster,
                        std::span<const double> t_grid) {
  const double g = stats.params.g, beta = stats.params.beta;
  QfiCurve curve = optimize_qfi(spectrum_model(stats.spectrum(cluster), g), t_grid, beta);
  const auto se = jackknife_se(stats.blocks.size(), [&](int d) {
    const QfiCurve c = optimize_qfi(spectrum_model(stats.spectrum(cluster, d), g), t_grid, beta);
    std::vector<double> v = c.qfi;
    v.push_back(c.qfi_opt);
    return v;
  });
  curve.qfi_se.assign(se.begin(), se.end() - 1);
  curve.qfi_opt_se = se.back();
  return curve;
}

LocalFi local_fi(const SampleStats& stats, std::size_t cluster) {
  if (!stats.has_marginal(cluster))
    throw ConfigError("local FI needs the cluster marginal; raise marginal_cap to at least n = " +
                      std::to_string(stats.clusters.at(cluster).size()));
  const int n = stats.clusters[cluster].size();
  MarginalTable full(n);
  for (const auto& b : stats.blocks) full += b.clusters[cluster].marginal;
  const auto full_cells = full.cells();

  LocalFi out;
  out.value = marginal_fisher_information(to_marginal(n, full_cells, stats.params));
  out.occupied_keys = full_cells.size();
  out.se = jackknife_se(stats.blocks.size(), [&](int d) {
    auto cells = full_cells;
    for (const auto& [key, c] : stats.blocks[static_cast<std::size_t>(d)].clusters[cluster]
                                    .marginal.cells()) {
      auto& cell = cells[key];
      cell.count -= c.count;
      cell.sum_bond -= c.sum_bond;
      cell.sum_mag -= c.sum_mag;
    }
    return std::vector<double>{
        marginal_fisher_information(to_marginal(n, cells, stats.params))};
  })[0];
  if (static_cast<double>(out.occupied_keys) > static_cast<double>(stats.samples_used) / 100.0) {
    out.undersampled = true;
    out.warnings.push_back("under-sampled marginal: " + std::to_string(out.occupied_keys) +
                           " occupied keys for " + std::to_string(stats.samples_used) +
                           " samples");
  }
  return out;
}

BlockingCheck blocking_check(const SampleStats& stats,
                             const std::function<double(const SampleStats&, int)>& estimator) {
  BlockingCheck out;
  out.se_fine = jackknife_se(stats.blocks.size(), [&](int d) {
    return std::vector<double>{estimator(stats, d)};
  })[0];
  SampleStats coarse = stats;
  coarse.blocks.clear();
  for (std::size_t b = 0; b + 1 < stats.blocks.size(); b += 2) {
    coarse.blocks.push_back(stats.blocks[b]);
    coarse.blocks.back() += stats.blocks[b + 1];
  }
  out.se_coarse = jackknife_se(coarse.blocks.size(), [&](int d) {
    return std::vector<double>{estimator(coarse, d)};
  })[0];
  return out;
}

DecoherenceSeries finite_difference_dr(const ThermoParams& params, const SamplerConfig& cfg,
                                       std::span<const double> t_grid, double dbeta) {
  if (!(dbeta > 0.0) || !(params.beta - dbeta >= 0.0))
    throw ConfigError("finite-difference step must satisfy 0 < dbeta <= beta");
  ThermoParams lo = params, hi = params;
  lo.beta -= dbeta;
  hi.beta += dbeta;
  // Same seed on both sides: common random numbers.
  const auto a = run_sampler(lo, cfg, t_grid).series;
  const auto b = run_sampler(hi, cfg, t_grid).series;
  DecoherenceSeries out;
  out.beta = params.beta;
  out.resize(t_grid.size());
  auto comb = [](cplx x, cplx y) {
    return cplx{std::hypot(x.real(), y.real()), std::hypot(x.imag(), y.imag())};
  };
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out.t[i] = t_grid[i];
    out.r[i] = 0.5 * (a.r[i] + b.r[i]);
    out.dr[i] = (b.r[i] - a.r[i]) / (2.0 * dbeta);
    out.se_r[i] = 0.5 * comb(a.se_r[i], b.se_r[i]);
    out.se_dr[i] = comb(a.se_r[i], b.se_r[i]) / (2.0 * dbeta);
  }
  return out;
}

}  // namespace phasetherm
