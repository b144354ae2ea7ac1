#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phasetherm/common.hpp"
#include "phasetherm/lattice.hpp"
#include "phasetherm/probe.hpp"
#include "phasetherm/rng.hpp"

namespace phasetherm {

enum class Algorithm : std::uint32_t {
  metropolis = 0,
  wolff = 1,
  automatic = 2,  ///< Wolff for |beta/beta_c - 1| < 0.2, Metropolis elsewhere
};

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct SamplerConfig {
  Algorithm algorithm = Algorithm::automatic;
  std::uint64_t sweeps = 100000;  ///< measurement-phase sweeps per chain
  std::uint64_t burn_in = 1000;   ///< extra sweeps discarded before measuring
  std::uint64_t thinning = 1;     ///< sweeps between measurements
  std::uint64_t seed = 1;
  bool symmetrize = false;  ///< count each sample together with its global flip
  std::uint32_t blocks = 64;
  bool translation_average = true;  ///< average the cluster over all L^2 placements
  std::uint32_t chains = 1;
  std::uint32_t threads = 1;        ///< chains run concurrently on up to this many threads
  std::uint32_t marginal_cap = 13;  ///< largest n whose configuration marginal is recorded

  void validate() const;
};

/// Wolff near beta_c, Metropolis elsewhere, unless the config fixes one.
Algorithm resolve_algorithm(const SamplerConfig& cfg, const ThermoParams& params);

/// One Metropolis sweep: N single-spin attempts at uniformly random sites.
/// Returns the number of accepted flips.
std::uint64_t metropolis_sweep(const Lattice& lattice, SpinConfig& config,
                               const ThermoParams& params, Xoshiro256& rng);

/// Grows and flips one Wolff cluster from a random seed site with add
/// probability 1 - e^{-2 beta J}. Returns the cluster size. Rejects h != 0.
int wolff_step(const Lattice& lattice, SpinConfig& config, const ThermoParams& params,
               Xoshiro256& rng, std::vector<int>& stack);

/// Wolff steps until at least N spins have been flipped. Returns the number of steps.
/// The stopping rule depends on the state, so the sampler only uses it during
/// burn-in; measurement sweeps take a fixed number of steps (see ChainState).
std::uint64_t wolff_sweep(const Lattice& lattice, SpinConfig& config, const ThermoParams& params,
                          Xoshiro256& rng, std::vector<int>& stack);

/// Sums over one cluster configuration key: occurrences and the bond and
/// magnetization sums of the full-lattice samples that produced it.
struct MarginalCell {
  std::uint64_t count = 0;
  std::int64_t sum_bond = 0;
  std::int64_t sum_mag = 0;

  MarginalCell& operator+=(const MarginalCell& o) {
    count += o.count;
    sum_bond += o.sum_bond;
    sum_mag += o.sum_mag;
    return *this;
  }
  friend bool operator==(const MarginalCell&, const MarginalCell&) = default;
};

/// Dense 2^n table for n <= 16, hash map above.
class MarginalTable {
 public:
  static constexpr int kDenseLimit = 16;

  MarginalTable() = default;
  explicit MarginalTable(int n);

  int n() const { return n_; }
  bool dense() const { return n_ <= kDenseLimit; }
  void add(std::uint32_t key, std::int64_t bond, std::int64_t mag) {
    MarginalCell& c = dense() ? dense_[key] : sparse_[key];
    ++c.count;
    c.sum_bond += bond;
    c.sum_mag += mag;
  }
  void insert(std::uint32_t key, const MarginalCell& cell);
  MarginalTable& operator+=(const MarginalTable& o);

  /// Occupied cells in key order.
  std::map<std::uint32_t, MarginalCell> cells() const;
  std::size_t occupied() const;

  friend bool operator==(const MarginalTable&, const MarginalTable&) = default;

 private:
  int n_ = 0;
  std::vector<MarginalCell> dense_;
  std::unordered_map<std::uint32_t, MarginalCell> sparse_;
};

/// Integer sums for one cluster in one block. Index k <-> Z = 2k - n.
struct ClusterAccumulator {
  std::vector<std::uint64_t> count;
  std::vector<std::int64_t> sum_bond;
  std::vector<std::int64_t> sum_mag;
  bool has_marginal = false;
  MarginalTable marginal;

  ClusterAccumulator& operator+=(const ClusterAccumulator& o);
  friend bool operator==(const ClusterAccumulator&, const ClusterAccumulator&) = default;
};

/// Everything measured inside one block. All sums are integers so merging is
/// exact and order independent.
struct BlockAccumulator {
  std::uint64_t measurements = 0;  ///< samples, counting a symmetrized flip as a sample
  std::int64_t sum_bond = 0;
  std::int64_t sum_mag = 0;
  std::int64_t sum_bond2 = 0;
  std::vector<ClusterAccumulator> clusters;

  BlockAccumulator& operator+=(const BlockAccumulator& o);
  friend bool operator==(const BlockAccumulator&, const BlockAccumulator&) = default;
};

/// Merged sampler output. Estimators are derived from the block sums; the
/// `drop` argument leaves one block out (jackknife), -1 keeps all.
struct SampleStats {
  ThermoParams params;
  std::vector<ClusterSpec> clusters;
  Algorithm algorithm = Algorithm::metropolis;
  bool symmetrize = false;
  std::uint64_t samples_used = 0;
  std::uint64_t placements = 1;
  std::vector<BlockAccumulator> blocks;
  std::map<int, std::uint64_t> magnetization_hist;  ///< M -> frequency
  double acceptance = 0.0;           ///< Metropolis acceptance or mean Wolff cluster fraction
  std::vector<std::string> warnings;

  double mean_energy(int drop = -1) const;
  double mean_energy_se() const;
  ClusterSpectrum spectrum(std::size_t cluster, int drop = -1) const;
  bool has_marginal(std::size_t cluster) const;
  ClusterMarginal cluster_marginal(std::size_t cluster, int drop = -1) const;
};

/// Delete-one-block jackknife standard error of each component of `f`.
std::vector<double> jackknife_se(std::size_t blocks,
                                 const std::function<std::vector<double>(int drop)>& f);

/// One chain's complete state (also what a checkpoint stores).
struct ChainState {
  SpinConfig spins;
  Xoshiro256 rng;
  std::uint64_t burn_done = 0;
  std::uint64_t sweeps_done = 0;  ///< measurement-phase sweeps
  std::uint64_t measurements = 0;
  std::uint64_t accepted = 0;     ///< Metropolis accepts or Wolff flipped spins
  std::uint64_t attempts = 0;     ///< Metropolis attempts or Wolff steps
  /// Wolff steps per measurement sweep, N / (mean burn-in cluster size); 0 until set.
  std::uint64_t wolff_steps = 0;
  std::vector<BlockAccumulator> blocks;
  std::vector<std::uint64_t> mag_hist;  ///< index (M + N) / 2

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

class Sampler {
 public:
  Sampler(ThermoParams params, std::vector<ClusterSpec> clusters, SamplerConfig cfg);

  const ThermoParams& params() const { return params_; }
  const SamplerConfig& config() const { return cfg_; }
  const std::vector<ClusterSpec>& clusters() const { return clusters_; }
  Algorithm algorithm() const { return algorithm_; }
  const std::vector<ChainState>& chains() const { return chains_; }

  bool finished() const;
  /// Advances the chains by at most `max_sweeps` sweeps in total (burn-in
  /// included), chain by chain in order. Returns the sweeps performed.
  std::uint64_t run(std::uint64_t max_sweeps = ~std::uint64_t{0});
  SampleStats stats() const;

  /// Versioned little-endian checkpoint; see README for the layout.
  void save(const std::string& path) const;
  static Sampler load(const std::string& path);

 private:
  friend struct CheckpointAccess;
  void init_chain(std::size_t index);
  void build_placements();
  void sweep(ChainState& chain, std::vector<int>& stack, bool measuring) const;
  void measure(ChainState& chain) const;
  std::uint64_t advance(ChainState& chain, std::uint64_t budget) const;

  ThermoParams params_;
  std::vector<ClusterSpec> clusters_;
  SamplerConfig cfg_;
  Algorithm algorithm_;
  Lattice lattice_;
  std::uint64_t measurements_per_chain_ = 0;
  std::vector<std::vector<int>> placement_sites_;  ///< per cluster, placements x n
  std::vector<ChainState> chains_;
};

struct SamplerResult {
  SampleStats stats;
  DecoherenceSeries series;  ///< for params.cluster
};

/// Samples the Gibbs state with params.cluster as the only cluster and
/// evaluates r and d_beta r on `t_grid` with jackknife errors.
SamplerResult run_sampler(const ThermoParams& params, const SamplerConfig& cfg,
                          std::span<const double> t_grid);

/// r and the covariance estimate d_beta r = -<E e^{-igtZ}> + <E><e^{-igtZ}> with
/// jackknife standard errors.
DecoherenceSeries mc_decoherence(const SampleStats& stats, std::size_t cluster,
                                 std::span<const double> t_grid);

/// QFI along the grid and its refined maximum; per-point and optimum errors
/// are jackknife estimates.
QfiCurve mc_optimal_qfi(const SampleStats& stats, std::size_t cluster,
                        std::span<const double> t_grid);

struct LocalFi {
  double value = 0.0;
  double se = 0.0;
  std::size_t occupied_keys = 0;
  bool undersampled = false;
  std::vector<std::string> warnings;
};

/// Fisher information of measuring the n cluster spins directly,
/// sum_b' (-A(b') + p_n(b') <H>)^2 / p_n(b').
LocalFi local_fi(const SampleStats& stats, std::size_t cluster);

/// Jackknife error of the mean energy with the configured blocks and with
/// blocks merged pairwise; a ratio near 1 indicates the blocks are longer
/// than the autocorrelation time.
struct BlockingCheck {
  double se_fine = 0.0;
  double se_coarse = 0.0;
  double ratio() const { return se_fine > 0.0 ? se_coarse / se_fine : 1.0; }
};
BlockingCheck blocking_check(const SampleStats& stats,
                             const std::function<double(const SampleStats&, int)>& estimator);

/// Centered finite difference of r in beta from two runs at beta +- dbeta
/// that share the seed.
DecoherenceSeries finite_difference_dr(const ThermoParams& params, const SamplerConfig& cfg,
                                       std::span<const double> t_grid, double dbeta);

}  // namespace phasetherm
