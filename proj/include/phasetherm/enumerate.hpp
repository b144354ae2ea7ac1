#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phasetherm/common.hpp"
#include "phasetherm/lattice.hpp"

namespace phasetherm {

/// Hard cap on exhaustive enumeration, 2^24 configurations.
inline constexpr int kMaxEnumerationSites = 24;

/// Gibbs state of the whole lattice by brute force.
struct ExactGibbs {
  int n_sites = 0;
  double log_partition = 0.0;
  double mean_energy = 0.0;
  /// probs[code] for SpinConfig::code() == code.
  std::vector<double> probs;

  double partition_function() const { return std::exp(log_partition); }
  double prob(const SpinConfig& config) const { return probs[config.code()]; }
};

ExactGibbs enumerate_gibbs(const ThermoParams& params, int max_sites = kMaxEnumerationSites);

/// Cluster magnetization distribution with energy weights, exact.
ClusterSpectrum exact_cluster_spectrum(const ThermoParams& params,
                                       int max_sites = kMaxEnumerationSites);

DecoherenceSeries exact_decoherence(const ThermoParams& params, std::span<const double> t_grid,
                                    int max_sites = kMaxEnumerationSites);

ClusterMarginal exact_cluster_marginal(const ThermoParams& params,
                                       int max_sites = kMaxEnumerationSites);

/// Distribution of the total magnetization M, keyed by M.
std::map<int, double> exact_magnetization_distribution(const ThermoParams& params,
                                                       int max_sites = kMaxEnumerationSites);

}  // namespace phasetherm
