#include "phasetherm/enumerate.hpp"

#include <bit>
#include <string>

namespace phasetherm {

namespace {

struct VisitState {
  std::uint64_t code;
  int bond_sum;
  int magnetization;
  int cluster_z;
  std::uint32_t cluster_key;
};

// Walks all 2^N configurations in Gray-code order, updating the bond sum,
// magnetization and cluster observables incrementally. `visit` receives the
// state and the Boltzmann weight relative to the exact ground-state energy.
template <class Visitor>
void gray_sweep(const ThermoParams& params, int max_sites, Visitor&& visit) {
  params.validate();
  const Lattice lattice(params.L);
  const int n = lattice.size();
  if (n > max_sites)
    throw ConfigError("enumeration of " + std::to_string(n) + " sites exceeds the cap of " +
                      std::to_string(max_sites));

  std::vector<int> cluster_bit(static_cast<std::size_t>(n), -1);
  for (int k = 0; k < params.cluster.size(); ++k) cluster_bit[params.cluster.sites[k]] = k;

  SpinConfig config(n);
  VisitState st{0, bond_sum(lattice, config), n, params.cluster.size(), 0};
  // All spins aligned with the field minimise -J B - h M.
  const double e0 =
      -params.J * static_cast<double>(lattice.bonds().size()) - std::abs(params.h) * n;
  auto weight = [&](const VisitState& s) {
    const double e = -params.J * s.bond_sum - params.h * s.magnetization;
    return std::exp(-params.beta * (e - e0));
  };

  visit(st, weight(st));
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < total; ++k) {
    const int site = std::countr_zero(k);
    int local = 0;
    for (int nb : lattice.neighbours(site)) local += config.spin(nb);
    const int s = config.spin(site);
    st.bond_sum -= 2 * s * local;
    st.magnetization -= 2 * s;
    config.flip(site);
    st.code ^= std::uint64_t{1} << site;
    if (const int kb = cluster_bit[site]; kb >= 0) {
      st.cluster_z -= 2 * s;
      st.cluster_key ^= std::uint32_t{1} << kb;
    }
    visit(st, weight(st));
  }
}

double state_energy(const ThermoParams& p, const VisitState& s) {
  return -p.J * s.bond_sum - p.h * s.magnetization;
}

double ground_energy(const ThermoParams& p) {
  const double n = static_cast<double>(p.L) * p.L;
  return -p.J * 2.0 * n - std::abs(p.h) * n;
}

}  // namespace

ExactGibbs enumerate_gibbs(const ThermoParams& params, int max_sites) {
  ExactGibbs out;
  out.n_sites = params.L * params.L;
  if (out.n_sites <= max_sites) out.probs.resize(std::size_t{1} << out.n_sites);
  CompensatedSum<double> z, ez;
  gray_sweep(params, max_sites, [&](const VisitState& s, double w) {
    out.probs[s.code] = w;
    z += w;
    ez += w * state_energy(params, s);
  });
  const double zsum = z.value();
  for (auto& p : out.probs) p /= zsum;
  out.log_partition = std::log(zsum) - params.beta * ground_energy(params);
  out.mean_energy = ez.value() / zsum;
  return out;
}

ClusterSpectrum exact_cluster_spectrum(const ThermoParams& params, int max_sites) {
  const int n = params.cluster.size();
  std::vector<CompensatedSum<double>> p(static_cast<std::size_t>(n + 1)), a(p.size());
  CompensatedSum<double> z;
  gray_sweep(params, max_sites, [&](const VisitState& s, double w) {
    const auto k = static_cast<std::size_t>(ClusterSpectrum::index_of(n, s.cluster_z));
    p[k] += w;
    a[k] += w * state_energy(params, s);
    z += w;
  });
  ClusterSpectrum out;
  out.n = n;
  for (std::size_t k = 0; k < p.size(); ++k) {
    out.prob.push_back(p[k].value() / z.value());
    out.energy_weighted.push_back(a[k].value() / z.value());
  }
  return out;
}

DecoherenceSeries exact_decoherence(const ThermoParams& params, std::span<const double> t_grid,
                                    int max_sites) {
  const ClusterSpectrum spec = exact_cluster_spectrum(params, max_sites);
  DecoherenceSeries out;
  out.beta = params.beta;
  out.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out.t[i] = t_grid[i];
    const auto pt = spec.evaluate(params.g, t_grid[i]);
    out.r[i] = pt.r;
    out.dr[i] = pt.dr;
  }
  return out;
}

ClusterMarginal exact_cluster_marginal(const ThermoParams& params, int max_sites) {
  const int n = params.cluster.size();
  if (n > 24) throw ConfigError("cluster too large for a dense exact marginal");
  std::vector<CompensatedSum<double>> p(std::size_t{1} << n), a(p.size());
  CompensatedSum<double> z;
  gray_sweep(params, max_sites, [&](const VisitState& s, double w) {
    p[s.cluster_key] += w;
    a[s.cluster_key] += w * state_energy(params, s);
    z += w;
  });
  ClusterMarginal out;
  out.n = n;
  for (std::uint32_t key = 0; key < p.size(); ++key) {
    const double pk = p[key].value() / z.value();
    if (pk == 0.0) continue;
    out.probs[key] = pk;
    out.energy_weighted[key] = a[key].value() / z.value();
  }
  return out;
}

std::map<int, double> exact_magnetization_distribution(const ThermoParams& params,
                                                       int max_sites) {
  std::map<int, CompensatedSum<double>> acc;
  CompensatedSum<double> z;
  gray_sweep(params, max_sites, [&](const VisitState& s, double w) {
    acc[s.magnetization] += w;
    z += w;
  });
  std::map<int, double> out;
  for (const auto& [m, w] : acc) out[m] = w.value() / z.value();
  return out;
}

}  // namespace phasetherm
