#include "phasetherm/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phasetherm/common.hpp"

namespace phasetherm {

Lattice::Lattice(int side) : side_(side) {
  if (side < 2) throw ConfigError("lattice side must be >= 2, got " + std::to_string(side));
  const int n = size();
  neighbours_.resize(static_cast<std::size_t>(4 * n));
  bonds_.reserve(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    const auto [row, col] = site(i);
    int* nb = neighbours_.data() + 4 * i;
    nb[0] = index(row - 1, col);
    nb[1] = index(row + 1, col);
    nb[2] = index(row, col - 1);
    nb[3] = index(row, col + 1);
    bonds_.emplace_back(i, nb[3]);
    bonds_.emplace_back(i, nb[1]);
  }
}

int Lattice::index(int row, int col) const {
  row %= side_;
  col %= side_;
  if (row < 0) row += side_;
  if (col < 0) col += side_;
  return row * side_ + col;
}

int Lattice::distance2(Site a, Site b) const {
  auto wrap = [this](int d) {
    d %= side_;
    if (d < 0) d += side_;
    return std::min(d, side_ - d);
  };
  const int dr = wrap(a.row - b.row);
  const int dc = wrap(a.col - b.col);
  return dr * dr + dc * dc;
}

std::vector<int> ClusterSpec::translated(const Lattice& lattice, Site at) const {
  std::vector<int> out;
  out.reserve(offsets.size());
  for (const auto& o : offsets) out.push_back(lattice.index(at.row + o.row, at.col + o.col));
  return out;
}

ClusterSpec make_disk_cluster(const Lattice& lattice, Site center, double radius) {
  if (!(radius >= 0.0)) throw ConfigError("cluster radius must be >= 0");
  const int L = lattice.side();
  ClusterSpec c;
  c.center = {((center.row % L) + L) % L, ((center.col % L) + L) % L};
  c.radius = radius;
  const double r2 = radius * radius + 1e-9;
  // Offsets are taken in the minimum-image window so every site appears once.
  const int lo = -(L / 2);
  const int hi = lo + L - 1;
  for (int dr = lo; dr <= hi; ++dr)
    for (int dc = lo; dc <= hi; ++dc) {
      const Site s{c.center.row + dr, c.center.col + dc};
      if (lattice.distance2(s, c.center) <= r2) c.offsets.push_back({dr, dc});
    }
  c.sites = c.translated(lattice, c.center);
  return c;
}

ThermoParams ThermoParams::lattice_defaults(int L, double radius, double beta) {
  ThermoParams p;
  p.L = L;
  p.beta = beta;
  p.cluster = make_disk_cluster(Lattice(L), {0, 0}, radius);
  return p;
}

void ThermoParams::validate() const {
  if (!(J > 0.0)) throw ConfigError("J must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (L < 2) throw ConfigError("L must be >= 2");
  if (cluster.sites.empty()) throw ConfigError("cluster must contain at least one site");
  for (int s : cluster.sites)
    if (s < 0 || s >= L * L) throw ConfigError("cluster site outside the lattice");
}

SpinConfig SpinConfig::from_code(int n, std::uint64_t code) {
  SpinConfig c(n);
  for (int i = 0; i < n; ++i) c.set_bit(i, static_cast<std::uint8_t>((code >> i) & 1u));
  return c;
}

SpinConfig SpinConfig::flipped() const {
  SpinConfig c = *this;
  for (auto& b : c.bits_) b ^= 1u;
  return c;
}

int SpinConfig::magnetization() const {
  int m = 0;
  for (auto b : bits_) m += 1 - 2 * b;
  return m;
}

std::uint64_t SpinConfig::code() const {
  std::uint64_t c = 0;
  for (std::size_t i = 0; i < bits_.size() && i < 64; ++i) c |= std::uint64_t{bits_[i]} << i;
  return c;
}

int bond_sum(const Lattice& lattice, const SpinConfig& config) {
  int s = 0;
  for (const auto& [i, j] : lattice.bonds()) s += config.spin(i) * config.spin(j);
  return s;
}

double energy(const Lattice& lattice, const SpinConfig& config, const ThermoParams& params) {
  return -params.J * bond_sum(lattice, config) - params.h * config.magnetization();
}

double delta_energy(const Lattice& lattice, const SpinConfig& config, int site,
                    const ThermoParams& params) {
  int local = 0;
  for (int nb : lattice.neighbours(site)) local += config.spin(nb);
  const int s = config.spin(site);
  const int d_bond = -2 * s * local;
  const int d_mag = -2 * s;
  return -params.J * d_bond - params.h * d_mag;
}

double binary_form_energy(const Lattice& lattice, const SpinConfig& config,
                          const ThermoParams& params) {
  long ones = 0;
  for (auto b : config.bits()) ones += b;
  // b.Gamma.b with symmetric Gamma counts every bond twice.
  long pair_ones = 0;
  for (const auto& [i, j] : lattice.bonds()) pair_ones += config.bit(i) * config.bit(j);
  const double quad = -params.J * 2.0 * static_cast<double>(pair_ones);
  const double n = lattice.size();
  return -(2.0 * params.J + params.h) * n + (2.0 * params.h + 8.0 * params.J) * ones + 2.0 * quad;
}

int cluster_magnetization(const SpinConfig& config, const ClusterSpec& cluster) {
  int z = 0;
  for (int s : cluster.sites) z += config.spin(s);
  return z;
}

std::uint32_t cluster_key(const SpinConfig& config, const ClusterSpec& cluster) {
  std::uint32_t key = 0;
  for (std::size_t k = 0; k < cluster.sites.size() && k < 32; ++k)
    key |= std::uint32_t{config.bit(cluster.sites[k])} << k;
  return key;
}

BondCounts bond_counts(const Lattice& lattice, const ClusterSpec& cluster) {
  if (2.0 * cluster.radius >= lattice.side())
    throw ConfigError("cluster wraps onto itself: need 2 * radius < L");
  std::vector<char> inside(static_cast<std::size_t>(lattice.size()), 0);
  for (int s : cluster.sites) inside[static_cast<std::size_t>(s)] = 1;

  BondCounts c;
  c.K = static_cast<long>(lattice.bonds().size());
  for (const auto& [i, j] : lattice.bonds())
    if (inside[i] && inside[j]) ++c.K12;

  // A doublet sharing spin j contributes once per pair of bonds at j whose
  // far ends are both inside the cluster.
  for (int j = 0; j < lattice.size(); ++j) {
    long in = 0;
    for (int nb : lattice.neighbours(j)) in += inside[nb];
    const long pairs = in * (in - 1) / 2;
    (inside[j] ? c.K23 : c.K22) += pairs;
  }
  c.K24 = c.K12 * (c.K12 - 1) / 2 - c.K23;
  return c;
}

}  // namespace phasetherm
