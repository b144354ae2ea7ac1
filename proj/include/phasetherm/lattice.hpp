#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace phasetherm {

struct Site {
  int row = 0;
  int col = 0;
  friend bool operator==(const Site&, const Site&) = default;
};

/// L x L square lattice with periodic boundaries. Sites are numbered
/// row-major, index = row * L + col.
class Lattice {
 public:
  static constexpr int kCoordination = 4;

  explicit Lattice(int side);

  int side() const { return side_; }
  int size() const { return side_ * side_; }
  int index(int row, int col) const;
  Site site(int index) const { return {index / side_, index % side_}; }

  /// Neighbours in the order up, down, left, right. On L = 2 the up and down
  /// (left and right) neighbours coincide and are both listed.
  std::span<const int, 4> neighbours(int index) const {
    return std::span<const int, 4>(neighbours_.data() + 4 * index, 4);
  }

  /// Every bond once: (i, right(i)) and (i, down(i)) for each site, K = 2 L^2.
  const std::vector<std::pair<int, int>>& bonds() const { return bonds_; }

  /// Squared minimum-image Euclidean distance.
  int distance2(Site a, Site b) const;

 private:
  int side_;
  std::vector<int> neighbours_;
  std::vector<std::pair<int, int>> bonds_;
};

/// Disk of lattice sites around `center`. Sites are ordered by their offset
/// from the center (row offset, then column offset); bit k of a cluster key
/// refers to sites[k].
struct ClusterSpec {
  Site center;
  double radius = 0.0;
  std::vector<Site> offsets;
  std::vector<int> sites;

  int size() const { return static_cast<int>(sites.size()); }
  /// Site indices of the same cluster translated to have its center at `at`.
  std::vector<int> translated(const Lattice& lattice, Site at) const;
};

ClusterSpec make_disk_cluster(const Lattice& lattice, Site center, double radius);

/// Physical parameters. Energies share the unit of J; g and omega_p are rates
/// (hbar = k_B = 1).
struct ThermoParams {
  double J = 0.25;
  double h = 0.0;
  double beta = 1.0;
  double g = 0.1;
  double omega_p = 0.0;
  int L = 20;
  ClusterSpec cluster;

  /// Lattice defaults (J = 1/4, hbar g / J = 0.4) with a disk cluster of the
  /// given radius centered at the origin.
  static ThermoParams lattice_defaults(int L, double radius, double beta = 1.0);
  void validate() const;
};

/// N spins stored as bits b_i; the spin value is 1 - 2 b_i.
class SpinConfig {
 public:
  SpinConfig() = default;
  explicit SpinConfig(int n, std::uint8_t bit = 0) : bits_(static_cast<std::size_t>(n), bit) {}
  static SpinConfig from_code(int n, std::uint64_t code);

  int size() const { return static_cast<int>(bits_.size()); }
  std::uint8_t bit(int i) const { return bits_[static_cast<std::size_t>(i)]; }
  int spin(int i) const { return 1 - 2 * bits_[static_cast<std::size_t>(i)]; }
  void flip(int i) { bits_[static_cast<std::size_t>(i)] ^= 1u; }
  void set_bit(int i, std::uint8_t b) { bits_[static_cast<std::size_t>(i)] = b; }
  SpinConfig flipped() const;

  int magnetization() const;
  std::uint64_t code() const;

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<std::uint8_t>& bits() { return bits_; }

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Sum over bonds of s_i s_j.
int bond_sum(const Lattice& lattice, const SpinConfig& config);

/// H = -J sum_<ij> s_i s_j - h sum_i s_i.
double energy(const Lattice& lattice, const SpinConfig& config, const ThermoParams& params);

/// energy(flipped at site) - energy(config).
double delta_energy(const Lattice& lattice, const SpinConfig& config, int site,
                    const ThermoParams& params);

/// Same energy written in the binary variables with adjacency Gamma_ij = -J:
/// -(2J + h) N + (2h + 8J) sum b_i + 2 b.Gamma.b. The quadratic term enters
/// with a plus sign; a minus sign would not reproduce the Hamiltonian.
double binary_form_energy(const Lattice& lattice, const SpinConfig& config,
                          const ThermoParams& params);

int cluster_magnetization(const SpinConfig& config, const ClusterSpec& cluster);
std::uint32_t cluster_key(const SpinConfig& config, const ClusterSpec& cluster);

/// Pair-bond combinatorics entering the second-order high-temperature series.
struct BondCounts {
  long K = 0;    ///< all bonds in the lattice
  long K12 = 0;  ///< bonds with both spins in the cluster
  long K22 = 0;  ///< bond doublets i-j-k, i and k inside, shared j outside
  long K23 = 0;  ///< doublets of intra-cluster bonds sharing one spin
  long K24 = 0;  ///< doublets of intra-cluster bonds sharing no spin
};

BondCounts bond_counts(const Lattice& lattice, const ClusterSpec& cluster);

}  // namespace phasetherm
