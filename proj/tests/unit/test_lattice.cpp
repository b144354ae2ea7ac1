#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "phasetherm/common.hpp"
#include "phasetherm/lattice.hpp"

using namespace phasetherm;

namespace {

ThermoParams params_for(int L, double radius = 0.0) {
  return ThermoParams::lattice_defaults(L, radius, 1.0);
}

SpinConfig checkerboard(const Lattice& lat) {
  SpinConfig c(lat.size());
  for (int i = 0; i < lat.size(); ++i) {
    Site s = lat.site(i);
    c.set_bit(i, static_cast<std::uint8_t>((s.row + s.col) % 2));
  }
  return c;
}

// Independent doublet classifier: walks every unordered pair of bonds.
BondCounts brute_force_counts(const Lattice& lat, const ClusterSpec& cluster) {
  std::set<int> inside(cluster.sites.begin(), cluster.sites.end());
  const auto& bonds = lat.bonds();
  BondCounts k;
  k.K = static_cast<long>(bonds.size());
  auto in = [&](int s) { return inside.count(s) > 0; };
  for (const auto& [a, b] : bonds)
    if (in(a) && in(b)) ++k.K12;
  for (std::size_t x = 0; x < bonds.size(); ++x) {
    for (std::size_t y = x + 1; y < bonds.size(); ++y) {
      auto [a, b] = bonds[x];
      auto [c, d] = bonds[y];
      std::set<int> ends{a, b, c, d};
      bool intra_x = in(a) && in(b);
      bool intra_y = in(c) && in(d);
      if (intra_x && intra_y) {
        if (ends.size() == 3) ++k.K23;
        if (ends.size() == 4) ++k.K24;
        continue;
      }
      if (ends.size() != 3) continue;
      int shared = (a == c || a == d) ? a : b;
      int p = (a == shared) ? b : a;
      int q = (c == shared) ? d : c;
      if (!in(shared) && in(p) && in(q)) ++k.K22;
    }
  }
  return k;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("lattice rejects side below two") {
  CHECK_THROWS_AS(Lattice(1), ConfigError);
  CHECK_THROWS_AS(Lattice(0), ConfigError);
}

TEST_CASE("bond count is two per site") {
  for (int L : {2, 4, 20}) {
    Lattice lat(L);
    CHECK(lat.size() == L * L);
    CHECK(lat.bonds().size() == static_cast<std::size_t>(2 * L * L));
    std::vector<int> degree(static_cast<std::size_t>(lat.size()), 0);
    for (auto [a, b] : lat.bonds()) {
      ++degree[static_cast<std::size_t>(a)];
      ++degree[static_cast<std::size_t>(b)];
    }
    for (int d : degree) CHECK(d == 4);
  }
}

TEST_CASE("L=2 keeps both wrap-around bonds") {
  Lattice lat(2);
  auto nb = lat.neighbours(0);
  CHECK(nb[0] == nb[1]);
  CHECK(nb[2] == nb[3]);
  int count_01 = 0;
  for (auto [a, b] : lat.bonds())
    if ((a == 0 && b == 1) || (a == 1 && b == 0)) ++count_01;
  CHECK(count_01 == 2);
}

TEST_CASE("row-major indexing with wrap") {
  Lattice lat(5);
  CHECK(lat.index(0, 0) == 0);
  CHECK(lat.index(1, 2) == 7);
  CHECK(lat.index(-1, 0) == 20);
  CHECK(lat.index(0, 5) == 0);
  CHECK(lat.site(7) == Site{1, 2});
  CHECK(lat.distance2({0, 0}, {4, 4}) == 2);
}

TEST_CASE("reference energies on L=4") {
  Lattice lat(4);
  ThermoParams p = params_for(4);
  const double J = p.J;
  SpinConfig up(16);
  CHECK(energy(lat, up, p) == doctest::Approx(-32 * J));
  CHECK(energy(lat, checkerboard(lat), p) == doctest::Approx(32 * J));
  SpinConfig one = up;
  one.flip(5);
  CHECK(energy(lat, one, p) == doctest::Approx(-32 * J + 8 * J));
}

TEST_CASE("delta_energy on simple configurations") {
  Lattice lat(4);
  ThermoParams p = params_for(4);
  SpinConfig up(16);
  for (int i = 0; i < 16; ++i) CHECK(delta_energy(lat, up, i, p) == doctest::Approx(8 * p.J));

  SpinConfig c(16);
  auto nb = lat.neighbours(5);
  c.flip(nb[0]);
  c.flip(nb[2]);
  CHECK(delta_energy(lat, c, 5, p) == 0.0);
}

TEST_CASE("delta_energy matches full recomputation") {
  Lattice lat(6);
  ThermoParams p = params_for(6);
  p.J = 1.0;  // integer energies, so equality is exact
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> bit(0, 1), site(0, lat.size() - 1);
  for (int trial = 0; trial < 1000; ++trial) {
    SpinConfig c(lat.size());
    for (int i = 0; i < lat.size(); ++i) c.set_bit(i, static_cast<std::uint8_t>(bit(gen)));
    int s = site(gen);
    SpinConfig f = c;
    f.flip(s);
    CHECK(delta_energy(lat, c, s, p) == energy(lat, f, p) - energy(lat, c, p));
  }
}

TEST_CASE("energy is flip invariant at zero field") {
  Lattice lat(5);
  ThermoParams p = params_for(5);
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    SpinConfig c = SpinConfig::from_code(25, gen() & ((1ull << 25) - 1));
    CHECK(energy(lat, c, p) == doctest::Approx(energy(lat, c.flipped(), p)));
  }
}

TEST_CASE("binary form agrees with the Hamiltonian") {
  Lattice lat(4);
  ThermoParams p = params_for(4);
  p.h = 0.3;
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    SpinConfig c = SpinConfig::from_code(16, gen() & 0xffff);
    CHECK(binary_form_energy(lat, c, p) == doctest::Approx(energy(lat, c, p)).epsilon(1e-12));
  }
}

TEST_CASE("magnetization has the parity of N") {
  SpinConfig c = SpinConfig::from_code(9, 0b101100111);
  CHECK(c.magnetization() == 9 - 2 * 6);
  CHECK(c.code() == 0b101100111u);
  CHECK(SpinConfig::from_code(9, c.code()) == c);
}

TEST_CASE("disk clusters hit the expected sizes") {
  Lattice lat(20);
  const std::vector<std::pair<double, int>> table{
      {0.0, 1}, {1.0, 5}, {std::sqrt(2.0), 9}, {2.0, 13}, {std::sqrt(5.0), 21}, {std::sqrt(8.0), 25}};
  for (auto [r, n] : table) CHECK(make_disk_cluster(lat, {0, 0}, r).size() == n);
  CHECK_THROWS_AS(make_disk_cluster(lat, {0, 0}, -1.0), ConfigError);
}

TEST_CASE("cluster translation keeps the shape") {
  Lattice lat(8);
  ClusterSpec c = make_disk_cluster(lat, {0, 0}, 1.0);
  auto moved = c.translated(lat, {7, 7});
  std::set<int> got(moved.begin(), moved.end());
  std::set<int> want{lat.index(7, 7), lat.index(6, 7), lat.index(0, 7), lat.index(7, 6),
                     lat.index(7, 0)};
  CHECK(got == want);
}

TEST_CASE("cluster magnetization") {
  Lattice lat(10);
  ClusterSpec c = make_disk_cluster(lat, {5, 5}, 2.0);
  SpinConfig up(100);
  CHECK(cluster_magnetization(up, c) == 13);
  SpinConfig down(100, 1);
  CHECK(cluster_magnetization(down, c) == -13);

  ClusterSpec c9 = make_disk_cluster(lat, {4, 4}, std::sqrt(2.0));
  SpinConfig cb = checkerboard(lat);
  int direct = 0;
  for (int s : c9.sites) direct += cb.spin(s);
  CHECK(cluster_magnetization(cb, c9) == direct);
  CHECK(direct == 1);  // center (even) plus 4 diagonals are +1, 4 edges are -1
}

TEST_CASE("cluster key bits follow site order") {
  Lattice lat(6);
  ClusterSpec c = make_disk_cluster(lat, {2, 2}, 1.0);
  SpinConfig s(36);
  s.flip(c.sites[3]);
  CHECK(cluster_key(s, c) == (1u << 3));
}

TEST_CASE("bond counts of the radius-2 disk") {
  Lattice lat(20);
  BondCounts k = bond_counts(lat, make_disk_cluster(lat, {10, 10}, 2.0));
  CHECK(k.K == 800);
  CHECK(k.K12 == 16);
  CHECK(k.K22 == 8);
  CHECK(k.K23 == 34);
  CHECK(k.K24 == 86);
}

TEST_CASE("bond counts of a single site are zero") {
  Lattice lat(8);
  BondCounts k = bond_counts(lat, make_disk_cluster(lat, {0, 0}, 0.0));
  CHECK(k.K12 == 0);
  CHECK(k.K22 == 0);
  CHECK(k.K23 == 0);
  CHECK(k.K24 == 0);
}

TEST_CASE("bond counts agree with the brute-force classifier") {
  Lattice lat(12);
  for (double r : {0.0, 1.0, std::sqrt(2.0), 2.0, std::sqrt(5.0), std::sqrt(8.0)}) {
    ClusterSpec c = make_disk_cluster(lat, {3, 4}, r);
    BondCounts fast = bond_counts(lat, c);
    BondCounts slow = brute_force_counts(lat, c);
    CAPTURE(r);
    CHECK(fast.K == slow.K);
    CHECK(fast.K12 == slow.K12);
    CHECK(fast.K22 == slow.K22);
    CHECK(fast.K23 == slow.K23);
    CHECK(fast.K24 == slow.K24);
    CHECK(fast.K24 == fast.K12 * (fast.K12 - 1) / 2 - fast.K23);
  }
}

TEST_CASE("bond counts refuse self-overlapping clusters") {
  Lattice lat(4);
  CHECK_THROWS_AS(bond_counts(lat, make_disk_cluster(lat, {0, 0}, 2.0)), ConfigError);
}

TEST_CASE("parameter validation") {
  ThermoParams p = params_for(4, 1.0);
  CHECK_NOTHROW(p.validate());
  p.J = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = params_for(4, 1.0);
  p.beta = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(params_for(20).g == doctest::Approx(0.1));
}

}  // TEST_SUITE
