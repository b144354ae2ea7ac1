#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasetherm {

using cplx = std::complex<double>;

/// Invalid user input: parameters, grids, configuration files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation left the domain where it is defined (expansion broken,
/// non-convergence, |r| > 1 from a bad estimator, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exact critical inverse temperature of the square-lattice Ising model,
/// ln(1 + sqrt 2) / (2 J).
inline double onsager_beta_c(double J) { return std::log(1.0 + std::sqrt(2.0)) / (2.0 * J); }

/// Critical inverse temperature of the Curie-Weiss model, J beta_c = 1.
inline double curie_weiss_beta_c(double J) { return 1.0 / J; }

/// Neumaier compensated summation.
template <class T>
class CompensatedSum {
 public:
  void add(T x) {
    T t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(T x) {
    add(x);
    return *this;
  }
  T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

template <>
inline void CompensatedSum<cplx>::add(cplx x) {
  // Real and imaginary parts are compensated independently.
  auto step = [](double& s, double& c, double v) {
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  };
  double sr = sum_.real(), si = sum_.imag(), cr = comp_.real(), ci = comp_.imag();
  step(sr, cr, x.real());
  step(si, ci, x.imag());
  sum_ = {sr, si};
  comp_ = {cr, ci};
}

/// Decoherence factor and its inverse-temperature derivative at one time.
struct DecoherencePoint {
  cplx r{1.0, 0.0};
  cplx dr{0.0, 0.0};
};

/// r(t, beta) and d_beta r(t, beta) on a time grid. Standard errors are stored
/// per component (real part in .real(), imaginary part in .imag()); analytic
/// and exact sources leave them at zero.
struct DecoherenceSeries {
  std::vector<double> t;
  std::vector<cplx> r;
  std::vector<cplx> dr;
  std::vector<cplx> se_r;
  std::vector<cplx> se_dr;
  double beta = 0.0;
  std::vector<std::string> flags;

  std::size_t size() const { return t.size(); }
  void resize(std::size_t n) {
    t.resize(n);
    r.resize(n);
    dr.resize(n);
    se_r.assign(n, cplx{});
    se_dr.assign(n, cplx{});
  }
  DecoherencePoint at(std::size_t i) const { return {r[i], dr[i]}; }
};

/// Probability table over the configurations b' of the n cluster spins, and
/// its energy-weighted companion sum_{b''} E(b) p(b). Bit k of a key is the
/// binary value of the k-th cluster site.
struct ClusterMarginal {
  int n = 0;
  std::map<std::uint32_t, double> probs;
  std::map<std::uint32_t, double> energy_weighted;
};

/// Distribution of the cluster magnetization Z_n = -n, -n+2, ..., n together
/// with the energy-weighted sums A(Z) = sum_{b: Z_n(b)=Z} E(b) p(b). This is
/// everything r(t) and d_beta r(t) depend on, at any t.
struct ClusterSpectrum {
  int n = 0;
  std::vector<double> prob;             ///< index k <-> Z = 2k - n
  std::vector<double> energy_weighted;  ///< same indexing

  static int magnetization_of(int n, int k) { return 2 * k - n; }
  static int index_of(int n, int z) { return (z + n) / 2; }

  double mean_energy() const;
  /// r = sum_Z p(Z) e^{-i g t Z}, d_beta r = -sum_Z A(Z) e^{-i g t Z} + <E> r.
  /// Z and -Z terms are combined pairwise so a Z2-symmetric table gives an
  /// exactly real result.
  DecoherencePoint evaluate(double g, double t) const;
};

/// Fisher information of measuring the cluster configuration directly,
/// sum_b' (d_beta p_n)^2 / p_n with d_beta p_n = -A(b') + p_n <H>.
double marginal_fisher_information(const ClusterMarginal& m);

/// Evenly spaced grid with `count` points on [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace phasetherm
