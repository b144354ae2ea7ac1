#pragma once

#include <span>
#include <string>
#include <vector>

#include "phasetherm/common.hpp"
#include "phasetherm/lattice.hpp"
#include "phasetherm/probe.hpp"

namespace phasetherm {

// ---------------------------------------------------------------------------
// Curie-Weiss model: N spins, all-to-all coupling J/N, probe coupled to all.

/// Coherence time; `infinite` marks the frozen limit f'' -> infinity.
struct DecayTime {
  double value = 0.0;
  bool infinite = false;
};

struct CwSolution {
  int N = 0;
  double m0 = 0.0;         ///< saddle-point magnetization density
  double f_pp = 0.0;       ///< f''(m0) = 1/(1 - m0^2) - J beta
  double dm0_dbeta = 0.0;  ///< by implicit differentiation of the saddle equation
  double epsilon = 0.0;    ///< 1 - beta / beta_c
  double g_tilde = 0.0;    ///< g N
  DecayTime tau;           ///< g~ tau = sqrt(N f'')
  bool critical = false;   ///< f'' < 1e-10: tau = 0, QFI singular
  int iterations = 0;
};

/// Solves tanh(J beta m0 + h beta) = m0 by Newton's method started from
/// sqrt(max(0, -3 eps)) + 1e-3 (positive branch at h = 0).
CwSolution cw_saddle_point(const ThermoParams& params, int N);

/// Thermodynamic-limit decoherence factor
/// r = exp(-i g~ t m0 - (g~ t)^2 / (2 N f'')) and its beta-derivative.
DecoherencePoint cw_decoherence_point(const CwSolution& sol, const ThermoParams& params,
                                      double t);
DecoherenceModel cw_model(const CwSolution& sol, const ThermoParams& params);

/// Closed-form QFI of the saddle-point decoherence factor:
///   S(x) (f''_beta / 2 f'')^2 + (g~ t dm0/dbeta)^2 e^{-x},  x = t^2 / tau^2,
/// with S(x) = x^2 / (e^x - 1) and f''_beta = d f''(m0(beta)) / d beta. At
/// h = 0 the first coefficient is
///   (J^2/4) [(1 - m0^2)^2 f'' - 2 m0^2]^2 / ((1 - m0^2)^4 f''^4)
/// and the second term is N J^2 (m0^2 / f'') x e^{-x}.
/// Throws DomainError when f'' < 1e-10.
double cw_qfi(const CwSolution& sol, const ThermoParams& params, double t);

/// Single-spin local Fisher information (dm0/dbeta)^2 / (1 - m0^2).
double cw_local_fi(const CwSolution& sol);

/// Which magnetization sectors the finite-N sum keeps.
enum class CwBranch {
  full,      ///< all M, Z2-symmetric at h = 0
  positive,  ///< M > 0, with M = 0 at half weight
};

/// Exact finite-N decoherence factor, sum over M of binomial weights
/// exp((J/2N) beta M^2 + (h beta - i g t) M), normalized.
DecoherenceSeries cw_exact_finite_n(const ThermoParams& params, int N,
                                    std::span<const double> t_grid,
                                    CwBranch branch = CwBranch::full);
ClusterSpectrum cw_finite_n_spectrum(const ThermoParams& params, int N,
                                     CwBranch branch = CwBranch::full);

/// S(x) = x^2 / (e^x - 1).
double s_function(double x);

// ---------------------------------------------------------------------------
// Mean-field theory for the square lattice.

struct MftSolution {
  int q = Lattice::kCoordination;
  double m0 = 0.0;
  double p1 = 0.5;  ///< single-spin excitation probability 1 / (1 + e^{2 J q m0 beta})
  double h_mft = 0.0;
  double dm0_dbeta = 0.0;
  double dp1_dbeta = 0.0;
  bool critical = false;  ///< J q beta == 1
};

MftSolution mft_solve(const ThermoParams& params);

/// Cluster decoherence factor of independent spins in the mean field, on the
/// Z_n time axis: r = [(1 - p1) e^{-igt} + p1 e^{igt}]^n.
DecoherencePoint mft_decoherence_point(const MftSolution& sol, const ThermoParams& params,
                                       double t);
DecoherenceSeries mft_decoherence(const MftSolution& sol, const ThermoParams& params,
                                  std::span<const double> t_grid);
DecoherenceModel mft_model(const MftSolution& sol, const ThermoParams& params);

/// The same factor with the binary generator sum_k b_k (phase g t per flipped
/// spin): [1 - (1 - e^{-igt}) / (1 + e^{2 J q m0 beta})]^n.
DecoherencePoint mft_decoherence_binary_form(const MftSolution& sol, const ThermoParams& params,
                                             double t);
/// Exponential approximation of the binary form, exp(n p1 (e^{-igt} - 1)).
cplx mft_exponential_approximation(const MftSolution& sol, const ThermoParams& params,
                                   double t);

// ---------------------------------------------------------------------------
// Second-order high-temperature expansion.

struct HteOptions {
  /// Validity guard on beta J; beyond it results are flagged, not refused.
  double beta_j_limit = 0.25;
};

/// r = cos^n(gt) {1 - tanh(bJ) tan^2(gt) [K12 + tanh(bJ)(K22 + K23 - tan^2(gt) K24)]}
/// and its analytic beta-derivative. Grid points within 1e-6 of a pole of
/// tan(gt) are rejected.
DecoherenceSeries hte_decoherence(const BondCounts& counts, const ThermoParams& params,
                                  std::span<const double> t_grid, const HteOptions& opts = {});
DecoherencePoint hte_decoherence_point(const BondCounts& counts, const ThermoParams& params,
                                       double t);

struct HteQfi {
  double closed_form = 0.0;  ///< tanh(bJ) ~ bJ closed form
  double functional = 0.0;   ///< qfi_from_r on hte_decoherence
  bool domain_ok = true;     ///< closed-form denominator > 0
  bool extrapolated = false; ///< beta J beyond the validity guard
};

/// F = J^2 Lambda^2 tan^4 cos^2n / (1 - [J beta Lambda tan^2 - 1]^2 cos^2n),
/// Lambda = K12 + 2 J beta [K22 + K23 - K24 tan^2].
HteQfi hte_qfi(const BondCounts& counts, const ThermoParams& params, double t,
               const HteOptions& opts = {});

/// Largest t below the first pole of tan(gt) used by the HTE optimizers.
double hte_time_limit(const ThermoParams& params);

}  // namespace phasetherm
