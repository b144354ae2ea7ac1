#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasetherm/common.hpp"

namespace phasetherm {

/// Qubit probe state [[p, c], [c*, 1 - p]].
struct ProbeState {
  double p = 0.5;
  cplx c{0.5, 0.0};

  /// The |+> state, p = c = 1/2.
  static ProbeState plus() { return {}; }
  void validate() const;
  Eigen::Matrix2cd density() const;
};

/// Pure dephasing: populations are untouched, the coherence picks up
/// e^{-i omega_p t} r.
ProbeState evolve_probe(const ProbeState& initial, cplx r, double omega_p, double t);

/// Free induction decay <sigma_x> of a |+> probe in the rotating frame.
inline double fid(cplx r) { return r.real(); }

/// QFI on beta of the dephased |+> probe,
///   (4|dr|^2 + [r* dr - r dr*]^2) / (4 (1 - |r|^2)),
/// evaluated as |dr|^2 + Re(r* dr)^2 / (1 - |r|^2), the same expression
/// without the cancellation near |r| = 1. Returns 0 for r = 1, dr = 0 and a
/// quiet NaN when |r| exceeds 1 by more than `tolerance` or |r| = 1 with
/// nonzero dr (limit left to the caller).
double qfi_from_r(cplx r, cplx dr, double tolerance = 1e-9);

/// QFI from the eigenbasis expansion 2 sum |<m|drho|n>|^2 / (rho_n + rho_m),
/// dropping pairs with rho_n + rho_m < 1e-14. Throws ConfigError on
/// non-Hermitian input.
double qfi_sld_oracle(const Eigen::Matrix2cd& rho, const Eigen::Matrix2cd& drho);

/// Probe density matrix and its beta-derivative for given (r, d_beta r),
/// |+> initial state, omega_p = 0.
std::pair<Eigen::Matrix2cd, Eigen::Matrix2cd> probe_state_from_r(cplx r, cplx dr);

/// First-order error propagation of independent component errors through
/// qfi_from_r.
double qfi_standard_error(cplx r, cplx dr, cplx se_r, cplx se_dr);

using DecoherenceModel = std::function<DecoherencePoint(double t)>;

struct QfiCurve {
  std::vector<double> t;
  std::vector<double> qfi;
  std::vector<double> qfi_se;
  double beta = 0.0;
  double t_opt = 0.0;
  double qfi_opt = 0.0;
  double qfi_opt_se = 0.0;
  bool boundary_warning = false;
  std::vector<std::size_t> extrapolated;  ///< grid points where |r| = 1 at t > 0
  std::vector<std::string> warnings;

  /// beta^2 F_opt, the dimensionless precision bound.
  double scaled_opt() const { return beta * beta * qfi_opt; }
};

/// Pointwise QFI along a series, with |r| = 1 revival points at t > 0 filled
/// by one-sided quadratic extrapolation.
QfiCurve qfi_curve(const DecoherenceSeries& series);

/// Grid argmax refined on the interpolating polynomial through up to five
/// grid points around it (series carry no model to re-evaluate).
QfiCurve optimize_qfi(const DecoherenceSeries& series);

/// Grid argmax refined by golden-section search on the bracketing interval,
/// re-evaluating the model.
QfiCurve optimize_qfi(const DecoherenceModel& model, std::span<const double> t_grid,
                      double beta);

/// Same grid scan + golden-section refinement for an arbitrary QFI-like
/// function of time (closed forms that do not go through r).
QfiCurve optimize_function(const std::function<double(double)>& f,
                           std::span<const double> t_grid, double beta);

DecoherenceSeries sample_model(const DecoherenceModel& model, std::span<const double> t_grid,
                               double beta);

/// Time where |r| first falls to `level`, linearly interpolated on a scan of
/// (0, t_max]; nullopt when it never does.
std::optional<double> coherence_time(const DecoherenceModel& model, double t_max,
                                     double level, std::size_t scan_points = 4000);

/// `points` grid points on [0, min(6 tau, t_cap)] with tau the 1/e time of
/// |r|; the full [0, t_cap] when |r| never decays to 1/e.
std::vector<double> default_time_grid(const DecoherenceModel& model, double t_cap,
                                      std::size_t points = 400);

/// Fisher information on temperature from that on beta (k_B = 1):
/// F_T = beta^4 F_beta, so T^2 F_T = beta^2 F_beta.
double reparametrize(double F_beta, double beta);

}  // namespace phasetherm
