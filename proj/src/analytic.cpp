#include "phasetherm/analytic.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace phasetherm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCriticalCurvature = 1e-10;

double sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

// d f''(m0(beta)) / d beta for f'' = 1/(1 - m^2) - J beta.
double cw_fpp_beta(const CwSolution& sol, double J) {
  const double one_m2 = 1.0 - sol.m0 * sol.m0;
  return 2.0 * sol.m0 * sol.dm0_dbeta / (one_m2 * one_m2) - J;
}

}  // namespace

double s_function(double x) {
  if (x == 0.0) return 0.0;
  return x * x / std::expm1(x);
}

CwSolution cw_saddle_point(const ThermoParams& params, int N) {
  if (N < 1) throw ConfigError("Curie-Weiss N must be >= 1");
  if (!(params.J > 0.0)) throw ConfigError("J must be > 0");
  if (!(params.beta >= 0.0)) throw ConfigError("beta must be >= 0");
  const double J = params.J, h = params.h, beta = params.beta;

  CwSolution sol;
  sol.N = N;
  sol.epsilon = 1.0 - beta / curie_weiss_beta_c(J);
  sol.g_tilde = params.g * N;

  if (h == 0.0 && J * beta <= 1.0) {
    sol.m0 = 0.0;
  } else {
    double m = std::sqrt(std::max(0.0, -3.0 * sol.epsilon)) + 1e-3;
    if (h < 0.0) m = -m;
    m = std::clamp(m, -1.0 + 1e-15, 1.0 - 1e-15);
    bool converged = false;
    for (int it = 1; it <= 200; ++it) {
      sol.iterations = it;
      const double arg = J * beta * m + h * beta;
      const double f = std::tanh(arg) - m;
      const double fp = J * beta * sech2(arg) - 1.0;
      double next = m - f / fp;
      // Keep the iterate inside the open interval.
      if (!(next > -1.0 && next < 1.0)) next = 0.5 * (m + (next >= 1.0 ? 1.0 : -1.0));
      const double step = std::abs(next - m);
      m = next;
      if (step < 1e-15 || std::abs(std::tanh(J * beta * m + h * beta) - m) < 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged) throw DomainError("Curie-Weiss saddle point did not converge in 200 steps");
    // Deep in the ordered phase tanh rounds to +-1, which is then the exact fixed point.
    const double saturated = std::tanh(J * beta * m + h * beta);
    if (std::abs(saturated) == 1.0) m = saturated;
    sol.m0 = m;
  }

  const double one_m2 = 1.0 - sol.m0 * sol.m0;
  if (one_m2 <= 0.0) {
    // Frozen: m0 == 1 in floating point.
    sol.f_pp = kInf;
    sol.dm0_dbeta = 0.0;
    sol.tau = {0.0, true};
    return sol;
  }
  sol.f_pp = 1.0 / one_m2 - J * beta;
  if (sol.f_pp < kCriticalCurvature) {
    sol.critical = true;
    sol.dm0_dbeta = 0.0;
    sol.tau = {0.0, false};
    return sol;
  }
  sol.dm0_dbeta = (J * sol.m0 + h) / sol.f_pp;
  sol.tau = {std::sqrt(N * sol.f_pp) / sol.g_tilde, false};
  return sol;
}

DecoherencePoint cw_decoherence_point(const CwSolution& sol, const ThermoParams& params,
                                      double t) {
  const double theta = sol.g_tilde * t;
  const cplx phase = std::polar(1.0, -theta * sol.m0);
  if (std::isinf(sol.f_pp)) return {phase, cplx{}};
  if (sol.critical) return {t == 0.0 ? phase : cplx{}, cplx{}};
  const double N = sol.N;
  const double fpp_b = cw_fpp_beta(sol, params.J);
  const cplx r = phase * std::exp(-theta * theta / (2.0 * N * sol.f_pp));
  const cplx a_prime{theta * theta * fpp_b / (2.0 * N * sol.f_pp * sol.f_pp),
                     -theta * sol.dm0_dbeta};
  return {r, r * a_prime};
}

DecoherenceModel cw_model(const CwSolution& sol, const ThermoParams& params) {
  return [sol, params](double t) { return cw_decoherence_point(sol, params, t); };
}

double cw_qfi(const CwSolution& sol, const ThermoParams& params, double t) {
  if (std::isinf(sol.f_pp)) return 0.0;
  if (sol.critical || sol.f_pp < kCriticalCurvature)
    throw DomainError("Curie-Weiss QFI is singular at the critical point");
  const double theta = sol.g_tilde * t;
  const double x = theta * theta / (sol.N * sol.f_pp);
  const double c1 = cw_fpp_beta(sol, params.J) / (2.0 * sol.f_pp);
  const double c2 = theta * sol.dm0_dbeta;
  return s_function(x) * c1 * c1 + c2 * c2 * std::exp(-x);
}

double cw_local_fi(const CwSolution& sol) {
  if (std::isinf(sol.f_pp)) return 0.0;
  if (sol.critical) return sol.m0 == 0.0 ? 0.0 : kInf;
  return sol.dm0_dbeta * sol.dm0_dbeta / (1.0 - sol.m0 * sol.m0);
}

ClusterSpectrum cw_finite_n_spectrum(const ThermoParams& params, int N, CwBranch branch) {
  if (N < 1 || N > 10000) throw ConfigError("Curie-Weiss finite-N sum needs 1 <= N <= 10^4");
  if (!(params.beta >= 0.0)) throw ConfigError("beta must be >= 0");
  const double J = params.J, h = params.h, beta = params.beta;
  const auto size = static_cast<std::size_t>(N + 1);
  std::vector<double> logw(size), energy(size), half(size, 1.0);
  double lmax = -kInf;
  for (int k = 0; k <= N; ++k) {
    const double M = 2.0 * k - N;
    const double e = -J / (2.0 * N) * M * M - h * M;
    logw[k] = std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0) - beta * e;
    energy[k] = e;
    if (branch == CwBranch::positive) {
      if (M < 0.0) half[k] = 0.0;
      if (M == 0.0) half[k] = 0.5;
    }
    if (half[k] > 0.0) lmax = std::max(lmax, logw[k]);
  }
  CompensatedSum<double> z;
  std::vector<double> w(size);
  for (std::size_t k = 0; k < size; ++k) {
    w[k] = half[k] * std::exp(logw[k] - lmax);
    z += w[k];
  }
  ClusterSpectrum spec;
  spec.n = N;
  spec.prob.resize(size);
  spec.energy_weighted.resize(size);
  for (std::size_t k = 0; k < size; ++k) {
    spec.prob[k] = w[k] / z.value();
    spec.energy_weighted[k] = spec.prob[k] * energy[k];
  }
  return spec;
}

DecoherenceSeries cw_exact_finite_n(const ThermoParams& params, int N,
                                    std::span<const double> t_grid, CwBranch branch) {
  const ClusterSpectrum spec = cw_finite_n_spectrum(params, N, branch);
  DecoherenceSeries out;
  out.beta = params.beta;
  out.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out.t[i] = t_grid[i];
    const auto p = spec.evaluate(params.g, t_grid[i]);
    out.r[i] = p.r;
    out.dr[i] = p.dr;
  }
  return out;
}

// ---------------------------------------------------------------------------

MftSolution mft_solve(const ThermoParams& params) {
  if (params.h != 0.0) throw ConfigError("mean-field path requires h = 0");
  if (!(params.J > 0.0)) throw ConfigError("J must be > 0");
  if (!(params.beta >= 0.0)) throw ConfigError("beta must be >= 0");
  MftSolution sol;
  const double Jq = params.J * sol.q;
  const double a = Jq * params.beta;
  if (std::abs(a - 1.0) < 1e-12) sol.critical = true;
  if (a > 1.0) {
    // From m = 1 Newton descends monotonically onto the positive root.
    double m = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double f = std::tanh(a * m) - m;
      const double fp = a * sech2(a * m) - 1.0;
      const double next = m - f / fp;
      if (std::abs(next - m) < 1e-16) {
        m = next;
        break;
      }
      m = next;
    }
    sol.m0 = m;
  }
  const double s = 1.0 - sol.m0 * sol.m0;
  sol.p1 = 1.0 / (1.0 + std::exp(2.0 * a * sol.m0));
  sol.h_mft = Jq * sol.m0;
  sol.dm0_dbeta = sol.m0 == 0.0 ? 0.0 : Jq * sol.m0 * s / (1.0 - a * s);
  sol.dp1_dbeta =
      -2.0 * sol.p1 * (1.0 - sol.p1) * Jq * (sol.m0 + params.beta * sol.dm0_dbeta);
  return sol;
}

DecoherencePoint mft_decoherence_point(const MftSolution& sol, const ThermoParams& params,
                                       double t) {
  const int n = params.cluster.size();
  const double gt = params.g * t;
  const cplx em = std::polar(1.0, -gt), ep = std::polar(1.0, gt);
  const cplx phi = (1.0 - sol.p1) * em + sol.p1 * ep;
  const cplx phi_nm1 = n >= 1 ? std::pow(phi, n - 1) : cplx{1.0, 0.0};
  const cplx dphi = sol.dp1_dbeta * (ep - em);
  return {phi_nm1 * phi, static_cast<double>(n) * phi_nm1 * dphi};
}

DecoherenceSeries mft_decoherence(const MftSolution& sol, const ThermoParams& params,
                                  std::span<const double> t_grid) {
  return sample_model(mft_model(sol, params), t_grid, params.beta);
}

DecoherenceModel mft_model(const MftSolution& sol, const ThermoParams& params) {
  return [sol, params](double t) { return mft_decoherence_point(sol, params, t); };
}

DecoherencePoint mft_decoherence_binary_form(const MftSolution& sol, const ThermoParams& params,
                                             double t) {
  const int n = params.cluster.size();
  const cplx u = 1.0 - std::polar(1.0, -params.g * t);
  const cplx phi = 1.0 - sol.p1 * u;
  const cplx phi_nm1 = std::pow(phi, n - 1);
  return {phi_nm1 * phi, static_cast<double>(n) * phi_nm1 * (-sol.dp1_dbeta * u)};
}

cplx mft_exponential_approximation(const MftSolution& sol, const ThermoParams& params,
                                   double t) {
  const int n = params.cluster.size();
  return std::exp(static_cast<double>(n) * sol.p1 * (std::polar(1.0, -params.g * t) - 1.0));
}

// ---------------------------------------------------------------------------

namespace {

void check_pole(double gt) {
  const double d = std::remainder(gt - std::numbers::pi / 2.0, std::numbers::pi);
  if (std::abs(d) < 1e-6)
    throw ConfigError("HTE time grid point within 1e-6 of a pole of tan(gt)");
}

}  // namespace

DecoherencePoint hte_decoherence_point(const BondCounts& counts, const ThermoParams& params,
                                       double t) {
  const double gt = params.g * t;
  check_pole(gt);
  const int n = params.cluster.size();
  const double c = std::cos(gt), T = std::tan(gt), T2 = T * T;
  const double bj = params.beta * params.J;
  const double th = std::tanh(bj);
  const double x = static_cast<double>(counts.K22 + counts.K23) - T2 * counts.K24;
  const double cn = std::pow(c, n);
  const double r = cn * (1.0 - th * T2 * (counts.K12 + th * x));
  const double dr = -cn * T2 * params.J * sech2(bj) * (counts.K12 + 2.0 * th * x);
  return {cplx{r, 0.0}, cplx{dr, 0.0}};
}

DecoherenceSeries hte_decoherence(const BondCounts& counts, const ThermoParams& params,
                                  std::span<const double> t_grid, const HteOptions& opts) {
  DecoherenceSeries out;
  out.beta = params.beta;
  out.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out.t[i] = t_grid[i];
    const auto p = hte_decoherence_point(counts, params, t_grid[i]);
    out.r[i] = p.r;
    out.dr[i] = p.dr;
  }
  if (params.beta * params.J > opts.beta_j_limit) out.flags.push_back("extrapolated");
  return out;
}

HteQfi hte_qfi(const BondCounts& counts, const ThermoParams& params, double t,
               const HteOptions& opts) {
  HteQfi out;
  out.extrapolated = params.beta * params.J > opts.beta_j_limit;
  const auto p = hte_decoherence_point(counts, params, t);
  if (t == 0.0) return out;
  out.functional = qfi_from_r(p.r, p.dr);

  const int n = params.cluster.size();
  const double gt = params.g * t;
  const double T2 = std::tan(gt) * std::tan(gt);
  const double c2n = std::pow(std::cos(gt), 2 * n);
  const double jb = params.J * params.beta;
  const double lambda =
      counts.K12 + 2.0 * jb * (static_cast<double>(counts.K22 + counts.K23) - counts.K24 * T2);
  const double q = jb * lambda * T2 - 1.0;
  const double den = 1.0 - q * q * c2n;
  const double num = params.J * params.J * lambda * lambda * T2 * T2 * c2n;
  if (!(den > 0.0)) {
    out.domain_ok = false;
    out.closed_form = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.closed_form = num / den;
  return out;
}

double hte_time_limit(const ThermoParams& params) {
  return (std::numbers::pi / 2.0) * (1.0 - 1e-4) / params.g;
}

}  // namespace phasetherm
