#include <doctest.h>

#include <random>

#include "phasetherm/enumerate.hpp"
#include "phasetherm/probe.hpp"

using namespace phasetherm;

namespace {

// Random dephasing state: |r| <= 0.95, arbitrary phase and derivative.
std::pair<cplx, cplx> random_pair(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-3.0, 3.0);
  const double mod = 0.95 * std::sqrt(u(gen));
  const double ph = 2.0 * M_PI * u(gen);
  return {std::polar(mod, ph), cplx{s(gen), s(gen)}};
}

DecoherenceModel exact_model(const ThermoParams& p) {
  ClusterSpectrum spec = exact_cluster_spectrum(p);
  return [spec, g = p.g](double t) { return spec.evaluate(g, t); };
}

}  // namespace

TEST_SUITE("probe") {

TEST_CASE("evolve_probe") {
  ProbeState plus = ProbeState::plus();
  ProbeState a = evolve_probe(plus, 1.0, 0.7, 3.0);
  CHECK(std::abs(a.c) == doctest::Approx(0.5));
  ProbeState b = evolve_probe(plus, 0.0, 0.0, 1.0);
  CHECK(std::abs(b.c) == 0.0);
  CHECK(b.p == 0.5);
  ProbeState c = evolve_probe(plus, {0.6, 0.3}, 0.0, 2.0);
  CHECK(c.c.real() == doctest::Approx(0.3));
  CHECK(c.c.imag() == doctest::Approx(0.15));
  CHECK_THROWS_AS(evolve_probe({0.5, {0.9, 0.0}}, 1.0, 0.0, 0.0), ConfigError);
}

TEST_CASE("fid is the real part") {
  CHECK(fid(1.0) == 1.0);
  CHECK(fid({0.25, -0.5}) == 0.25);
}

TEST_CASE("qfi_from_r special values") {
  CHECK(qfi_from_r(1.0, 0.0) == 0.0);
  CHECK(std::isnan(qfi_from_r(1.1, 0.0)));
  CHECK(std::isnan(qfi_from_r(1.0, 0.2)));
  const double r = 0.6, dr = -0.35;
  CHECK(qfi_from_r(r, dr) == doctest::Approx(dr * dr / (1 - r * r)).epsilon(1e-15));
}

TEST_CASE("qfi_from_r matches the SLD oracle on random states") {
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    auto [r, dr] = random_pair(gen);
    auto [rho, drho] = probe_state_from_r(r, dr);
    const double a = qfi_from_r(r, dr);
    const double b = qfi_sld_oracle(rho, drho);
    worst = std::max(worst, std::abs(a - b) / b);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("qfi_from_r equals the literal commutator form") {
  std::mt19937_64 gen(5);
  for (int k = 0; k < 200; ++k) {
    auto [r, dr] = random_pair(gen);
    cplx comm = std::conj(r) * dr - r * std::conj(dr);
    cplx literal = (4.0 * std::norm(dr) + comm * comm) / (4.0 * (1.0 - std::norm(r)));
    CHECK(std::abs(literal.imag()) < 1e-12);
    CHECK(qfi_from_r(r, dr) == doctest::Approx(literal.real()).epsilon(1e-10));
  }
}

TEST_CASE("qfi_from_r is invariant under a global phase") {
  std::mt19937_64 gen(9);
  for (int k = 0; k < 100; ++k) {
    auto [r, dr] = random_pair(gen);
    cplx ph = std::polar(1.0, 1.234 * k);
    CHECK(qfi_from_r(ph * r, ph * dr) == doctest::Approx(qfi_from_r(r, dr)).epsilon(1e-12));
  }
}

TEST_CASE("SLD oracle elementary cases") {
  Eigen::Matrix2cd rho;
  rho << 0.3, 0.1, 0.1, 0.7;
  CHECK(qfi_sld_oracle(rho, Eigen::Matrix2cd::Zero()) == 0.0);

  const double q = 0.2, dq = 0.7;
  Eigen::Matrix2cd diag = Eigen::Matrix2cd::Zero(), ddiag = Eigen::Matrix2cd::Zero();
  diag(0, 0) = q;
  diag(1, 1) = 1 - q;
  ddiag(0, 0) = dq;
  ddiag(1, 1) = -dq;
  CHECK(qfi_sld_oracle(diag, ddiag) == doctest::Approx(dq * dq / q + dq * dq / (1 - q)));

  Eigen::Matrix2cd bad = rho;
  bad(0, 1) = cplx{0.1, 0.2};
  CHECK_THROWS_AS(qfi_sld_oracle(bad, Eigen::Matrix2cd::Zero()), ConfigError);
}

TEST_CASE("standard error propagation") {
  const double r = 0.5, dr = 0.4, se = 0.01;
  const double want = 2.0 * dr / (1.0 - r * r) * se;
  CHECK(qfi_standard_error(r, dr, 0.0, se) == doctest::Approx(want).epsilon(1e-6));
  CHECK(qfi_standard_error(r, dr, 0.0, 0.0) == 0.0);
}

TEST_CASE("reparametrize") {
  CHECK(reparametrize(1.0, 1.0) == 1.0);
  CHECK(reparametrize(4.0, 2.0) == 64.0);
  const double T = 0.5;
  CHECK(T * T * reparametrize(4.0, 2.0) == 4.0 * 2.0 * 2.0);
  CHECK_THROWS_AS(reparametrize(1.0, 0.0), ConfigError);
}

TEST_CASE("temperature Fisher information by the chain rule") {
  ThermoParams p = ThermoParams::lattice_defaults(4, 1.0, 1.6);
  const double t = 9.0;
  const double T = 1.0 / p.beta, dT = 1e-5;
  auto r_at_T = [&](double temp) {
    ThermoParams q = p;
    q.beta = 1.0 / temp;
    return exact_model(q)(t).r;
  };
  cplx r = r_at_T(T);
  cplx dr_dT = (r_at_T(T + dT) - r_at_T(T - dT)) / (2 * dT);
  const double f_t = qfi_from_r(r, dr_dT);
  const double f_beta = qfi_from_r(exact_model(p)(t).r, exact_model(p)(t).dr);
  CHECK(reparametrize(f_beta, p.beta) == doctest::Approx(f_t).epsilon(1e-6));
}

TEST_CASE("QFI vanishes at t=0 and stays nonnegative") {
  ThermoParams p = ThermoParams::lattice_defaults(4, 1.0, 1.76);
  auto t = linspace(0.0, 30.0, 301);
  QfiCurve c = qfi_curve(sample_model(exact_model(p), t, p.beta));
  CHECK(c.qfi[0] == 0.0);
  for (double v : c.qfi) CHECK(v >= 0.0);
}

TEST_CASE("monotone curve triggers the boundary warning") {
  DecoherenceSeries s;
  s.beta = 1.0;
  s.resize(20);
  for (std::size_t i = 0; i < 20; ++i) {
    s.t[i] = static_cast<double>(i);
    s.r[i] = 0.5;
    s.dr[i] = 1.0 / (1.0 + static_cast<double>(i));
  }
  s.r[0] = 1.0;
  s.dr[0] = 0.0;
  QfiCurve c = optimize_qfi(s);
  CHECK(c.boundary_warning);
  CHECK(c.t_opt == 1.0);
  CHECK_FALSE(c.warnings.empty());
}

TEST_CASE("revival points are extrapolated and flagged") {
  auto t = linspace(0.0, 1.5 * M_PI, 31);
  DecoherenceSeries s;
  s.beta = 1.0;
  s.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    s.t[i] = t[i];
    s.r[i] = std::cos(t[i]);
    s.dr[i] = 0.1 * std::sin(t[i]) * std::sin(t[i]) + 0.05 * (1.0 - std::cos(t[i]));
  }
  s.r[20] = -1.0;  // exact revival at t = pi with dr != 0
  QfiCurve c = qfi_curve(s);
  REQUIRE(c.extrapolated.size() == 1);
  CHECK(c.extrapolated[0] == 20);
  CHECK(std::isfinite(c.qfi[20]));
  CHECK(c.qfi[20] >= 0.0);
  CHECK_FALSE(c.warnings.empty());
}

TEST_CASE("series with |r| above one are rejected") {
  DecoherenceSeries s;
  s.resize(2);
  s.t = {0.0, 1.0};
  s.r = {1.0, 1.01};
  CHECK_THROWS_AS(qfi_curve(s), DomainError);
}

TEST_CASE("refined optimum agrees with a ten times finer grid") {
  ThermoParams p = ThermoParams::lattice_defaults(4, 1.0, 0.44 / 0.25);
  DecoherenceModel model = exact_model(p);
  auto grid = default_time_grid(model, 0.55 * M_PI / p.g, 400);
  auto fine = linspace(grid.front(), grid.back(), 10 * (grid.size() - 1) + 1);
  double dense = 0.0;
  for (double t : fine) {
    auto pt = model(t);
    dense = std::max(dense, t == 0.0 ? 0.0 : qfi_from_r(pt.r, pt.dr));
  }
  QfiCurve by_model = optimize_qfi(model, grid, p.beta);
  QfiCurve by_series = optimize_qfi(sample_model(model, grid, p.beta));
  CHECK_FALSE(by_model.boundary_warning);
  CHECK(by_model.qfi_opt == doctest::Approx(dense).epsilon(1e-6));
  CHECK(by_series.qfi_opt == doctest::Approx(dense).epsilon(1e-6));
  CHECK(by_model.qfi_opt >= dense - 1e-12);
  for (double v : by_model.qfi) CHECK(by_model.qfi_opt >= v);
}

TEST_CASE("optimize_function finds the maximum of S(x)") {
  auto f = [](double x) { return x * x / std::expm1(x); };
  auto grid = linspace(0.0, 10.0, 101);
  QfiCurve c = optimize_function(f, grid, 1.0);
  CHECK(c.t_opt == doctest::Approx(1.5936242600400399).epsilon(1e-6));
  CHECK(c.qfi_opt == doctest::Approx(0.6476102378919147).epsilon(1e-10));
  CHECK(c.scaled_opt() == c.qfi_opt);
}

TEST_CASE("coherence time and default grid") {
  DecoherenceModel gauss = [](double t) {
    return DecoherencePoint{std::exp(-0.5 * t * t), 0.0};
  };
  auto tau = coherence_time(gauss, 10.0, std::exp(-1.0), 100000);
  REQUIRE(tau.has_value());
  CHECK(*tau == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  CHECK_FALSE(coherence_time(gauss, 1.0, std::exp(-1.0)).has_value());

  auto grid = default_time_grid(gauss, 100.0, 50);
  CHECK(grid.size() == 50);
  CHECK(grid.back() == doctest::Approx(6.0 * std::sqrt(2.0)).epsilon(1e-3));
  auto capped = default_time_grid(gauss, 3.0, 50);
  CHECK(capped.back() == 3.0);
  CHECK_THROWS_AS(default_time_grid(gauss, 0.0), ConfigError);
}

TEST_CASE("time grids must increase") {
  DecoherenceSeries s;
  s.resize(3);
  s.t = {0.0, 2.0, 1.0};
  s.r = {1.0, 0.5, 0.4};
  CHECK_THROWS_AS(qfi_curve(s), ConfigError);
}

}  // TEST_SUITE
