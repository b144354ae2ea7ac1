#include "phasetherm/common.hpp"

namespace phasetherm {

double marginal_fisher_information(const ClusterMarginal& m) {
  CompensatedSum<double> mean_energy;
  for (const auto& [key, a] : m.energy_weighted) mean_energy += a;
  const double e = mean_energy.value();

  CompensatedSum<double> fi;
  for (const auto& [key, p] : m.probs) {
    if (p <= 0.0) continue;
    auto it = m.energy_weighted.find(key);
    const double a = it == m.energy_weighted.end() ? 0.0 : it->second;
    const double dp = -a + p * e;
    fi += dp * dp / p;
  }
  return fi.value();
}

double ClusterSpectrum::mean_energy() const {
  CompensatedSum<double> e;
  for (double a : energy_weighted) e += a;
  return e.value();
}

DecoherencePoint ClusterSpectrum::evaluate(double g, double t) const {
  double r_re = 0.0, r_im = 0.0, a_re = 0.0, a_im = 0.0;
  for (int k = 0; 2 * k <= n; ++k) {
    const int mirror = n - k;
    const double theta = g * t * magnetization_of(n, k);
    const double c = std::cos(theta), s = std::sin(theta);
    if (mirror == k) {
      r_re += prob[k];
      a_re += energy_weighted[k];
      continue;
    }
    // p_k e^{-i theta} + p_mirror e^{+i theta}
    r_re += (prob[k] + prob[mirror]) * c;
    r_im += (prob[mirror] - prob[k]) * s;
    a_re += (energy_weighted[k] + energy_weighted[mirror]) * c;
    a_im += (energy_weighted[mirror] - energy_weighted[k]) * s;
  }
  const cplx r{r_re, r_im};
  const cplx a{a_re, a_im};
  return {r, -a + mean_energy() * r};
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

}  // namespace phasetherm
