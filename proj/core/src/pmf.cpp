#include "dgvc/pmf.hpp"

#include <stdexcept>
#include <string>

#include "dgvc/prob.hpp"

namespace dgvc::model {

namespace {

// P(lo < X <= hi) with the subtraction carried out in whichever tail keeps
// precision.
double interval_mass(const LatentDistribution& dist, double lo, double hi) {
  if (const auto* nd = std::get_if<NormalDist>(&dist)) {
    const double a = (lo - nd->mu) / nd->sigma;
    const double b = (hi - nd->mu) / nd->sigma;
    if (a >= 0.0) return prob::normal_cdf(-a) - prob::normal_cdf(-b);
    return prob::normal_cdf(b) - prob::normal_cdf(a);
  }
  const auto& fd = std::get<FactorizedDim>(dist);
  const double l = fd.density->logit(*fd.store, fd.dim, lo);
  const double u = fd.density->logit(*fd.store, fd.dim, hi);
  if (l >= 0.0) return prob::sigmoid(-l) - prob::sigmoid(-u);
  return prob::sigmoid(u) - prob::sigmoid(l);
}

double lower_tail(const LatentDistribution& dist, double x) { return latent_cdf(dist, x); }

double upper_tail(const LatentDistribution& dist, double x) {
  if (const auto* nd = std::get_if<NormalDist>(&dist)) {
    return prob::normal_cdf(-(x - nd->mu) / nd->sigma);
  }
  const auto& fd = std::get<FactorizedDim>(dist);
  return prob::sigmoid(-fd.density->logit(*fd.store, fd.dim, x));
}

}  // namespace

double latent_cdf(const LatentDistribution& dist, double x) {
  if (const auto* nd = std::get_if<NormalDist>(&dist)) {
    return prob::normal_cdf((x - nd->mu) / nd->sigma);
  }
  const auto& fd = std::get<FactorizedDim>(dist);
  return fd.density->cdf(*fd.store, fd.dim, x);
}

double integer_pmf(const LatentDistribution& dist, int n, int bound) {
  if (bound <= 0) throw std::invalid_argument("alphabet bound must be positive");
  if (n < -bound || n > bound) {
    throw std::out_of_range("symbol " + std::to_string(n) + " outside alphabet [-" +
                            std::to_string(bound) + ", " + std::to_string(bound) + "]");
  }
  if (n == -bound) return lower_tail(dist, -bound + 0.5);
  if (n == bound) return upper_tail(dist, bound - 0.5);
  return interval_mass(dist, n - 0.5, n + 0.5);
}

std::vector<double> integer_pmf_table(const LatentDistribution& dist, int bound) {
  std::vector<double> pmf(2 * static_cast<std::size_t>(bound) + 1);
  for (int n = -bound; n <= bound; ++n) pmf[static_cast<std::size_t>(n + bound)] = integer_pmf(dist, n, bound);
  return pmf;
}

}  // namespace dgvc::model
