#include "dgvc/prob.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace dgvc::prob {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
constexpr double kMinGap = 1e-300;
}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log1mexp(double x) {
  if (x <= 0.0) return -INFINITY;
  return x < std::numbers::ln2 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > 6.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x > -20.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic series of the Mills ratio.
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

double log_normal_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

LogMass normal_box_log_mass(double v, double mu, double sigma) {
  const double a = (v - 0.5 - mu) / sigma;
  const double b = (v + 0.5 - mu) / sigma;
  double lm;
  if (a >= 0.0 || b <= 0.0) {
    // Both endpoints in one tail; reflect into the lower tail.
    const double lo = a >= 0.0 ? -b : a;
    const double hi = a >= 0.0 ? -a : b;
    const double lhi = log_normal_cdf(hi);
    const double llo = log_normal_cdf(lo);
    lm = lhi + log1mexp(std::max(lhi - llo, kMinGap));
  } else {
    lm = std::log1p(-(normal_cdf(a) + normal_cdf(-b)));
  }
  const double db = std::exp(log_normal_pdf(b) - lm);
  const double da = -std::exp(log_normal_pdf(a) - lm);
  LogMass out{};
  out.value = lm;
  out.d_v = (da + db) / sigma;
  out.d_mu = -(da + db) / sigma;
  out.d_sigma = -(da * a + db * b) / sigma;
  return out;
}

LogisticLogMass logistic_interval_log_mass(double upper, double lower) {
  const double gap = std::max(upper - lower, kMinGap);
  const double em1 = std::expm1(gap);
  LogisticLogMass out{};
  out.value = -softplus(-upper) - softplus(lower) + log1mexp(gap);
  out.d_upper = sigmoid(-upper) + 1.0 / em1;
  out.d_lower = -sigmoid(lower) - 1.0 / em1;
  return out;
}

}  // namespace dgvc::prob
