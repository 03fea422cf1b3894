#pragma once

// Scalar probability helpers shared by the priors, the trainer and the coder.

namespace dgvc::prob {

double sigmoid(double x);
double softplus(double x);

// log(1 - exp(-x)) for x > 0.
double log1mexp(double x);

double normal_cdf(double x);
// log Phi(x), accurate far into both tails.
double log_normal_cdf(double x);
double log_normal_pdf(double x);

// log of the mass a unit-width box centered at v receives from N(mu, sigma):
// log(Phi((v + 1/2 - mu)/sigma) - Phi((v - 1/2 - mu)/sigma)).
struct LogMass {
  double value;
  double d_v, d_mu, d_sigma;
};
LogMass normal_box_log_mass(double v, double mu, double sigma);

// log(sigmoid(upper) - sigmoid(lower)) for upper > lower, with partials.
struct LogisticLogMass {
  double value;
  double d_upper, d_lower;
};
LogisticLogMass logistic_interval_log_mass(double upper, double lower);

}  // namespace dgvc::prob
