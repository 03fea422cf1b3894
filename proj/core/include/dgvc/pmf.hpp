#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "dgvc/model.hpp"

namespace dgvc::model {

struct NormalDist {
  double mu = 0.0;
  double sigma = 1.0;
};

struct FactorizedDim {
  const FactorizedDensity* density = nullptr;
  const ParamStore* store = nullptr;
  std::size_t dim = 0;
};

using LatentDistribution = std::variant<NormalDist, FactorizedDim>;

double latent_cdf(const LatentDistribution& dist, double x);

// Mass of integer n under the unit-box-convolved density, restricted to the
// alphabet [-bound, bound] with the two tails folded into the boundary bins.
// Throws std::out_of_range for n outside the alphabet.
double integer_pmf(const LatentDistribution& dist, int n, int bound);

// integer_pmf for every symbol, index i <-> value i - bound.
std::vector<double> integer_pmf_table(const LatentDistribution& dist, int bound);

}  // namespace dgvc::model
