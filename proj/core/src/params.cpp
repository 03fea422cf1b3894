#include "dgvc/params.hpp"

#include <cmath>
#include <stdexcept>

namespace dgvc::ad {

ParamId ParamStore::add(std::string name, Tensor init) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter " + name);
  Tensor grad(init.shape());
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
  return ParamId{static_cast<std::uint32_t>(params_.size() - 1)};
}

ParamId ParamStore::add_uniform(std::string name, Shape shape, std::size_t fan_in,
                                std::mt19937_64& rng) {
  const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return add(std::move(name), std::move(t));
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Parameter* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double s) {
  for (auto& p : params_) {
    for (double& g : p.grad.data()) g *= s;
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (double g : p.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

}  // namespace dgvc::ad
