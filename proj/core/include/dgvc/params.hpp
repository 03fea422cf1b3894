#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dgvc/tensor.hpp"

namespace dgvc::ad {

struct ParamId {
  std::uint32_t index = 0;
  bool operator==(const ParamId&) const = default;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Owns every learnable tensor of a model in declaration order. Declaration
// order is also checkpoint order.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor init);

  // Uniform in [-s, s], s = sqrt(1 / fan_in).
  ParamId add_uniform(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng);

  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  const Parameter* find(std::string_view name) const;

  void zero_grad();
  void scale_grad(double s);
  double grad_norm() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace dgvc::ad
