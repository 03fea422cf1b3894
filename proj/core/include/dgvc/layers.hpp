#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "dgvc/graph.hpp"
#include "dgvc/params.hpp"

namespace dgvc::ad {

struct Dense {
  ParamId weight, bias;
  std::size_t in = 0, out = 0;

  static Dense create(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t out, std::mt19937_64& rng);
  Var operator()(Graph& g, Var x) const;
};

struct Conv2d {
  ParamId weight, bias;
  std::size_t in_c = 0, out_c = 0, kernel = 0, stride = 1, pad = 0;

  static Conv2d create(ParamStore& store, const std::string& name, std::size_t in_c,
                       std::size_t out_c, std::size_t kernel, std::size_t stride,
                       std::size_t pad, std::mt19937_64& rng);
  Var operator()(Graph& g, Var x) const;
};

// Transposed convolution; weight layout [in_c, out_c, k, k].
struct Deconv2d {
  ParamId weight, bias;
  std::size_t in_c = 0, out_c = 0, kernel = 0, stride = 1, pad = 0;

  static Deconv2d create(ParamStore& store, const std::string& name, std::size_t in_c,
                         std::size_t out_c, std::size_t kernel, std::size_t stride,
                         std::size_t pad, std::mt19937_64& rng);
  Var operator()(Graph& g, Var x) const;
};

struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(std::size_t hidden) {
    return {Tensor(Shape{hidden}), Tensor(Shape{hidden})};
  }
};

struct LstmVars {
  Var h, c;
};

// Gates are packed as [input, forget, candidate, output] rows of one
// [4H, in + H] matrix acting on concat(x, h).
struct LstmCell {
  ParamId weight, bias;
  std::size_t in = 0, hidden = 0;

  static LstmCell create(ParamStore& store, const std::string& name, std::size_t in,
                         std::size_t hidden, std::mt19937_64& rng);

  LstmVars initial(Graph& g) const;
  LstmVars step(Graph& g, Var x, LstmVars state) const;

  // Graph-free convenience; the input state is left untouched.
  LstmState step(const ParamStore& store, const Tensor& x, const LstmState& state) const;
};

// Runs one cell left-to-right and another right-to-left over a sequence and
// returns concat(h_forward(last), h_backward(first)).
struct BiLstm {
  LstmCell forward, backward;

  static BiLstm create(ParamStore& store, const std::string& name, std::size_t in,
                       std::size_t hidden, std::mt19937_64& rng);
  Var operator()(Graph& g, const std::vector<Var>& sequence) const;
  std::size_t output_size() const { return 2 * forward.hidden; }
};

}  // namespace dgvc::ad
