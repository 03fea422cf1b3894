#include "dgvc/layers.hpp"

#include <stdexcept>

namespace dgvc::ad {

Dense Dense::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                    std::mt19937_64& rng) {
  Dense d;
  d.in = in;
  d.out = out;
  d.weight = store.add_uniform(name + ".w", Shape{out, in}, in, rng);
  d.bias = store.add_uniform(name + ".b", Shape{out}, in, rng);
  return d;
}

Var Dense::operator()(Graph& g, Var x) const {
  return g.linear(x, g.param(weight), g.param(bias));
}

Conv2d Conv2d::create(ParamStore& store, const std::string& name, std::size_t in_c,
                      std::size_t out_c, std::size_t kernel, std::size_t stride, std::size_t pad,
                      std::mt19937_64& rng) {
  Conv2d c;
  c.in_c = in_c;
  c.out_c = out_c;
  c.kernel = kernel;
  c.stride = stride;
  c.pad = pad;
  const std::size_t fan_in = in_c * kernel * kernel;
  c.weight = store.add_uniform(name + ".w", Shape{out_c, in_c, kernel, kernel}, fan_in, rng);
  c.bias = store.add_uniform(name + ".b", Shape{out_c}, fan_in, rng);
  return c;
}

Var Conv2d::operator()(Graph& g, Var x) const {
  return g.conv2d(x, g.param(weight), g.param(bias), stride, pad);
}

Deconv2d Deconv2d::create(ParamStore& store, const std::string& name, std::size_t in_c,
                          std::size_t out_c, std::size_t kernel, std::size_t stride,
                          std::size_t pad, std::mt19937_64& rng) {
  Deconv2d d;
  d.in_c = in_c;
  d.out_c = out_c;
  d.kernel = kernel;
  d.stride = stride;
  d.pad = pad;
  const std::size_t fan_in = in_c * kernel * kernel;
  d.weight = store.add_uniform(name + ".w", Shape{in_c, out_c, kernel, kernel}, fan_in, rng);
  d.bias = store.add_uniform(name + ".b", Shape{out_c}, fan_in, rng);
  return d;
}

Var Deconv2d::operator()(Graph& g, Var x) const {
  return g.deconv2d(x, g.param(weight), g.param(bias), stride, pad);
}

LstmCell LstmCell::create(ParamStore& store, const std::string& name, std::size_t in,
                          std::size_t hidden, std::mt19937_64& rng) {
  LstmCell cell;
  cell.in = in;
  cell.hidden = hidden;
  const std::size_t fan_in = in + hidden;
  cell.weight = store.add_uniform(name + ".w", Shape{4 * hidden, fan_in}, fan_in, rng);
  cell.bias = store.add_uniform(name + ".b", Shape{4 * hidden}, fan_in, rng);
  Tensor& b = store[cell.bias].value;
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return cell;
}

LstmVars LstmCell::initial(Graph& g) const {
  return {g.input(Tensor(Shape{hidden}), "lstm.h0"), g.input(Tensor(Shape{hidden}), "lstm.c0")};
}

LstmVars LstmCell::step(Graph& g, Var x, LstmVars state) const {
  if (g.value(x).rank() != 1 || g.value(x).size() != in) {
    throw ShapeError("lstm step: input " + shape_string(g.value(x).shape()) + ", expected [" +
                     std::to_string(in) + "]");
  }
  if (g.value(state.h).size() != hidden || g.value(state.c).size() != hidden) {
    throw ShapeError("lstm step: state size does not match hidden size " +
                     std::to_string(hidden));
  }
  const Var pre = g.linear(g.concat({x, state.h}), g.param(weight), g.param(bias));
  const Var i = g.sigmoid(g.slice(pre, 0, hidden));
  const Var f = g.sigmoid(g.slice(pre, hidden, 2 * hidden));
  const Var cand = g.tanh(g.slice(pre, 2 * hidden, 3 * hidden));
  const Var o = g.sigmoid(g.slice(pre, 3 * hidden, 4 * hidden));
  const Var c = g.add(g.mul(f, state.c), g.mul(i, cand));
  const Var h = g.mul(o, g.tanh(c));
  return {h, c};
}

LstmState LstmCell::step(const ParamStore& store, const Tensor& x, const LstmState& state) const {
  Graph g(store);
  const LstmVars out = step(g, g.input(x, "x"), {g.input(state.h, "h"), g.input(state.c, "c")});
  return {g.value(out.h), g.value(out.c)};
}

BiLstm BiLstm::create(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t hidden, std::mt19937_64& rng) {
  BiLstm b;
  b.forward = LstmCell::create(store, name + ".fwd", in, hidden, rng);
  b.backward = LstmCell::create(store, name + ".bwd", in, hidden, rng);
  return b;
}

Var BiLstm::operator()(Graph& g, const std::vector<Var>& sequence) const {
  if (sequence.empty()) throw std::invalid_argument("bi-lstm over an empty sequence");
  LstmVars fw = forward.initial(g);
  for (Var x : sequence) fw = forward.step(g, x, fw);
  LstmVars bw = backward.initial(g);
  for (auto it = sequence.rbegin(); it != sequence.rend(); ++it) bw = backward.step(g, *it, bw);
  return g.concat({fw.h, bw.h});
}

}  // namespace dgvc::ad
