#include "dgvc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kernels.hpp"

namespace dgvc::ad {

namespace {

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Leading "batch" extent and whether the op received an unbatched tensor.
struct Batched {
  std::size_t n;
  bool squeezed;
};

}  // namespace

Graph::Node& Graph::node(Var v) {
  if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph variable");
  return nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph variable");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor(value(v).shape());
  return n.grad;
}

Tensor& Graph::grad_ref(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor(value(v).shape());
  return n.grad;
}

void Graph::fail(std::string_view op, const std::string& what) const {
  throw ShapeError("node #" + std::to_string(nodes_.size()) + " (" + std::string(op) +
                   "): " + what);
}

void Graph::require_same_shape(std::string_view op, Var a, Var b) const {
  if (value(a).shape() != value(b).shape()) {
    fail(op, "operand shapes " + shape_string(value(a).shape()) + " and " +
                 shape_string(value(b).shape()) + " differ");
  }
}

Var Graph::push(std::string op, Tensor value, const std::vector<Var>& inputs,
                BackwardFn backward) {
  bool rg = false;
  for (Var in : inputs) rg = rg || node(in).requires_grad;
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::input(Tensor t, std::string_view name) {
  if (!t.all_finite()) fail(name, "non-finite value in graph input");
  return push(std::string(name), std::move(t), {}, nullptr);
}

Var Graph::variable(Tensor t, std::string_view name) {
  const Var v = input(std::move(t), name);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Graph::param(ParamId id) {
  if (store_ == nullptr) throw std::logic_error("graph has no parameter store");
  if (param_nodes_.size() <= id.index) param_nodes_.resize(store_->size());
  if (param_nodes_[id.index]) return *param_nodes_[id.index];
  Node n;
  n.op = "param:" + (*store_)[id].name;
  n.external = &(*store_)[id].value;
  n.requires_grad = grad_store_ != nullptr;
  n.param = id;
  nodes_.push_back(std::move(n));
  Var v{static_cast<std::uint32_t>(nodes_.size() - 1)};
  param_nodes_[id.index] = v;
  return v;
}

Var Graph::custom(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  return push(std::move(op), std::move(value), inputs, std::move(backward));
}

// ---------------------------------------------------------------------------
// Dense

Var Graph::linear(Var x, Var w, std::optional<Var> bias) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  if (wv.rank() != 2) fail("linear", "weight must be rank 2, got " + shape_string(wv.shape()));
  const std::size_t out = wv.dim(0), in = wv.dim(1);
  Batched b{1, true};
  if (xv.rank() == 1) {
    b = {1, true};
  } else if (xv.rank() == 2) {
    b = {xv.dim(0), false};
  } else {
    fail("linear", "input must be rank 1 or 2");
  }
  if (xv.shape().back() != in) {
    fail("linear", "input " + shape_string(xv.shape()) + " vs weight " + shape_string(wv.shape()));
  }
  if (bias && (val(*bias).rank() != 1 || val(*bias).dim(0) != out)) {
    fail("linear", "bias shape " + shape_string(val(*bias).shape()));
  }
  Tensor y(b.squeezed ? Shape{out} : Shape{b.n, out});
  if (bias) {
    const Tensor& bv = val(*bias);
    for (std::size_t n = 0; n < b.n; ++n) {
      for (std::size_t o = 0; o < out; ++o) y[n * out + o] = bv[o];
    }
  }
  kernels::gemm_nt(b.n, out, in, xv.ptr(), wv.ptr(), y.ptr());
  std::vector<Var> ins{x, w};
  if (bias) ins.push_back(*bias);
  return push("linear", std::move(y), ins,
              [x, w, bias, b, in, out](Graph& g, const Tensor& gy) {
                if (g.requires_grad(x)) {
                  kernels::gemm_nn(b.n, in, out, gy.ptr(), g.value(w).ptr(), g.grad_ref(x).ptr());
                }
                if (g.requires_grad(w)) {
                  kernels::gemm_tn(out, in, b.n, gy.ptr(), g.value(x).ptr(), g.grad_ref(w).ptr());
                }
                if (bias && g.requires_grad(*bias)) {
                  Tensor& gb = g.grad_ref(*bias);
                  for (std::size_t n = 0; n < b.n; ++n) {
                    for (std::size_t o = 0; o < out; ++o) gb[o] += gy[n * out + o];
                  }
                }
              });
}

// ---------------------------------------------------------------------------
// Convolutions

Var Graph::conv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  if (xv.rank() != 3 && xv.rank() != 4) fail("conv2d", "input must be [C,H,W] or [N,C,H,W]");
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3)) fail("conv2d", "weight must be [Co,C,k,k]");
  if (stride == 0) fail("conv2d", "stride must be positive");
  const bool squeezed = xv.rank() == 3;
  const std::size_t off = squeezed ? 0 : 1;
  kernels::ConvGeometry geo{};
  geo.batch = squeezed ? 1 : xv.dim(0);
  geo.in_c = xv.dim(off);
  geo.in_h = xv.dim(off + 1);
  geo.in_w = xv.dim(off + 2);
  geo.kernel = wv.dim(2);
  geo.stride = stride;
  geo.pad = pad;
  const std::size_t co = wv.dim(0);
  if (wv.dim(1) != geo.in_c) {
    fail("conv2d", "input channels " + std::to_string(geo.in_c) + " vs weight " +
                       shape_string(wv.shape()));
  }
  if (val(bias).rank() != 1 || val(bias).dim(0) != co) fail("conv2d", "bias shape mismatch");
  const std::size_t span_h = geo.in_h + 2 * pad, span_w = geo.in_w + 2 * pad;
  if (span_h < geo.kernel || span_w < geo.kernel || (span_h - geo.kernel) % stride != 0 ||
      (span_w - geo.kernel) % stride != 0) {
    fail("conv2d", "output size (H + 2*pad - k)/stride + 1 is not integral for input " +
                       shape_string(xv.shape()));
  }
  geo.out_h = (span_h - geo.kernel) / stride + 1;
  geo.out_w = (span_w - geo.kernel) / stride + 1;

  const std::size_t kdim = geo.patch(), npos = geo.positions();
  const std::size_t plane = geo.out_h * geo.out_w;
  auto cols = std::make_shared<std::vector<double>>(kdim * npos);
  kernels::im2col(geo, xv.ptr(), cols->data());
  std::vector<double> prod(co * npos, 0.0);
  kernels::gemm_nn(co, npos, kdim, wv.ptr(), cols->data(), prod.data());

  Tensor y(squeezed ? Shape{co, geo.out_h, geo.out_w} : Shape{geo.batch, co, geo.out_h, geo.out_w});
  const Tensor& bv = val(bias);
  for (std::size_t n = 0; n < geo.batch; ++n) {
    for (std::size_t c = 0; c < co; ++c) {
      const double* src = prod.data() + c * npos + n * plane;
      double* dst = y.ptr() + (n * co + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = bv[c] + src[p];
    }
  }
  return push("conv2d", std::move(y), {x, w, bias},
              [x, w, bias, geo, co, cols](Graph& g, const Tensor& gy) {
                const std::size_t kdim = geo.patch(), npos = geo.positions();
                const std::size_t plane = geo.out_h * geo.out_w;
                std::vector<double> gmat(co * npos);
                for (std::size_t n = 0; n < geo.batch; ++n) {
                  for (std::size_t c = 0; c < co; ++c) {
                    const double* src = gy.ptr() + (n * co + c) * plane;
                    std::copy(src, src + plane, gmat.data() + c * npos + n * plane);
                  }
                }
                if (g.requires_grad(bias)) {
                  Tensor& gb = g.grad_ref(bias);
                  for (std::size_t c = 0; c < co; ++c) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < npos; ++p) s += gmat[c * npos + p];
                    gb[c] += s;
                  }
                }
                if (g.requires_grad(w)) {
                  kernels::gemm_nt(co, kdim, npos, gmat.data(), cols->data(), g.grad_ref(w).ptr());
                }
                if (g.requires_grad(x)) {
                  std::vector<double> gcols(kdim * npos, 0.0);
                  kernels::gemm_tn(kdim, npos, co, g.value(w).ptr(), gmat.data(), gcols.data());
                  kernels::col2im(geo, gcols.data(), g.grad_ref(x).ptr());
                }
              });
}

Var Graph::deconv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  if (xv.rank() != 3 && xv.rank() != 4) fail("deconv2d", "input must be [C,H,W] or [N,C,H,W]");
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3)) fail("deconv2d", "weight must be [Ci,Co,k,k]");
  if (stride == 0) fail("deconv2d", "stride must be positive");
  const bool squeezed = xv.rank() == 3;
  const std::size_t off = squeezed ? 0 : 1;
  const std::size_t batch = squeezed ? 1 : xv.dim(0);
  const std::size_t ci = xv.dim(off), h = xv.dim(off + 1), wd = xv.dim(off + 2);
  const std::size_t k = wv.dim(2), co = wv.dim(1);
  if (wv.dim(0) != ci) fail("deconv2d", "input channels vs weight " + shape_string(wv.shape()));
  if (val(bias).rank() != 1 || val(bias).dim(0) != co) fail("deconv2d", "bias shape mismatch");
  if (h == 0 || wd == 0 || (h - 1) * stride + k < 2 * pad || (wd - 1) * stride + k < 2 * pad) {
    fail("deconv2d", "output would be empty");
  }
  // Adjoint geometry: a convolution mapping the output back to the input.
  kernels::ConvGeometry geo{};
  geo.batch = batch;
  geo.in_c = co;
  geo.in_h = (h - 1) * stride + k - 2 * pad;
  geo.in_w = (wd - 1) * stride + k - 2 * pad;
  geo.kernel = k;
  geo.stride = stride;
  geo.pad = pad;
  geo.out_h = h;
  geo.out_w = wd;

  const std::size_t kdim = geo.patch(), npos = geo.positions(), plane = h * wd;
  auto xmat = std::make_shared<std::vector<double>>(ci * npos);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < ci; ++c) {
      const double* src = xv.ptr() + (n * ci + c) * plane;
      std::copy(src, src + plane, xmat->data() + c * npos + n * plane);
    }
  }
  std::vector<double> cols(kdim * npos, 0.0);
  kernels::gemm_tn(kdim, npos, ci, wv.ptr(), xmat->data(), cols.data());
  Tensor y(squeezed ? Shape{co, geo.in_h, geo.in_w} : Shape{batch, co, geo.in_h, geo.in_w});
  kernels::col2im(geo, cols.data(), y.ptr());
  const std::size_t oplane = geo.in_h * geo.in_w;
  const Tensor& bv = val(bias);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < co; ++c) {
      double* dst = y.ptr() + (n * co + c) * oplane;
      for (std::size_t p = 0; p < oplane; ++p) dst[p] += bv[c];
    }
  }
  return push("deconv2d", std::move(y), {x, w, bias},
              [x, w, bias, geo, ci, co, xmat](Graph& g, const Tensor& gy) {
                const std::size_t kdim = geo.patch(), npos = geo.positions();
                const std::size_t plane = geo.out_h * geo.out_w;
                const std::size_t oplane = geo.in_h * geo.in_w;
                if (g.requires_grad(bias)) {
                  Tensor& gb = g.grad_ref(bias);
                  for (std::size_t c = 0; c < co; ++c) {
                    double s = 0.0;
                    for (std::size_t n = 0; n < geo.batch; ++n) {
                      const double* src = gy.ptr() + (n * co + c) * oplane;
                      for (std::size_t p = 0; p < oplane; ++p) s += src[p];
                    }
                    gb[c] += s;
                  }
                }
                const bool need_w = g.requires_grad(w), need_x = g.requires_grad(x);
                if (!need_w && !need_x) return;
                std::vector<double> gcols(kdim * npos);
                kernels::im2col(geo, gy.ptr(), gcols.data());
                if (need_w) {
                  kernels::gemm_nt(ci, kdim, npos, xmat->data(), gcols.data(), g.grad_ref(w).ptr());
                }
                if (need_x) {
                  std::vector<double> gx(ci * npos, 0.0);
                  kernels::gemm_nn(ci, npos, kdim, g.value(w).ptr(), gcols.data(), gx.data());
                  Tensor& dst = g.grad_ref(x);
                  for (std::size_t n = 0; n < geo.batch; ++n) {
                    for (std::size_t c = 0; c < ci; ++c) {
                      double* d = dst.ptr() + (n * ci + c) * plane;
                      const double* s = gx.data() + c * npos + n * plane;
                      for (std::size_t p = 0; p < plane; ++p) d[p] += s[p];
                    }
                  }
                }
              });
}

// ---------------------------------------------------------------------------
// Elementwise

Var Graph::add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = val(a);
  const Tensor& bv = val(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return push("add", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Tensor& gv = g.grad_ref(v);
      for (std::size_t i = 0; i < gy.size(); ++i) gv[i] += gy[i];
    }
  });
}

Var Graph::sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor y = val(a);
  const Tensor& bv = val(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return push("sub", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y = val(a);
  const Tensor& bv = val(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return push("mul", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    if (g.requires_grad(a)) {
      const Tensor& bv = g.value(b);
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      const Tensor& av = g.value(a);
      Tensor& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

template <typename F, typename D>
Var Graph::unary(std::string op, Var a, F f, D dfdx) {
  Tensor y = val(a);
  for (double& v : y.data()) v = f(v);
  return push(std::move(op), std::move(y), {a}, [a, dfdx](Graph& g, const Tensor& gy) {
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * dfdx(x[i]);
  });
}

Var Graph::scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var Graph::add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var Graph::tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Var Graph::sigmoid(Var a) {
  return unary("sigmoid", a, sigmoid_value, [](double x) {
    const double s = sigmoid_value(x);
    return s * (1.0 - s);
  });
}

Var Graph::softplus(Var a) {
  return unary("softplus", a, softplus_value, sigmoid_value);
}

Var Graph::abs(Var a) {
  // Subgradient at zero is 0.
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Graph::leaky_relu(Var a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double v : val(a).data()) s += v;
  return push("sum", Tensor::scalar(s), {a}, [a](Graph& g, const Tensor& gy) {
    Tensor& ga = g.grad_ref(a);
    const double d = gy[0];
    for (double& v : ga.data()) v += d;
  });
}

Var Graph::slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = val(a);
  if (av.rank() == 0) fail("slice", "scalar input");
  const std::size_t d = av.shape().back();
  if (begin >= end || end > d) {
    fail("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                      std::to_string(d));
  }
  const std::size_t rows = av.size() / d, w = end - begin;
  Shape shape = av.shape();
  shape.back() = w;
  Tensor y(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) y[r * w + j] = av[r * d + begin + j];
  }
  return push("slice", std::move(y), {a}, [a, begin, d, rows, w](Graph& g, const Tensor& gy) {
    Tensor& ga = g.grad_ref(a);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) ga[r * d + begin + j] += gy[r * w + j];
    }
  });
}

Var Graph::concat(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat", "no operands");
  const Tensor& first = val(parts[0]);
  if (first.rank() == 0) fail("concat", "scalar operand");
  const std::size_t rows = first.size() / first.shape().back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = val(p);
    if (t.rank() != first.rank()) fail("concat", "rank mismatch");
    for (std::size_t i = 0; i + 1 < t.rank(); ++i) {
      if (t.dim(i) != first.dim(i)) fail("concat", "leading dims differ");
    }
    widths.push_back(t.shape().back());
    total += t.shape().back();
  }
  Shape shape = first.shape();
  shape.back() = total;
  Tensor y(shape);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = val(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < widths[k]; ++j) y[r * total + col + j] = t[r * widths[k] + j];
    }
    col += widths[k];
  }
  return push("concat", std::move(y), parts,
              [parts, widths, rows, total](Graph& g, const Tensor& gy) {
                std::size_t col = 0;
                for (std::size_t k = 0; k < parts.size(); ++k) {
                  if (g.requires_grad(parts[k])) {
                    Tensor& gp = g.grad_ref(parts[k]);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < widths[k]; ++j) {
                        gp[r * widths[k] + j] += gy[r * total + col + j];
                      }
                    }
                  }
                  col += widths[k];
                }
              });
}

Var Graph::row(Var a, std::size_t index) {
  const Tensor& av = val(a);
  if (av.rank() != 2) fail("row", "input must be [N,D]");
  if (index >= av.dim(0)) fail("row", "index out of range");
  const std::size_t d = av.dim(1);
  Tensor y(Shape{d});
  std::copy(av.ptr() + index * d, av.ptr() + (index + 1) * d, y.ptr());
  return push("row", std::move(y), {a}, [a, index, d](Graph& g, const Tensor& gy) {
    Tensor& ga = g.grad_ref(a);
    for (std::size_t j = 0; j < d; ++j) ga[index * d + j] += gy[j];
  });
}

Var Graph::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) fail("stack_rows", "no operands");
  const std::size_t d = val(rows[0]).size();
  Tensor y(Shape{rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& t = val(rows[r]);
    if (t.rank() != 1 || t.size() != d) fail("stack_rows", "rows must be equal-length vectors");
    std::copy(t.ptr(), t.ptr() + d, y.ptr() + r * d);
  }
  return push("stack_rows", std::move(y), rows, [rows, d](Graph& g, const Tensor& gy) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!g.requires_grad(rows[r])) continue;
      Tensor& gr = g.grad_ref(rows[r]);
      for (std::size_t j = 0; j < d; ++j) gr[j] += gy[r * d + j];
    }
  });
}

Var Graph::tile_rows(Var a, std::size_t count) {
  const Tensor& av = val(a);
  if (av.rank() != 1) fail("tile_rows", "input must be a vector");
  if (count == 0) fail("tile_rows", "count must be positive");
  const std::size_t d = av.size();
  Tensor y(Shape{count, d});
  for (std::size_t r = 0; r < count; ++r) std::copy(av.ptr(), av.ptr() + d, y.ptr() + r * d);
  return push("tile_rows", std::move(y), {a}, [a, count, d](Graph& g, const Tensor& gy) {
    Tensor& ga = g.grad_ref(a);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t j = 0; j < d; ++j) ga[j] += gy[r * d + j];
    }
  });
}

Var Graph::reshape(Var a, Shape shape) {
  const Tensor& av = val(a);
  if (shape_size(shape) != av.size()) {
    fail("reshape", shape_string(av.shape()) + " -> " + shape_string(shape));
  }
  return push("reshape", av.reshaped(std::move(shape)), {a}, [a](Graph& g, const Tensor& gy) {
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  });
}

// ---------------------------------------------------------------------------

void Graph::backward(Var loss) {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ShapeError("backward: loss node #" + std::to_string(loss.id) + " (" + node(loss).op +
                     ") is not scalar: " + shape_string(lv.shape()));
  }
  if (!std::isfinite(lv[0])) throw std::domain_error("backward: loss is not finite");
  for (Node& n : nodes_) n.grad = Tensor();
  grad_ref(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    // Closures only touch their inputs' buffers; nodes_ never grows here.
    n.backward(*this, n.grad);
  }
  if (grad_store_ == nullptr) return;
  for (const Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    Tensor& dst = (*grad_store_)[*n.param].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

}  // namespace dgvc::ad
