#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgvc/params.hpp"
#include "dgvc/tensor.hpp"

namespace dgvc::ad {

struct Var {
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
  bool operator==(const Var&) const = default;
};

class Graph;

// Receives the gradient of the node's output; pushes contributions into the
// inputs through Graph::grad_ref.
using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

// Define-by-run tape. Nodes are appended in evaluation order, which is the
// canonical topological order; backward walks it in reverse.
//
// A graph is single-threaded. Parameters are read from the bound ParamStore
// and gradients are added into ParamStore::grad when backward() runs, so
// several graphs evaluated one after another accumulate in a fixed order.
class Graph {
 public:
  // Training graph: parameter gradients flow back into `store`.
  explicit Graph(ParamStore* store = nullptr) : store_(store), grad_store_(store) {}
  // Inference graph: parameters are constants and no tape closures are kept.
  explicit Graph(const ParamStore& store) : store_(&store) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var input(Tensor t, std::string_view name = "input");
  Var param(ParamId id);
  // Leaf that receives a gradient but is not a stored parameter.
  Var variable(Tensor t, std::string_view name = "variable");

  // Dense layer. x: [in] or [N,in]; w: [out,in]; bias: [out] (optional).
  Var linear(Var x, Var w, std::optional<Var> bias = std::nullopt);
  // Cross-correlation. x: [C,H,W] or [N,C,H,W]; w: [Co,C,k,k]; bias: [Co].
  Var conv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad);
  // Transposed convolution. x: [Ci,H,W] or [N,Ci,H,W]; w: [Ci,Co,k,k]; bias: [Co].
  Var deconv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var abs(Var a);
  Var leaky_relu(Var a, double slope);

  // Sum of all elements, shape [1].
  Var sum(Var a);

  // Slice / concatenate along the last axis.
  Var slice(Var a, std::size_t begin, std::size_t end);
  Var concat(const std::vector<Var>& parts);

  // Row access for [N,D] tensors.
  Var row(Var a, std::size_t index);
  Var stack_rows(const std::vector<Var>& rows);
  Var tile_rows(Var a, std::size_t count);

  Var reshape(Var a, Shape shape);

  // Extension point for fused primitives defined outside this file.
  Var custom(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  // Reverse pass from a scalar node. Parameter gradients are added into the
  // bound store.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() w.r.t. node v; zero tensor if the node
  // did not receive any.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  const std::string& op_name(Var v) const { return node(v).op; }
  std::size_t size() const { return nodes_.size(); }

  // Mutable gradient buffer for v, allocated on first use. Only meaningful
  // inside backward functions.
  Tensor& grad_ref(Var v);

 private:
  struct Node {
    std::string op;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::optional<ParamId> param;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  const Tensor& val(Var v) const { return value(v); }
  Var push(std::string op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward);
  [[noreturn]] void fail(std::string_view op, const std::string& what) const;
  void require_same_shape(std::string_view op, Var a, Var b) const;
  template <typename F, typename D>
  Var unary(std::string op, Var a, F f, D dfdx);

  const ParamStore* store_ = nullptr;
  ParamStore* grad_store_ = nullptr;
  std::deque<Node> nodes_;  // deque: value references stay valid while ops are appended
  std::vector<std::optional<Var>> param_nodes_;
};

}  // namespace dgvc::ad
