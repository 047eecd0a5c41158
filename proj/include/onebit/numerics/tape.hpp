#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "onebit/numerics/grid_kernels.hpp"
#include "onebit/numerics/types.hpp"

namespace onebit {

/// Handle to a value recorded on a GradTape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Geometry of a grid-valued node: rows = freq * time. Zero for plain matrices.
struct GridShape {
  std::size_t freq = 0;
  std::size_t time = 0;
};

/// Reverse-mode gradient tape over matrix-valued nodes.
///
/// Ops are recorded once; `replay()` recomputes every op from the current leaf values
/// in recording order, so a training loop records its graph a single time and then
/// alternates set_value / replay / backward. Closures receive the tape by reference,
/// which keeps the tape movable.
class GradTape {
 public:
  Var parameter(Mat init, std::string name = {}, GridShape shape = {}) {
    return push_leaf(std::move(init), std::move(name), shape, /*is_param=*/true);
  }

  Var constant(Mat value, GridShape shape = {}) {
    return push_leaf(std::move(value), {}, shape, /*is_param=*/false);
  }

  /// y = x * w^T + b   with x (n x in), w (out x in), b (1 x out). Also the 1x1 convolution.
  Var affine(Var x, Var w, Var b) {
    check(x), check(w), check(b);
    require_dims(node(x).value.cols() == node(w).value.cols(), "affine: input width != kernel columns");
    require_dims(node(b).value.rows() == 1 && node(b).value.cols() == node(w).value.rows(),
                 "affine: bias must be 1 x out");
    return push_op({x, w, b}, node(x).shape,
        [x, w, b](GradTape& t, Node& self) {
          self.value.noalias() = t.node(x).value * t.node(w).value.transpose();
          self.value.rowwise() += t.node(b).value.row(0);
        },
        [x, w, b](GradTape& t, Node& self) {
          if (t.node(x).needs_grad) t.node(x).grad.noalias() += self.grad * t.node(w).value;
          if (t.node(w).needs_grad) t.node(w).grad.noalias() += self.grad.transpose() * t.node(x).value;
          if (t.node(b).needs_grad) t.node(b).grad += self.grad.colwise().sum();
        });
  }

  Var relu(Var x) {
    check(x);
    return push_op({x}, node(x).shape,
        [x](GradTape& t, Node& self) { self.value = t.node(x).value.cwiseMax(0.0); },
        [x](GradTape& t, Node& self) {
          if (!t.node(x).needs_grad) return;
          t.node(x).grad.array() += (t.node(x).value.array() > 0.0).select(self.grad.array(), 0.0);
        });
  }

  /// 2x bilinear upsampling of a grid node along both freq and time.
  Var upsample2x(Var x) {
    check(x);
    const GridShape in = node(x).shape;
    require_dims(in.freq > 0 && in.time > 0, "upsample2x: node has no grid shape");
    return push_op({x}, GridShape{2 * in.freq, 2 * in.time},
        [x, in](GradTape& t, Node& self) { self.value = kernels::upsample2x(t.node(x).value, in.freq, in.time); },
        [x, in](GradTape& t, Node& self) {
          if (t.node(x).needs_grad) t.node(x).grad += kernels::upsample2x_adjoint(self.grad, in.freq, in.time);
        });
  }

  /// Per-channel batch normalization over all rows (batch statistics, no running averages).
  Var batch_norm(Var x, Var scale, Var shift) {
    check(x), check(scale), check(shift);
    return push_op({x, scale, shift}, node(x).shape,
        [x, scale, shift](GradTape& t, Node& self) {
          self.value = kernels::batch_norm(t.node(x).value, t.node(scale).value, t.node(shift).value,
                                           self.aux, self.aux_row);
        },
        [x, scale, shift](GradTape& t, Node& self) {
          const Mat& xhat = self.aux;
          const Mat& inv_std = self.aux_row;
          if (t.node(scale).needs_grad)
            t.node(scale).grad += (self.grad.array() * xhat.array()).colwise().sum().matrix();
          if (t.node(shift).needs_grad) t.node(shift).grad += self.grad.colwise().sum();
          if (!t.node(x).needs_grad) return;
          const double n = static_cast<double>(xhat.rows());
          const Mat dxhat = self.grad.array().rowwise() * t.node(scale).value.row(0).array();
          const Mat sum_d = dxhat.colwise().sum();
          const Mat sum_dx = (dxhat.array() * xhat.array()).colwise().sum();
          Mat dx = (n * dxhat.array()).rowwise() - sum_d.row(0).array();
          dx.array() -= xhat.array().rowwise() * sum_dx.row(0).array();
          dx.array().rowwise() *= (inv_std.row(0).array() / n);
          t.node(x).grad += dx;
        });
  }

  /// weight * sum((x - target)^2) as a 1 x 1 node.
  Var squared_error(Var x, Mat target, double weight = 1.0) {
    check(x);
    require_dims(target.rows() == node(x).value.rows() && target.cols() == node(x).value.cols(),
                 "squared_error: target shape mismatch");
    auto tgt = std::make_shared<const Mat>(std::move(target));
    return push_op({x}, {},
        [x, tgt, weight](GradTape& t, Node& self) {
          self.value.resize(1, 1);
          self.value(0, 0) = weight * (t.node(x).value - *tgt).squaredNorm();
        },
        [x, tgt, weight](GradTape& t, Node& self) {
          if (t.node(x).needs_grad) t.node(x).grad += (2.0 * weight * self.grad(0, 0)) * (t.node(x).value - *tgt);
        });
  }

  Var add(Var a, Var b) {
    check(a), check(b);
    require_same(a, b, "add");
    return push_op({a, b}, node(a).shape,
        [a, b](GradTape& t, Node& self) { self.value = t.node(a).value + t.node(b).value; },
        [a, b](GradTape& t, Node& self) {
          if (t.node(a).needs_grad) t.node(a).grad += self.grad;
          if (t.node(b).needs_grad) t.node(b).grad += self.grad;
        });
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    check(a), check(b);
    require_same(a, b, "mul");
    return push_op({a, b}, node(a).shape,
        [a, b](GradTape& t, Node& self) { self.value = t.node(a).value.cwiseProduct(t.node(b).value); },
        [a, b](GradTape& t, Node& self) {
          if (t.node(a).needs_grad) t.node(a).grad += self.grad.cwiseProduct(t.node(b).value);
          if (t.node(b).needs_grad) t.node(b).grad += self.grad.cwiseProduct(t.node(a).value);
        });
  }

  /// Sum of all entries as a 1 x 1 node.
  Var sum(Var x) {
    check(x);
    return push_op({x}, {},
        [x](GradTape& t, Node& self) {
          self.value.resize(1, 1);
          self.value(0, 0) = t.node(x).value.sum();
        },
        [x](GradTape& t, Node& self) {
          if (t.node(x).needs_grad) t.node(x).grad.array() += self.grad(0, 0);
        });
  }

  const Mat& value(Var v) const { return node(v).value; }
  const Mat& grad(Var v) const { return node(v).grad; }
  GridShape shape(Var v) const { return node(v).shape; }
  double scalar(Var v) const {
    const Mat& m = node(v).value;
    require_dims(m.rows() == 1 && m.cols() == 1, "scalar(): node is not 1 x 1");
    return m(0, 0);
  }

  /// Mutable access to a leaf value. Invalidates recorded op values until replay().
  Mat& mutable_value(Var v) {
    check(v);
    Node& n = node(v);
    if (n.forward) throw std::logic_error("mutable_value: only leaves may be assigned");
    fresh_ = false;
    return n.value;
  }

  void set_value(Var v, const Mat& m) {
    Mat& dst = mutable_value(v);
    require_dims(dst.rows() == m.rows() && dst.cols() == m.cols(), "set_value: shape mismatch");
    dst = m;
  }

  /// Recompute every recorded op from the current leaf values.
  void replay() {
    for (auto& n : nodes_)
      if (n.forward) n.forward(*this, n);
    fresh_ = true;
  }

  /// Accumulate d(loss)/d(node) into every node that needs it. Gradients are reset first.
  void backward(Var loss) {
    if (nodes_.empty()) throw std::logic_error("backward: nothing has been recorded");
    check(loss);
    if (!fresh_) throw std::logic_error("backward: forward values are stale; call replay() first");
    const Mat& lv = node(loss).value;
    if (lv.rows() != 1 || lv.cols() != 1) throw std::logic_error("backward: loss must be a scalar node");
    for (auto& n : nodes_)
      if (n.needs_grad) n.grad.setZero(n.value.rows(), n.value.cols());
    node(loss).grad.setConstant(1, 1, 1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.needs_grad) n.backward(*this, n);
    }
    has_grad_ = true;
  }

  const std::vector<Var>& parameters() const { return params_; }
  const std::string& name(Var v) const { return node(v).name; }

  /// Concatenated gradient of all parameters, in creation order, row-major within each block.
  RealVec parameter_gradient() const {
    if (!has_grad_) throw std::logic_error("parameter_gradient: backward has not run");
    RealVec out;
    for (Var p : params_) {
      const Mat& g = node(p).grad;
      out.insert(out.end(), g.data(), g.data() + g.size());
    }
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Mat aux;      // op-private forward state (e.g. x_hat)
    Mat aux_row;  // op-private per-channel state (e.g. 1/std)
    std::function<void(GradTape&, Node&)> forward;
    std::function<void(GradTape&, Node&)> backward;
    GridShape shape;
    std::string name;
    bool needs_grad = false;
  };

  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }

  void check(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("Var does not belong to this tape");
  }

  void require_same(Var a, Var b, const char* op) const {
    require_dims(node(a).value.rows() == node(b).value.rows() && node(a).value.cols() == node(b).value.cols(),
                 std::string(op) + ": shape mismatch");
  }

  Var push_leaf(Mat value, std::string name, GridShape shape, bool is_param) {
    if (shape.freq > 0)
      require_dims(static_cast<std::size_t>(value.rows()) == shape.freq * shape.time,
                   "leaf rows do not match grid shape");
    Node n;
    n.value = std::move(value);
    n.shape = shape;
    n.name = std::move(name);
    n.needs_grad = is_param;
    nodes_.push_back(std::move(n));
    Var v{nodes_.size() - 1};
    if (is_param) params_.push_back(v);
    return v;
  }

  template <class Fwd, class Bwd>
  Var push_op(std::initializer_list<Var> inputs, GridShape shape, Fwd fwd, Bwd bwd) {
    Node n;
    n.shape = shape;
    for (Var in : inputs) n.needs_grad = n.needs_grad || node(in).needs_grad;
    n.forward = std::move(fwd);
    n.backward = std::move(bwd);
    nodes_.push_back(std::move(n));
    Node& self = nodes_.back();
    self.forward(*this, self);
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<Var> params_;
  bool fresh_ = true;
  bool has_grad_ = false;
};

}  // namespace onebit
