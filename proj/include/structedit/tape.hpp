#pragma once

#include <functional>
#include <vector>

#include "structedit/geometry.hpp"

namespace structedit {
namespace ad {

// Reverse-mode tape over vector-valued nodes. Creation order is topological,
// so backward() is a single reverse sweep. A tape lives for one forward and
// backward pass; parameters re-enter each pass as fresh leaves.
struct Var {
  int id = -1;
  int size = 0;
};

class Tape {
 public:
  Var constant(std::vector<double> value);
  Var leaf(std::vector<double> value);

  const std::vector<double>& value(Var v) const;
  const std::vector<double>& grad(Var v) const;
  int node_count() const { return int(nodes_.size()); }

  // Seeds the scalar output with gradient 1 and sweeps the tape.
  void backward(Var scalar_output);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var mul(Var a, Var b);
  Var concat(const std::vector<Var>& parts);
  Var slice(Var a, int start, int len);

  // w holds out*in row-major weights, b holds out biases.
  Var affine(Var x, Var w, Var b);
  Var leaky_relu(Var a, double alpha = 0.01);
  Var sigmoid(Var a);
  Var exp(Var a);
  // Componentwise max over equally sized inputs; ties go to the lowest index.
  Var max_pool(const std::vector<Var>& elems);
  Var group_norm(Var x, int groups, Var gamma, Var beta, double eps = 1e-5);
  Var normalize(Var a);

  // Scalar-first quaternion Hamilton product of two 4-vectors.
  Var quat_multiply(Var a, Var b);
  // Surface grid of the oriented box (center 3, quat 4, extents 3), flattened
  // xyz triples over the deterministic 6*m*m unit grid.
  Var box_points(Var center, Var quat, Var extents, int grid_m);
  // Symmetric chamfer between two flattened point lists; nearest-neighbor
  // indices are fixed at the forward pass.
  Var chamfer(Var a_points, Var b_points);

  Var sum(Var a);
  Var squared_norm(Var a);
  Var softmax_cross_entropy(Var logits, int target);
  // Mean over components of the logit binary cross entropy.
  Var bce_with_logits(Var logits, const std::vector<double>& targets);
  // KL(N(mean, exp(logvar)) || N(0, 1)), summed over components.
  Var gaussian_kl(Var mean, Var logvar);

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void()> back;
    bool needs_grad = false;
  };

  Var make(std::vector<double> value, bool needs_grad, std::function<void()> back);
  bool any_grad(const std::vector<Var>& vs) const;
  std::vector<double>& g(int id) { return nodes_[id].grad; }
  const std::vector<double>& v(int id) const { return nodes_[id].value; }
  void check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace ad
}  // namespace structedit
