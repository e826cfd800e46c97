#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "structedit/tape.hpp"

namespace structedit {
namespace nn {

struct Tensor {
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
};

// Named parameter tensors with Adam state. Parameters are materialized on a
// tape as leaves per forward pass; accumulate() pulls the tape gradients
// back into the store after backward().
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

  // out*in weight matrix, created on first use with uniform(-a, a),
  // a = sqrt(6 / in).
  ad::Var weight(ad::Tape& tape, const std::string& name, int out, int in);
  ad::Var bias(ad::Tape& tape, const std::string& name, int n);   // zeros
  ad::Var gain(ad::Tape& tape, const std::string& name, int n);   // ones

  void accumulate(const ad::Tape& tape);
  void zero_grad();
  void scale_grad(double s);
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  double grad_norm() const;
  std::size_t parameter_count() const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  Tensor& tensor(const std::string& name);
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::int64_t step() const { return step_; }

  void save(const std::string& path) const;
  void save(std::ostream& out) const;
  static ParameterStore load(const std::string& path);
  static ParameterStore load(std::istream& in);

 private:
  ad::Var bind(ad::Tape& tape, const std::string& name, int size,
               const std::function<double(Rng&)>& init);

  std::uint64_t seed_ = 0;
  std::int64_t step_ = 0;
  std::map<std::string, Tensor> tensors_;
  const ad::Tape* bound_tape_ = nullptr;
  std::vector<std::pair<std::string, ad::Var>> bound_;
};

struct MlpOptions {
  bool group_norm = true;
  bool skip = true;
  int groups = 8;
};

// affine -> (group norm) -> leaky relu -> affine, plus a skip connection
// when enabled and the widths agree.
ad::Var mlp_block(ad::Tape& tape, ParameterStore& params, const std::string& prefix,
                  ad::Var x, int hidden, int out, const MlpOptions& opt = {});

// Permutation-invariant set encoder: shared element block, componentwise max,
// output block. An empty set encodes to zeros.
ad::Var set_pool(ad::Tape& tape, ParameterStore& params, const std::string& prefix,
                 const std::vector<ad::Var>& elems, int elem_size, int hidden,
                 int out, const MlpOptions& opt = {});

// Central-difference check of d(out)/d(inputs). `f` must rebuild the same
// graph from the given leaves; returns the worst relative mismatch over
// `probes` randomly chosen coordinates.
double finite_difference_check(
    const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& f,
    const std::vector<std::vector<double>>& inputs, std::uint64_t seed,
    int probes, double eps = 1e-5);

}  // namespace nn
}  // namespace structedit
