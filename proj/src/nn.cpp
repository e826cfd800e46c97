#include "structedit/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace structedit {
namespace nn {

using nlohmann::json;

ad::Var ParameterStore::bind(ad::Tape& tape, const std::string& name, int size,
                             const std::function<double(Rng&)>& init) {
  if (bound_tape_ != &tape) {
    bound_tape_ = &tape;
    bound_.clear();
  }
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    Tensor t;
    t.value.resize(size);
    Rng rng(combine_seed(seed_, fnv1a(name)));
    for (double& x : t.value) x = init(rng);
    t.grad.assign(size, 0.0);
    t.adam_m.assign(size, 0.0);
    t.adam_v.assign(size, 0.0);
    it = tensors_.emplace(name, std::move(t)).first;
  } else if (int(it->second.value.size()) != size) {
    throw std::invalid_argument("parameter size mismatch: " + name);
  }
  ad::Var v = tape.leaf(it->second.value);
  bound_.push_back({name, v});
  return v;
}

ad::Var ParameterStore::weight(ad::Tape& tape, const std::string& name, int out,
                               int in) {
  double a = std::sqrt(6.0 / in);
  return bind(tape, name, out * in,
              [a](Rng& rng) { return rng.uniform(-a, a); });
}

ad::Var ParameterStore::bias(ad::Tape& tape, const std::string& name, int n) {
  return bind(tape, name, n, [](Rng&) { return 0.0; });
}

ad::Var ParameterStore::gain(ad::Tape& tape, const std::string& name, int n) {
  return bind(tape, name, n, [](Rng&) { return 1.0; });
}

void ParameterStore::accumulate(const ad::Tape& tape) {
  if (bound_tape_ != &tape)
    throw std::logic_error("accumulate called with an unbound tape");
  for (const auto& [name, var] : bound_) {
    Tensor& t = tensors_.at(name);
    const auto& g = tape.grad(var);
    for (size_t i = 0; i < g.size(); ++i) t.grad[i] += g[i];
  }
  bound_tape_ = nullptr;
  bound_.clear();
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : tensors_)
    std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

void ParameterStore::scale_grad(double s) {
  for (auto& [name, t] : tensors_)
    for (double& g : t.grad) g *= s;
}

void ParameterStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++step_;
  double c1 = 1.0 - std::pow(beta1, double(step_));
  double c2 = 1.0 - std::pow(beta2, double(step_));
  for (auto& [name, t] : tensors_) {
    for (size_t i = 0; i < t.value.size(); ++i) {
      double g = t.grad[i];
      t.adam_m[i] = beta1 * t.adam_m[i] + (1.0 - beta1) * g;
      t.adam_v[i] = beta2 * t.adam_v[i] + (1.0 - beta2) * g * g;
      double mhat = t.adam_m[i] / c1;
      double vhat = t.adam_v[i] / c2;
      t.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  zero_grad();
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [name, t] : tensors_)
    for (double g : t.grad) s += g * g;
  return std::sqrt(s);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.value.size();
  return n;
}

Tensor& ParameterStore::tensor(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter " + name);
  return it->second;
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save(out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

void ParameterStore::save(std::ostream& out) const {
  json header;
  header["format_version"] = 1;
  header["seed"] = seed_;
  header["step"] = step_;
  json names = json::array();
  for (const auto& [name, t] : tensors_)
    names.push_back({{"name", name}, {"size", t.value.size()}});
  header["tensors"] = names;

  out << header.dump() << '\n';
  for (const auto& [name, t] : tensors_) {
    auto dump = [&](const std::vector<double>& v) {
      out.write(reinterpret_cast<const char*>(v.data()),
                std::streamsize(v.size() * sizeof(double)));
    };
    dump(t.value);
    dump(t.adam_m);
    dump(t.adam_v);
  }
}

ParameterStore ParameterStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return load(in);
}

ParameterStore ParameterStore::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("truncated checkpoint");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad checkpoint header: ") + e.what());
  }
  ParameterStore store(header.at("seed").get<std::uint64_t>());
  store.step_ = header.at("step").get<std::int64_t>();
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    size_t size = entry.at("size").get<size_t>();
    Tensor t;
    t.value.resize(size);
    t.adam_m.resize(size);
    t.adam_v.resize(size);
    t.grad.assign(size, 0.0);
    auto slurp = [&](std::vector<double>& v) {
      in.read(reinterpret_cast<char*>(v.data()),
              std::streamsize(v.size() * sizeof(double)));
    };
    slurp(t.value);
    slurp(t.adam_m);
    slurp(t.adam_v);
    if (!in) throw std::runtime_error("truncated checkpoint tensor " + name);
    store.tensors_.emplace(name, std::move(t));
  }
  return store;
}

ad::Var mlp_block(ad::Tape& tape, ParameterStore& params, const std::string& prefix,
                  ad::Var x, int hidden, int out, const MlpOptions& opt) {
  ad::Var h = tape.affine(x, params.weight(tape, prefix + ".w1", hidden, x.size),
                          params.bias(tape, prefix + ".b1", hidden));
  if (opt.group_norm) {
    int groups = opt.groups;
    while (groups > 1 && hidden % groups != 0) --groups;
    h = tape.group_norm(h, groups, params.gain(tape, prefix + ".gn_g", hidden),
                        params.bias(tape, prefix + ".gn_b", hidden));
  }
  h = tape.leaky_relu(h);
  ad::Var y = tape.affine(h, params.weight(tape, prefix + ".w2", out, hidden),
                          params.bias(tape, prefix + ".b2", out));
  if (opt.skip && x.size == out) y = tape.add(y, x);
  return y;
}

ad::Var set_pool(ad::Tape& tape, ParameterStore& params, const std::string& prefix,
                 const std::vector<ad::Var>& elems, int elem_size, int hidden,
                 int out, const MlpOptions& opt) {
  if (elems.empty()) {
    // still touch the parameters so that checkpoints have a fixed shape
    ad::Var probe = tape.constant(std::vector<double>(elem_size, 0.0));
    mlp_block(tape, params, prefix + ".elem", probe, hidden, hidden, opt);
    mlp_block(tape, params, prefix + ".out",
              tape.constant(std::vector<double>(hidden, 0.0)), hidden, out, opt);
    return tape.constant(std::vector<double>(out, 0.0));
  }
  std::vector<ad::Var> encoded;
  for (ad::Var e : elems) {
    if (e.size != elem_size)
      throw std::invalid_argument("set_pool element size mismatch");
    encoded.push_back(mlp_block(tape, params, prefix + ".elem", e, hidden, hidden, opt));
  }
  ad::Var pooled = tape.max_pool(encoded);
  return mlp_block(tape, params, prefix + ".out", pooled, hidden, out, opt);
}

double finite_difference_check(
    const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& f,
    const std::vector<std::vector<double>>& inputs, std::uint64_t seed,
    int probes, double eps) {
  auto eval = [&](const std::vector<std::vector<double>>& vals,
                  std::vector<std::vector<double>>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& v : vals) leaves.push_back(tape.leaf(v));
    ad::Var out = f(tape, leaves);
    if (out.size != 1) throw std::invalid_argument("check needs a scalar output");
    double y = tape.value(out)[0];
    if (grads) {
      tape.backward(out);
      grads->clear();
      for (ad::Var l : leaves) grads->push_back(tape.grad(l));
    }
    return y;
  };

  std::vector<std::vector<double>> analytic;
  eval(inputs, &analytic);

  Rng rng(seed);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    int vi = int(rng.next_below(std::uint32_t(inputs.size())));
    if (inputs[vi].empty()) continue;
    int ci = int(rng.next_below(std::uint32_t(inputs[vi].size())));
    auto plus = inputs, minus = inputs;
    plus[vi][ci] += eps;
    minus[vi][ci] -= eps;
    double fd = (eval(plus, nullptr) - eval(minus, nullptr)) / (2 * eps);
    double an = analytic[vi][ci];
    double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace nn
}  // namespace structedit
