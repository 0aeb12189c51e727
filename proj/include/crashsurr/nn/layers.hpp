#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/error.hpp"
#include "crashsurr/util/hash.hpp"

namespace crashsurr::nn {

using ad::Tensor;

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

// Ordered registry of trainable tensors. Names are unique and stable; they
// key checkpoints and weight transfer between model variants.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor t) {
    for (const auto& p : items_)
      require(p.name != name, ErrorKind::kInvalidArgument, "duplicate parameter name " + name);
    items_.push_back({std::move(name), std::move(t)});
    return items_.back().tensor;
  }

  const std::vector<NamedParameter>& items() const { return items_; }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (const auto& p : items_) out.push_back(p.tensor);
    return out;
  }

  const NamedParameter* find(const std::string& name) const {
    for (const auto& p : items_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.tensor.size();
    return n;
  }

  // Copies values of every parameter present in `other` under the same name
  // and shape. Returns the number of tensors copied.
  std::size_t copy_matching_from(const ParameterSet& other) {
    std::size_t copied = 0;
    for (auto& p : items_) {
      const auto* src = other.find(p.name);
      if (src == nullptr) continue;
      require(src->tensor.shape() == p.tensor.shape(), ErrorKind::kShapeMismatch,
              "parameter " + p.name + " has a different shape");
      auto dst = p.tensor.mutable_values();
      auto sv = src->tensor.values();
      std::copy(sv.begin(), sv.end(), dst.begin());
      ++copied;
    }
    return copied;
  }

 private:
  std::vector<NamedParameter> items_;
};

// Each parameter draws from its own generator seeded by (run seed, name), so
// adding a module never perturbs the initial values of the others.
inline Tensor init_uniform(ParameterSet& ps, const std::string& name, std::size_t rows, std::size_t cols,
                           double bound, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ util::fnv1a64(name));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return ps.add(name, Tensor::from(rows, cols, std::move(v), true));
}

inline Tensor init_constant(ParameterSet& ps, const std::string& name, std::size_t rows, std::size_t cols,
                            double value) {
  return ps.add(name, Tensor::from(rows, cols, std::vector<double>(rows * cols, value), true));
}

enum class Activation { kRelu, kGelu };

inline const char* to_string(Activation a) { return a == Activation::kRelu ? "relu" : "gelu"; }

inline Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  throw Error(ErrorKind::kInvalidArgument, "unknown activation '" + name + "' (expected relu or gelu)");
}

inline Tensor activate(const Tensor& x, Activation a) { return a == Activation::kRelu ? ad::relu(x) : ad::gelu(x); }

// y = x W + b with W stored in x out, uniform fan-in initialisation.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out, std::uint64_t seed) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = init_uniform(ps, prefix + ".weight", in, out, bound, seed);
    bias = init_uniform(ps, prefix + ".bias", 1, out, bound, seed);
  }

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  Tensor operator()(const Tensor& x) const {
    require(x.cols() == in_dim(), ErrorKind::kShapeMismatch,
            "linear: input width " + std::to_string(x.cols()) + " != " + std::to_string(in_dim()));
    return ad::add_row(ad::matmul(x, weight), bias);
  }
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterSet& ps, const std::string& prefix, std::size_t width) {
    gamma = init_constant(ps, prefix + ".gamma", 1, width, 1.0);
    beta = init_constant(ps, prefix + ".beta", 1, width, 0.0);
  }

  Tensor operator()(const Tensor& x) const { return ad::layer_norm(x, gamma, beta); }
};

// Two-layer perceptron: second(act(first(x))).
struct Mlp {
  Linear first;
  Linear second;
  Activation act = Activation::kRelu;

  Mlp() = default;
  Mlp(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
      Activation a, std::uint64_t seed)
      : first(ps, prefix + ".0", in, hidden, seed), second(ps, prefix + ".1", hidden, out, seed), act(a) {}

  Tensor operator()(const Tensor& x) const { return second(activate(first(x), act)); }
};

}  // namespace crashsurr::nn
