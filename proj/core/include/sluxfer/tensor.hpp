#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sluxfer {

// All numerics run in double precision; gradient checks depend on it.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A flat, ordered view over named tensors. Layers expose their parameters
// through one of these so optimizers, serializers and snapshots can treat
// them uniformly.
struct TensorRef {
  std::string name;
  Matrix* value;
};
struct ConstTensorRef {
  std::string name;
  const Matrix* value;
};
using TensorList = std::vector<TensorRef>;
using ConstTensorList = std::vector<ConstTensorRef>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

// Glorot-uniform initialization for a fan_out x fan_in weight.
void glorot_uniform(Matrix& w, std::mt19937_64& rng);

// Number of scalar entries across a tensor list.
std::size_t count_scalars(const ConstTensorList& tensors);

// Sum of squared entries across a tensor list.
double squared_norm(const ConstTensorList& tensors);

// Element-wise logistic sigmoid.
inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Numerically stable log-sum-exp of a vector.
double log_sum_exp(const Vector& v);

// Softmax of a vector.
Vector softmax(const Vector& v);

// Inverted dropout mask: entries are 0 with probability p and 1/(1-p)
// otherwise. p == 0 yields an all-ones mask.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng);

// Stable 64-bit mixing of several integers into one seed. Used to derive
// per-epoch / per-utterance random streams from one run seed so results do
// not depend on evaluation order or thread count.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace sluxfer

namespace sluxfer {

// Fisher-Yates shuffle driven only by raw mt19937_64 output, so the
// permutation is identical across standard library implementations.
template <class T>
void portable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sluxfer
