#pragma once

#include <string>
#include <unordered_map>

#include "sluxfer/tensor.hpp"

namespace sluxfer {

// Adam with per-tensor moment state and per-tensor step counters, so a
// tensor that stays frozen for a while starts with fresh bias correction.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options options) : options_(options) {}

  // Updates `params[i]` with `grads[i]` (matched by position) at rate `lr`.
  void step(const TensorList& params, const ConstTensorList& grads, double lr);

  void reset() { state_.clear(); }

 private:
  struct State {
    Matrix m;
    Matrix v;
    long steps = 0;
  };
  Options options_;
  std::unordered_map<std::string, State> state_;
};

// Rescales gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_global_norm(const TensorList& grads, double max_norm);

}  // namespace sluxfer
