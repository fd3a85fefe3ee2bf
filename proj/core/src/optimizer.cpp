#include "sluxfer/optimizer.hpp"

#include <cmath>

#include "sluxfer/error.hpp"

namespace sluxfer {

void Adam::step(const TensorList& params, const ConstTensorList& grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient lists differ in length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i].value;
    const Matrix& g = *grads[i].value;
    if (p.rows() != g.rows() || p.cols() != g.cols()) throw ShapeError("adam: shape mismatch for " + params[i].name);
    if (p.size() == 0) continue;
    auto& st = state_[params[i].name];
    if (st.m.rows() != p.rows() || st.m.cols() != p.cols()) {
      st.m = Matrix::Zero(p.rows(), p.cols());
      st.v = Matrix::Zero(p.rows(), p.cols());
      st.steps = 0;
    }
    ++st.steps;
    st.m = options_.beta1 * st.m + (1.0 - options_.beta1) * g;
    st.v = options_.beta2 * st.v + (1.0 - options_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(st.steps));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(st.steps));
    p.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + options_.epsilon);
  }
}

double clip_global_norm(const TensorList& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.value->squaredNorm();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& g : grads) *g.value *= scale;
  }
  return norm;
}

}  // namespace sluxfer
