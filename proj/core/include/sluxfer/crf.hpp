#pragma once

#include <string>
#include <vector>

#include "sluxfer/tensor.hpp"

namespace sluxfer {

// Linear-chain CRF scores over K tags. A path y scores
//   start[y_0] + sum_t emission(t, y_t) + sum_t transition(y_{t-1}, y_t) + end[y_{T-1}].
struct TransitionMatrix {
  Matrix transitions;  // K x K, row = previous tag, column = next tag
  Matrix start;        // K x 1
  Matrix end;          // K x 1

  TransitionMatrix() = default;
  explicit TransitionMatrix(Eigen::Index num_tags);

  Eigen::Index num_tags() const { return transitions.rows(); }
  void set_zero();

  void collect(TensorList& out, const std::string& prefix);
  void collect(ConstTensorList& out, const std::string& prefix) const;
};

// T x K matrix of per-token tag scores.
using EmissionScores = Matrix;

struct TagSequence {
  std::vector<int> tags;
  double score = 0.0;
};

double path_score(const EmissionScores& emissions, const TransitionMatrix& crf, const std::vector<int>& tags);

// log of the sum over all K^T paths of exp(path score), via the forward
// algorithm in log space.
double log_partition(const EmissionScores& emissions, const TransitionMatrix& crf);

// Highest-scoring path. Ties resolve to the lowest tag index at the final
// position and at every backpointer.
TagSequence viterbi(const EmissionScores& emissions, const TransitionMatrix& crf);

// Negative log-likelihood of `gold`: log_partition - path_score(gold).
double crf_nll(const EmissionScores& emissions, const TransitionMatrix& crf, const std::vector<int>& gold);

// Negative log-likelihood plus its gradients. `d_emissions` is overwritten
// (T x K); transition gradients are accumulated into `grad`.
double crf_nll_backward(const EmissionScores& emissions, const TransitionMatrix& crf,
                        const std::vector<int>& gold, Matrix& d_emissions, TransitionMatrix& grad);

}  // namespace sluxfer
