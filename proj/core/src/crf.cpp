#include "sluxfer/crf.hpp"

#include <cmath>
#include <limits>

#include "sluxfer/error.hpp"

namespace sluxfer {

namespace {

void check_inputs(const EmissionScores& e, const TransitionMatrix& crf) {
  const Eigen::Index k = crf.num_tags();
  if (crf.transitions.cols() != k || crf.start.rows() != k || crf.end.rows() != k) {
    throw ShapeError("crf: inconsistent transition shapes");
  }
  if (e.cols() != k) {
    throw ShapeError("crf: emissions have " + std::to_string(e.cols()) + " tag columns, expected " +
                     std::to_string(k));
  }
  if (e.rows() == 0) throw ShapeError("crf: empty sequence");
  if (!e.allFinite() || !crf.transitions.allFinite() || !crf.start.allFinite() || !crf.end.allFinite()) {
    throw ValidationError("crf: non-finite scores");
  }
}

void check_gold(const std::vector<int>& gold, Eigen::Index steps, Eigen::Index k) {
  if (static_cast<Eigen::Index>(gold.size()) != steps) throw ShapeError("crf: gold length differs from T");
  for (int y : gold) {
    if (y < 0 || y >= k) throw ValidationError("crf: gold tag index " + std::to_string(y) + " out of range");
  }
}

// exp(transitions - max) for the scaled recursions below.
struct ScaledTransitions {
  double shift;
  Matrix exp;
};

ScaledTransitions scale_transitions(const TransitionMatrix& crf) {
  const double shift = crf.transitions.maxCoeff();
  return {shift, (crf.transitions.array() - shift).exp().matrix()};
}

bool usable(double x) { return std::isnormal(x); }

// alpha(t, k): log-sum of scores of all prefixes ending in tag k at t.
// Each step is one matrix-vector product in max-shifted exp space; a step
// whose sums underflow is redone exactly in log space.
Matrix forward_scores(const EmissionScores& e, const TransitionMatrix& crf, const ScaledTransitions& st) {
  const Eigen::Index steps = e.rows();
  const Eigen::Index k = crf.num_tags();
  Matrix alpha(steps, k);
  alpha.row(0) = crf.start.col(0).transpose() + e.row(0);
  Vector tmp(k);
  for (Eigen::Index t = 1; t < steps; ++t) {
    const double m = alpha.row(t - 1).maxCoeff();
    const Vector v = (alpha.row(t - 1).transpose().array() - m).exp().matrix();
    const Vector sums = st.exp.transpose() * v;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (usable(sums(j))) {
        alpha(t, j) = std::log(sums(j)) + m + st.shift + e(t, j);
      } else {
        tmp = alpha.row(t - 1).transpose() + crf.transitions.col(j);
        alpha(t, j) = log_sum_exp(tmp) + e(t, j);
      }
    }
  }
  return alpha;
}

// beta(t, k): log-sum of scores of all suffixes after tag k at t, end score included.
Matrix backward_scores(const EmissionScores& e, const TransitionMatrix& crf, const ScaledTransitions& st) {
  const Eigen::Index steps = e.rows();
  const Eigen::Index k = crf.num_tags();
  Matrix beta(steps, k);
  beta.row(steps - 1) = crf.end.col(0).transpose();
  Vector tmp(k);
  for (Eigen::Index t = steps - 2; t >= 0; --t) {
    const Vector next = e.row(t + 1).transpose() + beta.row(t + 1).transpose();
    const double m = next.maxCoeff();
    const Vector sums = st.exp * (next.array() - m).exp().matrix();
    for (Eigen::Index i = 0; i < k; ++i) {
      if (usable(sums(i))) {
        beta(t, i) = std::log(sums(i)) + m + st.shift;
      } else {
        tmp = crf.transitions.row(i).transpose() + next;
        beta(t, i) = log_sum_exp(tmp);
      }
    }
  }
  return beta;
}

}  // namespace

TransitionMatrix::TransitionMatrix(Eigen::Index num_tags)
    : transitions(Matrix::Zero(num_tags, num_tags)),
      start(Matrix::Zero(num_tags, 1)),
      end(Matrix::Zero(num_tags, 1)) {}

void TransitionMatrix::set_zero() {
  transitions.setZero();
  start.setZero();
  end.setZero();
}

void TransitionMatrix::collect(TensorList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "transitions"), &transitions});
  out.push_back({join_name(prefix, "start"), &start});
  out.push_back({join_name(prefix, "end"), &end});
}

void TransitionMatrix::collect(ConstTensorList& out, const std::string& prefix) const {
  out.push_back({join_name(prefix, "transitions"), &transitions});
  out.push_back({join_name(prefix, "start"), &start});
  out.push_back({join_name(prefix, "end"), &end});
}

double path_score(const EmissionScores& e, const TransitionMatrix& crf, const std::vector<int>& tags) {
  check_inputs(e, crf);
  check_gold(tags, e.rows(), crf.num_tags());
  double s = crf.start(tags.front(), 0) + crf.end(tags.back(), 0);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += e(static_cast<Eigen::Index>(t), tags[t]);
    if (t > 0) s += crf.transitions(tags[t - 1], tags[t]);
  }
  return s;
}

double log_partition(const EmissionScores& e, const TransitionMatrix& crf) {
  check_inputs(e, crf);
  const Matrix alpha = forward_scores(e, crf, scale_transitions(crf));
  return log_sum_exp(alpha.row(e.rows() - 1).transpose() + crf.end.col(0));
}

TagSequence viterbi(const EmissionScores& e, const TransitionMatrix& crf) {
  check_inputs(e, crf);
  const Eigen::Index steps = e.rows();
  const Eigen::Index k = crf.num_tags();
  Vector score = crf.start.col(0) + e.row(0).transpose();
  Vector next(k);
  std::vector<int> backptr(static_cast<std::size_t>((steps - 1) * k));
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int best_i = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double s = score(i) + crf.transitions(i, j);
        if (s > best) {
          best = s;
          best_i = static_cast<int>(i);
        }
      }
      next(j) = best + e(t, j);
      backptr[static_cast<std::size_t>((t - 1) * k + j)] = best_i;
    }
    std::swap(score, next);
  }
  score += crf.end.col(0);

  TagSequence out;
  out.tags.resize(static_cast<std::size_t>(steps));
  int last = 0;
  for (Eigen::Index j = 1; j < k; ++j) {
    if (score(j) > score(last)) last = static_cast<int>(j);
  }
  out.score = score(last);
  out.tags.back() = last;
  for (Eigen::Index t = steps - 2; t >= 0; --t) {
    out.tags[static_cast<std::size_t>(t)] =
        backptr[static_cast<std::size_t>(t * k + out.tags[static_cast<std::size_t>(t + 1)])];
  }
  return out;
}

double crf_nll(const EmissionScores& e, const TransitionMatrix& crf, const std::vector<int>& gold) {
  check_inputs(e, crf);
  check_gold(gold, e.rows(), crf.num_tags());
  return log_partition(e, crf) - path_score(e, crf, gold);
}

double crf_nll_backward(const EmissionScores& e, const TransitionMatrix& crf, const std::vector<int>& gold,
                        Matrix& d_emissions, TransitionMatrix& grad) {
  check_inputs(e, crf);
  check_gold(gold, e.rows(), crf.num_tags());
  const Eigen::Index steps = e.rows();
  const Eigen::Index k = crf.num_tags();

  const ScaledTransitions st = scale_transitions(crf);
  const Matrix alpha = forward_scores(e, crf, st);
  const Matrix beta = backward_scores(e, crf, st);
  const double log_z = log_sum_exp(alpha.row(steps - 1).transpose() + crf.end.col(0));

  // unary marginals
  d_emissions = (alpha + beta).array() - log_z;
  d_emissions = d_emissions.array().exp();
  grad.start.col(0) += d_emissions.row(0).transpose();
  grad.end.col(0) += d_emissions.row(steps - 1).transpose();

  // pairwise marginals, normalized per step (they sum to one)
  for (Eigen::Index t = 1; t < steps; ++t) {
    const double a = alpha.row(t - 1).maxCoeff();
    const Vector right = e.row(t).transpose() + beta.row(t).transpose();
    const double b = right.maxCoeff();
    const Matrix pair = ((alpha.row(t - 1).transpose().array() - a).exp().matrix() *
                         (right.array() - b).exp().matrix().transpose())
                            .cwiseProduct(st.exp);
    const double total = pair.sum();
    if (usable(total)) {
      grad.transitions += pair / total;
      continue;
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        grad.transitions(i, j) += std::exp(alpha(t - 1, i) + crf.transitions(i, j) + right(j) - log_z);
      }
    }
  }

  // subtract the gold path's sufficient statistics
  grad.start(gold.front(), 0) -= 1.0;
  grad.end(gold.back(), 0) -= 1.0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    d_emissions(t, gold[static_cast<std::size_t>(t)]) -= 1.0;
    if (t > 0) grad.transitions(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1.0;
  }
  return log_z - path_score(e, crf, gold);
}

}  // namespace sluxfer
