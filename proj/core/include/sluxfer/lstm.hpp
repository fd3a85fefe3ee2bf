#pragma once

#include <random>
#include <string>

#include "sluxfer/tensor.hpp"

namespace sluxfer {

// Single-direction LSTM layer. Gate rows are stacked [input, forget, cell,
// output], each `hidden` rows tall.
struct Lstm {
  Matrix w_input;      // 4H x D
  Matrix w_recurrent;  // 4H x H
  Matrix bias;         // 4H x 1

  Lstm() = default;
  Lstm(Eigen::Index input_dim, Eigen::Index hidden_dim);

  Eigen::Index input_dim() const { return w_input.cols(); }
  Eigen::Index hidden_dim() const { return w_recurrent.cols(); }

  void initialize(std::mt19937_64& rng);
  void set_zero();

  void collect(TensorList& out, const std::string& prefix);
  void collect(ConstTensorList& out, const std::string& prefix) const;
};

// Cached activations of one LSTM pass, needed for backpropagation.
struct LstmTrace {
  bool reverse = false;
  Matrix input;    // D x T
  Matrix gates;    // 4H x T, post-activation
  Matrix cells;    // H x T
  Matrix hidden;   // H x T
};

// Runs the layer over the columns of `input` (left to right, or right to
// left when `reverse`), starting from zero state. Hidden column t is the
// state after consuming input column t.
LstmTrace lstm_forward(const Lstm& layer, const Matrix& input, bool reverse);

// Accumulates parameter gradients into `grad` and returns d(loss)/d(input)
// given d(loss)/d(hidden) for every column.
Matrix lstm_backward(const Lstm& layer, const LstmTrace& trace, const Matrix& d_hidden,
                     Lstm& grad);

// Bidirectional LSTM: independent forward and backward layers whose hidden
// states are concatenated per position, forward half first.
struct BiLstm {
  Lstm forward;
  Lstm backward;

  BiLstm() = default;
  BiLstm(Eigen::Index input_dim, Eigen::Index hidden_per_direction);

  Eigen::Index input_dim() const { return forward.input_dim(); }
  Eigen::Index output_dim() const { return forward.hidden_dim() + backward.hidden_dim(); }

  void initialize(std::mt19937_64& rng);
  void set_zero();

  void collect(TensorList& out, const std::string& prefix);
  void collect(ConstTensorList& out, const std::string& prefix) const;
};

struct BiLstmTrace {
  LstmTrace forward;
  LstmTrace backward;
  Matrix output;  // 2H x T
};

BiLstmTrace bilstm_forward(const BiLstm& layer, const Matrix& input);
Matrix bilstm_backward(const BiLstm& layer, const BiLstmTrace& trace, const Matrix& d_output,
                       BiLstm& grad);

// Affine layer y = W x + b applied column-wise.
struct Dense {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1

  Dense() = default;
  Dense(Eigen::Index input_dim, Eigen::Index output_dim);

  void initialize(std::mt19937_64& rng);
  void set_zero();

  void collect(TensorList& out, const std::string& prefix);
  void collect(ConstTensorList& out, const std::string& prefix) const;
};

}  // namespace sluxfer
