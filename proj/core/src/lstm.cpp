#include "sluxfer/lstm.hpp"

#include "sluxfer/error.hpp"

namespace sluxfer {

Lstm::Lstm(Eigen::Index input_dim, Eigen::Index hidden_dim)
    : w_input(Matrix::Zero(4 * hidden_dim, input_dim)),
      w_recurrent(Matrix::Zero(4 * hidden_dim, hidden_dim)),
      bias(Matrix::Zero(4 * hidden_dim, 1)) {}

void Lstm::initialize(std::mt19937_64& rng) {
  glorot_uniform(w_input, rng);
  glorot_uniform(w_recurrent, rng);
  bias.setZero();
}

void Lstm::set_zero() {
  w_input.setZero();
  w_recurrent.setZero();
  bias.setZero();
}

void Lstm::collect(TensorList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "w_input"), &w_input});
  out.push_back({join_name(prefix, "w_recurrent"), &w_recurrent});
  out.push_back({join_name(prefix, "bias"), &bias});
}

void Lstm::collect(ConstTensorList& out, const std::string& prefix) const {
  out.push_back({join_name(prefix, "w_input"), &w_input});
  out.push_back({join_name(prefix, "w_recurrent"), &w_recurrent});
  out.push_back({join_name(prefix, "bias"), &bias});
}

LstmTrace lstm_forward(const Lstm& layer, const Matrix& input, bool reverse) {
  if (input.rows() != layer.input_dim()) {
    throw ShapeError("lstm: input has " + std::to_string(input.rows()) + " rows, layer expects " +
                     std::to_string(layer.input_dim()));
  }
  const Eigen::Index h = layer.hidden_dim();
  const Eigen::Index steps = input.cols();

  LstmTrace tr;
  tr.reverse = reverse;
  tr.input = input;
  tr.gates.resize(4 * h, steps);
  tr.cells.resize(h, steps);
  tr.hidden.resize(h, steps);

  Matrix pre = layer.w_input * input;
  pre.colwise() += layer.bias.col(0);

  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    Vector a = pre.col(t) + layer.w_recurrent * h_prev;
    for (Eigen::Index r = 0; r < h; ++r) {
      a(r) = sigmoid(a(r));
      a(h + r) = sigmoid(a(h + r));
      a(2 * h + r) = std::tanh(a(2 * h + r));
      a(3 * h + r) = sigmoid(a(3 * h + r));
    }
    Vector c = a.segment(h, h).cwiseProduct(c_prev) + a.segment(0, h).cwiseProduct(a.segment(2 * h, h));
    Vector hv = a.segment(3 * h, h).cwiseProduct(c.array().tanh().matrix());
    tr.gates.col(t) = a;
    tr.cells.col(t) = c;
    tr.hidden.col(t) = hv;
    h_prev = hv;
    c_prev = c;
  }
  return tr;
}

Matrix lstm_backward(const Lstm& layer, const LstmTrace& tr, const Matrix& d_hidden, Lstm& grad) {
  const Eigen::Index h = layer.hidden_dim();
  const Eigen::Index steps = tr.input.cols();
  if (d_hidden.rows() != h || d_hidden.cols() != steps) throw ShapeError("lstm_backward: d_hidden shape");

  Matrix d_pre(4 * h, steps);
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  for (Eigen::Index k = steps - 1; k >= 0; --k) {
    const Eigen::Index t = tr.reverse ? steps - 1 - k : k;
    const bool has_prev = k > 0;
    const Eigen::Index tp = tr.reverse ? t + 1 : t - 1;

    const auto gi = tr.gates.col(t).segment(0, h);
    const auto gf = tr.gates.col(t).segment(h, h);
    const auto gg = tr.gates.col(t).segment(2 * h, h);
    const auto go = tr.gates.col(t).segment(3 * h, h);
    const Vector tanh_c = tr.cells.col(t).array().tanh();

    const Vector dh = d_hidden.col(t) + dh_next;
    const Vector d_o = dh.cwiseProduct(tanh_c);
    const Vector dc =
        dc_next + (dh.array() * go.array() * (1.0 - tanh_c.array().square())).matrix();
    const Vector d_i = dc.cwiseProduct(gg);
    const Vector d_g = dc.cwiseProduct(gi);
    Vector d_f = Vector::Zero(h);
    if (has_prev) d_f = dc.cwiseProduct(tr.cells.col(tp));
    dc_next = dc.cwiseProduct(gf);

    auto da = d_pre.col(t);
    da.segment(0, h) = (d_i.array() * gi.array() * (1.0 - gi.array())).matrix();
    da.segment(h, h) = (d_f.array() * gf.array() * (1.0 - gf.array())).matrix();
    da.segment(2 * h, h) = (d_g.array() * (1.0 - gg.array().square())).matrix();
    da.segment(3 * h, h) = (d_o.array() * go.array() * (1.0 - go.array())).matrix();

    if (has_prev) grad.w_recurrent.noalias() += da * tr.hidden.col(tp).transpose();
    dh_next = layer.w_recurrent.transpose() * da;
  }
  grad.w_input.noalias() += d_pre * tr.input.transpose();
  grad.bias.col(0) += d_pre.rowwise().sum();
  return layer.w_input.transpose() * d_pre;
}

BiLstm::BiLstm(Eigen::Index input_dim, Eigen::Index hidden_per_direction)
    : forward(input_dim, hidden_per_direction), backward(input_dim, hidden_per_direction) {}

void BiLstm::initialize(std::mt19937_64& rng) {
  forward.initialize(rng);
  backward.initialize(rng);
}

void BiLstm::set_zero() {
  forward.set_zero();
  backward.set_zero();
}

void BiLstm::collect(TensorList& out, const std::string& prefix) {
  forward.collect(out, join_name(prefix, "forward"));
  backward.collect(out, join_name(prefix, "backward"));
}

void BiLstm::collect(ConstTensorList& out, const std::string& prefix) const {
  forward.collect(out, join_name(prefix, "forward"));
  backward.collect(out, join_name(prefix, "backward"));
}

BiLstmTrace bilstm_forward(const BiLstm& layer, const Matrix& input) {
  BiLstmTrace tr;
  tr.forward = lstm_forward(layer.forward, input, false);
  tr.backward = lstm_forward(layer.backward, input, true);
  const Eigen::Index hf = layer.forward.hidden_dim();
  tr.output.resize(layer.output_dim(), input.cols());
  tr.output.topRows(hf) = tr.forward.hidden;
  tr.output.bottomRows(layer.backward.hidden_dim()) = tr.backward.hidden;
  return tr;
}

Matrix bilstm_backward(const BiLstm& layer, const BiLstmTrace& tr, const Matrix& d_output,
                       BiLstm& grad) {
  const Eigen::Index hf = layer.forward.hidden_dim();
  Matrix dx = lstm_backward(layer.forward, tr.forward, d_output.topRows(hf), grad.forward);
  dx += lstm_backward(layer.backward, tr.backward, d_output.bottomRows(layer.backward.hidden_dim()),
                      grad.backward);
  return dx;
}

Dense::Dense(Eigen::Index input_dim, Eigen::Index output_dim)
    : weight(Matrix::Zero(output_dim, input_dim)), bias(Matrix::Zero(output_dim, 1)) {}

void Dense::initialize(std::mt19937_64& rng) {
  glorot_uniform(weight, rng);
  bias.setZero();
}

void Dense::set_zero() {
  weight.setZero();
  bias.setZero();
}

void Dense::collect(TensorList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "weight"), &weight});
  out.push_back({join_name(prefix, "bias"), &bias});
}

void Dense::collect(ConstTensorList& out, const std::string& prefix) const {
  out.push_back({join_name(prefix, "weight"), &weight});
  out.push_back({join_name(prefix, "bias"), &bias});
}

}  // namespace sluxfer
