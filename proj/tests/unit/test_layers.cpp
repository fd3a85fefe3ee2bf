#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "sluxfer/embeddings.hpp"
#include "sluxfer/error.hpp"
#include "sluxfer/lstm.hpp"
#include "sluxfer/optimizer.hpp"

namespace sluxfer {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void randomize(Lstm& l, std::mt19937_64& rng) {
  l.initialize(rng);
  l.bias = random_matrix(l.bias.rows(), 1, rng) * 0.3;
}

TEST(Lstm, ShapesAndDirection) {
  std::mt19937_64 rng(1);
  Lstm l(3, 4);
  randomize(l, rng);
  const Matrix x = random_matrix(3, 5, rng);
  const auto fwd = lstm_forward(l, x, false);
  EXPECT_EQ(fwd.hidden.rows(), 4);
  EXPECT_EQ(fwd.hidden.cols(), 5);
  // the reverse pass over x equals the forward pass over reversed x, reversed
  const auto rev = lstm_forward(l, x, true);
  const Matrix xr = x.rowwise().reverse();
  const auto fr = lstm_forward(l, xr, false);
  EXPECT_TRUE(rev.hidden.isApprox(fr.hidden.rowwise().reverse(), 1e-14));
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (bool reverse : {false, true}) {
    Lstm l(3, 4);
    randomize(l, rng);
    Matrix x = random_matrix(3, 5, rng);
    const Matrix proj = random_matrix(4, 5, rng);
    auto loss = [&] { return lstm_forward(l, x, reverse).hidden.cwiseProduct(proj).sum(); };
    Lstm grad(3, 4);
    grad.set_zero();
    const auto tr = lstm_forward(l, x, reverse);
    const Matrix dx = lstm_backward(l, tr, proj, grad);
    TensorList params;
    l.collect(params, "lstm");
    params.push_back({"x", &x});
    ConstTensorList grads;
    std::as_const(grad).collect(grads, "lstm");
    grads.push_back({"x", &dx});
    const auto r = testing::check_gradients(params, grads, loss);
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  }
}

TEST(BiLstm, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  BiLstm b(2, 3);
  b.initialize(rng);
  Matrix x = random_matrix(2, 4, rng);
  const Matrix proj = random_matrix(6, 4, rng);
  auto loss = [&] { return bilstm_forward(b, x).output.cwiseProduct(proj).sum(); };
  BiLstm grad(2, 3);
  grad.set_zero();
  const Matrix dx = bilstm_backward(b, bilstm_forward(b, x), proj, grad);
  TensorList params;
  b.collect(params, "bi");
  params.push_back({"x", &x});
  ConstTensorList grads;
  std::as_const(grad).collect(grads, "bi");
  grads.push_back({"x", &dx});
  const auto r = testing::check_gradients(params, grads, loss);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_EQ(b.output_dim(), 6);
}

TEST(CharCnn, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  const auto chars = CharVocabulary::from_words({"boston", "denver"});
  CharCnn cnn({{1, 3}, {2, 4}, {3, 2}}, 5, chars.size());
  cnn.initialize(rng);
  const Vector proj = random_matrix(9, 1, rng).col(0);
  auto loss = [&] { return char_cnn_embed(cnn, chars, "boston").dot(proj); };
  CharCnn grad = cnn;
  grad.set_zero();
  char_cnn_backward(cnn, char_cnn_forward(cnn, chars, "boston"), proj, grad);
  TensorList params;
  cnn.collect(params, "cnn");
  ConstTensorList grads;
  std::as_const(grad).collect(grads, "cnn");
  const auto r = testing::check_gradients(params, grads, loss);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_EQ(cnn.output_dim(), 9);
}

TEST(CharCnn, DefaultFiltersGiveHundredChannels) {
  int total = 0;
  for (const auto& f : default_char_filters()) total += f.channels;
  EXPECT_EQ(total, 100);
  EXPECT_EQ(default_char_filters().back().width, 6);
}

TEST(CharVocabulary, EncodesWithBoundariesAndPadding) {
  const auto chars = CharVocabulary::from_words({"ab"});
  const auto ids = chars.encode("ab", 6);
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(ids[0], CharVocabulary::kBeginWord);
  EXPECT_EQ(ids[3], CharVocabulary::kEndWord);
  EXPECT_EQ(ids[5], CharVocabulary::kPad);
  EXPECT_EQ(chars.encode("z", 1)[1], CharVocabulary::kUnk);
}

TEST(Mixing, ElmoAndElmoLForms) {
  MixingWeights w(3);
  w.gamma(0, 0) = 2.0;
  w.s << 0.0, std::log(2.0), std::log(3.0);  // softmax -> 1/6, 2/6, 3/6
  Vector x(2), h1(2), h2(2);
  x << 6, 0;
  h1 << 0, 6;
  h2 << 6, 6;
  const Vector m = elmo_mix(x, {h1, h2}, w);
  EXPECT_NEAR(m(0), 2.0 * (1.0 + 3.0), 1e-12);
  EXPECT_NEAR(m(1), 2.0 * (2.0 + 3.0), 1e-12);
  MixingWeights w2(2);
  EXPECT_NEAR(elmol_mix(x, h1, w2)(0), 3.0, 1e-12);
  EXPECT_THROW(elmol_mix(x, h1, w), ShapeError);
}

TEST(Mixing, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  MixingWeights w(3);
  w.gamma(0, 0) = 1.3;
  w.s = random_matrix(3, 1, rng);
  Matrix a = random_matrix(4, 3, rng), b = random_matrix(4, 3, rng), c = random_matrix(4, 3, rng);
  const Matrix proj = random_matrix(4, 3, rng);
  auto loss = [&] { return mix_sequence({&a, &b, &c}, w).cwiseProduct(proj).sum(); };
  MixingWeights grad(3);
  grad.set_zero();
  const auto d_inputs = mix_sequence_backward({&a, &b, &c}, w, proj, grad);
  TensorList params;
  w.collect(params, "mix");
  params.push_back({"a", &a});
  params.push_back({"c", &c});
  ConstTensorList grads;
  std::as_const(grad).collect(grads, "mix");
  grads.push_back({"a", &d_inputs[0]});
  grads.push_back({"c", &d_inputs[2]});
  const auto r = testing::check_gradients(params, grads, loss);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Embeddings, ComposeChecksDimensions) {
  const auto cfg = EmbeddingConfig::for_mode(EmbeddingMode::kElmoL);
  EXPECT_EQ(cfg.total_dim, 200);
  EXPECT_EQ(compose_input(Vector::Ones(100), Vector::Zero(100), cfg).size(), 200);
  EXPECT_THROW(compose_input(Vector::Ones(99), Vector::Zero(100), cfg), ShapeError);
  EXPECT_EQ(EmbeddingConfig::for_mode(EmbeddingMode::kNoUT).word_dim, 400);
  EXPECT_EQ(EmbeddingConfig::for_mode(EmbeddingMode::kPretrained).fixed_dim, 300);
  EXPECT_EQ(parse_embedding_mode("ELMoL"), EmbeddingMode::kElmoL);
  EXPECT_THROW(parse_embedding_mode("BERT"), ValidationError);
}

TEST(Embeddings, LoadsWordVectors) {
  const auto file = std::filesystem::temp_directory_path() / "sluxfer-vectors.txt";
  {
    std::ofstream o(file);
    o << "3 2\nboston 1 2\ndenver 3 4\nboston 9 9\n";
  }
  const Vocabulary v({"boston", "seattle", "denver"});
  std::size_t found = 0;
  const Matrix t = load_word_vectors(file, v, 2, &found);
  EXPECT_EQ(found, 2u);
  EXPECT_EQ(t(0, v.index("boston")), 1.0);
  EXPECT_EQ(t(1, v.index("denver")), 4.0);
  EXPECT_EQ(t.col(v.index("seattle")).norm(), 0.0);
  std::filesystem::remove(file);
}

TEST(Optimizer, AdamAndClipping) {
  Matrix w = Matrix::Constant(2, 2, 1.0);
  Matrix g = Matrix::Constant(2, 2, 0.5);
  Adam adam;
  adam.step({{"w", &w}}, {{"w", &g}}, 0.1);
  // first Adam step moves each weight by lr (bias-corrected m / sqrt(v) = 1)
  EXPECT_NEAR(w(0, 0), 0.9, 1e-7);

  Matrix a = Matrix::Constant(1, 1, 3.0), b = Matrix::Constant(1, 1, 4.0);
  const double norm = clip_global_norm({{"a", &a}, {"b", &b}}, 1.0);
  EXPECT_DOUBLE_EQ(norm, 5.0);
  EXPECT_NEAR(a(0, 0), 0.6, 1e-12);
  Matrix bad = Matrix::Constant(1, 1, std::nan(""));
  EXPECT_THROW(clip_global_norm({{"x", &bad}}, 1.0), DivergenceError);
}

}  // namespace
}  // namespace sluxfer
