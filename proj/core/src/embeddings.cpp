#include "sluxfer/embeddings.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sluxfer/error.hpp"

namespace sluxfer {

EmbeddingMode parse_embedding_mode(std::string_view name) {
  if (name == "NoUT") return EmbeddingMode::kNoUT;
  if (name == "Pretrained" || name == "Fasttext" || name == "FastText") return EmbeddingMode::kPretrained;
  if (name == "ELMo") return EmbeddingMode::kElmo;
  if (name == "ELMoL") return EmbeddingMode::kElmoL;
  throw ValidationError("unknown embedding mode '" + std::string(name) + "'");
}

std::string_view embedding_mode_name(EmbeddingMode mode) {
  switch (mode) {
    case EmbeddingMode::kNoUT: return "NoUT";
    case EmbeddingMode::kPretrained: return "Pretrained";
    case EmbeddingMode::kElmo: return "ELMo";
    case EmbeddingMode::kElmoL: return "ELMoL";
  }
  return "?";
}

std::vector<CharFilterSpec> default_char_filters() {
  return {{1, 10}, {2, 20}, {3, 20}, {4, 20}, {5, 20}, {6, 10}};
}

EmbeddingConfig EmbeddingConfig::for_mode(EmbeddingMode mode, int contextual_dim) {
  EmbeddingConfig c;
  c.mode = mode;
  switch (mode) {
    case EmbeddingMode::kNoUT:
      c.word_dim = 400, c.fixed_dim = 0, c.total_dim = 400;
      break;
    case EmbeddingMode::kPretrained:
      c.word_dim = 100, c.fixed_dim = 300, c.total_dim = 400;
      break;
    case EmbeddingMode::kElmo:
      c.word_dim = 0, c.fixed_dim = 0, c.total_dim = contextual_dim;
      break;
    case EmbeddingMode::kElmoL:
      c.word_dim = 100, c.fixed_dim = 100, c.total_dim = 200;
      c.char_cnn_spec = default_char_filters();
      break;
  }
  return c;
}

// --- characters ------------------------------------------------------------

CharVocabulary::CharVocabulary() { ids_.fill(kUnk); }

CharVocabulary CharVocabulary::from_bytes(const std::vector<unsigned char>& bytes) {
  CharVocabulary v;
  v.bytes_ = bytes;
  std::sort(v.bytes_.begin(), v.bytes_.end());
  v.bytes_.erase(std::unique(v.bytes_.begin(), v.bytes_.end()), v.bytes_.end());
  for (std::size_t i = 0; i < v.bytes_.size(); ++i) v.ids_[v.bytes_[i]] = static_cast<int>(kNumSpecial + i);
  return v;
}

CharVocabulary CharVocabulary::from_words(const std::vector<std::string>& words) {
  std::array<bool, 256> seen{};
  for (const auto& w : words) {
    for (unsigned char c : w) seen[c] = true;
  }
  std::vector<unsigned char> bytes;
  for (int c = 0; c < 256; ++c) {
    if (seen[static_cast<std::size_t>(c)]) bytes.push_back(static_cast<unsigned char>(c));
  }
  return from_bytes(bytes);
}

std::vector<int> CharVocabulary::encode(std::string_view word, std::size_t min_length) const {
  std::vector<int> ids;
  ids.push_back(kBeginWord);
  for (std::size_t i = 0; i < word.size() && i < kMaxWordBytes; ++i) ids.push_back(index(static_cast<unsigned char>(word[i])));
  ids.push_back(kEndWord);
  while (ids.size() < min_length) ids.push_back(kPad);
  return ids;
}

CharCnn::CharCnn(std::vector<CharFilterSpec> spec_in, Eigen::Index char_dim, std::size_t num_chars)
    : spec(std::move(spec_in)), char_embedding(Matrix::Zero(char_dim, static_cast<Eigen::Index>(num_chars))) {
  for (const auto& f : spec) {
    if (f.width < 1 || f.channels < 1) throw ValidationError("char filter widths and channels must be positive");
    filters.emplace_back(f.width * char_dim, f.channels);
  }
}

Eigen::Index CharCnn::output_dim() const {
  Eigen::Index d = 0;
  for (const auto& f : spec) d += f.channels;
  return d;
}

int CharCnn::max_width() const {
  int w = 1;
  for (const auto& f : spec) w = std::max(w, f.width);
  return w;
}

void CharCnn::initialize(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.25, 0.25);
  for (Eigen::Index j = 0; j < char_embedding.cols(); ++j) {
    for (Eigen::Index i = 0; i < char_embedding.rows(); ++i) char_embedding(i, j) = dist(rng);
  }
  for (auto& f : filters) f.initialize(rng);
}

void CharCnn::set_zero() {
  char_embedding.setZero();
  for (auto& f : filters) f.set_zero();
}

void CharCnn::collect(TensorList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "char_embedding"), &char_embedding});
  for (std::size_t i = 0; i < filters.size(); ++i) filters[i].collect(out, join_name(prefix, "filter" + std::to_string(i)));
}

void CharCnn::collect(ConstTensorList& out, const std::string& prefix) const {
  out.push_back({join_name(prefix, "char_embedding"), &char_embedding});
  for (std::size_t i = 0; i < filters.size(); ++i) filters[i].collect(out, join_name(prefix, "filter" + std::to_string(i)));
}

CharCnnTrace char_cnn_forward(const CharCnn& cnn, const CharVocabulary& chars, std::string_view word) {
  if (word.empty()) throw ValidationError("char_cnn: empty word");
  CharCnnTrace tr;
  tr.chars = chars.encode(word, static_cast<std::size_t>(cnn.max_width()));
  const Eigen::Index dim = cnn.char_embedding.rows();
  const auto length = static_cast<Eigen::Index>(tr.chars.size());
  tr.windows_embedded.resize(dim, length);
  for (Eigen::Index p = 0; p < length; ++p) tr.windows_embedded.col(p) = cnn.char_embedding.col(tr.chars[static_cast<std::size_t>(p)]);

  tr.output.resize(cnn.output_dim());
  tr.argmax.resize(cnn.filters.size());
  Eigen::Index offset = 0;
  for (std::size_t f = 0; f < cnn.filters.size(); ++f) {
    const int width = cnn.spec[f].width;
    const Eigen::Index positions = length - width + 1;
    Matrix windows(width * dim, positions);
    for (Eigen::Index p = 0; p < positions; ++p) {
      for (int k = 0; k < width; ++k) windows.block(k * dim, p, dim, 1) = tr.windows_embedded.col(p + k);
    }
    Matrix z = cnn.filters[f].weight * windows;
    z.colwise() += cnn.filters[f].bias.col(0);
    auto& am = tr.argmax[f];
    am.resize(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      Eigen::Index best = 0;
      for (Eigen::Index p = 1; p < positions; ++p) {
        if (z(c, p) > z(c, best)) best = p;
      }
      am[static_cast<std::size_t>(c)] = static_cast<int>(best);
      tr.output(offset + c) = std::tanh(z(c, best));
    }
    offset += z.rows();
  }
  return tr;
}

void char_cnn_backward(const CharCnn& cnn, const CharCnnTrace& tr, const Vector& d_output, CharCnn& grad) {
  const Eigen::Index dim = cnn.char_embedding.rows();
  Matrix d_emb = Matrix::Zero(dim, tr.windows_embedded.cols());
  Eigen::Index offset = 0;
  for (std::size_t f = 0; f < cnn.filters.size(); ++f) {
    const int width = cnn.spec[f].width;
    const auto& w = cnn.filters[f].weight;
    for (Eigen::Index c = 0; c < w.rows(); ++c) {
      const double y = tr.output(offset + c);
      const double dz = d_output(offset + c) * (1.0 - y * y);
      if (dz == 0.0) continue;
      const int p = tr.argmax[f][static_cast<std::size_t>(c)];
      for (int k = 0; k < width; ++k) {
        grad.filters[f].weight.block(c, k * dim, 1, dim) += dz * tr.windows_embedded.col(p + k).transpose();
        d_emb.col(p + k) += dz * w.block(c, k * dim, 1, dim).transpose();
      }
      grad.filters[f].bias(c, 0) += dz;
    }
    offset += w.rows();
  }
  for (Eigen::Index p = 0; p < d_emb.cols(); ++p) grad.char_embedding.col(tr.chars[static_cast<std::size_t>(p)]) += d_emb.col(p);
}

Vector char_cnn_embed(const CharCnn& cnn, const CharVocabulary& chars, std::string_view word) {
  return char_cnn_forward(cnn, chars, word).output;
}

Vector compose_input(const Vector& word_vec, const Vector& char_vec) {
  Vector out(word_vec.size() + char_vec.size());
  out << word_vec, char_vec;
  return out;
}

Vector compose_input(const Vector& word_vec, const Vector& char_vec, const EmbeddingConfig& config) {
  if (word_vec.size() != config.word_dim || char_vec.size() != config.fixed_dim) {
    throw ShapeError("compose_input: got " + std::to_string(word_vec.size()) + "+" + std::to_string(char_vec.size()) +
                     " dims, expected " + std::to_string(config.word_dim) + "+" + std::to_string(config.fixed_dim));
  }
  return compose_input(word_vec, char_vec);
}

// --- mixing ----------------------------------------------------------------

MixingWeights::MixingWeights(Eigen::Index num_inputs)
    : gamma(Matrix::Ones(1, 1)), s(Matrix::Zero(num_inputs, 1)) {}

void MixingWeights::set_zero() {
  gamma.setZero();
  s.setZero();
}

void MixingWeights::collect(TensorList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "gamma"), &gamma});
  out.push_back({join_name(prefix, "s"), &s});
}

void MixingWeights::collect(ConstTensorList& out, const std::string& prefix) const {
  out.push_back({join_name(prefix, "gamma"), &gamma});
  out.push_back({join_name(prefix, "s"), &s});
}

Matrix mix_sequence(const std::vector<const Matrix*>& inputs, const MixingWeights& w) {
  if (static_cast<Eigen::Index>(inputs.size()) != w.num_inputs()) {
    throw ShapeError("mix: " + std::to_string(inputs.size()) + " inputs for " + std::to_string(w.num_inputs()) +
                     " mixing weights");
  }
  const Vector weights = w.normalized();
  Matrix out = Matrix::Zero(inputs.front()->rows(), inputs.front()->cols());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->rows() != out.rows() || inputs[i]->cols() != out.cols()) {
      throw ShapeError("mix: input " + std::to_string(i) + " has dimension " + std::to_string(inputs[i]->rows()) +
                       ", expected " + std::to_string(out.rows()));
    }
    out += weights(static_cast<Eigen::Index>(i)) * *inputs[i];
  }
  return w.gamma(0, 0) * out;
}

std::vector<Matrix> mix_sequence_backward(const std::vector<const Matrix*>& inputs, const MixingWeights& w,
                                          const Matrix& d_output, MixingWeights& grad) {
  const Vector weights = w.normalized();
  const double gamma = w.gamma(0, 0);
  const auto n = static_cast<Eigen::Index>(inputs.size());
  Vector d_weights(n);
  std::vector<Matrix> d_inputs;
  d_inputs.reserve(inputs.size());
  double d_gamma = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dot = d_output.cwiseProduct(*inputs[static_cast<std::size_t>(i)]).sum();
    d_gamma += weights(i) * dot;
    d_weights(i) = gamma * dot;
    d_inputs.push_back(gamma * weights(i) * d_output);
  }
  grad.gamma(0, 0) += d_gamma;
  // softmax Jacobian: ds_j = w_j (dw_j - <w, dw>)
  grad.s.col(0) += weights.cwiseProduct((d_weights.array() - weights.dot(d_weights)).matrix());
  return d_inputs;
}

Vector elmo_mix(const Vector& x, const std::vector<Vector>& h_layers, const MixingWeights& w) {
  std::vector<Matrix> cols;
  cols.reserve(h_layers.size() + 1);
  cols.emplace_back(x);
  for (const auto& h : h_layers) cols.emplace_back(h);
  std::vector<const Matrix*> ptrs;
  for (const auto& c : cols) ptrs.push_back(&c);
  return mix_sequence(ptrs, w).col(0);
}

Vector elmol_mix(const Vector& x, const Vector& h, const MixingWeights& w) {
  if (w.num_inputs() != 2) throw ShapeError("elmol_mix expects exactly two mixing weights");
  return elmo_mix(x, {h}, w);
}

Matrix load_word_vectors(const std::filesystem::path& file, const Vocabulary& vocab, int dim, std::size_t* found) {
  std::ifstream in(file);
  if (!in) throw FormatError(file.string(), 0, "cannot open word-vector file");
  Matrix table = Matrix::Zero(dim, static_cast<Eigen::Index>(vocab.size()));
  std::string line;
  std::size_t line_no = 0;
  std::size_t hits = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    values.clear();
    double v = 0.0;
    while (ss >> v) values.push_back(v);
    if (line_no == 1 && values.size() == 1) continue;  // "count dim" header
    if (static_cast<int>(values.size()) != dim) {
      throw FormatError(file.string(), line_no,
                        "expected " + std::to_string(dim) + " values, found " + std::to_string(values.size()));
    }
    const std::string key = lowercase(word);
    if (!vocab.contains(key)) continue;
    const int id = vocab.index(key);
    if (table.col(id).squaredNorm() != 0.0) continue;  // first occurrence wins
    table.col(id) = Eigen::Map<const Vector>(values.data(), dim);
    ++hits;
  }
  if (found) *found = hits;
  return table;
}

}  // namespace sluxfer
