#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sluxfer/corpus.hpp"
#include "sluxfer/lstm.hpp"
#include "sluxfer/tensor.hpp"

namespace sluxfer {

enum class EmbeddingMode { kNoUT, kPretrained, kElmo, kElmoL };

EmbeddingMode parse_embedding_mode(std::string_view name);
std::string_view embedding_mode_name(EmbeddingMode mode);

struct CharFilterSpec {
  int width = 1;
  int channels = 1;
  bool operator==(const CharFilterSpec&) const = default;
};

// Filter bank of the ELMoL language model: 100 output channels.
std::vector<CharFilterSpec> default_char_filters();

struct EmbeddingConfig {
  EmbeddingMode mode = EmbeddingMode::kNoUT;
  int word_dim = 400;   // trainable word-vector part
  int fixed_dim = 0;    // pretrained vectors or frozen char-CNN part
  int total_dim = 400;  // dimension fed to the shared recurrent layer
  std::vector<CharFilterSpec> char_cnn_spec;

  // Canonical dimensions per mode. ELMo's total_dim is the contextual
  // dimension of the language model (1024 for the desk-scale bi-LM).
  static EmbeddingConfig for_mode(EmbeddingMode mode, int contextual_dim = 1024);
};

// Byte-level character alphabet with padding, unknown and word-boundary symbols.
class CharVocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBeginWord = 2;
  static constexpr int kEndWord = 3;
  static constexpr int kNumSpecial = 4;
  static constexpr std::size_t kMaxWordBytes = 48;

  CharVocabulary();
  // Every byte occurring in `words`, ordered by byte value.
  static CharVocabulary from_words(const std::vector<std::string>& words);
  static CharVocabulary from_bytes(const std::vector<unsigned char>& bytes);

  int index(unsigned char c) const { return ids_[c]; }
  std::size_t size() const { return kNumSpecial + bytes_.size(); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

  // [BOW, bytes..., EOW] right-padded with PAD to at least `min_length`.
  std::vector<int> encode(std::string_view word, std::size_t min_length) const;

  bool operator==(const CharVocabulary& other) const { return bytes_ == other.bytes_; }

 private:
  std::vector<unsigned char> bytes_;
  std::array<int, 256> ids_{};
};

// Character CNN: embeds characters, convolves one filter per spec entry and
// max-pools over positions, then applies tanh.
struct CharCnn {
  std::vector<CharFilterSpec> spec;
  Matrix char_embedding;      // char_dim x |chars|
  std::vector<Dense> filters; // filter i: channels_i x (width_i * char_dim)

  CharCnn() = default;
  CharCnn(std::vector<CharFilterSpec> spec, Eigen::Index char_dim, std::size_t num_chars);

  Eigen::Index output_dim() const;
  int max_width() const;
  void initialize(std::mt19937_64& rng);
  void set_zero();

  void collect(TensorList& out, const std::string& prefix);
  void collect(ConstTensorList& out, const std::string& prefix) const;
};

struct CharCnnTrace {
  std::vector<int> chars;
  Matrix windows_embedded;                // char_dim x L
  std::vector<std::vector<int>> argmax;   // per filter, per channel
  Vector output;
};

CharCnnTrace char_cnn_forward(const CharCnn& cnn, const CharVocabulary& chars, std::string_view word);
void char_cnn_backward(const CharCnn& cnn, const CharCnnTrace& trace, const Vector& d_output, CharCnn& grad);

// Convenience: the pooled vector for `word`.
Vector char_cnn_embed(const CharCnn& cnn, const CharVocabulary& chars, std::string_view word);

// Concatenation [word; char], word part first.
Vector compose_input(const Vector& word_vec, const Vector& char_vec);
// Same, but checks the parts against config.word_dim / config.fixed_dim.
Vector compose_input(const Vector& word_vec, const Vector& char_vec, const EmbeddingConfig& config);

// Scalar mixture gamma * sum_i softmax(s)_i * input_i. Entry 0 of s weights
// the non-contextual input, entries 1..L the contextual layers.
struct MixingWeights {
  Matrix gamma;  // 1 x 1
  Matrix s;      // (L+1) x 1, unnormalized

  MixingWeights() = default;
  explicit MixingWeights(Eigen::Index num_inputs);  // gamma = 1, uniform s

  Eigen::Index num_inputs() const { return s.rows(); }
  Vector normalized() const { return softmax(s.col(0)); }
  bool empty() const { return s.size() == 0; }
  void set_zero();

  void collect(TensorList& out, const std::string& prefix);
  void collect(ConstTensorList& out, const std::string& prefix) const;
};

Vector elmo_mix(const Vector& x, const std::vector<Vector>& h_layers, const MixingWeights& w);
Vector elmol_mix(const Vector& x, const Vector& h, const MixingWeights& w);

// Sequence form: every input is D x T.
Matrix mix_sequence(const std::vector<const Matrix*>& inputs, const MixingWeights& w);

// Accumulates d gamma and d s into `grad`; returns d(loss)/d(input_i) for each input.
std::vector<Matrix> mix_sequence_backward(const std::vector<const Matrix*>& inputs, const MixingWeights& w,
                                          const Matrix& d_output, MixingWeights& grad);

// Reads `word v1 ... vD` lines (an optional "count dim" header is skipped)
// into a D x |vocab| table. Vocabulary words missing from the file keep a
// zero column.
Matrix load_word_vectors(const std::filesystem::path& file, const Vocabulary& vocab, int dim,
                         std::size_t* found = nullptr);

}  // namespace sluxfer
