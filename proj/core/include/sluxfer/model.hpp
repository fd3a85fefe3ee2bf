#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sluxfer/corpus.hpp"
#include "sluxfer/crf.hpp"
#include "sluxfer/embeddings.hpp"
#include "sluxfer/lm.hpp"
#include "sluxfer/lstm.hpp"

namespace sluxfer {

// Parameter groups, bottom to top. Every trainable tensor belongs to
// exactly one of them.
inline constexpr std::array<std::string_view, 8> kParamGroups = {
    "embedding", "shared_birnn", "mixing", "et_birnn", "et_projection", "crf", "ic_birnn", "intent_softmax"};

bool is_param_group(std::string_view name);
// embedding and shared_birnn hold transferred knowledge; the rest are heads.
bool is_lower_group(std::string_view name);
// Groups whose shapes depend on the label space.
bool is_label_group(std::string_view name);

struct ModelConfig {
  EmbeddingConfig embedding = EmbeddingConfig::for_mode(EmbeddingMode::kNoUT);
  int hidden = 100;  // units per direction in each of the three bi-LSTMs
  double dropout = 0.5;
  double l2 = 1e-4;
  // Scalar mixing: over LM layers (ELMo) or over x_t and the shared layer
  // output (ELMoL). Ignored for NoUT / Pretrained.
  bool mixing = true;

  bool uses_mixing() const {
    return mixing && (embedding.mode == EmbeddingMode::kElmo || embedding.mode == EmbeddingMode::kElmoL);
  }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct SluParams {
  Matrix word_embedding;  // word_dim x |V|; group "embedding"
  BiLstm shared;
  MixingWeights mixing;
  BiLstm et_rnn;
  Dense et_projection;    // |tags| x 2H
  TransitionMatrix crf;
  BiLstm ic_rnn;
  Dense intent;           // |intents| x 2H  (W_I, b_I)

  TensorList group(std::string_view name);
  ConstTensorList group(std::string_view name) const;
  // All groups, names prefixed by group.
  void collect(TensorList& out);
  void collect(ConstTensorList& out) const;
  SluParams zeros_like() const;
  void set_zero();
};

// Token ids plus frozen language-model features (ELMo mode only).
struct EncodedUtterance {
  std::vector<std::string> tokens;
  std::vector<int> ids;
  std::shared_ptr<const ContextualStates> lm_states;
};

struct ForwardOptions {
  bool train = false;           // enables dropout
  std::uint64_t dropout_seed = 0;
};

// Activations of one forward pass. Dropout masks are empty in eval mode.
struct ForwardTrace {
  std::shared_ptr<const EncodedUtterance> input;
  Matrix embedded;            // x_t (or the ELMo mixture) per column
  Matrix embed_mask;
  Matrix shared_input;        // embedded after dropout
  BiLstmTrace shared;         // shared.output holds r^c_t
  Matrix shared_mask;
  Matrix shared_output;       // r^c after dropout
  Matrix head_input;          // input to both task heads
  BiLstmTrace et;             // et.output holds r^entity_t
  Matrix et_mask;
  Matrix entity_output;       // r^entity after dropout
  Matrix emissions;           // T x |tags|
  BiLstmTrace ic;
  Vector intent_repr;         // r^intent = r^{IC,f}_T (+) r^{IC,b}_1
  Vector intent_mask;
  Vector intent_dropped;
  Vector intent_logits;

  Eigen::Index length() const { return embedded.cols(); }
  const Matrix& shared_states() const { return shared.output; }
  const Matrix& entity_states() const { return et.output; }
};

struct LossTerms {
  double intent = 0.0;  // cross-entropy of the gold intent
  double entity = 0.0;  // CRF negative log-likelihood of the gold tags
  double total() const { return intent + entity; }
};

struct Prediction {
  std::string intent;
  std::vector<std::string> tags;
  Vector intent_posterior;
  TagSequence tag_path;
};

class SluModel {
 public:
  SluModel() = default;
  SluModel(ModelConfig config, Vocabulary vocab, LabelSpace labels, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const LabelSpace& labels() const { return labels_; }
  SluParams& params() { return params_; }
  const SluParams& params() const { return params_; }

  // Non-trainable inputs: pretrained vectors (Pretrained) or the frozen
  // char-CNN table (ELMoL), fixed_dim x |V|.
  void set_fixed_embedding(Matrix table);
  const Matrix& fixed_embedding() const { return fixed_; }
  // Frozen language model feeding the ELMo mixture.
  void set_language_model(std::shared_ptr<const LanguageModel> lm);
  const std::shared_ptr<const LanguageModel>& language_model() const { return lm_; }
  // ELMoL: shared layer and word vectors from the pretrained LM, plus its
  // frozen char-CNN table.
  void import_shared_layer(const SharedLayerBundle& bundle);

  EncodedUtterance encode(const std::vector<std::string>& tokens) const;

  ForwardTrace forward(const EncodedUtterance& input, const ForwardOptions& options = {}) const;
  ForwardTrace forward(std::shared_ptr<const EncodedUtterance> input, const ForwardOptions& options = {}) const;

  LossTerms joint_loss(const ForwardTrace& trace, int gold_intent, const std::vector<int>& gold_tags) const;
  // Accumulates gradients of the joint loss (no L2) into `grad`.
  LossTerms backward(const ForwardTrace& trace, int gold_intent, const std::vector<int>& gold_tags,
                     SluParams& grad) const;

  // l2 * sum of squared trainable weights.
  double l2_penalty() const;
  // Adds d(l2_penalty)/dw for the listed groups.
  void add_l2_gradient(SluParams& grad, const std::set<std::string>& groups) const;

  Prediction predict(const EncodedUtterance& input) const;
  Prediction predict(const std::vector<std::string>& tokens) const;

  // Gold label indices for an utterance; throws ValidationError on labels
  // outside the label space.
  int intent_index(const std::string& intent) const;
  std::vector<int> tag_indices(const std::vector<std::string>& tags) const;

  std::size_t num_trainable() const;
  std::uint64_t seed() const { return seed_; }

 private:
  Matrix embed(const EncodedUtterance& input) const;

  ModelConfig config_;
  Vocabulary vocab_;
  LabelSpace labels_;
  SluParams params_;
  Matrix fixed_;
  std::shared_ptr<const LanguageModel> lm_;
  std::uint64_t seed_ = 0;
};

// Copies the named groups from `from` into `to` bit-exactly. Throws
// ShapeError when any copied tensor differs in shape.
void copy_groups(const SluModel& from, SluModel& to, const std::set<std::string>& groups);

// New model for `new_space`: `keep` groups copied from `model`, the rest
// (always including intent_softmax, et_projection and crf) freshly
// initialized from `seed`. Fixed embeddings and the frozen LM carry over.
SluModel replace_heads(const SluModel& model, const LabelSpace& new_space, const std::set<std::string>& keep,
                       std::uint64_t seed);

void save_model(const SluModel& model, const std::filesystem::path& file);
SluModel load_model(const std::filesystem::path& file);

}  // namespace sluxfer
