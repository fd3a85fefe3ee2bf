#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sluxfer/checkpoint.hpp"
#include "sluxfer/corpus.hpp"
#include "sluxfer/embeddings.hpp"
#include "sluxfer/lstm.hpp"

namespace sluxfer {

struct LMConfig {
  int layers = 1;
  int hidden = 100;     // per direction
  int word_dim = 100;   // trainable word part of the token representation
  int char_dim = 16;    // character embedding size
  std::vector<CharFilterSpec> char_filters = default_char_filters();
  int batch_size = 32;
  int epochs = 50;
  double learning_rate = 0.001;
  double dropout = 0.1;
  double clip_norm = 5.0;
  int min_count = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  int shard_size = 4;  // sentences per gradient shard; fixes reduction order

  // Single bi-LSTM layer with 100 units per direction over a 100+100
  // word/char token representation, 32-sentence batches for 50 epochs.
  static LMConfig elmol();
  // Two-layer bi-LM with 512 units per direction over a 256+256 token
  // representation.
  static LMConfig elmo_desk();

  int char_output_dim() const;
  int token_dim() const { return word_dim + char_output_dim(); }
  int contextual_dim() const { return 2 * hidden; }
  void validate() const;
};

void to_json(nlohmann::json& j, const LMConfig& c);
void from_json(const nlohmann::json& j, LMConfig& c);

struct LMParams {
  Matrix word_embedding;  // word_dim x |V|
  CharCnn char_cnn;
  std::vector<Lstm> forward_layers;
  std::vector<Lstm> backward_layers;
  Dense output;  // |V| x hidden, shared by both directions

  void collect(TensorList& out, const std::string& prefix = "");
  void collect(ConstTensorList& out, const std::string& prefix = "") const;
  LMParams zeros_like() const;
};

struct PerplexityReport {
  std::string dataset;
  std::size_t token_count = 0;    // predicted positions per direction
  double forward_cross_entropy = 0.0;   // nats per prediction
  double backward_cross_entropy = 0.0;
  double perplexity = 0.0;

  bool operator==(const PerplexityReport&) const = default;
};

// Per-token outputs of a frozen language model for one sentence.
struct ContextualStates {
  Matrix token_representation;  // token_dim x T (non-contextual x_t)
  std::vector<Matrix> layers;   // L entries, each 2*hidden x T, forward half first
};

class LanguageModel {
 public:
  LanguageModel() = default;
  LanguageModel(LMConfig config, Vocabulary vocab, CharVocabulary chars);

  const LMConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const CharVocabulary& chars() const { return chars_; }
  LMParams& params() { return params_; }
  const LMParams& params() const { return params_; }

  void initialize(std::uint64_t seed);

  // Non-contextual token representations [word; char-CNN].
  Matrix token_representation(const std::vector<std::string>& tokens) const;

  ContextualStates contextual_states(const std::vector<std::string>& tokens) const;

  // Sum of forward and backward cross-entropy (nats) over one sentence and
  // the number of predicted positions per direction (tokens + 1).
  struct SentenceLoss {
    double forward = 0.0;
    double backward = 0.0;
    std::size_t predictions = 0;
  };
  SentenceLoss sentence_loss(const std::vector<std::string>& tokens) const;

  // Same, accumulating gradients of `scale * (forward + backward)` into grad.
  SentenceLoss sentence_backward(const std::vector<std::string>& tokens, double scale, double dropout,
                                 std::mt19937_64& rng, LMParams& grad) const;

  // Training bookkeeping carried in checkpoints.
  int epochs_trained = 0;
  double best_heldout_perplexity = 0.0;
  std::vector<double> heldout_history;

 private:
  LMConfig config_;
  Vocabulary vocab_;
  CharVocabulary chars_;
  LMParams params_;
};

// Average of forward and backward per-token cross-entropy, exponentiated.
PerplexityReport perplexity(const LanguageModel& lm, const UnlabeledCorpus& text, const std::string& name = "");

struct LMTrainOptions {
  // Called after every epoch with (epoch, train perplexity, held-out perplexity).
  std::function<void(int, double, double)> on_epoch;
  // When set, training resumes from this model (its epochs_trained continues).
  const LanguageModel* resume_from = nullptr;
};

// Minimizes the averaged forward/backward next-token cross-entropy with
// Adam; returns the parameters with the best held-out perplexity.
LanguageModel train_bilm(const UnlabeledCorpus& corpus, const LMConfig& config, const UnlabeledCorpus& heldout,
                         const LMTrainOptions& options = {});

// Splits off a held-out fraction of sentences (at least one), seeded.
std::pair<UnlabeledCorpus, UnlabeledCorpus> split_heldout(const UnlabeledCorpus& corpus, double fraction,
                                                          std::uint64_t seed);

// Recurrent weights of a single-layer bi-LM shaped as the SLU shared
// layer, plus the LM token representation pieces needed to initialize
// ELMoL inputs.
struct SharedLayerBundle {
  BiLstm shared;
  Matrix word_embedding;   // word_dim x |target vocab|, copied from the LM by word
  Matrix char_table;       // char_dim_out x |target vocab|, frozen char-CNN outputs
};

SharedLayerBundle export_shared_layer(const LanguageModel& lm, const Vocabulary& target_vocab);

void save_language_model(const LanguageModel& lm, const std::filesystem::path& file);
LanguageModel load_language_model(const std::filesystem::path& file);

// Pieces used to embed a language model inside another checkpoint.
nlohmann::json language_model_header(const LanguageModel& lm);
LanguageModel language_model_from_checkpoint(const Checkpoint& ckpt, const nlohmann::json& header,
                                             const std::string& prefix);

}  // namespace sluxfer
