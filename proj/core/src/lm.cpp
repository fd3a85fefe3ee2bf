#include "sluxfer/lm.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sluxfer/checkpoint.hpp"
#include "sluxfer/error.hpp"
#include "sluxfer/optimizer.hpp"
#include "sluxfer/parallel.hpp"

namespace sluxfer {

// --- config ----------------------------------------------------------------

LMConfig LMConfig::elmol() { return LMConfig{}; }

LMConfig LMConfig::elmo_desk() {
  LMConfig c;
  c.layers = 2;
  c.hidden = 512;
  c.word_dim = 256;
  c.char_filters = {{1, 32}, {2, 32}, {3, 64}, {4, 64}, {5, 32}, {6, 32}};
  c.epochs = 25;
  return c;
}

int LMConfig::char_output_dim() const {
  int d = 0;
  for (const auto& f : char_filters) d += f.channels;
  return d;
}

void LMConfig::validate() const {
  if (layers < 1) throw ValidationError("lm.layers must be >= 1");
  if (hidden < 1 || char_dim < 1 || word_dim < 0) throw ValidationError("lm dimensions must be positive");
  if (char_filters.empty()) throw ValidationError("lm.char_filters must not be empty");
  if (batch_size < 1 || epochs < 0 || learning_rate <= 0.0) throw ValidationError("lm training settings out of range");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("lm.dropout must be in [0, 1)");
  if (min_count < 1 || shard_size < 1) throw ValidationError("lm.min_count and lm.shard_size must be >= 1");
}

void to_json(nlohmann::json& j, const LMConfig& c) {
  nlohmann::json filters = nlohmann::json::array();
  for (const auto& f : c.char_filters) filters.push_back({f.width, f.channels});
  j = {{"layers", c.layers},         {"hidden", c.hidden},
       {"word_dim", c.word_dim},     {"char_dim", c.char_dim},
       {"char_filters", filters},    {"batch_size", c.batch_size},
       {"epochs", c.epochs},         {"learning_rate", c.learning_rate},
       {"dropout", c.dropout},       {"clip_norm", c.clip_norm},
       {"min_count", c.min_count},   {"seed", c.seed},
       {"threads", c.threads},       {"shard_size", c.shard_size}};
}

void from_json(const nlohmann::json& j, LMConfig& c) {
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.word_dim = j.value("word_dim", c.word_dim);
  c.char_dim = j.value("char_dim", c.char_dim);
  if (j.contains("char_filters")) {
    c.char_filters.clear();
    for (const auto& f : j.at("char_filters")) c.char_filters.push_back({f.at(0).get<int>(), f.at(1).get<int>()});
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.dropout = j.value("dropout", c.dropout);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.min_count = j.value("min_count", c.min_count);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.shard_size = j.value("shard_size", c.shard_size);
}

// --- parameters ------------------------------------------------------------

void LMParams::collect(TensorList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "word_embedding"), &word_embedding});
  char_cnn.collect(out, join_name(prefix, "char_cnn"));
  for (std::size_t l = 0; l < forward_layers.size(); ++l) {
    forward_layers[l].collect(out, join_name(prefix, "forward" + std::to_string(l)));
    backward_layers[l].collect(out, join_name(prefix, "backward" + std::to_string(l)));
  }
  output.collect(out, join_name(prefix, "output"));
}

void LMParams::collect(ConstTensorList& out, const std::string& prefix) const {
  out.push_back({join_name(prefix, "word_embedding"), &word_embedding});
  char_cnn.collect(out, join_name(prefix, "char_cnn"));
  for (std::size_t l = 0; l < forward_layers.size(); ++l) {
    forward_layers[l].collect(out, join_name(prefix, "forward" + std::to_string(l)));
    backward_layers[l].collect(out, join_name(prefix, "backward" + std::to_string(l)));
  }
  output.collect(out, join_name(prefix, "output"));
}

LMParams LMParams::zeros_like() const {
  LMParams z = *this;
  TensorList list;
  z.collect(list);
  for (auto& t : list) t.value->setZero();
  return z;
}

LanguageModel::LanguageModel(LMConfig config, Vocabulary vocab, CharVocabulary chars)
    : config_(std::move(config)), vocab_(std::move(vocab)), chars_(std::move(chars)) {
  config_.validate();
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  params_.word_embedding = Matrix::Zero(config_.word_dim, v);
  params_.char_cnn = CharCnn(config_.char_filters, config_.char_dim, chars_.size());
  for (int l = 0; l < config_.layers; ++l) {
    const Eigen::Index in = l == 0 ? config_.token_dim() : config_.hidden;
    params_.forward_layers.emplace_back(in, config_.hidden);
    params_.backward_layers.emplace_back(in, config_.hidden);
  }
  params_.output = Dense(config_.hidden, v);
}

void LanguageModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x1a7e));
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (Eigen::Index j = 0; j < params_.word_embedding.cols(); ++j) {
    for (Eigen::Index i = 0; i < params_.word_embedding.rows(); ++i) params_.word_embedding(i, j) = dist(rng);
  }
  params_.char_cnn.initialize(rng);
  for (std::size_t l = 0; l < params_.forward_layers.size(); ++l) {
    params_.forward_layers[l].initialize(rng);
    params_.backward_layers[l].initialize(rng);
  }
  // Zero output layer: the untrained model predicts the uniform distribution.
  params_.output.set_zero();
}

// --- forward / backward ----------------------------------------------------

namespace {

struct SentenceTrace {
  std::vector<int> ids;
  std::vector<CharCnnTrace> chars;
  Matrix tokens;           // token_dim x n
  Matrix token_mask;       // dropout on token representation
  std::vector<LstmTrace> forward;
  std::vector<LstmTrace> backward;
  Matrix forward_mask;
  Matrix backward_mask;
  Matrix forward_states;   // H x (n+1): zero column then forward tops
  Matrix backward_states;  // H x (n+1): zero column then backward tops right-to-left
  std::vector<int> forward_targets;
  std::vector<int> backward_targets;
};

SentenceTrace run_forward(const LanguageModel& lm, const std::vector<std::string>& tokens, double dropout,
                          std::mt19937_64* rng) {
  if (tokens.empty()) throw ValidationError("lm: empty sentence");
  const auto& p = lm.params();
  const auto& cfg = lm.config();
  SentenceTrace tr;
  tr.ids = lm.vocab().encode(tokens);
  const auto n = static_cast<Eigen::Index>(tokens.size());
  tr.tokens.resize(cfg.token_dim(), n);
  tr.chars.reserve(tokens.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    tr.chars.push_back(char_cnn_forward(p.char_cnn, lm.chars(), tokens[static_cast<std::size_t>(t)]));
    if (cfg.word_dim > 0) tr.tokens.col(t).head(cfg.word_dim) = p.word_embedding.col(tr.ids[static_cast<std::size_t>(t)]);
    tr.tokens.col(t).tail(cfg.char_output_dim()) = tr.chars.back().output;
  }
  const bool train = rng != nullptr && dropout > 0.0;
  Matrix input = tr.tokens;
  if (train) {
    tr.token_mask = dropout_mask(input.rows(), input.cols(), dropout, *rng);
    input = input.cwiseProduct(tr.token_mask);
  }
  Matrix f = input, b = input;
  for (int l = 0; l < cfg.layers; ++l) {
    tr.forward.push_back(lstm_forward(p.forward_layers[static_cast<std::size_t>(l)], f, false));
    tr.backward.push_back(lstm_forward(p.backward_layers[static_cast<std::size_t>(l)], b, true));
    f = tr.forward.back().hidden;
    b = tr.backward.back().hidden;
  }
  if (train) {
    tr.forward_mask = dropout_mask(f.rows(), f.cols(), dropout, *rng);
    tr.backward_mask = dropout_mask(b.rows(), b.cols(), dropout, *rng);
    f = f.cwiseProduct(tr.forward_mask);
    b = b.cwiseProduct(tr.backward_mask);
  }
  const Eigen::Index h = cfg.hidden;
  tr.forward_states = Matrix::Zero(h, n + 1);
  tr.backward_states = Matrix::Zero(h, n + 1);
  tr.forward_states.rightCols(n) = f;
  for (Eigen::Index k = 1; k <= n; ++k) tr.backward_states.col(k) = b.col(n - k);
  for (Eigen::Index t = 0; t < n; ++t) tr.forward_targets.push_back(tr.ids[static_cast<std::size_t>(t)]);
  tr.forward_targets.push_back(Vocabulary::kEos);
  for (Eigen::Index t = n - 1; t >= 0; --t) tr.backward_targets.push_back(tr.ids[static_cast<std::size_t>(t)]);
  tr.backward_targets.push_back(Vocabulary::kBos);
  return tr;
}

// Cross-entropy of predicting `targets` from `states`; optionally fills
// d(loss)/d(logits) scaled by `scale`.
double cross_entropy(const Dense& out, const Matrix& states, const std::vector<int>& targets, double scale,
                     Matrix* d_logits) {
  Matrix logits = out.weight * states;
  logits.colwise() += out.bias.col(0);
  double ce = 0.0;
  if (d_logits) d_logits->resize(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    Vector e = (logits.col(c).array() - m).exp();
    const double z = e.sum();
    const int y = targets[static_cast<std::size_t>(c)];
    ce += -(logits(y, c) - m - std::log(z));
    if (d_logits) {
      d_logits->col(c) = scale * e / z;
      (*d_logits)(y, c) -= scale;
    }
  }
  return ce;
}

}  // namespace

Matrix LanguageModel::token_representation(const std::vector<std::string>& tokens) const {
  return run_forward(*this, tokens, 0.0, nullptr).tokens;
}

ContextualStates LanguageModel::contextual_states(const std::vector<std::string>& tokens) const {
  const auto tr = run_forward(*this, tokens, 0.0, nullptr);
  ContextualStates out;
  out.token_representation = tr.tokens;
  for (std::size_t l = 0; l < tr.forward.size(); ++l) {
    Matrix h(2 * config_.hidden, tr.tokens.cols());
    h.topRows(config_.hidden) = tr.forward[l].hidden;
    h.bottomRows(config_.hidden) = tr.backward[l].hidden;
    out.layers.push_back(std::move(h));
  }
  return out;
}

LanguageModel::SentenceLoss LanguageModel::sentence_loss(const std::vector<std::string>& tokens) const {
  const auto tr = run_forward(*this, tokens, 0.0, nullptr);
  SentenceLoss loss;
  loss.forward = cross_entropy(params_.output, tr.forward_states, tr.forward_targets, 0.0, nullptr);
  loss.backward = cross_entropy(params_.output, tr.backward_states, tr.backward_targets, 0.0, nullptr);
  loss.predictions = tr.forward_targets.size();
  return loss;
}

LanguageModel::SentenceLoss LanguageModel::sentence_backward(const std::vector<std::string>& tokens, double scale,
                                                             double dropout, std::mt19937_64& rng,
                                                             LMParams& grad) const {
  const auto tr = run_forward(*this, tokens, dropout, &rng);
  const bool train = dropout > 0.0;
  const auto n = static_cast<Eigen::Index>(tokens.size());
  SentenceLoss loss;
  loss.predictions = tr.forward_targets.size();

  Matrix d_logits;
  loss.forward = cross_entropy(params_.output, tr.forward_states, tr.forward_targets, scale, &d_logits);
  grad.output.weight.noalias() += d_logits * tr.forward_states.transpose();
  grad.output.bias.col(0) += d_logits.rowwise().sum();
  Matrix d_states = params_.output.weight.transpose() * d_logits;
  Matrix d_f = d_states.rightCols(n);

  loss.backward = cross_entropy(params_.output, tr.backward_states, tr.backward_targets, scale, &d_logits);
  grad.output.weight.noalias() += d_logits * tr.backward_states.transpose();
  grad.output.bias.col(0) += d_logits.rowwise().sum();
  d_states = params_.output.weight.transpose() * d_logits;
  Matrix d_b(config_.hidden, n);
  for (Eigen::Index k = 1; k <= n; ++k) d_b.col(n - k) = d_states.col(k);

  if (train) {
    d_f = d_f.cwiseProduct(tr.forward_mask);
    d_b = d_b.cwiseProduct(tr.backward_mask);
  }
  for (int l = config_.layers - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    d_f = lstm_backward(params_.forward_layers[li], tr.forward[li], d_f, grad.forward_layers[li]);
    d_b = lstm_backward(params_.backward_layers[li], tr.backward[li], d_b, grad.backward_layers[li]);
  }
  Matrix d_tokens = d_f + d_b;
  if (train) d_tokens = d_tokens.cwiseProduct(tr.token_mask);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (config_.word_dim > 0) {
      grad.word_embedding.col(tr.ids[static_cast<std::size_t>(t)]) += d_tokens.col(t).head(config_.word_dim);
    }
    char_cnn_backward(params_.char_cnn, tr.chars[static_cast<std::size_t>(t)],
                      d_tokens.col(t).tail(config_.char_output_dim()), grad.char_cnn);
  }
  return loss;
}

// --- evaluation --------------------------------------------------------------

PerplexityReport perplexity(const LanguageModel& lm, const UnlabeledCorpus& text, const std::string& name) {
  if (text.sentences.empty()) throw ValidationError("perplexity: empty text");
  PerplexityReport r;
  r.dataset = name;
  double fwd = 0.0, bwd = 0.0;
  std::size_t count = 0;
  for (const auto& s : text.sentences) {
    const auto loss = lm.sentence_loss(s);
    fwd += loss.forward;
    bwd += loss.backward;
    count += loss.predictions;
  }
  r.token_count = count;
  r.forward_cross_entropy = fwd / static_cast<double>(count);
  r.backward_cross_entropy = bwd / static_cast<double>(count);
  r.perplexity = std::exp(0.5 * (r.forward_cross_entropy + r.backward_cross_entropy));
  return r;
}

std::pair<UnlabeledCorpus, UnlabeledCorpus> split_heldout(const UnlabeledCorpus& corpus, double fraction,
                                                          std::uint64_t seed) {
  if (corpus.sentences.size() < 2) throw ValidationError("need at least two sentences to split off a held-out set");
  std::vector<std::size_t> idx(corpus.sentences.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x4e1d));
  portable_shuffle(idx, rng);
  auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
  held = std::clamp<std::size_t>(held, 1, idx.size() - 1);
  std::vector<bool> is_held(idx.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_held[idx[i]] = true;
  UnlabeledCorpus train, heldout;
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    auto& dst = is_held[i] ? heldout : train;
    dst.sentences.push_back(corpus.sentences[i]);
    dst.token_count += corpus.sentences[i].size();
  }
  return {std::move(train), std::move(heldout)};
}

// --- training ----------------------------------------------------------------

LanguageModel train_bilm(const UnlabeledCorpus& corpus, const LMConfig& config, const UnlabeledCorpus& heldout,
                         const LMTrainOptions& options) {
  config.validate();
  if (corpus.sentences.empty()) throw ValidationError("train_bilm: empty corpus");
  if (heldout.sentences.empty()) throw ValidationError("train_bilm: empty held-out set");

  LanguageModel lm;
  if (options.resume_from) {
    lm = *options.resume_from;
  } else {
    Vocabulary vocab = build_vocab(corpus, config.min_count);
    CharVocabulary chars = CharVocabulary::from_words(vocab.words());
    lm = LanguageModel(config, std::move(vocab), std::move(chars));
    lm.initialize(config.seed);
    lm.epochs_trained = 0;
    lm.heldout_history.clear();
  }
  // The starting point competes in model selection, so the result is never
  // worse on held-out data than the untrained (or resumed) model.
  lm.best_heldout_perplexity = perplexity(lm, heldout).perplexity;
  LanguageModel best = lm;
  const double dropout = config.dropout;

  Adam adam;
  const std::size_t shard = static_cast<std::size_t>(config.shard_size);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t max_shards = (batch + shard - 1) / shard;
  std::vector<LMParams> shard_grads(max_shards, lm.params().zeros_like());

  std::vector<std::size_t> order(corpus.sentences.size());
  for (int epoch = lm.epochs_trained + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch), 0x5f));
    portable_shuffle(order, shuffle_rng);

    double epoch_ce = 0.0;
    std::size_t epoch_predictions = 0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += batch, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::size_t predictions = 0;
      for (std::size_t i = start; i < end; ++i) predictions += corpus.sentences[order[i]].size() + 1;
      const double scale = 1.0 / (2.0 * static_cast<double>(predictions));
      const std::size_t shards = (end - start + shard - 1) / shard;
      std::vector<double> shard_ce(shards, 0.0);

      parallel_for(shards, config.threads, [&](std::size_t s) {
        LMParams& g = shard_grads[s];
        TensorList gl;
        g.collect(gl);
        for (auto& t : gl) t.value->setZero();
        for (std::size_t i = start + s * shard; i < std::min(end, start + (s + 1) * shard); ++i) {
          std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) << 32 | order[i], 0xd0));
          const auto loss = lm.sentence_backward(corpus.sentences[order[i]], scale, dropout, rng, g);
          shard_ce[s] += loss.forward + loss.backward;
        }
      });

      double batch_ce = 0.0;
      for (double v : shard_ce) batch_ce += v;
      if (!std::isfinite(batch_ce)) {
        throw DivergenceError("language model diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_no) + " (cross-entropy " + std::to_string(batch_ce) + ")");
      }
      TensorList total;
      shard_grads[0].collect(total);
      for (std::size_t s = 1; s < shards; ++s) {
        ConstTensorList other;
        shard_grads[s].collect(other);
        for (std::size_t k = 0; k < total.size(); ++k) *total[k].value += *other[k].value;
      }
      clip_global_norm(total, config.clip_norm);
      TensorList params;
      lm.params().collect(params);
      ConstTensorList cgrads;
      for (auto& t : total) cgrads.push_back({t.name, t.value});
      adam.step(params, cgrads, config.learning_rate);
      epoch_ce += batch_ce;
      epoch_predictions += predictions;
    }

    const double train_ppl = std::exp(epoch_ce / (2.0 * static_cast<double>(epoch_predictions)));
    const double held_ppl = perplexity(lm, heldout).perplexity;
    if (!std::isfinite(held_ppl)) throw DivergenceError("non-finite held-out perplexity at epoch " + std::to_string(epoch));
    lm.epochs_trained = epoch;
    lm.heldout_history.push_back(held_ppl);
    spdlog::info("lm epoch {}/{}: train ppl {:.3f}, held-out ppl {:.3f}", epoch, config.epochs, train_ppl, held_ppl);
    if (held_ppl < best.best_heldout_perplexity) {
      best = lm;
      best.best_heldout_perplexity = held_ppl;
    }
    lm.best_heldout_perplexity = best.best_heldout_perplexity;
    if (options.on_epoch) options.on_epoch(epoch, train_ppl, held_ppl);
  }
  best.epochs_trained = lm.epochs_trained;
  best.heldout_history = lm.heldout_history;
  return best;
}

// --- export / persistence ----------------------------------------------------

SharedLayerBundle export_shared_layer(const LanguageModel& lm, const Vocabulary& target_vocab) {
  const auto& cfg = lm.config();
  if (cfg.layers != 1) {
    throw ValidationError("export_shared_layer requires a single-layer language model (got " +
                          std::to_string(cfg.layers) + " layers)");
  }
  SharedLayerBundle bundle;
  bundle.shared.forward = lm.params().forward_layers[0];
  bundle.shared.backward = lm.params().backward_layers[0];
  const auto v = static_cast<Eigen::Index>(target_vocab.size());
  bundle.word_embedding = Matrix::Zero(cfg.word_dim, v);
  bundle.char_table = Matrix::Zero(cfg.char_output_dim(), v);
  for (Eigen::Index i = 0; i < v; ++i) {
    const std::string& word = target_vocab.word(static_cast<int>(i));
    if (i == Vocabulary::kPad) continue;
    const int src = i < Vocabulary::kNumSpecial ? static_cast<int>(i) : lm.vocab().index(word);
    if (cfg.word_dim > 0) bundle.word_embedding.col(i) = lm.params().word_embedding.col(src);
    bundle.char_table.col(i) = char_cnn_embed(lm.params().char_cnn, lm.chars(), word);
  }
  return bundle;
}

nlohmann::json language_model_header(const LanguageModel& lm) {
  nlohmann::json h;
  h["kind"] = "language_model";
  h["config"] = lm.config();
  h["vocab"] = lm.vocab().words();
  std::vector<int> bytes(lm.chars().bytes().begin(), lm.chars().bytes().end());
  h["char_bytes"] = bytes;
  h["epochs_trained"] = lm.epochs_trained;
  h["best_heldout_perplexity"] = lm.best_heldout_perplexity;
  h["heldout_history"] = lm.heldout_history;
  return h;
}

void save_language_model(const LanguageModel& lm, const std::filesystem::path& file) {
  Checkpoint ckpt;
  ckpt.header = language_model_header(lm);
  ConstTensorList list;
  lm.params().collect(list, "lm");
  ckpt.put(list);
  write_checkpoint(file, ckpt);
}

LanguageModel language_model_from_checkpoint(const Checkpoint& ckpt, const nlohmann::json& h, const std::string& prefix) {
  LMConfig cfg;
  from_json(h.at("config"), cfg);
  auto words = h.at("vocab").get<std::vector<std::string>>();
  if (words.size() < Vocabulary::kNumSpecial) throw ValidationError("checkpoint vocabulary is truncated");
  Vocabulary vocab(std::vector<std::string>(words.begin() + Vocabulary::kNumSpecial, words.end()));
  std::vector<unsigned char> bytes;
  for (int b : h.at("char_bytes").get<std::vector<int>>()) bytes.push_back(static_cast<unsigned char>(b));
  LanguageModel lm(cfg, std::move(vocab), CharVocabulary::from_bytes(bytes));
  TensorList list;
  lm.params().collect(list, prefix);
  ckpt.get(list);
  lm.epochs_trained = h.value("epochs_trained", 0);
  lm.best_heldout_perplexity = h.value("best_heldout_perplexity", 0.0);
  lm.heldout_history = h.value("heldout_history", std::vector<double>{});
  return lm;
}

LanguageModel load_language_model(const std::filesystem::path& file) {
  const Checkpoint ckpt = read_checkpoint(file);
  if (ckpt.header.value("kind", "") != "language_model") {
    throw ValidationError(file.string() + " is not a language-model checkpoint");
  }
  return language_model_from_checkpoint(ckpt, ckpt.header, "lm");
}

}  // namespace sluxfer
