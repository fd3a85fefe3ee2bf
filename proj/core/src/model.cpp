#include "sluxfer/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sluxfer/checkpoint.hpp"
#include "sluxfer/error.hpp"

namespace sluxfer {

bool is_param_group(std::string_view name) {
  return std::find(kParamGroups.begin(), kParamGroups.end(), name) != kParamGroups.end();
}

bool is_lower_group(std::string_view name) { return name == "embedding" || name == "shared_birnn"; }

bool is_label_group(std::string_view name) {
  return name == "et_projection" || name == "crf" || name == "intent_softmax";
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json filters = nlohmann::json::array();
  for (const auto& f : c.embedding.char_cnn_spec) filters.push_back({f.width, f.channels});
  j = {{"mode", std::string(embedding_mode_name(c.embedding.mode))},
       {"word_dim", c.embedding.word_dim},
       {"fixed_dim", c.embedding.fixed_dim},
       {"total_dim", c.embedding.total_dim},
       {"char_cnn_spec", filters},
       {"hidden", c.hidden},
       {"dropout", c.dropout},
       {"l2", c.l2},
       {"mixing", c.mixing}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("mode")) {
    c.embedding = EmbeddingConfig::for_mode(parse_embedding_mode(j.at("mode").get<std::string>()), c.embedding.total_dim);
  }
  c.embedding.word_dim = j.value("word_dim", c.embedding.word_dim);
  c.embedding.fixed_dim = j.value("fixed_dim", c.embedding.fixed_dim);
  c.embedding.total_dim = j.value("total_dim", c.embedding.total_dim);
  if (j.contains("char_cnn_spec")) {
    c.embedding.char_cnn_spec.clear();
    for (const auto& f : j.at("char_cnn_spec")) c.embedding.char_cnn_spec.push_back({f.at(0).get<int>(), f.at(1).get<int>()});
  }
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.l2 = j.value("l2", c.l2);
  c.mixing = j.value("mixing", c.mixing);
}

// --- parameters ----------------------------------------------------------------

TensorList SluParams::group(std::string_view name) {
  TensorList out;
  const std::string g(name);
  if (name == "embedding") {
    out.push_back({join_name(g, "word_embedding"), &word_embedding});
  } else if (name == "shared_birnn") {
    shared.collect(out, g);
  } else if (name == "mixing") {
    mixing.collect(out, g);
  } else if (name == "et_birnn") {
    et_rnn.collect(out, g);
  } else if (name == "et_projection") {
    et_projection.collect(out, g);
  } else if (name == "crf") {
    crf.collect(out, g);
  } else if (name == "ic_birnn") {
    ic_rnn.collect(out, g);
  } else if (name == "intent_softmax") {
    intent.collect(out, g);
  } else {
    throw ValidationError("unknown parameter group '" + g + "'");
  }
  return out;
}

ConstTensorList SluParams::group(std::string_view name) const {
  ConstTensorList out;
  for (const auto& t : const_cast<SluParams*>(this)->group(name)) out.push_back({t.name, t.value});
  return out;
}

void SluParams::collect(TensorList& out) {
  for (auto g : kParamGroups) {
    auto list = group(g);
    out.insert(out.end(), list.begin(), list.end());
  }
}

void SluParams::collect(ConstTensorList& out) const {
  for (auto g : kParamGroups) {
    auto list = group(g);
    out.insert(out.end(), list.begin(), list.end());
  }
}

SluParams SluParams::zeros_like() const {
  SluParams z = *this;
  z.set_zero();
  return z;
}

void SluParams::set_zero() {
  TensorList all;
  collect(all);
  for (auto& t : all) t.value->setZero();
}

// --- model ---------------------------------------------------------------------

SluModel::SluModel(ModelConfig config, Vocabulary vocab, LabelSpace labels, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), labels_(std::move(labels)), seed_(seed) {
  const auto& emb = config_.embedding;
  if (config_.hidden < 1) throw ValidationError("model.hidden must be >= 1");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw ValidationError("model.dropout must be in [0, 1)");
  if (config_.l2 < 0.0) throw ValidationError("model.l2 must be >= 0");
  if (emb.mode != EmbeddingMode::kElmo && emb.word_dim + emb.fixed_dim != emb.total_dim) {
    throw ShapeError("embedding word_dim + fixed_dim must equal total_dim");
  }
  const Eigen::Index h = config_.hidden;
  const Eigen::Index two_h = 2 * h;
  if (emb.mode == EmbeddingMode::kElmoL && config_.uses_mixing() && emb.total_dim != two_h) {
    throw ShapeError("ELMoL mixing needs the embedding dimension (" + std::to_string(emb.total_dim) +
                     ") to equal the bidirectional output (" + std::to_string(two_h) + ")");
  }
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  const auto tags = static_cast<Eigen::Index>(labels_.num_tags());
  const auto intents = static_cast<Eigen::Index>(labels_.num_intents());

  std::mt19937_64 rng(mix_seed(seed, 0x51u));
  params_.word_embedding = Matrix::Zero(emb.word_dim, v);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (Eigen::Index j = 0; j < v; ++j) {
    for (Eigen::Index i = 0; i < emb.word_dim; ++i) params_.word_embedding(i, j) = dist(rng);
  }
  params_.shared = BiLstm(emb.total_dim, h);
  params_.shared.initialize(rng);
  if (config_.uses_mixing()) params_.mixing = MixingWeights(emb.mode == EmbeddingMode::kElmoL ? 2 : 3);
  params_.et_rnn = BiLstm(two_h, h);
  params_.et_rnn.initialize(rng);
  params_.et_projection = Dense(two_h, tags);
  params_.et_projection.initialize(rng);
  params_.crf = TransitionMatrix(tags);
  params_.ic_rnn = BiLstm(two_h, h);
  params_.ic_rnn.initialize(rng);
  params_.intent = Dense(two_h, intents);
  params_.intent.initialize(rng);
  if (emb.fixed_dim > 0) fixed_ = Matrix::Zero(emb.fixed_dim, v);
}

void SluModel::set_fixed_embedding(Matrix table) {
  if (table.rows() != config_.embedding.fixed_dim || table.cols() != static_cast<Eigen::Index>(vocab_.size())) {
    throw ShapeError("fixed embedding table must be " + std::to_string(config_.embedding.fixed_dim) + " x " +
                     std::to_string(vocab_.size()));
  }
  fixed_ = std::move(table);
}

void SluModel::set_language_model(std::shared_ptr<const LanguageModel> lm) {
  if (config_.embedding.mode != EmbeddingMode::kElmo) throw ValidationError("a frozen LM is only used in ELMo mode");
  if (!lm) throw ValidationError("null language model");
  const int ctx = lm->config().contextual_dim();
  if (ctx != config_.embedding.total_dim) {
    throw ShapeError("LM contextual dimension " + std::to_string(ctx) + " differs from the configured ELMo dimension " +
                     std::to_string(config_.embedding.total_dim));
  }
  const int tok = lm->config().token_dim();
  if (tok != ctx && 2 * tok != ctx) {
    throw ShapeError("LM token representation (" + std::to_string(tok) + ") cannot be mixed with " +
                     std::to_string(ctx) + "-dim contextual states");
  }
  if (config_.uses_mixing() && params_.mixing.num_inputs() != lm->config().layers + 1) {
    params_.mixing = MixingWeights(lm->config().layers + 1);
  }
  lm_ = std::move(lm);
}

void SluModel::import_shared_layer(const SharedLayerBundle& bundle) {
  if (config_.embedding.mode != EmbeddingMode::kElmoL) throw ValidationError("import_shared_layer needs ELMoL mode");
  auto same = [](const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(bundle.shared.forward.w_input, params_.shared.forward.w_input) ||
      !same(bundle.shared.forward.w_recurrent, params_.shared.forward.w_recurrent) ||
      !same(bundle.shared.backward.w_input, params_.shared.backward.w_input)) {
    throw ShapeError("exported LM layer does not fit the shared layer (LM input " +
                     std::to_string(bundle.shared.input_dim()) + ", hidden " +
                     std::to_string(bundle.shared.forward.hidden_dim()) + ")");
  }
  if (!same(bundle.word_embedding, params_.word_embedding)) throw ShapeError("exported word vectors do not fit");
  params_.shared = bundle.shared;
  params_.word_embedding = bundle.word_embedding;
  set_fixed_embedding(bundle.char_table);
}

EncodedUtterance SluModel::encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw ValidationError("empty utterance");
  EncodedUtterance e;
  e.tokens = tokens;
  e.ids = vocab_.encode(tokens);
  if (config_.embedding.mode == EmbeddingMode::kElmo) {
    if (!lm_) throw ValidationError("ELMo mode requires a language model");
    e.lm_states = std::make_shared<ContextualStates>(lm_->contextual_states(tokens));
  }
  return e;
}

namespace {

// ELMo's non-contextual input, widened to the contextual dimension.
Matrix elmo_base(const ContextualStates& s) {
  const Eigen::Index ctx = s.layers.front().rows();
  if (s.token_representation.rows() == ctx) return s.token_representation;
  Matrix x(ctx, s.token_representation.cols());
  x.topRows(ctx / 2) = s.token_representation;
  x.bottomRows(ctx / 2) = s.token_representation;
  return x;
}

std::vector<const Matrix*> elmo_inputs(const Matrix& base, const ContextualStates& s) {
  std::vector<const Matrix*> in{&base};
  for (const auto& l : s.layers) in.push_back(&l);
  return in;
}

}  // namespace

Matrix SluModel::embed(const EncodedUtterance& input) const {
  const auto& emb = config_.embedding;
  const auto n = static_cast<Eigen::Index>(input.ids.size());
  if (emb.mode == EmbeddingMode::kElmo) {
    if (!input.lm_states) throw ValidationError("ELMo input was encoded without LM states");
    const Matrix base = elmo_base(*input.lm_states);
    if (!config_.uses_mixing()) return input.lm_states->layers.back();
    return mix_sequence(elmo_inputs(base, *input.lm_states), params_.mixing);
  }
  Matrix out(emb.total_dim, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const int id = input.ids[static_cast<std::size_t>(t)];
    switch (emb.mode) {
      case EmbeddingMode::kNoUT:
        out.col(t) = params_.word_embedding.col(id);
        break;
      case EmbeddingMode::kPretrained:
        out.col(t).head(emb.fixed_dim) = fixed_.col(id);
        out.col(t).tail(emb.word_dim) = params_.word_embedding.col(id);
        break;
      case EmbeddingMode::kElmoL:
        out.col(t).head(emb.word_dim) = params_.word_embedding.col(id);
        out.col(t).tail(emb.fixed_dim) = fixed_.col(id);
        break;
      case EmbeddingMode::kElmo:
        break;
    }
  }
  return out;
}

ForwardTrace SluModel::forward(const EncodedUtterance& input, const ForwardOptions& options) const {
  return forward(std::make_shared<const EncodedUtterance>(input), options);
}

ForwardTrace SluModel::forward(std::shared_ptr<const EncodedUtterance> input, const ForwardOptions& options) const {
  if (!input || input->ids.empty()) throw ValidationError("empty utterance");
  ForwardTrace tr;
  tr.input = std::move(input);
  const bool drop = options.train && config_.dropout > 0.0;
  std::mt19937_64 rng(mix_seed(seed_, options.dropout_seed, 0xd7));
  const double p = config_.dropout;
  const auto n = static_cast<Eigen::Index>(tr.input->ids.size());

  tr.embedded = embed(*tr.input);
  tr.shared_input = tr.embedded;
  if (drop) {
    tr.embed_mask = dropout_mask(tr.embedded.rows(), n, p, rng);
    tr.shared_input = tr.embedded.cwiseProduct(tr.embed_mask);
  }
  tr.shared = bilstm_forward(params_.shared, tr.shared_input);
  tr.shared_output = tr.shared.output;
  if (drop) {
    tr.shared_mask = dropout_mask(tr.shared_output.rows(), n, p, rng);
    tr.shared_output = tr.shared_output.cwiseProduct(tr.shared_mask);
  }
  if (config_.embedding.mode == EmbeddingMode::kElmoL && config_.uses_mixing()) {
    tr.head_input = mix_sequence({&tr.shared_input, &tr.shared_output}, params_.mixing);
  } else {
    tr.head_input = tr.shared_output;
  }

  tr.et = bilstm_forward(params_.et_rnn, tr.head_input);
  tr.entity_output = tr.et.output;
  if (drop) {
    tr.et_mask = dropout_mask(tr.entity_output.rows(), n, p, rng);
    tr.entity_output = tr.entity_output.cwiseProduct(tr.et_mask);
  }
  Matrix z = params_.et_projection.weight * tr.entity_output;
  z.colwise() += params_.et_projection.bias.col(0);
  tr.emissions = z.transpose();

  tr.ic = bilstm_forward(params_.ic_rnn, tr.head_input);
  const Eigen::Index h = params_.ic_rnn.forward.hidden_dim();
  tr.intent_repr.resize(2 * h);
  tr.intent_repr.head(h) = tr.ic.forward.hidden.col(n - 1);
  tr.intent_repr.tail(h) = tr.ic.backward.hidden.col(0);
  tr.intent_dropped = tr.intent_repr;
  if (drop) {
    tr.intent_mask = dropout_mask(2 * h, 1, p, rng).col(0);
    tr.intent_dropped = tr.intent_repr.cwiseProduct(tr.intent_mask);
  }
  tr.intent_logits = params_.intent.weight * tr.intent_dropped + params_.intent.bias.col(0);
  return tr;
}

LossTerms SluModel::joint_loss(const ForwardTrace& tr, int gold_intent, const std::vector<int>& gold_tags) const {
  if (gold_intent < 0 || gold_intent >= static_cast<int>(labels_.num_intents())) {
    throw ValidationError("gold intent index out of range");
  }
  LossTerms loss;
  loss.intent = log_sum_exp(tr.intent_logits) - tr.intent_logits(gold_intent);
  loss.entity = crf_nll(tr.emissions, params_.crf, gold_tags);
  return loss;
}

LossTerms SluModel::backward(const ForwardTrace& tr, int gold_intent, const std::vector<int>& gold_tags,
                             SluParams& grad) const {
  const LossTerms loss = joint_loss(tr, gold_intent, gold_tags);
  const auto n = tr.length();
  const Eigen::Index h = params_.ic_rnn.forward.hidden_dim();

  // intent head
  Vector d_logits = softmax(tr.intent_logits);
  d_logits(gold_intent) -= 1.0;
  grad.intent.weight.noalias() += d_logits * tr.intent_dropped.transpose();
  grad.intent.bias.col(0) += d_logits;
  Vector d_repr = params_.intent.weight.transpose() * d_logits;
  if (tr.intent_mask.size() > 0) d_repr = d_repr.cwiseProduct(tr.intent_mask);
  Matrix d_ic = Matrix::Zero(2 * h, n);
  d_ic.block(0, n - 1, h, 1) = d_repr.head(h);
  d_ic.block(h, 0, h, 1) = d_repr.tail(h);
  Matrix d_head = bilstm_backward(params_.ic_rnn, tr.ic, d_ic, grad.ic_rnn);

  // entity head
  Matrix d_emissions;
  crf_nll_backward(tr.emissions, params_.crf, gold_tags, d_emissions, grad.crf);
  const Matrix d_z = d_emissions.transpose();
  grad.et_projection.weight.noalias() += d_z * tr.entity_output.transpose();
  grad.et_projection.bias.col(0) += d_z.rowwise().sum();
  Matrix d_entity = params_.et_projection.weight.transpose() * d_z;
  if (tr.et_mask.size() > 0) d_entity = d_entity.cwiseProduct(tr.et_mask);
  d_head += bilstm_backward(params_.et_rnn, tr.et, d_entity, grad.et_rnn);

  // shared layer (and ELMoL mixing)
  Matrix d_shared_out;
  Matrix d_shared_in_extra;
  if (config_.embedding.mode == EmbeddingMode::kElmoL && config_.uses_mixing()) {
    auto d_inputs = mix_sequence_backward({&tr.shared_input, &tr.shared_output}, params_.mixing, d_head, grad.mixing);
    d_shared_in_extra = std::move(d_inputs[0]);
    d_shared_out = std::move(d_inputs[1]);
  } else {
    d_shared_out = std::move(d_head);
  }
  if (tr.shared_mask.size() > 0) d_shared_out = d_shared_out.cwiseProduct(tr.shared_mask);
  Matrix d_embedded = bilstm_backward(params_.shared, tr.shared, d_shared_out, grad.shared);
  if (d_shared_in_extra.size() > 0) d_embedded += d_shared_in_extra;
  if (tr.embed_mask.size() > 0) d_embedded = d_embedded.cwiseProduct(tr.embed_mask);

  // embedding
  const auto& emb = config_.embedding;
  const auto& ids = tr.input->ids;
  switch (emb.mode) {
    case EmbeddingMode::kNoUT:
      for (Eigen::Index t = 0; t < n; ++t) grad.word_embedding.col(ids[static_cast<std::size_t>(t)]) += d_embedded.col(t);
      break;
    case EmbeddingMode::kPretrained:
      for (Eigen::Index t = 0; t < n; ++t) {
        grad.word_embedding.col(ids[static_cast<std::size_t>(t)]) += d_embedded.col(t).tail(emb.word_dim);
      }
      break;
    case EmbeddingMode::kElmoL:
      for (Eigen::Index t = 0; t < n; ++t) {
        grad.word_embedding.col(ids[static_cast<std::size_t>(t)]) += d_embedded.col(t).head(emb.word_dim);
      }
      break;
    case EmbeddingMode::kElmo:
      if (config_.uses_mixing()) {
        const Matrix base = elmo_base(*tr.input->lm_states);
        mix_sequence_backward(elmo_inputs(base, *tr.input->lm_states), params_.mixing, d_embedded, grad.mixing);
      }
      break;
  }
  return loss;
}

double SluModel::l2_penalty() const {
  ConstTensorList all;
  params_.collect(all);
  return config_.l2 * squared_norm(all);
}

void SluModel::add_l2_gradient(SluParams& grad, const std::set<std::string>& groups) const {
  if (config_.l2 == 0.0) return;
  for (const auto& g : groups) {
    auto p = params_.group(g);
    auto d = grad.group(g);
    for (std::size_t i = 0; i < p.size(); ++i) *d[i].value += 2.0 * config_.l2 * *p[i].value;
  }
}

Prediction SluModel::predict(const EncodedUtterance& input) const {
  const ForwardTrace tr = forward(input);
  Prediction p;
  p.intent_posterior = softmax(tr.intent_logits);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < tr.intent_logits.size(); ++i) {
    if (tr.intent_logits(i) > tr.intent_logits(best)) best = i;
  }
  p.intent = labels_.intents()[static_cast<std::size_t>(best)];
  p.tag_path = viterbi(tr.emissions, params_.crf);
  for (int k : p.tag_path.tags) p.tags.push_back(labels_.tag_name(k));
  repair_bio(p.tags);
  return p;
}

Prediction SluModel::predict(const std::vector<std::string>& tokens) const { return predict(encode(tokens)); }

int SluModel::intent_index(const std::string& intent) const {
  auto idx = labels_.intent_index(intent);
  if (!idx) throw ValidationError("intent '" + intent + "' is not in the model's label space");
  return *idx;
}

std::vector<int> SluModel::tag_indices(const std::vector<std::string>& tags) const {
  std::vector<int> out;
  out.reserve(tags.size());
  for (const auto& t : tags) {
    auto idx = labels_.tag_index(t);
    if (!idx) throw ValidationError("tag '" + t + "' is not in the model's label space");
    out.push_back(*idx);
  }
  return out;
}

std::size_t SluModel::num_trainable() const {
  ConstTensorList all;
  params_.collect(all);
  return count_scalars(all);
}

// --- head replacement ------------------------------------------------------------

void copy_groups(const SluModel& from, SluModel& to, const std::set<std::string>& groups) {
  for (const auto& g : groups) {
    if (!is_param_group(g)) throw ValidationError("unknown parameter group '" + g + "'");
    const auto src = from.params().group(g);
    auto dst = to.params().group(g);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i].value->rows() != dst[i].value->rows() || src[i].value->cols() != dst[i].value->cols()) {
        throw ShapeError("cannot copy " + src[i].name + ": " + std::to_string(src[i].value->rows()) + "x" +
                         std::to_string(src[i].value->cols()) + " into " + std::to_string(dst[i].value->rows()) + "x" +
                         std::to_string(dst[i].value->cols()));
      }
      *dst[i].value = *src[i].value;
    }
  }
}

SluModel replace_heads(const SluModel& model, const LabelSpace& new_space, const std::set<std::string>& keep,
                       std::uint64_t seed) {
  for (const auto& g : keep) {
    if (!is_param_group(g)) throw ValidationError("unknown parameter group '" + g + "'");
    if (is_label_group(g)) throw ValidationError("group '" + g + "' depends on the label space and is always re-initialized");
  }
  SluModel out(model.config(), model.vocab(), new_space, seed);
  if (model.fixed_embedding().size() > 0) out.set_fixed_embedding(model.fixed_embedding());
  if (model.language_model()) out.set_language_model(model.language_model());
  copy_groups(model, out, keep);
  return out;
}

// --- persistence -------------------------------------------------------------------

void save_model(const SluModel& model, const std::filesystem::path& file) {
  Checkpoint ckpt;
  auto& h = ckpt.header;
  h["kind"] = "slu_model";
  h["config"] = model.config();
  h["vocab"] = model.vocab().words();
  h["intents"] = model.labels().intents();
  h["entity_types"] = model.labels().entity_types();
  h["seed"] = model.seed();
  ConstTensorList list;
  model.params().collect(list);
  ckpt.put(list, "slu");
  if (model.fixed_embedding().size() > 0) ckpt.tensors["fixed.table"] = model.fixed_embedding();
  if (model.language_model()) {
    h["language_model"] = language_model_header(*model.language_model());
    ConstTensorList lm_list;
    model.language_model()->params().collect(lm_list, "lm");
    ckpt.put(lm_list);
  }
  write_checkpoint(file, ckpt);
}

SluModel load_model(const std::filesystem::path& file) {
  const Checkpoint ckpt = read_checkpoint(file);
  const auto& h = ckpt.header;
  if (h.value("kind", "") != "slu_model") throw ValidationError(file.string() + " is not an SLU model checkpoint");
  ModelConfig cfg;
  from_json(h.at("config"), cfg);
  auto words = h.at("vocab").get<std::vector<std::string>>();
  Vocabulary vocab(std::vector<std::string>(words.begin() + Vocabulary::kNumSpecial, words.end()));
  LabelSpace labels(h.at("intents").get<std::vector<std::string>>(), h.at("entity_types").get<std::vector<std::string>>());
  SluModel model(cfg, std::move(vocab), std::move(labels), h.value("seed", std::uint64_t{0}));
  if (h.contains("language_model")) {
    model.set_language_model(
        std::make_shared<const LanguageModel>(language_model_from_checkpoint(ckpt, h.at("language_model"), "lm")));
  }
  TensorList list;
  model.params().collect(list);
  ckpt.get(list, "slu");
  if (ckpt.tensors.count("fixed.table")) model.set_fixed_embedding(ckpt.tensor("fixed.table"));
  return model;
}

}  // namespace sluxfer
