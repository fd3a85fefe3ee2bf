#include "sluxfer/transfer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sluxfer/error.hpp"
#include "sluxfer/optimizer.hpp"
#include "sluxfer/parallel.hpp"

namespace sluxfer {

// --- conditions ------------------------------------------------------------------

Condition Condition::parse(std::string_view name) {
  Condition c;
  constexpr std::string_view kSuffix = "+ST";
  if (name.size() > kSuffix.size() && name.substr(name.size() - kSuffix.size()) == kSuffix) {
    c.supervised_transfer = true;
    name.remove_suffix(kSuffix.size());
  }
  c.mode = parse_embedding_mode(name);
  return c;
}

std::string Condition::name() const {
  return std::string(embedding_mode_name(mode)) + (supervised_transfer ? "+ST" : "");
}

void to_json(nlohmann::json& j, const TrainOptions& o) {
  j = {{"batch_size", o.batch_size},
       {"clip_norm", o.clip_norm},
       {"shard_size", o.shard_size},
       {"threads", o.threads},
       {"assert_freeze", o.assert_freeze}};
}

void from_json(const nlohmann::json& j, TrainOptions& o) {
  o.batch_size = j.value("batch_size", o.batch_size);
  o.clip_norm = j.value("clip_norm", o.clip_norm);
  o.shard_size = j.value("shard_size", o.shard_size);
  o.threads = j.value("threads", o.threads);
  o.assert_freeze = j.value("assert_freeze", o.assert_freeze);
}

// --- training loop -----------------------------------------------------------------

namespace {

void accumulate(SluParams& into, const SluParams& from) {
  TensorList dst;
  into.collect(dst);
  ConstTensorList src;
  from.collect(src);
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value += *src[i].value;
}

void scale(SluParams& p, double factor) {
  TensorList all;
  p.collect(all);
  for (auto& t : all) *t.value *= factor;
}

std::vector<Matrix> snapshot(const ConstTensorList& list) {
  std::vector<Matrix> out;
  out.reserve(list.size());
  for (const auto& t : list) out.push_back(*t.value);
  return out;
}

bool identical(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a.cwiseEqual(b).all());
}

bool unchanged(const ConstTensorList& list, const std::vector<Matrix>& before) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!identical(*list[i].value, before[i])) return false;
  }
  return true;
}

std::vector<Matrix> lm_fingerprint(const std::shared_ptr<const LanguageModel>& lm) {
  if (!lm) return {};
  ConstTensorList list;
  lm->params().collect(list);
  return snapshot(list);
}

void require_lm_unchanged(const std::shared_ptr<const LanguageModel>& lm, const std::vector<Matrix>& before,
                          std::string_view stage) {
  if (!lm) return;
  ConstTensorList list;
  lm->params().collect(list);
  if (!unchanged(list, before)) throw std::logic_error("language model weights changed during " + std::string(stage));
}

}  // namespace

FitResult fit(SluModel& model, const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
              const ScheduleConfig& schedule, const TrainOptions& options, std::uint64_t seed, std::string_view stage,
              const TrainHooks& hooks) {
  schedule.validate();
  if (train.empty()) throw ValidationError("empty training split");
  if (dev.empty()) throw ValidationError("empty dev split");
  if (options.batch_size < 1 || options.shard_size < 1) throw ValidationError("batch_size and shard_size must be >= 1");

  const std::size_t n = train.size();
  std::vector<std::shared_ptr<const EncodedUtterance>> inputs(n);
  std::vector<int> gold_intents(n);
  std::vector<std::vector<int>> gold_tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs[i] = std::make_shared<const EncodedUtterance>(model.encode(train[i].tokens));
    gold_intents[i] = model.intent_index(train[i].intent);
    gold_tags[i] = model.tag_indices(train[i].bio_tags);
  }

  const auto batch = static_cast<std::size_t>(options.batch_size);
  const auto shard = static_cast<std::size_t>(options.shard_size);
  const long per_epoch = static_cast<long>((n + batch - 1) / batch);
  const int epochs = schedule.max_epochs;
  const int unfreeze = std::min(schedule.unfreeze_epoch, epochs);

  TrainState state;
  state.total_steps = per_epoch * epochs;
  FitResult result;
  Adam adam;
  SluParams best = model.params();
  std::vector<SluParams> shard_grads;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    state.epoch = epoch;
    if (epoch == unfreeze) state.phase_step = 0;
    state.phase_total = per_epoch * (epoch < unfreeze ? unfreeze : epochs - unfreeze);
    const auto active = unfreeze_plan(epoch, schedule);

    ConstTensorList frozen_list;
    if (options.assert_freeze) {
      for (auto g : kParamGroups) {
        if (active.count(std::string(g))) continue;
        const auto list = std::as_const(model).params().group(g);
        frozen_list.insert(frozen_list.end(), list.begin(), list.end());
      }
    }
    const auto frozen_before = snapshot(frozen_list);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(epoch), 0x0e9c));
    portable_shuffle(order, rng);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      state.refresh(schedule);
      if (begin == 0) rec.lr_first = state.lr;
      rec.lr_last = state.lr;

      const std::size_t shards = (end - begin + shard - 1) / shard;
      while (shard_grads.size() < shards) shard_grads.push_back(model.params().zeros_like());
      std::vector<double> shard_loss(shards, 0.0);
      const SluModel& frozen_model = model;
      parallel_for(shards, options.threads, [&](std::size_t s) {
        SluParams& g = shard_grads[s];
        g.set_zero();
        const std::size_t lo = begin + s * shard;
        const std::size_t hi = std::min(end, lo + shard);
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t idx = order[k];
          ForwardOptions fo;
          fo.train = true;
          fo.dropout_seed = mix_seed(static_cast<std::uint64_t>(epoch), idx);
          const auto tr = frozen_model.forward(inputs[idx], fo);
          shard_loss[s] += frozen_model.backward(tr, gold_intents[idx], gold_tags[idx], g).total();
        }
      });
      SluParams& grad = shard_grads[0];
      for (std::size_t s = 1; s < shards; ++s) accumulate(grad, shard_grads[s]);
      for (double l : shard_loss) loss_sum += l;
      scale(grad, 1.0 / static_cast<double>(end - begin));
      model.add_l2_gradient(grad, active);

      TensorList active_grads;
      for (const auto& g : active) {
        const auto list = grad.group(g);
        active_grads.insert(active_grads.end(), list.begin(), list.end());
      }
      clip_global_norm(active_grads, options.clip_norm);
      for (const auto& g : active) {
        const auto p = model.params().group(g);
        const auto d = std::as_const(grad).group(g);
        adam.step(p, d, state.lr.at(g));
      }
      ++state.step;
      ++state.phase_step;
      ++result.updates;
      if (hooks.on_update) hooks.on_update(stage, state, model);
    }

    if (options.assert_freeze && !unchanged(frozen_list, frozen_before)) {
      throw std::logic_error("frozen parameters changed during epoch " + std::to_string(epoch) + " of " +
                             std::string(stage));
    }

    rec.train_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(rec.train_loss)) throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch));
    rec.dev = evaluate_model(model, dev, options.threads);
    rec.score = rec.dev.ica + rec.dev.ef1;
    state.history.push_back(rec.score);
    const int best_epoch = early_stop(state.history);
    if (best_epoch == epoch) best = model.params();
    state.best_epoch = best_epoch;
    spdlog::info("{} epoch {}: loss {:.4f}, dev ICA {:.4f} EF1 {:.4f} SER {:.4f}", stage, epoch, rec.train_loss,
                 rec.dev.ica, rec.dev.ef1, rec.dev.ser);
    result.epochs.push_back(std::move(rec));
    if (hooks.on_epoch) hooks.on_epoch(stage, state, model);
    if (should_stop(state.history, schedule)) break;
  }
  result.best_epoch = state.best_epoch;
  model.params() = std::move(best);
  return result;
}

std::vector<EvalPair> predict_all(const SluModel& model, const std::vector<Utterance>& data, int threads) {
  std::vector<EvalPair> pairs(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto pred = model.predict(data[i].tokens);
    pairs[i] = EvalPair{data[i].intent, data[i].bio_tags, pred.intent, pred.tags};
  });
  return pairs;
}

MetricReport evaluate_model(const SluModel& model, const std::vector<Utterance>& data, int threads) {
  return evaluate(predict_all(model, data, threads));
}

// --- pipelines ---------------------------------------------------------------------

void PipelineSpec::validate() const {
  if (!target) throw ValidationError("pipeline needs a target dataset");
  if (target->train.empty() || target->dev.empty() || target->test.empty()) {
    throw ValidationError("target dataset '" + target->name + "' needs non-empty train, dev and test splits");
  }
  if (condition.needs_language_model() && !lm) {
    throw ValidationError("condition " + condition.name() + " needs a language model checkpoint");
  }
  if (condition.mode == EmbeddingMode::kElmoL && lm && lm->config().layers != 1) {
    throw ValidationError("ELMoL needs a single-layer language model, got " + std::to_string(lm->config().layers));
  }
  if (condition.mode == EmbeddingMode::kPretrained && pretrained_vectors.empty()) {
    throw ValidationError("condition " + condition.name() + " needs a pretrained word-vector file");
  }
  if (condition.supervised_transfer) {
    if (!source) throw ValidationError("condition " + condition.name() + " needs a source dataset");
    if (source->train.empty() || source->dev.empty()) {
      throw ValidationError("source dataset '" + source->name + "' needs non-empty train and dev splits");
    }
    source_schedule.validate();
  }
  schedule.validate();
}

std::vector<std::string> RunRecord::step_names() const {
  std::vector<std::string> out;
  for (const auto& s : stages) out.push_back(s.name);
  return out;
}

std::set<std::string> transferable_groups() {
  return {"embedding", "shared_birnn", "mixing", "et_birnn", "ic_birnn"};
}

SluModel build_model(const PipelineSpec& spec, const Vocabulary& vocab, const LabelSpace& labels, std::uint64_t seed) {
  ModelConfig cfg = spec.model;
  const auto mode = spec.condition.mode;
  switch (mode) {
    case EmbeddingMode::kNoUT:
    case EmbeddingMode::kPretrained:
      cfg.embedding = EmbeddingConfig::for_mode(mode);
      break;
    case EmbeddingMode::kElmo:
      cfg.embedding = EmbeddingConfig::for_mode(mode, spec.lm->config().contextual_dim());
      break;
    case EmbeddingMode::kElmoL: {
      const auto& lc = spec.lm->config();
      cfg.embedding = EmbeddingConfig::for_mode(mode);
      cfg.embedding.word_dim = lc.word_dim;
      cfg.embedding.fixed_dim = lc.char_output_dim();
      cfg.embedding.total_dim = lc.token_dim();
      cfg.embedding.char_cnn_spec = lc.char_filters;
      if (cfg.hidden != lc.hidden) {
        throw ShapeError("ELMoL shared layer has " + std::to_string(cfg.hidden) + " units per direction but the LM has " +
                         std::to_string(lc.hidden));
      }
      break;
    }
  }
  SluModel model(cfg, vocab, labels, seed);
  if (mode == EmbeddingMode::kPretrained) {
    std::size_t found = 0;
    model.set_fixed_embedding(load_word_vectors(spec.pretrained_vectors, vocab, cfg.embedding.fixed_dim, &found));
    spdlog::info("pretrained vectors cover {}/{} vocabulary words", found, vocab.num_regular());
  } else if (mode == EmbeddingMode::kElmo) {
    model.set_language_model(spec.lm);
  } else if (mode == EmbeddingMode::kElmoL) {
    model.import_shared_layer(export_shared_layer(*spec.lm, vocab));
  }
  return model;
}

namespace {

using Clock = std::chrono::steady_clock;

RunRecord start_record(const PipelineSpec& spec) {
  RunRecord r;
  r.condition = spec.condition.name();
  r.target = spec.target->name;
  r.source = spec.source && spec.condition.supervised_transfer ? spec.source->name : "";
  r.seed = spec.seed;
  r.train_size = spec.target->train.size();
  r.schedule = spec.schedule;
  if (spec.lm) {
    StageRecord lm;
    lm.name = "lm-pretrain";
    lm.dataset = "unlabeled";
    lm.heldout_perplexity = spec.lm->best_heldout_perplexity;
    r.stages.push_back(lm);
  }
  return r;
}

StageRecord stage_record(std::string name, const Dataset& data, const FitResult& fit_result) {
  StageRecord s;
  s.name = std::move(name);
  s.dataset = data.name;
  s.epochs = fit_result.epochs;
  s.best_epoch = fit_result.best_epoch;
  s.dev = fit_result.epochs.at(static_cast<std::size_t>(fit_result.best_epoch)).dev;
  return s;
}

void finish_record(RunRecord& r, const SluModel& model, const PipelineSpec& spec, const FitResult& fit_result,
                   Clock::time_point started) {
  StageRecord s = stage_record("target-finetune", *spec.target, fit_result);
  s.test = evaluate_model(model, spec.target->test, spec.train.threads);
  r.epochs = s.epochs;
  r.best_epoch = s.best_epoch;
  r.dev = s.dev;
  r.test = *s.test;
  r.stages.push_back(std::move(s));
  if (!spec.checkpoint.empty()) {
    save_model(model, spec.checkpoint);
    r.checkpoint = spec.checkpoint.string();
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  spdlog::info("{} on {}: test ICA {:.4f} EF1 {:.4f} SER {:.4f}", r.condition, r.target, r.test.ica, r.test.ef1,
               r.test.ser);
}

}  // namespace

RunRecord train_ut(const PipelineSpec& spec) {
  spec.validate();
  if (spec.condition.supervised_transfer) throw ValidationError("train_ut does not handle " + spec.condition.name());
  const auto started = Clock::now();
  RunRecord r = start_record(spec);
  const Vocabulary vocab = build_vocab(spec.target->train, 1);
  SluModel model = build_model(spec, vocab, spec.target->label_space, mix_seed(spec.seed, 1));
  const auto lm_before = lm_fingerprint(spec.lm);
  const FitResult fr = fit(model, spec.target->train, spec.target->dev, spec.schedule, spec.train,
                           mix_seed(spec.seed, 2), "target-finetune", spec.hooks);
  require_lm_unchanged(spec.lm, lm_before, "target fine-tuning");
  finish_record(r, model, spec, fr, started);
  return r;
}

RunRecord train_st(const PipelineSpec& spec) {
  spec.validate();
  if (!spec.condition.supervised_transfer) throw ValidationError("train_st needs a +ST condition");
  const auto started = Clock::now();
  RunRecord r = start_record(spec);
  std::vector<std::vector<std::string>> sentences;
  for (const auto* split : {&spec.source->train, &spec.target->train}) {
    for (const auto& u : *split) sentences.push_back(u.tokens);
  }
  const Vocabulary vocab = build_vocab(sentences, 1);
  const auto lm_before = lm_fingerprint(spec.lm);

  SluModel source_model = build_model(spec, vocab, spec.source->label_space, mix_seed(spec.seed, 11));
  const FitResult src = fit(source_model, spec.source->train, spec.source->dev, spec.source_schedule, spec.train,
                            mix_seed(spec.seed, 12), "source-finetune", spec.hooks);
  require_lm_unchanged(spec.lm, lm_before, "source training");
  r.stages.push_back(stage_record("source-finetune", *spec.source, src));

  SluModel target_model =
      replace_heads(source_model, spec.target->label_space, transferable_groups(), mix_seed(spec.seed, 13));
  const FitResult tgt = fit(target_model, spec.target->train, spec.target->dev, spec.schedule, spec.train,
                            mix_seed(spec.seed, 14), "target-finetune", spec.hooks);
  require_lm_unchanged(spec.lm, lm_before, "target fine-tuning");
  finish_record(r, target_model, spec, tgt, started);
  return r;
}

RunRecord train_elmo_plus_st(const PipelineSpec& spec) {
  if (spec.condition.mode != EmbeddingMode::kElmo || !spec.condition.supervised_transfer) {
    throw ValidationError("train_elmo_plus_st needs condition ELMo+ST, got " + spec.condition.name());
  }
  return train_st(spec);
}

RunRecord train_elmol_plus_st(const PipelineSpec& spec) {
  if (spec.condition.mode != EmbeddingMode::kElmoL || !spec.condition.supervised_transfer) {
    throw ValidationError("train_elmol_plus_st needs condition ELMoL+ST, got " + spec.condition.name());
  }
  return train_st(spec);
}

RunRecord run_pipeline(const PipelineSpec& spec) {
  return spec.condition.supervised_transfer ? train_st(spec) : train_ut(spec);
}

// --- sweeps --------------------------------------------------------------------------

SweepResult low_resource_sweep(const std::vector<PipelineSpec>& conditions, const std::vector<std::size_t>& sizes,
                               const std::vector<std::uint64_t>& seeds, int parallelism) {
  if (conditions.empty()) throw ValidationError("sweep needs at least one condition");
  if (sizes.empty() || seeds.empty()) throw ValidationError("sweep needs sizes and seeds");
  for (const auto& c : conditions) c.validate();
  const std::size_t full = conditions.front().target->train.size();
  for (const auto& c : conditions) {
    if (c.target->train.size() != full) throw ValidationError("sweep conditions must share one target dataset");
  }

  SweepResult result;
  std::vector<std::size_t> usable;
  for (auto requested : sizes) {
    const std::size_t size = requested == 0 ? full : requested;
    if (std::find(usable.begin(), usable.end(), size) != usable.end()) continue;
    if (size > full) {
      spdlog::warn("skipping sample size {}: the training split has only {} utterances", size, full);
      result.skipped_sizes.push_back(size);
    } else {
      usable.push_back(size);
    }
  }

  struct Job {
    std::size_t condition;
    std::size_t size;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    for (auto size : usable) {
      for (auto seed : seeds) jobs.push_back({c, size, seed});
    }
  }
  std::vector<RunRecord> runs(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    const auto& job = jobs[i];
    PipelineSpec spec = conditions[job.condition];
    spec.seed = job.seed;
    spec.train.threads = 1;
    if (job.size < full) spec.target = std::make_shared<const Dataset>(sample_low_resource(*spec.target, job.size, job.seed));
    if (!spec.checkpoint.empty()) {
      spec.checkpoint = spec.checkpoint.parent_path() /
                        (spec.condition.name() + "-n" + std::to_string(job.size) + "-s" + std::to_string(job.seed) +
                         spec.checkpoint.extension().string());
    }
    runs[i] = run_pipeline(spec);
    runs[i].target = conditions[job.condition].target->name;
  });

  auto sers = [&](const std::string& cond, std::size_t size) {
    std::vector<double> out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (runs[i].condition == cond && jobs[i].size == size) out.push_back(runs[i].test.ser);
    }
    return out;
  };
  for (const auto& c : conditions) {
    const std::string cond = c.condition.name();
    for (auto size : usable) {
      CurvePoint p;
      p.condition = cond;
      p.size = size;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (runs[i].condition != cond || jobs[i].size != size) continue;
        p.mean_ser += runs[i].test.ser;
        p.mean_ica += runs[i].test.ica;
        p.mean_ef1 += runs[i].test.ef1;
        ++p.runs;
      }
      const auto k = static_cast<double>(p.runs);
      p.mean_ser /= k;
      p.mean_ica /= k;
      p.mean_ef1 /= k;
      double ss = 0.0;
      for (double s : sers(cond, size)) ss += (s - p.mean_ser) * (s - p.mean_ser);
      p.std_ser = p.runs > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
      result.curves.push_back(p);
    }
  }
  if (seeds.size() >= 2) {
    for (auto size : usable) {
      for (std::size_t a = 0; a < conditions.size(); ++a) {
        for (std::size_t b = a + 1; b < conditions.size(); ++b) {
          PairTest t;
          t.size = size;
          t.condition_a = conditions[a].condition.name();
          t.condition_b = conditions[b].condition.name();
          const auto sa = sers(t.condition_a, size);
          const auto sb = sers(t.condition_b, size);
          t.mean_a = std::accumulate(sa.begin(), sa.end(), 0.0) / static_cast<double>(sa.size());
          t.mean_b = std::accumulate(sb.begin(), sb.end(), 0.0) / static_cast<double>(sb.size());
          t.test = paired_significance(sa, sb);
          result.tests.push_back(t);
        }
      }
    }
  }
  result.runs = std::move(runs);
  return result;
}

bool curve_is_monotone(const std::vector<CurvePoint>& curve) {
  std::map<std::string, std::vector<CurvePoint>> by_condition;
  for (const auto& p : curve) by_condition[p.condition].push_back(p);
  for (auto& [name, points] : by_condition) {
    // size 0 (full split) sorts last
    std::sort(points.begin(), points.end(), [](const CurvePoint& x, const CurvePoint& y) {
      const auto kx = x.size == 0 ? SIZE_MAX : x.size;
      const auto ky = y.size == 0 ? SIZE_MAX : y.size;
      return kx < ky;
    });
    for (std::size_t i = 1; i < points.size(); ++i) {
      const double slack = std::max(points[i - 1].std_ser, points[i].std_ser);
      if (points[i].mean_ser > points[i - 1].mean_ser + slack) return false;
    }
  }
  return true;
}

// --- records -----------------------------------------------------------------------

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"dev", r.dev},
       {"score", r.score}, {"lr_first", r.lr_first},     {"lr_last", r.lr_last}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = j.at("train_loss").get<double>();
  r.dev = j.at("dev").get<MetricReport>();
  r.score = j.at("score").get<double>();
  r.lr_first = j.value("lr_first", std::map<std::string, double>{});
  r.lr_last = j.value("lr_last", std::map<std::string, double>{});
}

void to_json(nlohmann::json& j, const StageRecord& r) {
  j = {{"name", r.name}, {"dataset", r.dataset}, {"epochs", r.epochs}, {"best_epoch", r.best_epoch}, {"dev", r.dev}};
  if (r.test) j["test"] = *r.test;
  if (r.name == "lm-pretrain") j["heldout_perplexity"] = r.heldout_perplexity;
}

void from_json(const nlohmann::json& j, StageRecord& r) {
  r.name = j.at("name").get<std::string>();
  r.dataset = j.value("dataset", "");
  r.epochs = j.value("epochs", std::vector<EpochRecord>{});
  r.best_epoch = j.value("best_epoch", -1);
  r.dev = j.at("dev").get<MetricReport>();
  if (j.contains("test")) r.test = j.at("test").get<MetricReport>();
  r.heldout_perplexity = j.value("heldout_perplexity", 0.0);
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = {{"condition", r.condition},   {"target", r.target},   {"source", r.source},
       {"seed", r.seed},             {"train_size", r.train_size}, {"schedule", r.schedule},
       {"stages", r.stages},         {"epochs", r.epochs},   {"best_epoch", r.best_epoch},
       {"dev", r.dev},               {"test", r.test},       {"wall_seconds", r.wall_seconds},
       {"checkpoint", r.checkpoint}};
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  r.condition = j.at("condition").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.source = j.value("source", "");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.train_size = j.value("train_size", std::size_t{0});
  r.schedule = j.at("schedule").get<ScheduleConfig>();
  r.stages = j.value("stages", std::vector<StageRecord>{});
  r.epochs = j.value("epochs", std::vector<EpochRecord>{});
  r.best_epoch = j.value("best_epoch", 0);
  r.dev = j.at("dev").get<MetricReport>();
  r.test = j.at("test").get<MetricReport>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.checkpoint = j.value("checkpoint", "");
}

}  // namespace sluxfer
