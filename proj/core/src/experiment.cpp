#include "sluxfer/experiment.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sluxfer/error.hpp"

namespace sluxfer {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

DatasetRef parse_dataset(const nlohmann::json& j, const std::filesystem::path& base) {
  DatasetRef d;
  if (j.is_string()) {
    d.dir = resolve(base, j.get<std::string>());
    return d;
  }
  d.dir = resolve(base, j.at("dir").get<std::string>());
  if (j.contains("format")) d.format = parse_data_format(j.at("format").get<std::string>());
  return d;
}

nlohmann::json dataset_json(const DatasetRef& d) {
  return {{"dir", d.dir.string()}, {"format", std::string(data_format_name(d.format))}};
}

const std::set<std::string> kTopLevelKeys = {
    "condition", "seed", "output_dir", "data", "lm", "lm_checkpoint", "optimizer", "model", "train",
    "schedule", "source_schedule", "schedule_by_condition", "unfreeze_epoch", "lr_grid", "select_phase2_lr", "sweep"};

}  // namespace

void ExperimentConfig::validate() const {
  Condition::parse(condition);
  if (optimizer != "adam") throw ValidationError("optimizer.name: only 'adam' is supported, got '" + optimizer + "'");
  if (!(lr > 0.0)) throw ValidationError("optimizer.lr must be > 0");
  if (model.hidden < 1) throw ValidationError("model.hidden must be >= 1");
  if (model.dropout < 0.0 || model.dropout >= 1.0) throw ValidationError("model.dropout must be in [0, 1)");
  if (model.l2 < 0.0) throw ValidationError("model.l2 must be >= 0");
  if (train.batch_size < 1 || train.shard_size < 1 || train.threads < 1) {
    throw ValidationError("train.batch_size, train.shard_size and train.threads must be >= 1");
  }
  if (!(lm_heldout_fraction > 0.0 && lm_heldout_fraction < 1.0)) {
    throw ValidationError("data.lm_heldout_fraction must be in (0, 1)");
  }
  if (unfreeze_epoch < 0) throw ValidationError("unfreeze_epoch must be >= 0");
  if (lr_grid.empty()) throw ValidationError("lr_grid must not be empty");
  for (double v : lr_grid) {
    if (!(v > 0.0)) throw ValidationError("lr_grid values must be > 0");
  }
  lm.validate();
  for (const auto& c : sweep.conditions) Condition::parse(c);
  if (sweep.seeds.empty()) throw ValidationError("sweep.seeds must not be empty");
  if (sweep.parallelism < 1) throw ValidationError("sweep.parallelism must be >= 1");
  if (schedule) schedule->validate();
  if (source_schedule) source_schedule->validate();
  for (const auto& [name, s] : schedule_by_condition) {
    Condition::parse(name);
    s.validate();
  }
}

ScheduleConfig ExperimentConfig::target_schedule_for(const Condition& condition) const {
  if (auto it = schedule_by_condition.find(condition.name()); it != schedule_by_condition.end()) return it->second;
  ScheduleConfig s = condition.mode == EmbeddingMode::kElmoL
                         ? ScheduleConfig::guf_discr_tlr(lr, unfreeze_epoch, lr)
                         : ScheduleConfig::vanilla(lr);
  if (schedule) s = *schedule;
  return s;
}

ScheduleConfig ExperimentConfig::source_schedule_for(const Condition& condition) const {
  if (source_schedule) return *source_schedule;
  if (condition.mode == EmbeddingMode::kElmoL) {
    ScheduleConfig s = ScheduleConfig::guf(lr, unfreeze_epoch, lr);
    s.discr_ratio = 2.5;
    return s;
  }
  return ScheduleConfig::vanilla(lr);
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopLevelKeys.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.condition = j.value("condition", c.condition);
    c.seed = j.value("seed", c.seed);
    c.output_dir = resolve(base, j.value("output_dir", c.output_dir.string()));
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("target")) c.target = parse_dataset(d.at("target"), base);
      if (d.contains("source")) c.source = parse_dataset(d.at("source"), base);
      if (d.contains("unlabeled")) {
        for (const auto& f : d.at("unlabeled")) c.unlabeled.push_back(resolve(base, f.get<std::string>()));
      }
      if (d.contains("pretrained_vectors")) {
        c.pretrained_vectors = resolve(base, d.at("pretrained_vectors").get<std::string>());
      }
      c.lm_heldout_fraction = d.value("lm_heldout_fraction", c.lm_heldout_fraction);
    }
    if (j.contains("lm")) {
      const auto& l = j.at("lm");
      const std::string preset = l.value("preset", "elmol");
      if (preset == "elmol") {
        c.lm = LMConfig::elmol();
      } else if (preset == "elmo_desk") {
        c.lm = LMConfig::elmo_desk();
      } else {
        throw ValidationError("lm.preset must be 'elmol' or 'elmo_desk'");
      }
      from_json(l, c.lm);
    }
    if (j.contains("lm_checkpoint")) c.lm_checkpoint = resolve(base, j.at("lm_checkpoint").get<std::string>());
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      c.optimizer = o.value("name", c.optimizer);
      c.lr = o.value("lr", c.lr);
      c.train.clip_norm = o.value("clip_norm", c.train.clip_norm);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.dropout = m.value("dropout", c.model.dropout);
      c.model.l2 = m.value("l2", c.model.l2);
      c.model.mixing = m.value("mixing", c.model.mixing);
    }
    if (j.contains("train")) from_json(j.at("train"), c.train);
    c.unfreeze_epoch = j.value("unfreeze_epoch", c.unfreeze_epoch);
    auto schedule_from = [&](const nlohmann::json& s) {
      ScheduleConfig out = ScheduleConfig::vanilla(c.lr);
      nlohmann::json patched = s;
      if (!patched.contains("base_lr")) patched["base_lr"] = c.lr;
      if (patched.contains("preset") && !patched.contains("unfreeze_epoch")) patched["unfreeze_epoch"] = c.unfreeze_epoch;
      from_json(patched, out);
      return out;
    };
    if (j.contains("schedule")) c.schedule = schedule_from(j.at("schedule"));
    if (j.contains("source_schedule")) c.source_schedule = schedule_from(j.at("source_schedule"));
    if (j.contains("schedule_by_condition")) {
      for (const auto& [name, s] : j.at("schedule_by_condition").items()) {
        c.schedule_by_condition[Condition::parse(name).name()] = schedule_from(s);
      }
    }
    c.lr_grid = j.value("lr_grid", c.lr_grid);
    c.select_phase2_lr = j.value("select_phase2_lr", c.select_phase2_lr);
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      c.sweep.conditions = s.value("conditions", c.sweep.conditions);
      c.sweep.sizes = s.value("sizes", c.sweep.sizes);
      c.sweep.seeds = s.value("seeds", c.sweep.seeds);
      c.sweep.parallelism = s.value("parallelism", c.sweep.parallelism);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config file " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
  return parse_experiment_config(j, file.parent_path());
}

nlohmann::json effective_settings(const ExperimentConfig& c) {
  nlohmann::json j;
  j["condition"] = c.condition;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  nlohmann::json data = nlohmann::json::object();
  if (c.target) data["target"] = dataset_json(*c.target);
  if (c.source) data["source"] = dataset_json(*c.source);
  data["unlabeled"] = nlohmann::json::array();
  for (const auto& f : c.unlabeled) data["unlabeled"].push_back(f.string());
  data["pretrained_vectors"] = c.pretrained_vectors.string();
  data["lm_heldout_fraction"] = c.lm_heldout_fraction;
  j["data"] = data;
  j["lm"] = c.lm;
  j["lm_checkpoint"] = c.lm_checkpoint.string();
  j["optimizer"] = {{"name", c.optimizer}, {"lr", c.lr}, {"clip_norm", c.train.clip_norm}};
  j["model"] = {{"hidden", c.model.hidden}, {"dropout", c.model.dropout}, {"l2", c.model.l2}, {"mixing", c.model.mixing}};
  j["train"] = c.train;
  const Condition cond = Condition::parse(c.condition);
  j["schedule"] = c.target_schedule_for(cond);
  j["source_schedule"] = c.source_schedule_for(cond);
  j["unfreeze_epoch"] = c.unfreeze_epoch;
  j["lr_grid"] = c.lr_grid;
  j["select_phase2_lr"] = c.select_phase2_lr;
  j["sweep"] = {{"conditions", c.sweep.conditions},
                {"sizes", c.sweep.sizes},
                {"seeds", c.sweep.seeds},
                {"parallelism", c.sweep.parallelism}};
  return j;
}

namespace {

std::shared_ptr<const Dataset> load_dataset(const DatasetRef& ref) {
  if (!std::filesystem::is_directory(ref.dir)) throw ValidationError("dataset directory not found: " + ref.dir.string());
  auto d = std::make_shared<Dataset>(load_labeled(ref.dir, ref.format));
  if (d->bio_repairs > 0) spdlog::warn("{}: repaired {} orphan I- tags", d->name, d->bio_repairs);
  return d;
}

}  // namespace

ExperimentInputs load_inputs(const ExperimentConfig& config, const Condition& condition) {
  ExperimentInputs in;
  if (!config.target) throw ValidationError("data.target is required");
  in.target = load_dataset(*config.target);
  if (condition.supervised_transfer) {
    if (!config.source) throw ValidationError("condition " + condition.name() + " needs data.source");
    in.source = load_dataset(*config.source);
  }
  if (condition.needs_language_model()) {
    if (config.lm_checkpoint.empty()) throw ValidationError("condition " + condition.name() + " needs lm_checkpoint");
    if (!std::filesystem::exists(config.lm_checkpoint)) {
      throw ValidationError("LM checkpoint not found: " + config.lm_checkpoint.string());
    }
    in.lm = std::make_shared<const LanguageModel>(load_language_model(config.lm_checkpoint));
  }
  if (condition.mode == EmbeddingMode::kPretrained && !std::filesystem::exists(config.pretrained_vectors)) {
    throw ValidationError("pretrained vector file not found: " + config.pretrained_vectors.string());
  }
  return in;
}

PipelineSpec make_pipeline_spec(const ExperimentConfig& config, const Condition& condition,
                                const ExperimentInputs& inputs) {
  PipelineSpec spec;
  spec.condition = condition;
  spec.target = inputs.target;
  spec.source = inputs.source;
  spec.lm = inputs.lm;
  spec.pretrained_vectors = config.pretrained_vectors;
  spec.model = config.model;
  spec.schedule = config.target_schedule_for(condition);
  spec.source_schedule = config.source_schedule_for(condition);
  spec.train = config.train;
  spec.seed = config.seed;
  return spec;
}

UnlabeledCorpus load_lm_text(const ExperimentConfig& config) {
  if (!config.unlabeled.empty()) {
    for (const auto& f : config.unlabeled) {
      if (!std::filesystem::exists(f)) throw ValidationError("unlabeled text file not found: " + f.string());
    }
    return load_unlabeled(config.unlabeled);
  }
  std::vector<std::shared_ptr<const Dataset>> sets;
  if (config.target) sets.push_back(load_dataset(*config.target));
  if (config.source) sets.push_back(load_dataset(*config.source));
  if (sets.empty()) throw ValidationError("pretrain-lm needs data.unlabeled or labeled datasets");
  std::vector<const std::vector<Utterance>*> splits;
  for (const auto& s : sets) splits.push_back(&s->train);
  return corpus_from_utterances(splits);
}

}  // namespace sluxfer
