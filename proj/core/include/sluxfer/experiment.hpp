#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sluxfer/corpus.hpp"
#include "sluxfer/lm.hpp"
#include "sluxfer/model.hpp"
#include "sluxfer/schedules.hpp"
#include "sluxfer/transfer.hpp"

namespace sluxfer {

struct DatasetRef {
  std::filesystem::path dir;
  DataFormat format = DataFormat::kConllTsv;
};

struct SweepSettings {
  std::vector<std::string> conditions;
  std::vector<std::size_t> sizes = {100, 200, 500, 1000, 2000, 5000, 10000};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int parallelism = 1;
};

// One experiment file. Omitted fields take the public-benchmark defaults:
// Adam at 0.0005, dropout 0.5, L2 1e-4, 25 epochs; LM batches of 32 for
// 50 epochs; unfreezing after 12 epochs, discr 2.5, tlr floor 1/10 with the
// peak at 1/8 of the updates.
struct ExperimentConfig {
  std::string condition = "NoUT";
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "runs";

  std::optional<DatasetRef> target;
  std::optional<DatasetRef> source;
  std::vector<std::filesystem::path> unlabeled;  // LM text; empty = pooled labeled train text
  std::filesystem::path pretrained_vectors;
  double lm_heldout_fraction = 0.01;

  LMConfig lm = LMConfig::elmol();
  std::filesystem::path lm_checkpoint;

  std::string optimizer = "adam";
  double lr = 0.0005;
  ModelConfig model;
  TrainOptions train;

  std::optional<ScheduleConfig> schedule;          // overrides the per-condition default
  std::optional<ScheduleConfig> source_schedule;
  std::map<std::string, ScheduleConfig> schedule_by_condition;
  int unfreeze_epoch = 12;
  std::vector<double> lr_grid = {1e-4, 2.5e-4, 5e-4};
  bool select_phase2_lr = false;  // search lr_grid for the second-phase peak on dev

  SweepSettings sweep;

  // Throws ValidationError naming the offending field.
  void validate() const;

  // Schedule used for the target step of `condition` / its source step.
  ScheduleConfig target_schedule_for(const Condition& condition) const;
  ScheduleConfig source_schedule_for(const Condition& condition) const;
};

// Parses a JSON experiment file; relative paths resolve against its directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& file);
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json effective_settings(const ExperimentConfig& config);

// Loaded inputs for a set of runs.
struct ExperimentInputs {
  std::shared_ptr<const Dataset> target;
  std::shared_ptr<const Dataset> source;
  std::shared_ptr<const LanguageModel> lm;
};

// Loads the datasets (and LM checkpoint, when `condition` needs one).
// Missing files raise ValidationError.
ExperimentInputs load_inputs(const ExperimentConfig& config, const Condition& condition);

PipelineSpec make_pipeline_spec(const ExperimentConfig& config, const Condition& condition,
                                const ExperimentInputs& inputs);

// Unlabeled text for LM pretraining: the configured files, or the train
// splits of the configured datasets with labels stripped.
UnlabeledCorpus load_lm_text(const ExperimentConfig& config);

}  // namespace sluxfer
