#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sluxfer/corpus.hpp"
#include "sluxfer/lm.hpp"
#include "sluxfer/metrics.hpp"
#include "sluxfer/model.hpp"
#include "sluxfer/schedules.hpp"

namespace sluxfer {

// Embedding mode plus whether a labeled source domain is used first.
struct Condition {
  EmbeddingMode mode = EmbeddingMode::kNoUT;
  bool supervised_transfer = false;

  static Condition parse(std::string_view name);  // "NoUT", "ELMoL+ST", ...
  std::string name() const;
  bool needs_language_model() const { return mode == EmbeddingMode::kElmo || mode == EmbeddingMode::kElmoL; }
  bool operator==(const Condition&) const = default;
};

struct TrainOptions {
  int batch_size = 16;
  double clip_norm = 5.0;
  int shard_size = 4;  // utterances per gradient shard; fixes the reduction order
  int threads = 1;
  // Compare frozen groups against their epoch-start snapshot and throw
  // std::logic_error if any of them moved.
  bool assert_freeze = true;
};

void to_json(nlohmann::json& j, const TrainOptions& o);
void from_json(const nlohmann::json& j, TrainOptions& o);

// Per-update / per-epoch observers. `stage` names the pipeline step.
struct TrainHooks {
  std::function<void(std::string_view stage, const TrainState&, const SluModel&)> on_update;
  std::function<void(std::string_view stage, const TrainState&, const SluModel&)> on_epoch;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean joint loss per utterance, without L2
  MetricReport dev;
  double score = 0.0;       // dev ICA + EF1
  std::map<std::string, double> lr_first;  // rate of each group at the first update
  std::map<std::string, double> lr_last;
};

struct FitResult {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  long updates = 0;
};

// Trains `model` in place on `train`, selects the epoch with the best dev
// ICA + EF1 and restores its parameters.
FitResult fit(SluModel& model, const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
              const ScheduleConfig& schedule, const TrainOptions& options, std::uint64_t seed,
              std::string_view stage = "train", const TrainHooks& hooks = {});

// Predicts every utterance and pairs it with its gold labels.
std::vector<EvalPair> predict_all(const SluModel& model, const std::vector<Utterance>& data, int threads = 1);
MetricReport evaluate_model(const SluModel& model, const std::vector<Utterance>& data, int threads = 1);

struct PipelineSpec {
  Condition condition;
  std::shared_ptr<const Dataset> target;
  std::shared_ptr<const Dataset> source;         // +ST conditions
  std::shared_ptr<const LanguageModel> lm;        // ELMo / ELMoL
  std::filesystem::path pretrained_vectors;      // Pretrained
  ModelConfig model;                             // hidden, dropout, l2, mixing
  ScheduleConfig schedule;                       // target fine-tuning
  ScheduleConfig source_schedule;                // +ST source step
  TrainOptions train;
  std::uint64_t seed = 1;
  std::filesystem::path checkpoint;              // written when non-empty
  TrainHooks hooks;

  // Throws ValidationError when a prerequisite is missing.
  void validate() const;
};

struct StageRecord {
  std::string name;     // lm-pretrain, source-finetune, target-finetune
  std::string dataset;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  MetricReport dev;
  std::optional<MetricReport> test;
  double heldout_perplexity = 0.0;  // lm-pretrain only
};

struct RunRecord {
  std::string condition;
  std::string target;
  std::string source;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  ScheduleConfig schedule;
  std::vector<StageRecord> stages;
  std::vector<EpochRecord> epochs;  // final stage
  int best_epoch = 0;
  MetricReport dev;
  MetricReport test;
  double wall_seconds = 0.0;
  std::string checkpoint;

  std::vector<std::string> step_names() const;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);
void to_json(nlohmann::json& j, const StageRecord& r);
void from_json(const nlohmann::json& j, StageRecord& r);
void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

// Fresh model for `condition` over `vocab` / `labels`, wired to the LM or
// pretrained vectors the spec provides.
SluModel build_model(const PipelineSpec& spec, const Vocabulary& vocab, const LabelSpace& labels, std::uint64_t seed);

// Single-domain training for the four unsupervised-transfer conditions.
RunRecord train_ut(const PipelineSpec& spec);
// Frozen LM, source training, head replacement, target fine-tuning.
RunRecord train_elmo_plus_st(const PipelineSpec& spec);
// Pretrained shared layer, source training with guf+discr, target
// fine-tuning with guf+discr+tlr.
RunRecord train_elmol_plus_st(const PipelineSpec& spec);
// Any +ST condition (NoUT+ST, Pretrained+ST included).
RunRecord train_st(const PipelineSpec& spec);
// Dispatches on spec.condition.
RunRecord run_pipeline(const PipelineSpec& spec);

// Groups carried from the source model to the target model.
std::set<std::string> transferable_groups();

struct CurvePoint {
  std::string condition;
  std::size_t size = 0;  // training utterances
  double mean_ser = 0.0;
  double std_ser = 0.0;  // sample standard deviation
  double mean_ica = 0.0;
  double mean_ef1 = 0.0;
  std::size_t runs = 0;
};

struct PairTest {
  std::size_t size = 0;
  std::string condition_a;
  std::string condition_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  Significance test;
};

struct SweepResult {
  std::vector<RunRecord> runs;
  std::vector<CurvePoint> curves;
  std::vector<PairTest> tests;
  std::vector<std::size_t> skipped_sizes;
};

// One run per (condition, size, seed) on seeded subsamples of the target
// training split; size 0 stands for the full split. Sizes larger than the split
// are skipped with a warning.
SweepResult low_resource_sweep(const std::vector<PipelineSpec>& conditions, const std::vector<std::size_t>& sizes,
                               const std::vector<std::uint64_t>& seeds, int parallelism = 1);

// Mean SER is non-increasing in size within one standard deviation.
bool curve_is_monotone(const std::vector<CurvePoint>& curve);

}  // namespace sluxfer
