#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "sluxfer/error.hpp"
#include "sluxfer/transfer.hpp"
#include "synthetic.hpp"

namespace sluxfer {
namespace {

constexpr int kHidden = 8;

std::shared_ptr<const Dataset> target_data() {
  static const auto d =
      std::make_shared<const Dataset>(testing::make_dataset(testing::Domain::kTravel, 30, 10, 12, 21));
  return d;
}

std::shared_ptr<const Dataset> source_data() {
  static const auto d = std::make_shared<const Dataset>(testing::make_dataset(testing::Domain::kMedia, 40, 10, 5, 22));
  return d;
}

std::shared_ptr<const LanguageModel> tiny_lm() {
  static const auto lm = [] {
    const UnlabeledCorpus text = corpus_from_utterances({&target_data()->train, &source_data()->train});
    LMConfig cfg;
    cfg.hidden = kHidden;
    cfg.word_dim = 10;
    cfg.char_dim = 4;
    cfg.char_filters = {{1, 2}, {2, 2}, {3, 2}};
    cfg.epochs = 1;
    cfg.dropout = 0.0;
    const auto [train, held] = split_heldout(text, 0.1, 1);
    return std::make_shared<const LanguageModel>(train_bilm(train, cfg, held));
  }();
  return lm;
}

PipelineSpec spec_for(const std::string& condition) {
  PipelineSpec s;
  s.condition = Condition::parse(condition);
  s.target = target_data();
  if (s.condition.supervised_transfer) s.source = source_data();
  if (s.condition.needs_language_model()) s.lm = tiny_lm();
  s.model.hidden = kHidden;
  s.model.dropout = 0.2;
  s.schedule = ScheduleConfig::vanilla(0.005);
  s.schedule.max_epochs = 3;
  s.source_schedule = s.schedule;
  s.train.batch_size = 8;
  s.seed = 4;
  return s;
}

std::vector<Matrix> copy_group(const SluModel& m, std::string_view group) {
  std::vector<Matrix> out;
  for (const auto& t : m.params().group(group)) out.push_back(*t.value);
  return out;
}

bool same_group(const SluModel& m, std::string_view group, const std::vector<Matrix>& before) {
  const auto now = m.params().group(group);
  for (std::size_t i = 0; i < now.size(); ++i) {
    if (!(*now[i].value == before[i])) return false;
  }
  return true;
}

TEST(Condition, ParseAndName) {
  for (const char* name : {"NoUT", "Pretrained", "ELMo", "ELMoL", "NoUT+ST", "ELMo+ST", "ELMoL+ST"}) {
    EXPECT_EQ(Condition::parse(name).name(), name);
  }
  EXPECT_TRUE(Condition::parse("ELMoL+ST").supervised_transfer);
  EXPECT_TRUE(Condition::parse("ELMo").needs_language_model());
  EXPECT_FALSE(Condition::parse("Pretrained").needs_language_model());
  EXPECT_THROW(Condition::parse("BERT"), ValidationError);
}

TEST(Pipeline, ValidatesPrerequisites) {
  auto s = spec_for("ELMoL+ST");
  s.source.reset();
  EXPECT_THROW(s.validate(), ValidationError);
  s = spec_for("ELMo");
  s.lm.reset();
  EXPECT_THROW(run_pipeline(s), ValidationError);
  s = spec_for("Pretrained");
  EXPECT_THROW(s.validate(), ValidationError);
  s = spec_for("ELMoL");
  s.model.hidden = kHidden + 1;
  EXPECT_THROW(run_pipeline(s), ShapeError);
}

TEST(Pipeline, StepNames) {
  EXPECT_EQ(run_pipeline(spec_for("NoUT")).step_names(), (std::vector<std::string>{"target-finetune"}));
  EXPECT_EQ(run_pipeline(spec_for("NoUT+ST")).step_names(),
            (std::vector<std::string>{"source-finetune", "target-finetune"}));
  EXPECT_EQ(run_pipeline(spec_for("ELMo+ST")).step_names(),
            (std::vector<std::string>{"lm-pretrain", "source-finetune", "target-finetune"}));
}

TEST(Pipeline, ElmolTransferFreezesThenUnfreezesWithDiscriminativeRates) {
  auto spec = spec_for("ELMoL+ST");
  spec.schedule = ScheduleConfig::guf_discr_tlr(0.005, 2, 0.005);
  spec.schedule.max_epochs = 4;
  spec.schedule.patience = 10;
  const auto lm = spec.lm;
  std::vector<Matrix> lm_before;
  {
    ConstTensorList l;
    lm->params().collect(l);
    for (const auto& t : l) lm_before.push_back(*t.value);
  }

  std::vector<Matrix> emb0, shared0;
  int phase1_updates = 0, phase2_updates = 0;
  bool moved_in_phase2 = false;
  spec.hooks.on_update = [&](std::string_view stage, const TrainState& st, const SluModel& m) {
    if (stage != "target-finetune") return;
    if (emb0.empty()) {
      emb0 = copy_group(m, "embedding");
      shared0 = copy_group(m, "shared_birnn");
    }
    if (st.epoch < 2) {
      ++phase1_updates;
      EXPECT_TRUE(same_group(m, "embedding", emb0));
      EXPECT_TRUE(same_group(m, "shared_birnn", shared0));
      EXPECT_EQ(st.lr.at("embedding"), 0.0);
      EXPECT_EQ(st.lr.at("shared_birnn"), 0.0);
      EXPECT_EQ(st.lr.at("intent_softmax"), 0.005);
    } else {
      ++phase2_updates;
      const double upper = st.lr.at("intent_softmax");
      EXPECT_GT(upper, 0.0);
      EXPECT_NEAR(st.lr.at("embedding"), upper / 2.5, 1e-18);
      EXPECT_NEAR(st.lr.at("shared_birnn"), upper / 2.5, 1e-18);
      EXPECT_EQ(st.lr.at("mixing"), upper);
      moved_in_phase2 = moved_in_phase2 || !same_group(m, "shared_birnn", shared0);
    }
  };
  const auto r = run_pipeline(spec);
  EXPECT_EQ(phase1_updates, 2 * 4);
  EXPECT_EQ(phase2_updates, 2 * 4);
  EXPECT_TRUE(moved_in_phase2);
  EXPECT_EQ(r.step_names(), (std::vector<std::string>{"lm-pretrain", "source-finetune", "target-finetune"}));
  ConstTensorList after;
  lm->params().collect(after);
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_TRUE(*after[i].value == lm_before[i]) << after[i].name;
}

TEST(Pipeline, FreezeViolationIsDetected) {
  auto spec = spec_for("NoUT");
  spec.schedule = ScheduleConfig::guf(0.005, 2, 0.005);
  spec.hooks.on_update = [](std::string_view, const TrainState& st, const SluModel& m) {
    if (st.epoch == 0) const_cast<SluModel&>(m).params().word_embedding(0, 0) += 1.0;
  };
  EXPECT_THROW(run_pipeline(spec), std::logic_error);
}

TEST(Pipeline, ElmoKeepsLanguageModelStatesFixed) {
  auto spec = spec_for("ELMo");
  std::vector<std::string> tokens = target_data()->dev.front().tokens;
  const auto before = spec.lm->contextual_states(tokens);
  run_pipeline(spec);
  const auto after = spec.lm->contextual_states(tokens);
  EXPECT_TRUE(before.layers.front() == after.layers.front());
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads) {
  auto spec = spec_for("ELMoL");
  const auto a = run_pipeline(spec);
  const auto b = run_pipeline(spec);
  spec.train.threads = 3;
  const auto c = run_pipeline(spec);
  for (const auto* r : {&b, &c}) {
    ASSERT_EQ(r->epochs.size(), a.epochs.size());
    for (std::size_t e = 0; e < a.epochs.size(); ++e) EXPECT_EQ(r->epochs[e].train_loss, a.epochs[e].train_loss);
    EXPECT_EQ(r->test.ser, a.test.ser);
    EXPECT_EQ(r->test.ica, a.test.ica);
  }
  spec.seed = 5;
  EXPECT_NE(run_pipeline(spec).epochs.front().train_loss, a.epochs.front().train_loss);
}

TEST(Pipeline, RestoresBestEpoch) {
  auto spec = spec_for("NoUT");
  spec.schedule.max_epochs = 5;
  const auto r = run_pipeline(spec);
  double best = -1.0;
  for (const auto& e : r.epochs) best = std::max(best, e.score);
  EXPECT_EQ(r.epochs[static_cast<std::size_t>(r.best_epoch)].score, best);
  EXPECT_EQ(r.dev.ica + r.dev.ef1, best);
}

TEST(Pipeline, RunRecordJsonRoundTrip) {
  const auto r = run_pipeline(spec_for("NoUT+ST"));
  const nlohmann::json j = r;
  const auto back = j.get<RunRecord>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.step_names(), r.step_names());
  EXPECT_EQ(back.condition, "NoUT+ST");
}

TEST(Sweep, RunsEveryCellAndTestsEveryPair) {
  std::vector<PipelineSpec> conds = {spec_for("NoUT"), spec_for("ELMoL")};
  for (auto& c : conds) c.schedule.max_epochs = 2;
  const auto res = low_resource_sweep(conds, {10, 20, 0, 1000}, {1, 2}, 2);
  EXPECT_EQ(res.runs.size(), 2u * 3u * 2u);
  EXPECT_EQ(res.skipped_sizes, (std::vector<std::size_t>{1000}));
  EXPECT_EQ(res.curves.size(), 6u);
  EXPECT_EQ(res.tests.size(), 3u);
  for (const auto& r : res.runs) {
    EXPECT_TRUE(r.train_size == 10 || r.train_size == 20 || r.train_size == 30);
    EXPECT_EQ(r.target, target_data()->name);
  }
  for (const auto& p : res.curves) EXPECT_EQ(p.runs, 2u);
  const auto again = low_resource_sweep(conds, {10, 20, 0, 1000}, {1, 2}, 1);
  for (std::size_t i = 0; i < res.runs.size(); ++i) EXPECT_EQ(res.runs[i].test.ser, again.runs[i].test.ser);
}

TEST(Sweep, Monotonicity) {
  auto point = [](std::size_t size, double mean, double sd) {
    CurvePoint p;
    p.condition = "A";
    p.size = size;
    p.mean_ser = mean;
    p.std_ser = sd;
    return p;
  };
  EXPECT_TRUE(curve_is_monotone({point(100, 0.5, 0.0), point(200, 0.4, 0.0), point(0, 0.1, 0.0)}));
  EXPECT_TRUE(curve_is_monotone({point(100, 0.5, 0.05), point(200, 0.54, 0.01)}));
  EXPECT_FALSE(curve_is_monotone({point(100, 0.5, 0.01), point(200, 0.6, 0.01)}));
  EXPECT_FALSE(curve_is_monotone({point(0, 0.5, 0.0), point(100, 0.2, 0.0)}));
}

TEST(Sweep, RejectsEmptyInputs) {
  EXPECT_THROW(low_resource_sweep({}, {10}, {1}), ValidationError);
  EXPECT_THROW(low_resource_sweep({spec_for("NoUT")}, {}, {1}), ValidationError);
}

}  // namespace
}  // namespace sluxfer
