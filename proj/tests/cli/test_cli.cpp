#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sluxfer/cli.hpp"
#include "sluxfer/metrics.hpp"
#include "synthetic.hpp"

namespace sluxfer {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), {"--log-level", "warn"});
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

std::size_t count_occurrences(const fs::path& p, const std::string& needle) {
  std::ifstream in(p);
  const std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::scratch_dir("cli"));
    testing::write_dataset(testing::make_dataset(testing::Domain::kTravel, 30, 10, 12, 31), *root_ / "travel");
    testing::write_dataset(testing::make_dataset(testing::Domain::kMedia, 30, 10, 12, 32), *root_ / "media");
  }
  static void TearDownTestSuite() { delete root_; }

  // Writes a small experiment config with `patch` merged in.
  static fs::path config(const std::string& name, const nlohmann::json& patch = nlohmann::json::object()) {
    nlohmann::json j = {
        {"condition", "NoUT"},
        {"seed", 3},
        {"output_dir", name},
        {"data", {{"target", "travel"}, {"lm_heldout_fraction", 0.1}}},
        {"lm",
         {{"hidden", 8}, {"word_dim", 8}, {"char_dim", 4}, {"char_filters", {{1, 4}, {2, 4}}}, {"epochs", 2},
          {"batch_size", 8}}},
        {"lm_checkpoint", "lm/lm.ckpt"},
        {"optimizer", {{"lr", 0.005}}},
        {"model", {{"hidden", 8}, {"dropout", 0.1}}},
        {"train", {{"batch_size", 8}}},
        {"schedule", {{"max_epochs", 2}}},
    };
    j.merge_patch(patch);
    const fs::path file = *root_ / (name + ".json");
    std::ofstream(file) << j.dump(2);
    return file;
  }

  static fs::path out(const std::string& name) { return *root_ / name; }

  static inline fs::path* root_ = nullptr;
};

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"train"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", (out("missing.json")).string()}).code, kExitUsage);
  EXPECT_EQ(run({"eval", "--config", config("e").string(), "--model", "m", "--split", "train"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(Cli, ConfigErrorsExitWithUsageCode) {
  EXPECT_EQ(run({"train", "--config", config("bad1", {{"learning_rate", 1}}).string()}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", config("bad2", {{"condition", "BERT"}}).string()}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", config("bad3", {{"model", {{"dropout", 1.5}}}}).string()}).code, kExitUsage);
  const auto r = run({"train", "--config", config("bad4", {{"condition", "NoUT+ST"}}).string(), "--dry-run"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("source"), std::string::npos) << r.err;
  const fs::path junk = out("junk.json");
  std::ofstream(junk) << "{ not json";
  EXPECT_EQ(run({"train", "--config", junk.string()}).code, kExitUsage);
}

TEST_F(Cli, DryRunWritesNothing) {
  const auto r = run({"train", "--config", config("dry").string(), "--dry-run"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_FALSE(fs::exists(out("dry") / "run.json"));
  EXPECT_FALSE(fs::exists(out("dry") / "model.ckpt"));
}

TEST_F(Cli, TrainThenEvalReproducesTestMetrics) {
  const auto cfg = config("train");
  const auto t = run({"train", "--config", cfg.string()});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  for (const char* f : {"run.json", "run.jsonl", "model.ckpt", "settings.json"}) EXPECT_TRUE(fs::exists(out("train") / f)) << f;
  const auto run_json = read_json(out("train") / "run.json");
  EXPECT_EQ(read_json(out("train") / "settings.json").at("condition"), "NoUT");

  const auto e = run({"eval", "--config", cfg.string(), "--model", (out("train") / "model.ckpt").string(), "--split",
                      "test", "--out", out("eval").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const auto metrics = read_json(out("eval") / "metrics_test.json");
  EXPECT_EQ(metrics, run_json.at("test"));

  const auto pairs = read_predictions(out("eval") / "predictions_test.tsv");
  EXPECT_EQ(pairs.size(), 12u);
  EXPECT_EQ(nlohmann::json(evaluate(pairs)), metrics);

  const auto other = run({"eval", "--config", config("eval-media", {{"data", {{"target", "media"}}}}).string(),
                          "--model", (out("train") / "model.ckpt").string()});
  EXPECT_EQ(other.code, kExitUsage);
}

TEST_F(Cli, SeedOverrideChangesRun) {
  const auto a = run({"train", "--config", config("seed-a").string(), "--seed", "8"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(read_json(out("seed-a") / "run.json").at("seed"), 8);
}

TEST_F(Cli, PretrainResumeAndSweep) {
  const auto lm_cfg = config("lm");
  const auto p = run({"pretrain-lm", "--config", lm_cfg.string()});
  ASSERT_EQ(p.code, kExitOk) << p.err;
  EXPECT_EQ(count_lines(out("lm") / "lm_perplexity.csv"), 3u);
  EXPECT_EQ(read_json(out("lm") / "lm_summary.json").at("epochs_trained"), 2);

  const auto resume_cfg = config("lm", {{"lm", {{"epochs", 3}}}});
  const auto r = run({"pretrain-lm", "--config", resume_cfg.string(), "--resume", (out("lm") / "lm.ckpt").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(count_lines(out("lm") / "lm_perplexity.csv"), 4u);
  EXPECT_EQ(read_json(out("lm") / "lm_summary.json").at("epochs_trained"), 3);

  const auto sweep_cfg =
      config("sweep", {{"sweep", {{"conditions", {"NoUT", "ELMoL"}}, {"sizes", {10, 0}}, {"seeds", {1, 2}}}}});
  const auto s = run({"sweep", "--config", sweep_cfg.string()});
  ASSERT_EQ(s.code, kExitOk) << s.err;
  EXPECT_EQ(count_lines(out("sweep") / "sweep.csv"), 1u + 2u * 2u * 2u);
  EXPECT_EQ(count_lines(out("sweep") / "runs.jsonl"), 8u);
  EXPECT_EQ(count_lines(out("sweep") / "ttest.csv"), 1u + 2u);
  EXPECT_EQ(count_occurrences(out("sweep") / "ser_curve.svg", "class=\"xtick\""), 2u);

  const auto rep = run({"report", "--runs", (out("sweep") / "runs.jsonl").string(), "--out", out("report").string()});
  ASSERT_EQ(rep.code, kExitOk) << rep.err;
  std::ifstream a(out("sweep") / "sweep.csv"), b(out("report") / "sweep.csv");
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);

  const auto one = config("sweep1", {{"sweep", {{"conditions", {"NoUT"}}}}});
  EXPECT_EQ(run({"sweep", "--config", one.string()}).code, kExitUsage);
}

}  // namespace
}  // namespace sluxfer
