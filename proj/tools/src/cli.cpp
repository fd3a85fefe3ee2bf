#include "sluxfer/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sluxfer/error.hpp"
#include "sluxfer/experiment.hpp"
#include "sluxfer/lm.hpp"
#include "sluxfer/metrics.hpp"
#include "sluxfer/model.hpp"
#include "sluxfer/report.hpp"
#include "sluxfer/transfer.hpp"

namespace sluxfer {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "overrides the config seed");
  cmd->add_flag("--dry-run", f.dry_run, "validate inputs and exit");
  cmd->add_option("--out", f.out, "output directory (default: config output_dir)");
}

ExperimentConfig load_config(const CommonFlags& f) {
  ExperimentConfig c = load_experiment_config(f.config);
  if (f.seed) {
    c.seed = *f.seed;
    c.lm.seed = *f.seed;
  }
  if (!f.out.empty()) c.output_dir = f.out;
  return c;
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  fs::create_directories(file.parent_path());
  std::ofstream o(file);
  if (!o) throw std::runtime_error("cannot write " + file.string());
  o << j.dump(2) << '\n';
}

void announce(const ExperimentConfig& c, std::ostream& out) {
  const auto settings = effective_settings(c);
  out << "effective settings:\n" << settings.dump(2) << '\n';
  write_json(c.output_dir / "settings.json", settings);
}

// --- pretrain-lm ---------------------------------------------------------------------

int cmd_pretrain_lm(const CommonFlags& f, const std::string& resume, std::ostream& out) {
  ExperimentConfig c = load_config(f);
  if (!resume.empty() && !fs::exists(resume)) throw ValidationError("resume checkpoint not found: " + resume);
  const UnlabeledCorpus text = load_lm_text(c);
  const auto [train, heldout] = split_heldout(text, c.lm_heldout_fraction, c.lm.seed);
  if (f.dry_run) {
    out << "dry run: " << train.sentences.size() << " training and " << heldout.sentences.size()
        << " held-out sentences; config ok\n";
    return kExitOk;
  }
  announce(c, out);
  std::optional<LanguageModel> previous;
  LMTrainOptions opts;
  if (!resume.empty()) {
    previous = load_language_model(resume);
    opts.resume_from = &*previous;
  }
  std::ofstream log(c.output_dir / "lm_perplexity.csv", resume.empty() ? std::ios::trunc : std::ios::app);
  if (resume.empty()) log << "epoch,train_perplexity,heldout_perplexity\n";
  log.precision(10);
  opts.on_epoch = [&](int epoch, double train_ppl, double held_ppl) {
    log << epoch << ',' << train_ppl << ',' << held_ppl << '\n' << std::flush;
  };
  const LanguageModel lm = train_bilm(train, c.lm, heldout, opts);
  const fs::path ckpt = c.output_dir / "lm.ckpt";
  save_language_model(lm, ckpt);
  const PerplexityReport report = perplexity(lm, heldout, "heldout");
  nlohmann::json summary = {{"checkpoint", ckpt.string()},
                            {"epochs_trained", lm.epochs_trained},
                            {"vocabulary", lm.vocab().size()},
                            {"heldout_perplexity", report.perplexity},
                            {"heldout_tokens", report.token_count}};
  write_json(c.output_dir / "lm_summary.json", summary);
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------------------

RunRecord train_with_selection(const ExperimentConfig& c, PipelineSpec spec) {
  const bool two_phase = spec.schedule.unfreeze_epoch > 0 && spec.schedule.unfreeze_epoch < spec.schedule.max_epochs;
  if (!c.select_phase2_lr || !two_phase) return run_pipeline(spec);
  std::optional<RunRecord> best;
  for (double peak : c.lr_grid) {
    PipelineSpec trial = spec;
    trial.schedule.tlr_peak = peak;
    trial.checkpoint.clear();
    spdlog::info("second-phase lr {}", peak);
    RunRecord r = run_pipeline(trial);
    if (!best || r.dev.ica + r.dev.ef1 > best->dev.ica + best->dev.ef1) {
      best = std::move(r);
      spec.schedule.tlr_peak = peak;
    }
  }
  // Retrain the winner so the saved checkpoint matches the record.
  return run_pipeline(spec);
}

int cmd_train(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig c = load_config(f);
  const Condition cond = Condition::parse(c.condition);
  const ExperimentInputs inputs = load_inputs(c, cond);
  PipelineSpec spec = make_pipeline_spec(c, cond, inputs);
  spec.validate();
  if (f.dry_run) {
    out << "dry run: " << cond.name() << " on " << inputs.target->name << " (" << inputs.target->train.size()
        << " train utterances); config ok\n";
    return kExitOk;
  }
  announce(c, out);
  spec.checkpoint = c.output_dir / "model.ckpt";
  const RunRecord record = train_with_selection(c, spec);
  write_runs_jsonl(c.output_dir / "run.jsonl", {record});
  write_json(c.output_dir / "run.json", record);
  out << "test: " << nlohmann::json(record.test).dump() << '\n';
  return kExitOk;
}

// --- eval -------------------------------------------------------------------------------

int cmd_eval(const CommonFlags& f, const std::string& model_path, const std::string& split, std::ostream& out) {
  ExperimentConfig c = load_config(f);
  if (!c.target) throw ValidationError("data.target is required");
  if (!fs::exists(model_path)) throw ValidationError("model checkpoint not found: " + model_path);
  const Dataset data = load_labeled(c.target->dir, c.target->format);
  const auto& utts = split == "dev" ? data.dev : data.test;
  if (utts.empty()) throw ValidationError("split '" + split + "' of " + data.name + " is empty");
  const SluModel model = load_model(model_path);
  for (const auto& u : utts) {
    if (!model.labels().intent_index(u.intent)) {
      throw ValidationError("intent '" + u.intent + "' is outside the model's label space");
    }
    for (const auto& t : u.bio_tags) {
      if (!model.labels().tag_index(t)) throw ValidationError("tag '" + t + "' is outside the model's label space");
    }
  }
  if (f.dry_run) {
    out << "dry run: " << utts.size() << " " << split << " utterances; checkpoint and labels ok\n";
    return kExitOk;
  }
  const auto pairs = predict_all(model, utts, c.train.threads);
  const MetricReport report = evaluate(pairs);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& u : utts) tokens.push_back(u.tokens);
  fs::create_directories(c.output_dir);
  const fs::path pred_file = c.output_dir / ("predictions_" + split + ".tsv");
  write_predictions(pred_file, pairs, tokens);
  write_json(c.output_dir / ("metrics_" + split + ".json"), report);
  out << nlohmann::json(report).dump(2) << '\n';
  return kExitOk;
}

// --- sweep / report ----------------------------------------------------------------------

void write_sweep_outputs(const fs::path& dir, const SweepResult& result) {
  write_runs_jsonl(dir / "runs.jsonl", result.runs);
  write_sweep_csv(dir / "sweep.csv", result.runs);
  write_curve_csv(dir / "curve.csv", result.curves);
  write_ttest_csv(dir / "ttest.csv", result.tests);
  write_curve_svg(dir / "ser_curve.svg", result.curves, result.tests);
}

int cmd_sweep(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig c = load_config(f);
  if (c.sweep.conditions.size() < 2) throw ValidationError("sweep.conditions needs at least two conditions");
  if (c.sweep.seeds.size() < 2) throw ValidationError("sweep.seeds needs at least two seeds for significance tests");
  std::vector<PipelineSpec> specs;
  ExperimentInputs shared;
  for (const auto& name : c.sweep.conditions) {
    const Condition cond = Condition::parse(name);
    ExperimentInputs in = load_inputs(c, cond);
    if (shared.target) in.target = shared.target;  // one target dataset across conditions
    shared.target = in.target;
    specs.push_back(make_pipeline_spec(c, cond, in));
    specs.back().validate();
  }
  if (f.dry_run) {
    out << "dry run: " << specs.size() << " conditions x " << c.sweep.sizes.size() << " sizes x "
        << c.sweep.seeds.size() << " seeds; config ok\n";
    return kExitOk;
  }
  announce(c, out);
  const SweepResult result = low_resource_sweep(specs, c.sweep.sizes, c.sweep.seeds, c.sweep.parallelism);
  write_sweep_outputs(c.output_dir, result);
  for (const auto& p : result.curves) {
    out << p.condition << " n=" << p.size << " SER " << p.mean_ser << " +- " << p.std_ser << '\n';
  }
  for (const auto& t : result.tests) {
    out << "n=" << t.size << " " << t.condition_a << " vs " << t.condition_b << ": p=" << t.test.p_value
        << (t.test.significant ? " (significant)" : "") << '\n';
  }
  return kExitOk;
}

int cmd_report(const std::string& runs_file, const std::string& out_dir, bool dry_run, std::ostream& out) {
  if (!fs::exists(runs_file)) throw ValidationError("run file not found: " + runs_file);
  const auto runs = read_runs_jsonl(runs_file);
  if (runs.empty()) throw ValidationError(runs_file + " holds no runs");
  if (dry_run) {
    out << "dry run: " << runs.size() << " runs\n";
    return kExitOk;
  }
  const SweepResult result = summarize_runs(runs);
  const fs::path dir = out_dir.empty() ? fs::path(runs_file).parent_path() : fs::path(out_dir);
  write_sweep_csv(dir / "sweep.csv", result.runs);
  write_curve_csv(dir / "curve.csv", result.curves);
  write_ttest_csv(dir / "ttest.csv", result.tests);
  write_curve_svg(dir / "ser_curve.svg", result.curves, result.tests);
  for (const auto& r : runs) {
    out << r.condition << " " << r.target << " n=" << r.train_size << " seed=" << r.seed << ": ICA " << r.test.ica
        << " EF1 " << r.test.ef1 << " SER " << r.test.ser << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spoken language understanding: joint intent and entity models with transfer learning", "slu"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  CommonFlags f;
  auto* pretrain = app.add_subcommand("pretrain-lm", "train the bidirectional language model");
  add_common(pretrain, f, true);
  std::string resume;
  pretrain->add_option("--resume", resume, "continue from an LM checkpoint");

  auto* train = app.add_subcommand("train", "train one condition and evaluate it on test");
  add_common(train, f, true);

  auto* eval = app.add_subcommand("eval", "evaluate a model checkpoint on a split");
  add_common(eval, f, true);
  std::string model_path;
  std::string split = "test";
  eval->add_option("--model", model_path, "model checkpoint")->required();
  eval->add_option("--split", split, "dev or test")->check(CLI::IsMember({"dev", "test"}));

  auto* sweep = app.add_subcommand("sweep", "low-resource learning curves over sizes and seeds");
  add_common(sweep, f, true);

  auto* report = app.add_subcommand("report", "rebuild summary tables and plots from run records");
  std::string runs_file;
  report->add_option("--runs", runs_file, "runs.jsonl from a sweep")->required();
  report->add_option("--out", f.out, "output directory (default: next to --runs)");
  report->add_flag("--dry-run", f.dry_run, "validate inputs and exit");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*pretrain) return cmd_pretrain_lm(f, resume, out);
    if (*train) return cmd_train(f, out);
    if (*eval) return cmd_eval(f, model_path, split, out);
    if (*sweep) return cmd_sweep(f, out);
    if (*report) return cmd_report(runs_file, f.out, f.dry_run, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sluxfer
