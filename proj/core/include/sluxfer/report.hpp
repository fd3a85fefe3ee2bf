#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sluxfer/transfer.hpp"

namespace sluxfer {

// One JSON object per line.
void write_runs_jsonl(const std::filesystem::path& file, const std::vector<RunRecord>& runs);
std::vector<RunRecord> read_runs_jsonl(const std::filesystem::path& file);

// Header `condition,size,seed,ica,ef1,ser`, one row per run.
void write_sweep_csv(const std::filesystem::path& file, const std::vector<RunRecord>& runs);

// Header `condition,size,runs,mean_ser,std_ser,mean_ica,mean_ef1`.
void write_curve_csv(const std::filesystem::path& file, const std::vector<CurvePoint>& curves);

// Header `size,condition_a,condition_b,mean_ser_a,mean_ser_b,t,p_value,significant`.
void write_ttest_csv(const std::filesystem::path& file, const std::vector<PairTest>& tests);

// Mean SER against sample size, one polyline per condition with one-std
// error bars. The x axis carries exactly the sizes present in `curves`,
// evenly spaced; sizes with a significant pairwise test are starred.
std::string render_curve_svg(const std::vector<CurvePoint>& curves, const std::vector<PairTest>& tests);
void write_curve_svg(const std::filesystem::path& file, const std::vector<CurvePoint>& curves,
                     const std::vector<PairTest>& tests);

// Curves and tests recomputed from run records (for re-reporting saved sweeps).
SweepResult summarize_runs(const std::vector<RunRecord>& runs);

}  // namespace sluxfer
