#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sluxfer/corpus.hpp"

namespace sluxfer {

struct EvalPair {
  std::string gold_intent;
  std::vector<std::string> gold_tags;
  std::string pred_intent;
  std::vector<std::string> pred_tags;
};

struct Span {
  std::string type;
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  auto operator<=>(const Span&) const = default;
};

// CoNLL chunks: a span opens at B-X, or at I-X not continuing an X span.
std::vector<Span> extract_spans(const std::vector<std::string>& tags);

struct SpanCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t matched = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct MetricReport {
  double ica = 0.0;
  double ef1 = 0.0;
  double ser = 0.0;
  std::size_t utterances = 0;
  std::size_t intent_errors = 0;
  std::size_t sentence_errors = 0;
  SpanCounts spans;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

// Fraction of utterances with the right intent. Throws on empty input.
double intent_accuracy(const std::vector<EvalPair>& pairs);

// Micro-averaged exact-span F1. Zero denominators count as 0.
SpanCounts entity_counts(const std::vector<EvalPair>& pairs);
double entity_f1(const std::vector<EvalPair>& pairs);

// Fraction of utterances with a wrong intent or any wrong tag.
double sentence_error_rate(const std::vector<EvalPair>& pairs);

MetricReport evaluate(const std::vector<EvalPair>& pairs);

struct Significance {
  double t = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

// Two-sided paired t-test over per-seed scores; significant iff p < alpha.
Significance paired_significance(const std::vector<double>& a, const std::vector<double>& b, double alpha = 0.05);

// Prediction files: the CoNLL-TSV corpus layout with the predicted tag
// appended to every token line and a "# predicted_intent:" header.
void write_predictions(const std::filesystem::path& file, const std::vector<EvalPair>& pairs,
                       const std::vector<std::vector<std::string>>& tokens);
std::vector<EvalPair> read_predictions(const std::filesystem::path& file);

}  // namespace sluxfer
