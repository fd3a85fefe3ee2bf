#include "sluxfer/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "sluxfer/error.hpp"

namespace sluxfer {

std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  bool open = false;
  Span cur;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto parsed = split_tag(tags[i]);
    if (!parsed) throw ValidationError("malformed BIO tag '" + tags[i] + "'");
    const auto& [prefix, type] = *parsed;
    const bool continues = prefix == 'I' && open && cur.type == type;
    if (open && !continues) {
      cur.end = i;
      spans.push_back(cur);
      open = false;
    }
    if (prefix == 'O' || continues) continue;
    cur = Span{type, i, i};
    open = true;
  }
  if (open) {
    cur.end = tags.size();
    spans.push_back(cur);
  }
  return spans;
}

double SpanCounts::precision() const {
  return predicted == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(predicted);
}

double SpanCounts::recall() const {
  return gold == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(gold);
}

double SpanCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"ica", r.ica},
       {"ef1", r.ef1},
       {"ser", r.ser},
       {"utterances", r.utterances},
       {"intent_errors", r.intent_errors},
       {"sentence_errors", r.sentence_errors},
       {"gold_spans", r.spans.gold},
       {"predicted_spans", r.spans.predicted},
       {"matched_spans", r.spans.matched}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  r.ica = j.at("ica").get<double>();
  r.ef1 = j.at("ef1").get<double>();
  r.ser = j.at("ser").get<double>();
  r.utterances = j.value("utterances", std::size_t{0});
  r.intent_errors = j.value("intent_errors", std::size_t{0});
  r.sentence_errors = j.value("sentence_errors", std::size_t{0});
  r.spans.gold = j.value("gold_spans", std::size_t{0});
  r.spans.predicted = j.value("predicted_spans", std::size_t{0});
  r.spans.matched = j.value("matched_spans", std::size_t{0});
}

namespace {

void require_nonempty(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ValidationError("no utterances to evaluate");
}

void require_aligned(const EvalPair& p) {
  if (p.gold_tags.size() != p.pred_tags.size()) {
    throw ValidationError("tag sequences differ in length (" + std::to_string(p.gold_tags.size()) + " gold, " +
                          std::to_string(p.pred_tags.size()) + " predicted)");
  }
}

}  // namespace

double intent_accuracy(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  std::size_t correct = 0;
  for (const auto& p : pairs) correct += p.gold_intent == p.pred_intent;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

SpanCounts entity_counts(const std::vector<EvalPair>& pairs) {
  SpanCounts c;
  for (const auto& p : pairs) {
    require_aligned(p);
    const auto gold = extract_spans(p.gold_tags);
    const auto pred = extract_spans(p.pred_tags);
    const std::set<Span> gold_set(gold.begin(), gold.end());
    c.gold += gold.size();
    c.predicted += pred.size();
    for (const auto& s : pred) c.matched += gold_set.count(s);
  }
  return c;
}

double entity_f1(const std::vector<EvalPair>& pairs) { return entity_counts(pairs).f1(); }

double sentence_error_rate(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  std::size_t errors = 0;
  for (const auto& p : pairs) {
    require_aligned(p);
    errors += p.gold_intent != p.pred_intent || p.gold_tags != p.pred_tags;
  }
  return static_cast<double>(errors) / static_cast<double>(pairs.size());
}

MetricReport evaluate(const std::vector<EvalPair>& pairs) {
  require_nonempty(pairs);
  MetricReport r;
  r.utterances = pairs.size();
  for (const auto& p : pairs) {
    require_aligned(p);
    const bool intent_wrong = p.gold_intent != p.pred_intent;
    r.intent_errors += intent_wrong;
    r.sentence_errors += intent_wrong || p.gold_tags != p.pred_tags;
  }
  r.spans = entity_counts(pairs);
  const auto n = static_cast<double>(r.utterances);
  r.ica = static_cast<double>(r.utterances - r.intent_errors) / n;
  r.ser = static_cast<double>(r.sentence_errors) / n;
  r.ef1 = r.spans.f1();
  if (r.sentence_errors < r.intent_errors) throw std::logic_error("sentence errors below intent errors");
  return r;
}

Significance paired_significance(const std::vector<double>& a, const std::vector<double>& b, double alpha) {
  if (a.size() != b.size()) throw ValidationError("paired t-test needs equally many runs per condition");
  if (a.size() < 2) throw ValidationError("paired t-test needs at least two runs per condition");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  Significance s;
  if (sd == 0.0) {
    s.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    s.p_value = mean == 0.0 ? 1.0 : 0.0;
  } else {
    s.t = mean / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1.0);
    s.p_value = 2.0 * boost::math::cdf(dist, -std::abs(s.t));
  }
  s.significant = s.p_value < alpha;
  return s;
}

void write_predictions(const std::filesystem::path& file, const std::vector<EvalPair>& pairs,
                       const std::vector<std::vector<std::string>>& tokens) {
  if (pairs.size() != tokens.size()) throw ValidationError("one token list per prediction expected");
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    require_aligned(p);
    if (tokens[i].size() != p.gold_tags.size()) throw ValidationError("token count differs from tag count");
    out << "# intent: " << p.gold_intent << '\n' << "# predicted_intent: " << p.pred_intent << '\n';
    for (std::size_t t = 0; t < tokens[i].size(); ++t) {
      out << tokens[i][t] << '\t' << p.gold_tags[t] << '\t' << p.pred_tags[t] << '\n';
    }
    out << '\n';
  }
}

std::vector<EvalPair> read_predictions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError(file.string(), 0, "cannot open file");
  std::vector<EvalPair> out;
  EvalPair cur;
  bool open = false;
  auto flush = [&] {
    if (open) out.push_back(std::move(cur));
    cur = EvalPair{};
    open = false;
  };
  std::string line;
  std::size_t line_no = 0;
  constexpr std::string_view kGold = "# intent: ";
  constexpr std::string_view kPred = "# predicted_intent: ";
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.rfind(kGold, 0) == 0) {
      flush();
      cur.gold_intent = line.substr(kGold.size());
      open = true;
      continue;
    }
    if (line.rfind(kPred, 0) == 0) {
      cur.pred_intent = line.substr(kPred.size());
      continue;
    }
    if (line.front() == '#') continue;
    if (!open) throw FormatError(file.string(), line_no, "token line before '# intent:' header");
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError(file.string(), line_no, "expected '<token>\\t<gold>\\t<predicted>'");
    const auto t3 = line.find('\t', t2 + 1);
    cur.gold_tags.push_back(line.substr(t1 + 1, t2 - t1 - 1));
    cur.pred_tags.push_back(line.substr(t2 + 1, t3 == std::string::npos ? std::string::npos : t3 - t2 - 1));
  }
  flush();
  return out;
}

}  // namespace sluxfer
