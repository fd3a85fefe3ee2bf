#include "sluxfer/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sluxfer/error.hpp"

namespace sluxfer {

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  return out;
}

std::string size_label(std::size_t size) { return size == 0 ? "full" : std::to_string(size); }

std::size_t size_key(std::size_t size) { return size == 0 ? SIZE_MAX : size; }

}  // namespace

void write_runs_jsonl(const std::filesystem::path& file, const std::vector<RunRecord>& runs) {
  auto out = open_out(file);
  for (const auto& r : runs) out << nlohmann::json(r).dump() << '\n';
}

std::vector<RunRecord> read_runs_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError(file.string(), 0, "cannot open file");
  std::vector<RunRecord> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      runs.push_back(nlohmann::json::parse(line).get<RunRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file.string(), line_no, e.what());
    }
  }
  return runs;
}

void write_sweep_csv(const std::filesystem::path& file, const std::vector<RunRecord>& runs) {
  auto out = open_out(file);
  out << "condition,size,seed,ica,ef1,ser\n";
  for (const auto& r : runs) {
    out << r.condition << ',' << r.train_size << ',' << r.seed << ',' << r.test.ica << ',' << r.test.ef1 << ','
        << r.test.ser << '\n';
  }
}

void write_curve_csv(const std::filesystem::path& file, const std::vector<CurvePoint>& curves) {
  auto out = open_out(file);
  out << "condition,size,runs,mean_ser,std_ser,mean_ica,mean_ef1\n";
  for (const auto& p : curves) {
    out << p.condition << ',' << size_label(p.size) << ',' << p.runs << ',' << p.mean_ser << ',' << p.std_ser << ','
        << p.mean_ica << ',' << p.mean_ef1 << '\n';
  }
}

void write_ttest_csv(const std::filesystem::path& file, const std::vector<PairTest>& tests) {
  auto out = open_out(file);
  out << "size,condition_a,condition_b,mean_ser_a,mean_ser_b,t,p_value,significant\n";
  for (const auto& t : tests) {
    out << size_label(t.size) << ',' << t.condition_a << ',' << t.condition_b << ',' << t.mean_a << ',' << t.mean_b
        << ',' << t.test.t << ',' << t.test.p_value << ',' << (t.test.significant ? "yes" : "no") << '\n';
  }
}

std::string render_curve_svg(const std::vector<CurvePoint>& curves, const std::vector<PairTest>& tests) {
  constexpr double kWidth = 720, kHeight = 440, kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  std::vector<std::size_t> sizes;
  std::vector<std::string> conditions;
  double y_max = 0.0;
  for (const auto& p : curves) {
    if (std::find(sizes.begin(), sizes.end(), p.size) == sizes.end()) sizes.push_back(p.size);
    if (std::find(conditions.begin(), conditions.end(), p.condition) == conditions.end()) {
      conditions.push_back(p.condition);
    }
    y_max = std::max(y_max, p.mean_ser + p.std_ser);
  }
  std::sort(sizes.begin(), sizes.end(), [](auto a, auto b) { return size_key(a) < size_key(b); });
  y_max = y_max <= 0.0 ? 1.0 : std::min(1.0, std::ceil(y_max * 10.0 + 0.5) / 10.0);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](std::size_t size) {
    const auto i = static_cast<double>(std::find(sizes.begin(), sizes.end(), size) - sizes.begin());
    return sizes.size() <= 1 ? kLeft + plot_w / 2 : kLeft + plot_w * i / static_cast<double>(sizes.size() - 1);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (1.0 - v / y_max); };

  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
    << kTop + plot_h << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = y_max * k / 5.0;
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    s << "<line x1=\"" << kLeft << "\" y1=\"" << y_of(v) << "\" x2=\"" << kLeft + plot_w << "\" y2=\"" << y_of(v)
      << "\" stroke=\"#ddd\"/>\n";
  }
  std::set<std::size_t> significant;
  for (const auto& t : tests) {
    if (t.test.significant) significant.insert(t.size);
  }
  for (auto size : sizes) {
    s << "<text class=\"xtick\" x=\"" << x_of(size) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">"
      << size_label(size) << (significant.count(size) ? "*" : "") << "</text>\n";
  }
  s << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
    << "\" text-anchor=\"middle\">training samples (* paired t-test p &lt; 0.05)</text>\n";
  s << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << kTop + plot_h / 2 << ")\">mean SER</text>\n";

  for (std::size_t c = 0; c < conditions.size(); ++c) {
    const char* color = kColors[c % std::size(kColors)];
    std::vector<CurvePoint> pts;
    for (const auto& p : curves) {
      if (p.condition == conditions[c]) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return size_key(a.size) < size_key(b.size); });
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) s << x_of(p.size) << ',' << y_of(p.mean_ser) << ' ';
    s << "\"/>\n";
    for (const auto& p : pts) {
      const double x = x_of(p.size);
      s << "<line x1=\"" << x << "\" y1=\"" << y_of(std::max(0.0, p.mean_ser - p.std_ser)) << "\" x2=\"" << x
        << "\" y2=\"" << y_of(p.mean_ser + p.std_ser) << "\" stroke=\"" << color << "\"/>\n";
      s << "<circle cx=\"" << x << "\" cy=\"" << y_of(p.mean_ser) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(c);
    s << "<line x1=\"" << kLeft + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + plot_w + 35 << "\" y2=\""
      << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kLeft + plot_w + 40 << "\" y=\"" << ly + 4 << "\">" << conditions[c] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_curve_svg(const std::filesystem::path& file, const std::vector<CurvePoint>& curves,
                     const std::vector<PairTest>& tests) {
  auto out = open_out(file);
  out << render_curve_svg(curves, tests);
}

SweepResult summarize_runs(const std::vector<RunRecord>& runs) {
  SweepResult result;
  result.runs = runs;
  std::vector<std::string> conditions;
  std::vector<std::size_t> sizes;
  std::map<std::pair<std::string, std::size_t>, std::map<std::uint64_t, const RunRecord*>> cells;
  for (const auto& r : runs) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) conditions.push_back(r.condition);
    if (std::find(sizes.begin(), sizes.end(), r.train_size) == sizes.end()) sizes.push_back(r.train_size);
    cells[{r.condition, r.train_size}][r.seed] = &r;
  }
  std::sort(sizes.begin(), sizes.end());
  for (const auto& c : conditions) {
    for (auto size : sizes) {
      const auto it = cells.find({c, size});
      if (it == cells.end()) continue;
      CurvePoint p;
      p.condition = c;
      p.size = size;
      for (const auto& [seed, r] : it->second) {
        p.mean_ser += r->test.ser;
        p.mean_ica += r->test.ica;
        p.mean_ef1 += r->test.ef1;
        ++p.runs;
      }
      const auto k = static_cast<double>(p.runs);
      p.mean_ser /= k;
      p.mean_ica /= k;
      p.mean_ef1 /= k;
      double ss = 0.0;
      for (const auto& [seed, r] : it->second) ss += (r->test.ser - p.mean_ser) * (r->test.ser - p.mean_ser);
      p.std_ser = p.runs > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
      result.curves.push_back(p);
    }
  }
  for (auto size : sizes) {
    for (std::size_t a = 0; a < conditions.size(); ++a) {
      for (std::size_t b = a + 1; b < conditions.size(); ++b) {
        const auto ia = cells.find({conditions[a], size});
        const auto ib = cells.find({conditions[b], size});
        if (ia == cells.end() || ib == cells.end()) continue;
        std::vector<double> sa, sb;
        for (const auto& [seed, r] : ia->second) {
          const auto jb = ib->second.find(seed);
          if (jb == ib->second.end()) continue;
          sa.push_back(r->test.ser);
          sb.push_back(jb->second->test.ser);
        }
        if (sa.size() < 2) continue;
        PairTest t;
        t.size = size;
        t.condition_a = conditions[a];
        t.condition_b = conditions[b];
        for (double v : sa) t.mean_a += v;
        for (double v : sb) t.mean_b += v;
        t.mean_a /= static_cast<double>(sa.size());
        t.mean_b /= static_cast<double>(sb.size());
        t.test = paired_significance(sa, sb);
        result.tests.push_back(t);
      }
    }
  }
  return result;
}

}  // namespace sluxfer
