#include "sluxfer/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sluxfer/error.hpp"
#include "sluxfer/tensor.hpp"

namespace sluxfer {

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

void validate_against(const std::vector<Utterance>& split, const LabelSpace& space,
                      const std::string& split_name) {
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& u = split[i];
    if (!space.intent_index(u.intent)) {
      throw ValidationError(split_name + " utterance " + std::to_string(i) + ": intent '" +
                            u.intent + "' is not in the label space");
    }
    for (const auto& tag : u.bio_tags) {
      if (!space.tag_index(tag)) {
        throw ValidationError(split_name + " utterance " + std::to_string(i) + ": tag '" + tag +
                              "' is not in the label space");
      }
    }
  }
}

std::vector<Utterance> load_conll(const std::filesystem::path& file, std::size_t& repairs) {
  std::ifstream in(file);
  if (!in) throw FormatError(file.string(), 0, "cannot open file");
  std::vector<Utterance> out;
  Utterance cur;
  bool have_intent = false;
  std::size_t start_line = 0;
  auto flush = [&](std::size_t line_no) {
    if (!have_intent && cur.tokens.empty()) return;
    if (!have_intent) throw FormatError(file.string(), start_line, "utterance without '# intent:' header");
    if (cur.tokens.empty()) throw FormatError(file.string(), line_no, "utterance without tokens");
    repairs += repair_bio(cur.bio_tags);
    out.push_back(std::move(cur));
    cur = Utterance{};
    have_intent = false;
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) {
      flush(line_no);
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kKey = "# intent:";
      if (line.substr(0, kKey.size()) != kKey) continue;  // other comments are ignored
      if (have_intent || !cur.tokens.empty()) flush(line_no);
      cur.intent = std::string(trim(line.substr(kKey.size())));
      if (cur.intent.empty()) throw FormatError(file.string(), line_no, "empty intent label");
      have_intent = true;
      start_line = line_no;
      continue;
    }
    if (!have_intent) throw FormatError(file.string(), line_no, "token line before '# intent:' header");
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw FormatError(file.string(), line_no, "expected '<token>\\t<tag>'");
    const std::string token = lowercase(trim(line.substr(0, tab)));
    std::string_view rest = trim(line.substr(tab + 1));
    // Extra columns (predictions) are tolerated; the gold tag is the first.
    const auto tab2 = rest.find('\t');
    const std::string tag(trim(tab2 == std::string_view::npos ? rest : rest.substr(0, tab2)));
    if (token.empty() || token.find(' ') != std::string::npos) {
      throw FormatError(file.string(), line_no, "token must be a single non-empty word");
    }
    if (!split_tag(tag)) throw FormatError(file.string(), line_no, "malformed BIO tag '" + tag + "'");
    cur.tokens.push_back(token);
    cur.bio_tags.push_back(tag);
  }
  flush(line_no + 1);
  return out;
}

std::vector<Utterance> load_json(const std::filesystem::path& file, std::size_t& repairs) {
  std::ifstream in(file);
  if (!in) throw FormatError(file.string(), 0, "cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offsets are the closest thing to a line number nlohmann reports
    throw FormatError(file.string(), 0, std::string("json parse error: ") + e.what());
  }
  if (!doc.is_array()) throw FormatError(file.string(), 0, "expected a top-level array");
  std::vector<Utterance> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    try {
      Utterance u;
      for (const auto& t : item.at("tokens")) u.tokens.push_back(lowercase(t.get<std::string>()));
      u.bio_tags = item.at("tags").get<std::vector<std::string>>();
      u.intent = item.at("intent").get<std::string>();
      if (u.tokens.empty()) throw FormatError(file.string(), i, "utterance without tokens");
      if (u.tokens.size() != u.bio_tags.size()) {
        throw FormatError(file.string(), i, "tokens and tags differ in length");
      }
      for (const auto& tag : u.bio_tags) {
        if (!split_tag(tag)) throw FormatError(file.string(), i, "malformed BIO tag '" + tag + "'");
      }
      repairs += repair_bio(u.bio_tags);
      out.push_back(std::move(u));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file.string(), i, std::string("record ") + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path split_path(const std::filesystem::path& dir, const char* split, DataFormat format) {
  return dir / (std::string(split) + (format == DataFormat::kJson ? ".json" : ".tsv"));
}

}  // namespace

// ---------------------------------------------------------------------------

LabelSpace::LabelSpace(std::vector<std::string> intents, std::vector<std::string> entity_types)
    : intents_(sorted_unique(std::move(intents))), entity_types_(sorted_unique(std::move(entity_types))) {
  if (intents_.empty()) throw ValidationError("label space needs at least one intent");
  for (std::size_t i = 0; i < intents_.size(); ++i) intent_ids_.emplace(intents_[i], static_cast<int>(i));
  tags_.push_back("O");
  for (const auto& e : entity_types_) {
    tags_.push_back("B-" + e);
    tags_.push_back("I-" + e);
  }
  for (std::size_t i = 0; i < tags_.size(); ++i) tag_ids_.emplace(tags_[i], static_cast<int>(i));
}

LabelSpace LabelSpace::from_utterances(const std::vector<const std::vector<Utterance>*>& splits) {
  std::vector<std::string> intents;
  std::vector<std::string> types;
  for (const auto* split : splits) {
    for (const auto& u : *split) {
      intents.push_back(u.intent);
      for (const auto& tag : u.bio_tags) {
        auto parts = split_tag(tag);
        if (parts && parts->first != 'O') types.push_back(parts->second);
      }
    }
  }
  return LabelSpace(std::move(intents), std::move(types));
}

std::optional<int> LabelSpace::intent_index(std::string_view intent) const {
  auto it = intent_ids_.find(std::string(intent));
  if (it == intent_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> LabelSpace::tag_index(std::string_view tag) const {
  auto it = tag_ids_.find(std::string(tag));
  if (it == tag_ids_.end()) return std::nullopt;
  return it->second;
}

bool LabelSpace::contains_entity(std::string_view type) const {
  return std::binary_search(entity_types_.begin(), entity_types_.end(), type);
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "conll-tsv" || name == "tsv" || name == "conll") return DataFormat::kConllTsv;
  if (name == "json") return DataFormat::kJson;
  throw ValidationError("unknown data format '" + std::string(name) + "' (expected conll-tsv or json)");
}

std::string_view data_format_name(DataFormat format) {
  return format == DataFormat::kJson ? "json" : "conll-tsv";
}

std::optional<std::pair<char, std::string>> split_tag(std::string_view tag) {
  if (tag == "O") return std::make_pair('O', std::string());
  if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) return std::nullopt;
  return std::make_pair(tag[0], std::string(tag.substr(2)));
}

bool is_valid_bio(const std::vector<std::string>& tags) {
  std::string prev_type;  // empty means O / start
  for (const auto& tag : tags) {
    auto parts = split_tag(tag);
    if (!parts) return false;
    if (parts->first == 'I' && parts->second != prev_type) return false;
    prev_type = parts->second;
  }
  return true;
}

std::size_t repair_bio(std::vector<std::string>& tags) {
  std::size_t changed = 0;
  std::string prev_type;
  for (auto& tag : tags) {
    auto parts = split_tag(tag);
    if (!parts) {
      prev_type.clear();
      continue;
    }
    if (parts->first == 'I' && parts->second != prev_type) {
      tag = "B-" + parts->second;
      ++changed;
    }
    prev_type = parts->second;
  }
  return changed;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(lowercase(line.substr(i, j - i)));
    i = j;
  }
  return out;
}

std::vector<Utterance> load_split(const std::filesystem::path& file, DataFormat format, std::size_t* repairs) {
  std::size_t n = 0;
  auto out = format == DataFormat::kJson ? load_json(file, n) : load_conll(file, n);
  if (repairs) *repairs += n;
  return out;
}

Dataset load_labeled(const std::filesystem::path& dir, DataFormat format,
                     const std::optional<LabelSpace>& label_space) {
  Dataset ds;
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();
  ds.train = load_split(split_path(dir, "train", format), format, &ds.bio_repairs);
  ds.dev = load_split(split_path(dir, "dev", format), format, &ds.bio_repairs);
  ds.test = load_split(split_path(dir, "test", format), format, &ds.bio_repairs);
  if (label_space) {
    validate_against(ds.train, *label_space, "train");
    validate_against(ds.dev, *label_space, "dev");
    validate_against(ds.test, *label_space, "test");
    ds.label_space = *label_space;
  } else {
    ds.label_space = LabelSpace::from_utterances({&ds.train, &ds.dev, &ds.test});
  }
  return ds;
}

namespace {

void add_dedup(UnlabeledCorpus& corpus, std::unordered_set<std::string>& seen,
               std::vector<std::string> tokens) {
  if (tokens.empty()) return;
  if (!seen.insert(join_tokens(tokens)).second) return;
  corpus.token_count += tokens.size();
  corpus.sentences.push_back(std::move(tokens));
}

}  // namespace

UnlabeledCorpus load_unlabeled(const std::vector<std::filesystem::path>& files) {
  UnlabeledCorpus corpus;
  std::unordered_set<std::string> seen;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw FormatError(file.string(), 0, "cannot open file");
    std::string line;
    while (std::getline(in, line)) add_dedup(corpus, seen, tokenize(line));
  }
  if (corpus.sentences.empty()) throw ValidationError("unlabeled corpus is empty after pooling");
  return corpus;
}

UnlabeledCorpus corpus_from_utterances(const std::vector<const std::vector<Utterance>*>& splits) {
  UnlabeledCorpus corpus;
  std::unordered_set<std::string> seen;
  for (const auto* split : splits) {
    for (const auto& u : *split) add_dedup(corpus, seen, u.tokens);
  }
  if (corpus.sentences.empty()) throw ValidationError("unlabeled corpus is empty after pooling");
  return corpus;
}

void write_split(const std::filesystem::path& file, const std::vector<Utterance>& utterances,
                 DataFormat format) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  if (format == DataFormat::kJson) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& u : utterances) {
      doc.push_back({{"tokens", u.tokens}, {"tags", u.bio_tags}, {"intent", u.intent}});
    }
    out << doc.dump(1) << '\n';
    return;
  }
  for (const auto& u : utterances) {
    out << "# intent: " << u.intent << '\n';
    for (std::size_t i = 0; i < u.tokens.size(); ++i) out << u.tokens[i] << '\t' << u.bio_tags[i] << '\n';
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  words_ = {"<pad>", "<unk>", "<s>", "</s>"};
  for (const auto& w : words) {
    if (ids_.count(w) || w == "<pad>" || w == "<unk>" || w == "<s>" || w == "</s>") {
      throw ValidationError("duplicate or reserved vocabulary entry '" + w + "'");
    }
    words_.push_back(w);
    ids_.emplace(w, static_cast<int>(words_.size() - 1));
  }
  for (int i = 0; i < kNumSpecial; ++i) ids_.emplace(words_[static_cast<std::size_t>(i)], i);
}

int Vocabulary::index(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences, int min_count) {
  if (min_count < 1) throw ValidationError("min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& s : sentences) {
    for (const auto& w : s) ++counts[w];
  }
  std::vector<std::pair<std::string, long>> entries;
  for (auto& [w, c] : counts) {
    if (c >= min_count && w != "<pad>" && w != "<unk>" && w != "<s>" && w != "</s>") entries.emplace_back(w, c);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(entries.size());
  for (auto& e : entries) words.push_back(std::move(e.first));
  return Vocabulary(words);
}

Vocabulary build_vocab(const std::vector<Utterance>& utterances, int min_count) {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(utterances.size());
  for (const auto& u : utterances) sentences.push_back(u.tokens);
  return build_vocab(sentences, min_count);
}

Vocabulary build_vocab(const Dataset& dataset, int min_count) { return build_vocab(dataset.train, min_count); }

Vocabulary build_vocab(const UnlabeledCorpus& corpus, int min_count) {
  return build_vocab(corpus.sentences, min_count);
}

Dataset sample_low_resource(const Dataset& dataset, std::size_t size, std::uint64_t seed) {
  if (size > dataset.train.size()) {
    throw ValidationError("requested sample of " + std::to_string(size) + " but train split has " +
                          std::to_string(dataset.train.size()) + " utterances");
  }
  std::vector<std::size_t> idx(dataset.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, size, 0x5a3d));
  portable_shuffle(idx, rng);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());

  Dataset out;
  out.name = dataset.name + "-n" + std::to_string(size) + "-s" + std::to_string(seed);
  out.dev = dataset.dev;
  out.test = dataset.test;
  out.label_space = dataset.label_space;
  out.bio_repairs = dataset.bio_repairs;
  out.train.reserve(size);
  for (auto i : idx) out.train.push_back(dataset.train[i]);
  return out;
}

}  // namespace sluxfer
