#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sluxfer {

// One labeled utterance: tokens, BIO entity tags (one per token) and an intent.
struct Utterance {
  std::vector<std::string> tokens;
  std::vector<std::string> bio_tags;
  std::string intent;

  bool operator==(const Utterance&) const = default;
};

// Intents and entity types, each kept sorted so label indices are
// reproducible across runs and machines.
class LabelSpace {
 public:
  LabelSpace() = default;
  LabelSpace(std::vector<std::string> intents, std::vector<std::string> entity_types);

  // Collects every intent and entity type appearing in `utterances`.
  static LabelSpace from_utterances(const std::vector<const std::vector<Utterance>*>& splits);

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& entity_types() const { return entity_types_; }

  std::size_t num_intents() const { return intents_.size(); }
  // Size of the BIO tag alphabet: O plus B-/I- per entity type.
  std::size_t num_tags() const { return 1 + 2 * entity_types_.size(); }

  std::optional<int> intent_index(std::string_view intent) const;
  std::optional<int> tag_index(std::string_view tag) const;
  const std::string& tag_name(int index) const { return tags_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& tags() const { return tags_; }

  bool contains_entity(std::string_view type) const;

  bool operator==(const LabelSpace& other) const {
    return intents_ == other.intents_ && entity_types_ == other.entity_types_;
  }

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> entity_types_;
  std::vector<std::string> tags_;  // O, B-x, I-x, B-y, I-y, ...
  std::unordered_map<std::string, int> intent_ids_;
  std::unordered_map<std::string, int> tag_ids_;
};

struct Dataset {
  std::string name;
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
  LabelSpace label_space;
  // Orphan I- tags converted to B- while loading.
  std::size_t bio_repairs = 0;
};

struct UnlabeledCorpus {
  std::vector<std::vector<std::string>> sentences;
  std::size_t token_count = 0;
};

enum class DataFormat { kConllTsv, kJson };

DataFormat parse_data_format(std::string_view name);
std::string_view data_format_name(DataFormat format);

// --- BIO helpers ---------------------------------------------------------

// Splits a tag into (prefix, type): "B-Dish" -> ('B', "Dish"), "O" -> ('O', "").
// Returns nullopt for strings that are not O / B-x / I-x.
std::optional<std::pair<char, std::string>> split_tag(std::string_view tag);

// True when every tag is well formed and no I-x follows O or a different type.
bool is_valid_bio(const std::vector<std::string>& tags);

// Converts every orphan I-x into B-x. Returns the number of tags changed.
std::size_t repair_bio(std::vector<std::string>& tags);

// --- tokenization --------------------------------------------------------

// Whitespace split with ASCII lowercasing.
std::vector<std::string> tokenize(std::string_view line);
std::string lowercase(std::string_view s);

// --- loading -------------------------------------------------------------

// Reads one split file. Tags are repaired in place; the number of repairs is
// added to *repairs when non-null.
std::vector<Utterance> load_split(const std::filesystem::path& file, DataFormat format,
                                  std::size_t* repairs = nullptr);

// Loads `<dir>/train.<ext>`, `dev.<ext>` and `test.<ext>` (ext is tsv or
// json). When `label_space` is given, every intent and entity type must be
// a member; otherwise the label space is collected from all three splits.
Dataset load_labeled(const std::filesystem::path& dir, DataFormat format,
                     const std::optional<LabelSpace>& label_space = std::nullopt);

// Pools one-sentence-per-line text files, tokenizes, drops empty lines and
// exact duplicate sentences (first occurrence wins).
UnlabeledCorpus load_unlabeled(const std::vector<std::filesystem::path>& files);

// Builds a corpus from the token sequences of labeled utterances (labels
// stripped), with the same dedup rule as load_unlabeled.
UnlabeledCorpus corpus_from_utterances(const std::vector<const std::vector<Utterance>*>& splits);

void write_split(const std::filesystem::path& file, const std::vector<Utterance>& utterances,
                 DataFormat format);

// --- vocabulary ----------------------------------------------------------

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumSpecial = 4;

  Vocabulary();
  // Specials first, then `words` in the given order.
  explicit Vocabulary(const std::vector<std::string>& words);

  int index(std::string_view word) const;  // kUnk when absent
  bool contains(std::string_view word) const;
  const std::string& word(int index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return words_.size(); }
  std::size_t num_regular() const { return words_.size() - kNumSpecial; }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

// Words with count >= min_count, ordered by frequency (descending) then
// lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences, int min_count);
Vocabulary build_vocab(const std::vector<Utterance>& utterances, int min_count);
Vocabulary build_vocab(const Dataset& dataset, int min_count);  // train split only
Vocabulary build_vocab(const UnlabeledCorpus& corpus, int min_count);

// --- sampling ------------------------------------------------------------

// Uniform sample of `size` training utterances without replacement; dev and
// test are copied unchanged. Deterministic in (dataset, size, seed).
Dataset sample_low_resource(const Dataset& dataset, std::size_t size, std::uint64_t seed);

}  // namespace sluxfer
