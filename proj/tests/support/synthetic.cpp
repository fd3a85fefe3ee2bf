#include "synthetic.hpp"

#include <random>
#include <sstream>

namespace sluxfer::testing {

namespace {

struct Template {
  std::string intent;
  std::string text;  // slots written as {type}
};

struct Filler {
  std::string type;
  std::vector<std::string> values;
};

const std::vector<Template>& templates(Domain d) {
  static const std::vector<Template> travel = {
      {"book_flight", "book a flight from {city} to {city} {date}"},
      {"book_flight", "i want to fly to {city} {date}"},
      {"book_flight", "find me a ticket to {city}"},
      {"book_flight", "show flights from {city} to {city}"},
      {"get_weather", "what is the weather in {city} {date}"},
      {"get_weather", "will it rain in {city} {date}"},
      {"get_weather", "weather forecast for {city}"},
      {"get_fare", "how much is a ticket from {city} to {city}"},
      {"get_fare", "what is the cheapest fare to {city} {date}"},
      {"get_fare", "show me fares to {city}"},
  };
  static const std::vector<Template> media = {
      {"play_music", "play {song} by {artist}"},
      {"play_music", "put on some {artist}"},
      {"play_music", "i want to hear {song}"},
      {"find_movie", "show me {movie} {date}"},
      {"find_movie", "when is {movie} playing in {city}"},
      {"find_movie", "find tickets for {movie}"},
      {"book_table", "book a table at {restaurant} {date}"},
      {"book_table", "reserve {restaurant} in {city}"},
      {"book_table", "i want a table at {restaurant} for {count}"},
  };
  return d == Domain::kTravel ? travel : media;
}

const std::vector<Filler>& fillers() {
  static const std::vector<Filler> f = {
      {"city", {"boston", "denver", "new york", "san francisco", "dallas", "seattle", "atlanta", "las vegas"}},
      {"date", {"today", "tomorrow", "on monday", "next friday", "this weekend", "on june first"}},
      {"song", {"yellow submarine", "hey jude", "imagine", "thriller", "bad guy"}},
      {"artist", {"the beatles", "madonna", "queen", "adele", "miles davis"}},
      {"movie", {"the matrix", "up", "jaws", "star wars", "inception"}},
      {"restaurant", {"the olive garden", "nobu", "chez panisse", "joe's diner"}},
      {"count", {"two", "four people", "six"}},
  };
  return f;
}

const std::vector<std::string>& values_of(const std::string& type) {
  for (const auto& f : fillers()) {
    if (f.type == type) return f.values;
  }
  static const std::vector<std::string> none;
  return none;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

std::vector<Utterance> generate_utterances(Domain domain, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + (domain == Domain::kTravel ? 1 : 2));
  const auto& ts = templates(domain);
  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& t = ts[rng() % ts.size()];
    Utterance u;
    u.intent = t.intent;
    for (const auto& piece : split_words(t.text)) {
      if (piece.size() > 2 && piece.front() == '{' && piece.back() == '}') {
        const std::string type = piece.substr(1, piece.size() - 2);
        const auto& vals = values_of(type);
        const auto words = split_words(vals[rng() % vals.size()]);
        for (std::size_t k = 0; k < words.size(); ++k) {
          u.tokens.push_back(words[k]);
          u.bio_tags.push_back((k == 0 ? "B-" : "I-") + type);
        }
      } else {
        u.tokens.push_back(piece);
        u.bio_tags.push_back("O");
      }
    }
    out.push_back(std::move(u));
  }
  return out;
}

Dataset make_dataset(Domain domain, std::size_t train, std::size_t dev, std::size_t test, std::uint64_t seed) {
  Dataset d;
  d.name = domain == Domain::kTravel ? "travel" : "media";
  d.train = generate_utterances(domain, train, seed);
  d.dev = generate_utterances(domain, dev, seed + 1000);
  d.test = generate_utterances(domain, test, seed + 2000);
  d.label_space = LabelSpace::from_utterances({&d.train, &d.dev, &d.test});
  return d;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_split(dir / "train.tsv", dataset.train, DataFormat::kConllTsv);
  write_split(dir / "dev.tsv", dataset.dev, DataFormat::kConllTsv);
  write_split(dir / "test.tsv", dataset.test, DataFormat::kConllTsv);
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sluxfer-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sluxfer::testing
