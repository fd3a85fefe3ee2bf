#include <benchmark/benchmark.h>

#include <random>

#include "sluxfer/lm.hpp"
#include "sluxfer/lstm.hpp"
#include "sluxfer/model.hpp"
#include "synthetic.hpp"

namespace {

using namespace sluxfer;

// args: input dim, hidden per direction, length
void BM_BiLstmForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  BiLstm layer(state.range(0), state.range(1));
  layer.initialize(rng);
  BiLstm grad(state.range(0), state.range(1));
  const Matrix x = Matrix::Random(state.range(0), state.range(2));
  for (auto _ : state) {
    const auto tr = bilstm_forward(layer, x);
    benchmark::DoNotOptimize(bilstm_backward(layer, tr, tr.output, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(2));
}
BENCHMARK(BM_BiLstmForwardBackward)->Args({200, 100, 12})->Args({400, 100, 12})->Args({1024, 100, 12});

// One SLU update on a 12-token utterance, per embedding mode.
void BM_SluTrainStep(benchmark::State& state) {
  const auto mode = static_cast<EmbeddingMode>(state.range(0));
  const Dataset data = testing::make_dataset(testing::Domain::kTravel, 50, 5, 5, 3);
  ModelConfig cfg;
  cfg.embedding = EmbeddingConfig::for_mode(mode, 200);
  std::shared_ptr<LanguageModel> lm;
  const Vocabulary vocab = build_vocab(data, 1);
  if (mode == EmbeddingMode::kElmo) {
    lm = std::make_shared<LanguageModel>(LMConfig::elmol(), vocab, CharVocabulary::from_words(vocab.words()));
    lm->initialize(1);
  }
  SluModel model(cfg, vocab, data.label_space, 1);
  if (lm) model.set_language_model(lm);
  const Utterance& u = data.train.front();
  const auto enc = std::make_shared<const EncodedUtterance>(model.encode(u.tokens));
  const int intent = model.intent_index(u.intent);
  const auto tags = model.tag_indices(u.bio_tags);
  SluParams grad = model.params().zeros_like();
  for (auto _ : state) {
    const auto tr = model.forward(enc, {true, 1});
    benchmark::DoNotOptimize(model.backward(tr, intent, tags, grad));
  }
  state.SetLabel(std::string(embedding_mode_name(mode)));
}
BENCHMARK(BM_SluTrainStep)
    ->Arg(static_cast<int>(EmbeddingMode::kNoUT))
    ->Arg(static_cast<int>(EmbeddingMode::kElmo))
    ->Arg(static_cast<int>(EmbeddingMode::kElmoL));

void BM_LanguageModelSentence(benchmark::State& state) {
  const auto utts = testing::generate_utterances(testing::Domain::kMedia, 100, 1);
  const UnlabeledCorpus text = corpus_from_utterances({&utts});
  const Vocabulary vocab = build_vocab(text, 1);
  LanguageModel lm(LMConfig::elmol(), vocab, CharVocabulary::from_words(vocab.words()));
  lm.initialize(1);
  LMParams grad = lm.params().zeros_like();
  std::mt19937_64 rng(1);
  const auto& sentence = text.sentences.front();
  for (auto _ : state) benchmark::DoNotOptimize(lm.sentence_backward(sentence, 1.0, 0.1, rng, grad).forward);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(sentence.size()));
}
BENCHMARK(BM_LanguageModelSentence);

}  // namespace
