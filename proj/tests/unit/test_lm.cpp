#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "gradcheck.hpp"
#include "sluxfer/error.hpp"
#include "sluxfer/lm.hpp"
#include "synthetic.hpp"

namespace sluxfer {
namespace {

LMConfig tiny_config() {
  LMConfig c;
  c.hidden = 8;
  c.word_dim = 6;
  c.char_dim = 4;
  c.char_filters = {{1, 3}, {2, 3}, {3, 2}};
  c.batch_size = 8;
  c.epochs = 2;
  c.learning_rate = 0.01;
  c.dropout = 0.0;
  c.seed = 3;
  return c;
}

UnlabeledCorpus text(std::size_t n, std::uint64_t seed) {
  const auto utts = testing::generate_utterances(testing::Domain::kTravel, n, seed);
  return corpus_from_utterances({&utts});
}

LanguageModel untrained(const UnlabeledCorpus& corpus, const LMConfig& cfg) {
  Vocabulary vocab = build_vocab(corpus, 1);
  CharVocabulary chars = CharVocabulary::from_words(vocab.words());
  LanguageModel lm(cfg, vocab, chars);
  lm.initialize(cfg.seed);
  return lm;
}

TEST(LanguageModel, PresetDimensions) {
  const auto light = LMConfig::elmol();
  EXPECT_EQ(light.layers, 1);
  EXPECT_EQ(light.token_dim(), 200);
  EXPECT_EQ(light.contextual_dim(), 200);
  EXPECT_EQ(light.batch_size, 32);
  EXPECT_EQ(light.epochs, 50);
  const auto desk = LMConfig::elmo_desk();
  EXPECT_EQ(desk.layers, 2);
  EXPECT_EQ(desk.token_dim(), 512);
  EXPECT_EQ(desk.contextual_dim(), 1024);
}

TEST(LanguageModel, UntrainedPerplexityEqualsVocabularySize) {
  const auto corpus = text(60, 1);
  const auto lm = untrained(corpus, tiny_config());
  const auto r = perplexity(lm, corpus);
  EXPECT_NEAR(r.perplexity / static_cast<double>(lm.vocab().size()), 1.0, 1e-12);
  EXPECT_NEAR(r.forward_cross_entropy, r.backward_cross_entropy, 1e-12);
}

TEST(LanguageModel, GradientsMatchFiniteDifferences) {
  const auto corpus = text(10, 2);
  auto lm = untrained(corpus, tiny_config());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < lm.params().output.weight.size(); ++i) lm.params().output.weight.data()[i] = n(rng);
  for (auto& l : lm.params().forward_layers) l.bias.setConstant(0.1);
  const auto& sentence = corpus.sentences.front();
  LMParams grad = lm.params().zeros_like();
  std::mt19937_64 unused(0);
  lm.sentence_backward(sentence, 1.0, 0.0, unused, grad);
  auto loss = [&] {
    const auto l = lm.sentence_loss(sentence);
    return l.forward + l.backward;
  };
  TensorList params;
  lm.params().collect(params);
  ConstTensorList grads;
  std::as_const(grad).collect(grads);
  // word embeddings: only touched columns carry signal, stride keeps runtime low
  const auto r = testing::check_gradients(params, grads, loss, 1e-4, 3, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

// Add-one unigram model over the training targets, scored like the LM.
double unigram_perplexity(const UnlabeledCorpus& train, const UnlabeledCorpus& held, std::size_t vocab_size) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& s : train.sentences) {
    for (const auto& w : s) counts[w] += 1.0, total += 1.0;
    counts["<boundary>"] += 1.0, total += 1.0;
  }
  double ce = 0.0;
  std::size_t n = 0;
  for (const auto& s : held.sentences) {
    for (const auto& w : s) {
      ce -= std::log((counts[w] + 1.0) / (total + static_cast<double>(vocab_size)));
      ++n;
    }
    ce -= std::log((counts["<boundary>"] + 1.0) / (total + static_cast<double>(vocab_size)));
    ++n;
  }
  return std::exp(ce / static_cast<double>(n));
}

TEST(LanguageModel, TrainingBeatsUntrainedAndUnigram) {
  const auto corpus = text(300, 5);
  const auto [train, held] = split_heldout(corpus, 0.2, 1);
  LMConfig cfg = tiny_config();
  cfg.hidden = 16;
  cfg.epochs = 6;
  std::vector<double> seen;
  LMTrainOptions opts;
  opts.on_epoch = [&](int epoch, double, double held_ppl) {
    EXPECT_EQ(epoch, static_cast<int>(seen.size()) + 1);
    seen.push_back(held_ppl);
  };
  const auto lm = train_bilm(train, cfg, held, opts);
  const double start = static_cast<double>(lm.vocab().size());
  const double trained = perplexity(lm, held).perplexity;
  EXPECT_EQ(seen.size(), 6u);
  EXPECT_EQ(lm.epochs_trained, 6);
  EXPECT_LT(trained, 0.5 * start);
  EXPECT_LT(trained, unigram_perplexity(train, held, lm.vocab().size()));
  EXPECT_DOUBLE_EQ(trained, lm.best_heldout_perplexity);
}

TEST(LanguageModel, DeterministicAcrossThreadCounts) {
  const auto corpus = text(80, 6);
  const auto [train, held] = split_heldout(corpus, 0.1, 2);
  LMConfig one = tiny_config();
  one.dropout = 0.2;
  LMConfig three = one;
  three.threads = 3;
  const auto a = train_bilm(train, one, held);
  const auto b = train_bilm(train, three, held);
  ConstTensorList la, lb;
  a.params().collect(la);
  b.params().collect(lb);
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_TRUE(*la[i].value == *lb[i].value) << la[i].name;
}

TEST(LanguageModel, ResumeContinuesEpochNumbering) {
  const auto corpus = text(60, 7);
  const auto [train, held] = split_heldout(corpus, 0.1, 3);
  LMConfig cfg = tiny_config();
  const auto first = train_bilm(train, cfg, held);
  EXPECT_EQ(first.epochs_trained, 2);
  const auto dir = testing::scratch_dir("lm-resume");
  save_language_model(first, dir / "lm.ckpt");
  const auto loaded = load_language_model(dir / "lm.ckpt");
  cfg.epochs = 4;
  std::vector<int> epochs;
  LMTrainOptions opts;
  opts.resume_from = &loaded;
  opts.on_epoch = [&](int e, double, double) { epochs.push_back(e); };
  const auto second = train_bilm(train, cfg, held, opts);
  EXPECT_EQ(epochs, (std::vector<int>{3, 4}));
  EXPECT_EQ(second.epochs_trained, 4);
  EXPECT_EQ(second.heldout_history.size(), 4u);
}

TEST(LanguageModel, CheckpointRoundTrip) {
  const auto corpus = text(30, 8);
  const auto [train, held] = split_heldout(corpus, 0.2, 4);
  const auto lm = train_bilm(train, tiny_config(), held);
  const auto dir = testing::scratch_dir("lm-ckpt");
  save_language_model(lm, dir / "lm.ckpt");
  const auto back = load_language_model(dir / "lm.ckpt");
  EXPECT_EQ(back.vocab(), lm.vocab());
  EXPECT_EQ(back.chars(), lm.chars());
  EXPECT_EQ(perplexity(back, held).perplexity, perplexity(lm, held).perplexity);
  const auto s1 = lm.contextual_states(held.sentences.front());
  const auto s2 = back.contextual_states(held.sentences.front());
  EXPECT_TRUE(s1.layers.front() == s2.layers.front());
  EXPECT_EQ(back.epochs_trained, lm.epochs_trained);
}

TEST(LanguageModel, ExportRequiresSingleLayer) {
  const auto corpus = text(10, 9);
  LMConfig cfg = tiny_config();
  cfg.layers = 2;
  const auto lm = untrained(corpus, cfg);
  EXPECT_THROW(export_shared_layer(lm, lm.vocab()), ValidationError);
  EXPECT_EQ(lm.contextual_states(corpus.sentences.front()).layers.size(), 2u);
}

TEST(LanguageModel, Errors) {
  LMConfig cfg = tiny_config();
  cfg.layers = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  UnlabeledCorpus one;
  one.sentences = {{"a"}};
  EXPECT_THROW(split_heldout(one, 0.5, 1), ValidationError);
  const auto dir = testing::scratch_dir("lm-bad");
  {
    std::ofstream o(dir / "junk.ckpt");
    o << "not a checkpoint";
  }
  EXPECT_THROW(load_language_model(dir / "junk.ckpt"), FormatError);
}

}  // namespace
}  // namespace sluxfer
