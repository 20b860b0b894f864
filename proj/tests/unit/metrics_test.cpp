#include <gtest/gtest.h>

#include <cmath>

#include "../oracles/bigram.h"
#include "salsa/error.h"
#include "salsa/lm.h"
#include "salsa/metrics.h"

using namespace salsa;

TEST(Bleu, ClippedUnigramPrecision) {
  EXPECT_DOUBLE_EQ(bleu({{5, 5, 5, 5}}, {{5, 6}}, 1), 0.25);
}

TEST(Bleu, BrevityPenalty) {
  EXPECT_NEAR(bleu({{5, 6}}, {{5, 6, 7, 8}}, 1), std::exp(1.0 - 2.0), 1e-15);
}

TEST(Bleu, InvariantToReferenceOrder) {
  const std::vector<Sentence> hyps{{4, 5, 6, 7}, {5, 6}};
  const std::vector<Sentence> refs{{4, 5, 6}, {6, 5, 4, 7, 7}, {5, 6, 9}};
  const std::vector<Sentence> shuffled{refs[2], refs[0], refs[1]};
  EXPECT_EQ(bleu(hyps, refs, 4), bleu(hyps, shuffled, 4));
}

TEST(Bleu, RejectsBadInput) {
  EXPECT_THROW(bleu({}, {{4}}, 2), InputError);
  EXPECT_THROW(bleu({{4}}, {{4}}, 6), ConfigError);
  EXPECT_THROW(selfBleu({{4}}, 2), InputError);
}

TEST(SelfBleu, IdenticalSentencesScoreOne) {
  EXPECT_EQ(selfBleu(std::vector<Sentence>(4, {4, 5, 6, 7, 8}), 5), 1.0);
}

TEST(Perplexity, BigramTable) {
  const oracle::BigramScorer scorer({{{kStartId, 4}, 0.25}, {{4, kEndId}, 0.5}});
  EXPECT_NEAR(perplexity(scorer, {{4}}), std::sqrt(8.0), 1e-12);
  EXPECT_THROW(perplexity(scorer, {}), InputError);
}

TEST(LanguageModel, UntrainedIsUniform) {
  const std::size_t vocab = 17;
  LanguageModel lm(vocab, LmConfig{}, 1);
  EXPECT_NEAR(perplexity(lm, {{4, 5, 6}, {7}}), static_cast<double>(vocab), 1e-9);
  const auto p = lm.nextTokenDistribution({4, 5});
  double s = 0.0;
  for (const double x : p) {
    s += x;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(LanguageModel, ScoresDoNotDependOnBatching) {
  LmConfig cfg;
  cfg.epochs = 2;
  const std::vector<Sentence> corpus{{4, 5, 6}, {5, 6, 7, 8}, {4, 8}};
  const auto lm = trainLm(corpus, 10, cfg, 2, nullptr);
  const auto together = lm->sentenceNll(corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_NEAR(lm->sentenceNll({corpus[i]})[0], together[i], 1e-10);
  }
}

TEST(LanguageModel, LearnsRepeatedSentence) {
  LmConfig cfg;
  cfg.epochs = 100;
  const std::vector<Sentence> corpus(32, {4, 5, 6, 7});
  const auto lm = trainLm(corpus, 10, cfg, 3, nullptr);
  EXPECT_LT(perplexity(*lm, {{4, 5, 6, 7}}), 1.5);
}
