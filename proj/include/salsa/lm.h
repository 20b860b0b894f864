#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "salsa/metrics.h"
#include "salsa/nn.h"
#include "salsa/optim.h"
#include "salsa/parameter_store.h"

namespace salsa {

struct LmConfig {
  std::size_t embedding = 64;
  std::size_t hidden = 256;
  std::size_t epochs = 20;
  std::size_t batchSize = 32;
  double lr = 2e-3;
  double clipNorm = 5.0;
};

/// Anything that scores sentences as start-conditioned token sequences
/// closed by the end token.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  /// -log p(s_1 .. s_n, end | start) for each sentence.
  virtual std::vector<double> sentenceNll(const std::vector<Sentence>& sentences) const = 0;
};

/// exp(total NLL / total predicted tokens), the end token counted once per
/// sentence. Empty input is an InputError.
double perplexity(const SequenceScorer& scorer, const std::vector<Sentence>& sentences);

/// Embedding, one LSTM layer and an output projection that starts at zero,
/// so an untrained model is uniform over the vocabulary.
class LanguageModel : public SequenceScorer {
 public:
  LanguageModel(std::size_t vocabSize, const LmConfig& cfg, std::uint64_t seed);
  LanguageModel(const LanguageModel&) = delete;
  LanguageModel& operator=(const LanguageModel&) = delete;

  /// One pass over `corpus` in an order drawn from `rng`. Returns the mean
  /// per-token training loss.
  double trainEpoch(const std::vector<Sentence>& corpus, Rng& rng);

  std::vector<double> sentenceNll(const std::vector<Sentence>& sentences) const override;
  std::vector<double> nextTokenDistribution(const Sentence& prefix) const;

  std::size_t vocabSize() const {
    return vocab_;
  }
  ParameterStore& parameters() {
    return store_;
  }

 private:
  // Logits [steps * batch, V], time-major, for the given batch.
  Tensor logits(const std::vector<const Sentence*>& batch, std::size_t steps, const ForwardContext& ctx) const;

  std::size_t vocab_;
  LmConfig cfg_;
  ParameterStore store_;
  Parameter* embedding_ = nullptr;
  LstmCell cell_;
  Linear output_;
  std::unique_ptr<Adam> optimizer_;
};

/// Trains a fresh model for cfg.epochs epochs. `epochLosses`, when given,
/// receives the mean loss of every epoch.
std::unique_ptr<LanguageModel> trainLm(
    const std::vector<Sentence>& corpus,
    std::size_t vocabSize,
    const LmConfig& cfg,
    std::uint64_t seed,
    std::vector<double>* epochLosses = nullptr);

/// Perplexity of `generated` under an LM trained on `referenceCorpus`.
double forwardPerplexity(
    const std::vector<Sentence>& referenceCorpus,
    const std::vector<Sentence>& generated,
    std::size_t vocabSize,
    const LmConfig& cfg,
    std::uint64_t seed);

/// Perplexity of `testCorpus` under an LM trained on `generated`.
double reversePerplexity(
    const std::vector<Sentence>& generated,
    const std::vector<Sentence>& testCorpus,
    std::size_t vocabSize,
    const LmConfig& cfg,
    std::uint64_t seed);

} // namespace salsa
