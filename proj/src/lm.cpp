#include "salsa/lm.h"

#include <algorithm>
#include <cmath>

#include "salsa/data.h"
#include "salsa/error.h"
#include "salsa/ops.h"
#include "salsa/optim.h"
#include "salsa/rng.h"

namespace salsa {

namespace {

std::size_t longest(const std::vector<const Sentence*>& batch) {
  std::size_t out = 0;
  for (const auto* s : batch) {
    out = std::max(out, s->size());
  }
  return out;
}

// Targets and weights for a time-major batch of `steps` positions.
void targetsFor(
    const std::vector<const Sentence*>& batch,
    std::size_t steps,
    std::vector<int>& targets,
    std::vector<double>& weights) {
  const auto b = batch.size();
  targets.assign(steps * b, kPadId);
  weights.assign(steps * b, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < b; ++i) {
      const auto& s = *batch[i];
      if (t < s.size()) {
        targets[t * b + i] = s[t];
      } else if (t == s.size()) {
        targets[t * b + i] = kEndId;
      } else {
        continue;
      }
      weights[t * b + i] = 1.0;
    }
  }
}

} // namespace

double perplexity(const SequenceScorer& scorer, const std::vector<Sentence>& sentences) {
  if (sentences.empty()) {
    throw InputError("perplexity: no sentences");
  }
  const auto nll = scorer.sentenceNll(sentences);
  double total = 0.0;
  double tokens = 0.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    total += nll[i];
    tokens += static_cast<double>(sentences[i].size() + 1);
  }
  return std::exp(total / tokens);
}

LanguageModel::LanguageModel(std::size_t vocabSize, const LmConfig& cfg, std::uint64_t seed)
    : vocab_(vocabSize), cfg_(cfg) {
  if (vocabSize <= static_cast<std::size_t>(kReservedTokens) || cfg.hidden == 0 || cfg.embedding == 0 ||
      cfg.batchSize == 0) {
    throw ConfigError("language model: bad configuration");
  }
  Rng rng(seed);
  embedding_ = &store_.add(
      "lm.embedding",
      Tensor::randn({vocabSize, cfg.embedding}, rng, 1.0 / std::sqrt(static_cast<double>(cfg.embedding))));
  cell_ = LstmCell(store_, "lm.lstm", cfg.embedding, cfg.hidden, rng);
  output_ = Linear(store_, "lm.output", cfg.hidden, vocabSize, rng);
  auto w = output_.weight().value.mutableData();
  std::fill(w.begin(), w.end(), 0.0);
  optimizer_ = std::make_unique<Adam>(store_.all(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
}

Tensor LanguageModel::logits(
    const std::vector<const Sentence*>& batch,
    std::size_t steps,
    const ForwardContext& ctx) const {
  const auto b = batch.size();
  auto h = Tensor::zeros({b, cfg_.hidden});
  auto c = Tensor::zeros({b, cfg_.hidden});
  std::vector<Tensor> hidden;
  hidden.reserve(steps);
  std::vector<int> ids(b);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < b; ++i) {
      const auto& s = *batch[i];
      ids[i] = t == 0 ? kStartId : (t - 1 < s.size() ? s[t - 1] : kPadId);
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab_) {
        throw IndexError("language model: token id out of range");
      }
    }
    auto [hn, cn] = cell_.step(gather(embedding_->value, ids), h, c, ctx);
    h = hn;
    c = cn;
    hidden.push_back(h);
  }
  return output_.forward(concatRows(hidden), ctx);
}

double LanguageModel::trainEpoch(const std::vector<Sentence>& corpus, Rng& rng) {
  if (corpus.empty()) {
    throw InputError("language model: empty training corpus");
  }
  const auto params = store_.all();
  const ForwardContext ctx{true, &rng};
  std::vector<int> targets;
  std::vector<double> weights;
  const auto order = shuffledIndices(corpus.size(), rng);
  double lossSum = 0.0;
  double tokenSum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batchSize) {
    std::vector<const Sentence*> batch;
    for (std::size_t k = start; k < std::min(order.size(), start + cfg_.batchSize); ++k) {
      batch.push_back(&corpus[order[k]]);
    }
    const auto steps = longest(batch) + 1;
    targetsFor(batch, steps, targets, weights);
    double tokens = 0.0;
    for (const auto w : weights) {
      tokens += w;
    }
    const auto sum = softmaxCrossEntropy(logits(batch, steps, ctx), targets, weights);
    lossSum += sum.item();
    tokenSum += tokens;
    store_.zeroGrad();
    scale(sum, 1.0 / tokens).backward();
    clipGradNorm(params, cfg_.clipNorm);
    optimizer_->step();
  }
  return lossSum / tokenSum;
}

std::vector<double> LanguageModel::sentenceNll(const std::vector<Sentence>& sentences) const {
  NoGradGuard guard;
  const ForwardContext ctx{false, nullptr};
  std::vector<double> out;
  out.reserve(sentences.size());
  std::vector<int> targets;
  std::vector<double> weights;
  for (std::size_t start = 0; start < sentences.size(); start += cfg_.batchSize) {
    std::vector<const Sentence*> batch;
    for (std::size_t k = start; k < std::min(sentences.size(), start + cfg_.batchSize); ++k) {
      batch.push_back(&sentences[k]);
    }
    const auto b = batch.size();
    const auto steps = longest(batch) + 1;
    targetsFor(batch, steps, targets, weights);
    const auto z = logits(batch, steps, ctx);
    const auto data = z.data();
    std::vector<double> nll(b, 0.0);
    for (std::size_t row = 0; row < steps * b; ++row) {
      if (weights[row] == 0.0) {
        continue;
      }
      const double* r = data.data() + row * vocab_;
      const double m = *std::max_element(r, r + vocab_);
      double s = 0.0;
      for (std::size_t v = 0; v < vocab_; ++v) {
        s += std::exp(r[v] - m);
      }
      nll[row % b] += m + std::log(s) - r[targets[row]];
    }
    out.insert(out.end(), nll.begin(), nll.end());
  }
  return out;
}

std::vector<double> LanguageModel::nextTokenDistribution(const Sentence& prefix) const {
  NoGradGuard guard;
  const std::vector<const Sentence*> batch{&prefix};
  const auto steps = prefix.size() + 1;
  const auto z = softmax(logits(batch, steps, ForwardContext{false, nullptr}), 1);
  const auto data = z.data();
  return std::vector<double>(data.end() - static_cast<std::ptrdiff_t>(vocab_), data.end());
}

std::unique_ptr<LanguageModel> trainLm(
    const std::vector<Sentence>& corpus,
    std::size_t vocabSize,
    const LmConfig& cfg,
    std::uint64_t seed,
    std::vector<double>* epochLosses) {
  auto lm = std::make_unique<LanguageModel>(vocabSize, cfg, seed);
  Rng rng = Rng(seed).derive(1);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto loss = lm->trainEpoch(corpus, rng);
    if (epochLosses != nullptr) {
      epochLosses->push_back(loss);
    }
  }
  return lm;
}

double forwardPerplexity(
    const std::vector<Sentence>& referenceCorpus,
    const std::vector<Sentence>& generated,
    std::size_t vocabSize,
    const LmConfig& cfg,
    std::uint64_t seed) {
  if (generated.empty()) {
    throw InputError("forward perplexity: empty generated set");
  }
  const auto lm = trainLm(referenceCorpus, vocabSize, cfg, seed);
  return perplexity(*lm, generated);
}

double reversePerplexity(
    const std::vector<Sentence>& generated,
    const std::vector<Sentence>& testCorpus,
    std::size_t vocabSize,
    const LmConfig& cfg,
    std::uint64_t seed) {
  if (generated.empty()) {
    throw InputError("reverse perplexity: empty generated set");
  }
  const auto lm = trainLm(generated, vocabSize, cfg, seed);
  return perplexity(*lm, testCorpus);
}

} // namespace salsa
