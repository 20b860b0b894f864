#include "salsa/model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "salsa/error.h"
#include "salsa/ops.h"
#include "salsa/rng.h"

namespace salsa {

std::string modeName(Mode mode) {
  return mode == Mode::Aae ? "AAE" : "ARAE";
}

Mode parseMode(const std::string& name) {
  if (name == "AAE" || name == "aae") {
    return Mode::Aae;
  }
  if (name == "ARAE" || name == "arae") {
    return Mode::Arae;
  }
  throw ConfigError("mode: expected AAE or ARAE, got '" + name + "'");
}

double LatentCode::norm() const {
  double ss = 0.0;
  for (double v : values) {
    ss += v * v;
  }
  return std::sqrt(ss);
}

std::vector<LatentCode> codesFromTensor(const Tensor& codes) {
  const auto rows = codes.dim(0);
  const auto d = codes.dim(1);
  std::vector<LatentCode> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r].values.assign(codes.data().begin() + r * d, codes.data().begin() + (r + 1) * d);
  }
  return out;
}

Tensor codesToTensor(const std::vector<LatentCode>& codes) {
  if (codes.empty()) {
    throw InputError("codesToTensor: no codes");
  }
  const auto d = codes.front().values.size();
  std::vector<double> flat;
  flat.reserve(codes.size() * d);
  for (const auto& c : codes) {
    if (c.values.size() != d) {
      throw DimensionError("codesToTensor: codes of different sizes");
    }
    flat.insert(flat.end(), c.values.begin(), c.values.end());
  }
  return Tensor::fromVector({codes.size(), d}, std::move(flat));
}

SamplingStrategy SamplingStrategy::withTemperature(double tau) {
  if (!(tau > 0.0)) {
    throw ConfigError("sampling temperature must be positive");
  }
  SamplingStrategy s;
  s.kind = Kind::Temperature;
  s.temperature = tau;
  return s;
}

SamplingStrategy SamplingStrategy::parse(const std::string& text) {
  if (text == "greedy") {
    return greedy();
  }
  if (text.rfind("temp=", 0) == 0) {
    try {
      std::size_t used = 0;
      const double tau = std::stod(text.substr(5), &used);
      if (used == text.size() - 5) {
        return withTemperature(tau);
      }
    } catch (const std::logic_error&) {
    }
  }
  throw ConfigError("strategy: expected 'greedy' or 'temp=<tau>', got '" + text + "'");
}

std::string SamplingStrategy::toString() const {
  return kind == Kind::Greedy ? "greedy" : "temp=" + std::to_string(temperature);
}

TeacherForcing makeTeacherForcing(const Batch& batch) {
  if (batch.empty()) {
    throw ContractError("teacher forcing: empty batch");
  }
  const auto T = batch.front().maxLen();
  TeacherForcing tf;
  tf.inputs.assign(batch.size() * T, kPadId);
  tf.targets.assign(batch.size() * T, kPadId);
  tf.weights.assign(batch.size() * T, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    if (seq.maxLen() != T) {
      throw DimensionError("teacher forcing: sequences of different lengths in one batch");
    }
    if (seq.length == 0) {
      throw ContractError("teacher forcing: empty sentence");
    }
    for (std::size_t t = 0; t < T; ++t) {
      const auto r = b * T + t;
      if (t == 0) {
        tf.inputs[r] = kStartId;
      } else if (t <= seq.length) {
        tf.inputs[r] = seq.ids[t - 1];
      }
      if (t < seq.length) {
        tf.targets[r] = seq.ids[t];
        tf.weights[r] = 1.0;
      } else if (t == seq.length) {
        tf.targets[r] = kEndId;
        tf.weights[r] = 1.0;
      }
    }
    tf.predicted += std::min(seq.length + 1, T);
  }
  return tf;
}

namespace {

std::size_t batchLength(const Batch& batch) {
  if (batch.empty()) {
    throw ContractError("empty batch");
  }
  const auto T = batch.front().maxLen();
  for (const auto& seq : batch) {
    if (seq.maxLen() != T) {
      throw DimensionError("batch: sequences padded to different lengths");
    }
    if (seq.length == 0) {
      throw ContractError("encode: empty sentence");
    }
  }
  return T;
}

Tensor rowsAt(const Tensor& x, std::size_t group, std::size_t offset) {
  const auto rows = x.dim(0) / group;
  const auto d = x.dim(1);
  std::vector<double> out(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().begin() + (r * group + offset) * d, d, out.begin() + r * d);
  }
  return Tensor::fromVector({rows, d}, std::move(out));
}

double tokenAccuracy(const Tensor& logits, const TeacherForcing& tf) {
  const auto V = logits.dim(1);
  const auto z = logits.data();
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t r = 0; r < tf.weights.size(); ++r) {
    if (tf.weights[r] == 0.0) {
      continue;
    }
    const double* row = z.data() + r * V;
    const auto best = static_cast<int>(std::max_element(row, row + V) - row);
    correct += best == tf.targets[r];
    ++total;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

} // namespace

SalsaModel::SalsaModel(const ArchitectureConfig& cfg, Mode mode, std::uint64_t seed)
    : cfg_(cfg), mode_(mode), store_(std::make_unique<ParameterStore>()) {
  cfg_.validate();
  if (cfg_.vocabSize <= static_cast<std::size_t>(kReservedTokens)) {
    throw ConfigError("model: vocabulary must contain more than the reserved tokens");
  }
  auto& store = *store_;
  Rng rng(seed);
  const auto d = cfg_.dModel;

  embedding_ = &store.add(
      "emb.tokens",
      Tensor::randn({cfg_.vocabSize, d}, rng, 1.0 / std::sqrt(static_cast<double>(d))));

  for (std::size_t i = 0; i < cfg_.nBlocksAe; ++i) {
    encoderBlocks_.emplace_back(
        store, "enc.block" + std::to_string(i), cfg_, NormVariant::LayerNorm, rng, cfg_.dropout);
  }
  encoderHead_ = Linear(store, "enc.head", d, cfg_.dCode, rng);

  codeProjection_ = Linear(store, "dec.code", cfg_.dCode, d, rng);
  for (std::size_t i = 0; i < cfg_.nBlocksAe; ++i) {
    decoderBlocks_.emplace_back(store, "dec.block" + std::to_string(i), cfg_, rng);
  }
  vocabulary_ = Linear(store, "out.vocab", d, cfg_.vocabSize, rng);

  const bool sn = cfg_.ganSpectralNorm;
  if (mode_ == Mode::Arae) {
    generatorInput_ = Linear(store, "gen.input", cfg_.dNoise, d, rng, sn);
    for (std::size_t i = 0; i < cfg_.nBlocksGan; ++i) {
      generatorBlocks_.emplace_back(
          store, "gen.block" + std::to_string(i), cfg_, NormVariant::SpectralOnly, rng, 0.0, sn);
    }
    generatorHead_ = Linear(store, "gen.head", d, cfg_.dCode, rng, sn);
  }

  const double discDropout = mode_ == Mode::Aae ? cfg_.dropout : 0.0;
  discriminatorInput_ = Linear(store, "disc.input", cfg_.dCode, d, rng, sn);
  for (std::size_t i = 0; i < cfg_.nBlocksGan; ++i) {
    discriminatorBlocks_.emplace_back(
        store, "disc.block" + std::to_string(i), cfg_, NormVariant::SpectralOnly, rng,
        discDropout, sn);
  }
  discriminatorHead_ = Linear(store, "disc.head", d, 1, rng, sn);
}

std::vector<Parameter*> SalsaModel::encoderParameters() {
  auto out = store_->withPrefix("emb.");
  for (auto* p : store_->withPrefix("enc.")) {
    out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> SalsaModel::decoderParameters() {
  auto out = store_->withPrefix("dec.");
  for (auto* p : store_->withPrefix("out.")) {
    out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> SalsaModel::autoencoderParameters() {
  auto out = encoderParameters();
  for (auto* p : decoderParameters()) {
    out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> SalsaModel::generatorParameters() {
  return store_->withPrefix("gen.");
}

std::vector<Parameter*> SalsaModel::discriminatorParameters() {
  return store_->withPrefix("disc.");
}

Tensor SalsaModel::encode(const Batch& batch, const ForwardContext& ctx) const {
  const auto T = batchLength(batch);
  const auto B = batch.size();
  std::vector<int> ids;
  std::vector<std::uint8_t> valid;
  std::vector<double> poolWeights;
  ids.reserve(B * T);
  for (const auto& seq : batch) {
    seq.validate(cfg_.vocabSize);
    ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
    for (std::size_t t = 0; t < T; ++t) {
      const bool real = t < seq.length;
      valid.push_back(real);
      poolWeights.push_back(real ? 1.0 / static_cast<double>(seq.length) : 0.0);
    }
  }
  const auto d = cfg_.dModel;
  auto x = scale(gather(embedding_->value, ids), std::sqrt(static_cast<double>(d)));
  x = add(x, tiledPositionalEncoding(B, T, d));
  if (ctx.training) {
    x = dropout(x, cfg_.dropout, *ctx.rng, true);
  }
  const AttentionMask mask{B, false, valid};
  for (const auto& block : encoderBlocks_) {
    x = block.forward(x, mask, ctx);
  }
  auto code = encoderHead_.forward(poolRows(x, T, poolWeights), ctx);
  return mode_ == Mode::Aae ? l2NormalizeRows(code) : code;
}

Tensor SalsaModel::decoderHidden(
    const Tensor& codes,
    const std::vector<int>& inputIds,
    std::size_t batch,
    std::size_t length,
    const ForwardContext& ctx) const {
  if (codes.rank() != 2 || codes.dim(0) != batch || codes.dim(1) != cfg_.dCode) {
    throw DimensionError(
        "decoder: codes " + shapeString(codes.shape()) + " for batch " + std::to_string(batch));
  }
  const auto d = cfg_.dModel;
  auto memory = codeProjection_.forward(codes, ctx);
  auto x = scale(gather(embedding_->value, inputIds), std::sqrt(static_cast<double>(d)));
  x = add(x, tiledPositionalEncoding(batch, length, d));
  if (ctx.training) {
    x = dropout(x, cfg_.dropout, *ctx.rng, true);
  }
  for (const auto& block : decoderBlocks_) {
    x = block.forward(x, memory, batch, ctx);
  }
  return x;
}

Tensor SalsaModel::decodeTeacherForced(
    const Tensor& codes,
    const Batch& targets,
    const ForwardContext& ctx) const {
  const auto T = batchLength(targets);
  const auto tf = makeTeacherForcing(targets);
  return vocabulary_.forward(decoderHidden(codes, tf.inputs, targets.size(), T, ctx), ctx);
}

std::vector<TokenSequence> SalsaModel::decodeSample(
    const Tensor& codes,
    const SamplingStrategy& strategy,
    std::size_t maxLen,
    Rng& rng) const {
  if (maxLen == 0 || maxLen > cfg_.maxLen) {
    throw ContractError(
        "decodeSample: maxLen must be in [1, " + std::to_string(cfg_.maxLen) + "]");
  }
  NoGradGuard guard;
  const ForwardContext ctx{false, nullptr};
  const auto B = codes.dim(0);
  const auto V = cfg_.vocabSize;
  std::vector<std::vector<int>> generated(B);
  std::vector<bool> done(B, false);
  std::vector<double> probs(V);
  for (std::size_t t = 0; t < maxLen; ++t) {
    if (std::all_of(done.begin(), done.end(), [](bool v) { return v; })) {
      break;
    }
    const auto L = t + 1;
    std::vector<int> inputs(B * L, kPadId);
    for (std::size_t b = 0; b < B; ++b) {
      inputs[b * L] = kStartId;
      for (std::size_t j = 0; j < generated[b].size() && j + 1 < L; ++j) {
        inputs[b * L + j + 1] = generated[b][j];
      }
    }
    const auto hidden = decoderHidden(codes, inputs, B, L, ctx);
    const auto logits = vocabulary_.forward(rowsAt(hidden, L, t), ctx);
    for (std::size_t b = 0; b < B; ++b) {
      if (done[b]) {
        continue;
      }
      const double* row = logits.data().data() + b * V;
      auto allowed = [&](std::size_t id) {
        return id != kPadId && id != kStartId && !(t == 0 && id == kEndId);
      };
      int choice = -1;
      if (strategy.kind == SamplingStrategy::Kind::Greedy) {
        for (std::size_t id = 0; id < V; ++id) {
          if (allowed(id) && (choice < 0 || row[id] > row[choice])) {
            choice = static_cast<int>(id);
          }
        }
      } else {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t id = 0; id < V; ++id) {
          if (allowed(id)) {
            mx = std::max(mx, row[id] / strategy.temperature);
          }
        }
        double total = 0.0;
        for (std::size_t id = 0; id < V; ++id) {
          probs[id] = allowed(id) ? std::exp(row[id] / strategy.temperature - mx) : 0.0;
          total += probs[id];
        }
        double u = rng.uniform() * total;
        for (std::size_t id = 0; id < V; ++id) {
          if (probs[id] == 0.0) {
            continue;
          }
          choice = static_cast<int>(id);
          u -= probs[id];
          if (u < 0.0) {
            break;
          }
        }
      }
      if (choice == kEndId) {
        done[b] = true;
      } else {
        generated[b].push_back(choice);
      }
    }
  }
  std::vector<TokenSequence> out;
  out.reserve(B);
  for (const auto& tokens : generated) {
    out.push_back(TokenSequence::fromTokens(tokens, cfg_.maxLen));
  }
  return out;
}

Tensor SalsaModel::ganStack(
    const Tensor& x,
    const std::vector<TransformerEncoderBlock>& blocks,
    std::size_t batch,
    const ForwardContext& ctx) const {
  const auto T = cfg_.maxLen;
  const auto pe = tiledPositionalEncoding(batch, T, cfg_.dModel);
  const AttentionMask mask{batch, false, {}};
  auto h = repeatRows(x, T);
  for (const auto& block : blocks) {
    h = block.forward(add(h, pe), mask, ctx);
  }
  const std::vector<double> weights(batch * T, 1.0 / static_cast<double>(T));
  return poolRows(h, T, weights);
}

Tensor SalsaModel::generateCodes(const Tensor& noise, const ForwardContext& ctx) const {
  if (mode_ != Mode::Arae) {
    throw ContractError("generateCodes: the AAE model samples codes from its prior");
  }
  if (noise.rank() != 2 || noise.dim(1) != cfg_.dNoise) {
    throw ConfigError(
        "generateCodes: noise must be [B, " + std::to_string(cfg_.dNoise) + "], got " +
        shapeString(noise.shape()));
  }
  const auto B = noise.dim(0);
  auto pooled = ganStack(generatorInput_.forward(noise, ctx), generatorBlocks_, B, ctx);
  return generatorHead_.forward(pooled, ctx);
}

Tensor SalsaModel::discriminate(const Tensor& codes, const ForwardContext& ctx) const {
  if (codes.rank() != 2 || codes.dim(1) != cfg_.dCode) {
    throw DimensionError(
        "discriminate: codes must be [B, " + std::to_string(cfg_.dCode) + "], got " +
        shapeString(codes.shape()));
  }
  const auto B = codes.dim(0);
  auto pooled = ganStack(discriminatorInput_.forward(codes, ctx), discriminatorBlocks_, B, ctx);
  return discriminatorHead_.forward(pooled, ctx);
}

Tensor SalsaModel::samplePrior(std::size_t count, Rng& rng) const {
  const auto d = cfg_.dCode;
  std::vector<double> values(count * d);
  for (std::size_t r = 0; r < count; ++r) {
    double ss = 0.0;
    do {
      ss = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        values[r * d + c] = rng.normal();
        ss += values[r * d + c] * values[r * d + c];
      }
    } while (ss == 0.0);
    const double n = std::sqrt(ss);
    for (std::size_t c = 0; c < d; ++c) {
      values[r * d + c] /= n;
    }
  }
  return Tensor::fromVector({count, d}, std::move(values));
}

Tensor SalsaModel::sampleNoise(std::size_t count, Rng& rng) const {
  return Tensor::randn({count, cfg_.dNoise}, rng, 1.0);
}

Tensor SalsaModel::sampleCodes(std::size_t count, Rng& rng) const {
  if (mode_ == Mode::Aae) {
    return samplePrior(count, rng);
  }
  NoGradGuard guard;
  return generateCodes(sampleNoise(count, rng), ForwardContext{false, nullptr});
}

LatentCode SalsaModel::encodeOne(const TokenSequence& tokens) const {
  NoGradGuard guard;
  return codesFromTensor(encode({tokens}, ForwardContext{false, nullptr})).front();
}

std::size_t expectedParameterCount(const ArchitectureConfig& cfg, Mode mode) {
  const auto d = cfg.dModel;
  const auto linear = [](std::size_t in, std::size_t out) { return in * out + out; };
  const auto attention = 4 * linear(d, d);
  const auto feedForward = linear(d, cfg.dFf) + linear(cfg.dFf, d);
  const auto norm = 2 * d;
  const auto encoderBlock = attention + feedForward + 2 * norm;
  const auto decoderBlock = 2 * attention + feedForward + 3 * norm;
  const auto ganBlock = attention + feedForward;

  const auto embedding = cfg.vocabSize * d;
  const auto encoder = cfg.nBlocksAe * encoderBlock + linear(d, cfg.dCode);
  const auto decoder = linear(cfg.dCode, d) + cfg.nBlocksAe * decoderBlock + linear(d, cfg.vocabSize);
  const auto discriminator = linear(cfg.dCode, d) + cfg.nBlocksGan * ganBlock + linear(d, 1);
  const auto generator = mode == Mode::Arae
      ? linear(cfg.dNoise, d) + cfg.nBlocksGan * ganBlock + linear(d, cfg.dCode)
      : 0;
  return embedding + encoder + decoder + discriminator + generator;
}

ReconstructionResult reconstructionLoss(
    const SalsaModel& model,
    const Batch& inputs,
    const Batch& targets,
    const ForwardContext& ctx) {
  const auto codes = model.encode(inputs, ctx);
  const auto logits = model.decodeTeacherForced(codes, targets, ctx);
  const auto tf = makeTeacherForcing(targets);
  auto ce = softmaxCrossEntropy(logits, tf.targets, tf.weights);
  return {scale(ce, 1.0 / static_cast<double>(tf.predicted)), tokenAccuracy(logits, tf)};
}

double reconstructionAccuracy(const SalsaModel& model, const Batch& batch) {
  NoGradGuard guard;
  return reconstructionLoss(model, batch, batch, ForwardContext{false, nullptr}).accuracy;
}

Tensor aaeDiscriminatorLoss(
    const SalsaModel& model,
    const Tensor& prior,
    const Tensor& codes,
    const ForwardContext& ctx) {
  auto real = mean(softplus(neg(model.discriminate(prior, ctx))));
  auto fake = mean(softplus(model.discriminate(codes, ctx)));
  return add(real, fake);
}

Tensor aaeEncoderAdversarialLoss(
    const SalsaModel& model,
    const Tensor& codes,
    const ForwardContext& ctx) {
  return mean(softplus(neg(model.discriminate(codes, ctx))));
}

AaeLosses aaeLosses(const SalsaModel& model, const Batch& batch, Rng& rng, const ForwardContext& ctx) {
  if (model.mode() != Mode::Aae) {
    throw ContractError("aaeLosses: model is not in AAE mode");
  }
  AaeLosses out;
  const auto codes = model.encode(batch, ctx);
  const auto logits = model.decodeTeacherForced(codes, batch, ctx);
  const auto tf = makeTeacherForcing(batch);
  out.reconstruction = scale(
      softmaxCrossEntropy(logits, tf.targets, tf.weights), 1.0 / static_cast<double>(tf.predicted));
  out.accuracy = tokenAccuracy(logits, tf);
  out.discriminator =
      aaeDiscriminatorLoss(model, model.samplePrior(batch.size(), rng), codes.detach(), ctx);
  out.encoderAdversarial = aaeEncoderAdversarialLoss(model, codes, ctx);
  return out;
}

Tensor araeCriticLoss(
    const SalsaModel& model,
    const Tensor& fake,
    const Tensor& real,
    const ForwardContext& ctx) {
  return sub(mean(model.discriminate(fake, ctx)), mean(model.discriminate(real, ctx)));
}

Tensor araeGeneratorLoss(const SalsaModel& model, const Tensor& noise, const ForwardContext& ctx) {
  return neg(mean(model.discriminate(model.generateCodes(noise, ctx), ctx)));
}

AraeLosses araeLosses(
    const SalsaModel& model,
    const Batch& noised,
    const Batch& clean,
    const Tensor& noise,
    const ForwardContext& ctx) {
  if (model.mode() != Mode::Arae) {
    throw ContractError("araeLosses: model is not in ARAE mode");
  }
  AraeLosses out;
  auto rec = reconstructionLoss(model, noised, clean, ctx);
  out.reconstruction = rec.loss;
  out.accuracy = rec.accuracy;
  const auto real = model.encode(clean, ctx);
  const auto fake = model.generateCodes(noise, ctx);
  out.critic = araeCriticLoss(model, fake.detach(), real.detach(), ctx);
  out.generator = neg(mean(model.discriminate(fake, ctx)));
  out.encoderAdversarial = mean(model.discriminate(real, ctx));
  return out;
}

} // namespace salsa
