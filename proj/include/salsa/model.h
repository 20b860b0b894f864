#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "salsa/data.h"
#include "salsa/nn.h"
#include "salsa/parameter_store.h"
#include "salsa/tensor.h"

namespace salsa {

class Rng;

enum class Mode { Aae, Arae };

std::string modeName(Mode mode);
Mode parseMode(const std::string& name);

/// A sentence code. AAE codes lie on the unit sphere; ARAE codes are free.
struct LatentCode {
  std::vector<double> values;

  double norm() const;
};

/// Rows of a [B, d] tensor as codes, and back.
std::vector<LatentCode> codesFromTensor(const Tensor& codes);
Tensor codesToTensor(const std::vector<LatentCode>& codes);

struct SamplingStrategy {
  enum class Kind { Greedy, Temperature };
  Kind kind = Kind::Greedy;
  double temperature = 1.0;

  static SamplingStrategy greedy() {
    return {};
  }
  static SamplingStrategy withTemperature(double tau);
  /// "greedy" or "temp=<tau>".
  static SamplingStrategy parse(const std::string& text);
  std::string toString() const;
};

/// Decoder inputs and loss targets for teacher forcing. Position 0 reads the
/// start token; position t reads token t-1. Targets are the tokens followed by
/// the end token when it fits; padding positions carry zero weight.
struct TeacherForcing {
  std::vector<int> inputs;
  std::vector<int> targets;
  std::vector<double> weights;
  std::size_t predicted = 0;
};

TeacherForcing makeTeacherForcing(const Batch& batch);

/// The four networks of the self-attentive latent-code models: a Transformer
/// encoder and decoder with layer norm, plus, for ARAE, a code generator and
/// a critic built from spectrally-normalized encoder blocks without layer
/// norm. AAE replaces the generator by the unit-sphere prior.
///
/// Parameter names are grouped by prefix: "emb." token embeddings, "enc."
/// encoder, "dec." decoder, "out." vocabulary projection, "gen." generator,
/// "disc." discriminator / critic.
class SalsaModel {
 public:
  SalsaModel(const ArchitectureConfig& cfg, Mode mode, std::uint64_t seed);
  SalsaModel(const SalsaModel&) = delete;
  SalsaModel& operator=(const SalsaModel&) = delete;

  Mode mode() const {
    return mode_;
  }
  const ArchitectureConfig& config() const {
    return cfg_;
  }
  ParameterStore& parameters() {
    return *store_;
  }
  const ParameterStore& parameters() const {
    return *store_;
  }

  std::vector<Parameter*> encoderParameters();
  std::vector<Parameter*> decoderParameters();
  std::vector<Parameter*> autoencoderParameters();
  std::vector<Parameter*> generatorParameters();
  std::vector<Parameter*> discriminatorParameters();

  /// [B, dCode]; masked mean-pool over real positions, then a linear map
  /// (and L2 normalization in AAE mode).
  Tensor encode(const Batch& batch, const ForwardContext& ctx) const;

  /// [B * T, V] vocabulary logits; the code is a length-1 cross-attention
  /// memory in every decoder block.
  Tensor decodeTeacherForced(
      const Tensor& codes,
      const Batch& targets,
      const ForwardContext& ctx) const;

  /// Autoregressive decoding from start until end or maxLen tokens. Pad and
  /// start are never emitted and end is not allowed as the first token.
  std::vector<TokenSequence> decodeSample(
      const Tensor& codes,
      const SamplingStrategy& strategy,
      std::size_t maxLen,
      Rng& rng) const;

  /// ARAE generator: noise [B, dNoise] -> codes [B, dCode].
  Tensor generateCodes(const Tensor& noise, const ForwardContext& ctx) const;

  /// Raw critic / discriminator score [B, 1].
  Tensor discriminate(const Tensor& codes, const ForwardContext& ctx) const;

  /// Standard normal rows normalized to the unit sphere, [count, dCode].
  Tensor samplePrior(std::size_t count, Rng& rng) const;
  /// Standard normal generator input, [count, dNoise].
  Tensor sampleNoise(std::size_t count, Rng& rng) const;

  /// Codes for sampling sentences: prior samples (AAE) or generator outputs
  /// (ARAE).
  Tensor sampleCodes(std::size_t count, Rng& rng) const;

  /// Encoder or decoder for a single TokenSequence / LatentCode.
  LatentCode encodeOne(const TokenSequence& tokens) const;

 private:
  Tensor decoderHidden(
      const Tensor& codes,
      const std::vector<int>& inputIds,
      std::size_t batch,
      std::size_t length,
      const ForwardContext& ctx) const;
  Tensor ganStack(
      const Tensor& x,
      const std::vector<TransformerEncoderBlock>& blocks,
      std::size_t batch,
      const ForwardContext& ctx) const;

  ArchitectureConfig cfg_;
  Mode mode_;
  std::unique_ptr<ParameterStore> store_;

  Parameter* embedding_ = nullptr;
  std::vector<TransformerEncoderBlock> encoderBlocks_;
  Linear encoderHead_;
  Linear codeProjection_;
  std::vector<TransformerDecoderBlock> decoderBlocks_;
  Linear vocabulary_;

  Linear generatorInput_;
  std::vector<TransformerEncoderBlock> generatorBlocks_;
  Linear generatorHead_;

  Linear discriminatorInput_;
  std::vector<TransformerEncoderBlock> discriminatorBlocks_;
  Linear discriminatorHead_;
};

/// Closed-form parameter count for a configuration and mode.
std::size_t expectedParameterCount(const ArchitectureConfig& cfg, Mode mode);

struct ReconstructionResult {
  Tensor loss;
  double accuracy = 0.0;
};

/// Mean token cross-entropy of decoding encode(inputs) against `targets`.
ReconstructionResult reconstructionLoss(
    const SalsaModel& model,
    const Batch& inputs,
    const Batch& targets,
    const ForwardContext& ctx);

/// Teacher-forced token accuracy in eval mode.
double reconstructionAccuracy(const SalsaModel& model, const Batch& batch);

/// softplus(-D(prior)) + softplus(D(codes)), batch means. Equivalent to
/// -[log sigmoid(D(prior)) + log(1 - sigmoid(D(codes)))].
Tensor aaeDiscriminatorLoss(
    const SalsaModel& model,
    const Tensor& prior,
    const Tensor& codes,
    const ForwardContext& ctx);

/// -log sigmoid(D(codes)), batch mean.
Tensor aaeEncoderAdversarialLoss(
    const SalsaModel& model,
    const Tensor& codes,
    const ForwardContext& ctx);

struct AaeLosses {
  Tensor reconstruction;
  Tensor discriminator;
  Tensor encoderAdversarial;
  double accuracy = 0.0;
};

/// All three AAE costs from one encoding of the batch. The discriminator
/// cost sees detached codes; the other two backpropagate into the encoder.
AaeLosses aaeLosses(const SalsaModel& model, const Batch& batch, Rng& rng, const ForwardContext& ctx);

/// mean f(fake) - mean f(real).
Tensor araeCriticLoss(
    const SalsaModel& model,
    const Tensor& fake,
    const Tensor& real,
    const ForwardContext& ctx);

/// -mean f(G(noise)).
Tensor araeGeneratorLoss(
    const SalsaModel& model,
    const Tensor& noise,
    const ForwardContext& ctx);

struct AraeLosses {
  Tensor reconstruction;
  Tensor critic;
  Tensor generator;
  /// mean f(enc(x)); the encoder descends weight * this, i.e. it follows
  /// -dL_critic.
  Tensor encoderAdversarial;
  double accuracy = 0.0;
};

/// `noised` feeds the encoder for reconstruction; `clean` provides targets
/// and the real codes seen by the critic.
AraeLosses araeLosses(
    const SalsaModel& model,
    const Batch& noised,
    const Batch& clean,
    const Tensor& noise,
    const ForwardContext& ctx);

} // namespace salsa
