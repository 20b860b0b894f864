#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "salsa/parameter_store.h"
#include "salsa/tensor.h"

namespace salsa {

class Rng;

/// Network sizes shared by the autoencoder and the code GAN.
struct ArchitectureConfig {
  std::size_t dModel = 64;
  std::size_t nHeads = 8;
  std::size_t nBlocksAe = 2;
  std::size_t nBlocksGan = 2;
  std::size_t dFf = 256;
  /// Sequence length T.
  std::size_t maxLen = 20;
  std::size_t dCode = 128;
  std::size_t dNoise = 100;
  std::size_t vocabSize = 0;
  double dropout = 0.1;
  double layerNormEps = 1e-5;
  /// Turning this off trains the GAN stacks with plain weights (ablation).
  bool ganSpectralNorm = true;

  /// Small sizes for tests and CPU runs.
  static ArchitectureConfig desk();
  /// d_model 304, 8 heads, 3 + 3 blocks, T = 50, noise 100.
  static ArchitectureConfig paper();

  void validate() const;
  bool operator==(const ArchitectureConfig&) const = default;
};

struct GeneratorConfig {
  std::size_t dNoise = 100;
  std::size_t dModel = 304;
  std::size_t maxLen = 50;
  std::size_t nBlocks = 3;

  static GeneratorConfig from(const ArchitectureConfig& arch) {
    return {arch.dNoise, arch.dModel, arch.maxLen, arch.nBlocksGan};
  }
};

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;

  /// Spectral-norm estimates are refreshed only on training passes that
  /// record a graph.
  bool updatesSpectralNorm() const;
};

/// Sinusoidal encodings: PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos(...).
Tensor positionalEncoding(std::size_t length, std::size_t dim);
/// The encoding for `length` positions repeated for `batch` sequences.
Tensor tiledPositionalEncoding(std::size_t batch, std::size_t length, std::size_t dim);

/// y = x W + b, W stored as [in, out]. Optionally spectrally normalized.
class Linear {
 public:
  Linear() = default;
  Linear(
      ParameterStore& store,
      const std::string& name,
      std::size_t in,
      std::size_t out,
      Rng& rng,
      bool spectral = false,
      bool bias = true);

  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  Tensor effectiveWeight(const ForwardContext& ctx) const;

  Parameter& weight() const {
    return *weight_;
  }
  Parameter* bias() const {
    return bias_;
  }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim, double eps);
  Tensor forward(const Tensor& x) const;

 private:
  Parameter* gain_ = nullptr;
  Parameter* bias_ = nullptr;
  double eps_ = 1e-5;
};

/// Attention masking for a batch of sequences packed as rows.
struct AttentionMask {
  std::size_t batch = 1;
  bool causal = false;
  /// Empty, or one flag per key row (false = padding).
  std::span<const std::uint8_t> keyValid;
};

/// softmax(Q K^T / sqrt(dk) + mask) V for a single sequence. `mask`, when
/// given, holds Tq * Tk flags (true = may attend).
Tensor scaledDotAttention(
    const Tensor& q,
    const Tensor& k,
    const Tensor& v,
    std::span<const std::uint8_t> mask = {});

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(
      ParameterStore& store,
      const std::string& name,
      std::size_t dModel,
      std::size_t heads,
      double dropout,
      Rng& rng,
      bool spectral);

  /// xq: [B * Tq, d], xkv: [B * Tk, d].
  Tensor forward(
      const Tensor& xq,
      const Tensor& xkv,
      const AttentionMask& mask,
      const ForwardContext& ctx) const;

 private:
  Linear query_;
  Linear key_;
  Linear value_;
  Linear output_;
  std::size_t heads_ = 1;
  double dropout_ = 0.0;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(
      ParameterStore& store,
      const std::string& name,
      std::size_t dModel,
      std::size_t dFf,
      Rng& rng,
      bool spectral);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;

 private:
  Linear inner_;
  Linear outer_;
};

/// layer_norm: autoencoder blocks, normalization after every residual
/// sublayer. spectral_only: GAN blocks, no layer norm, spectrally normalized
/// weights (unless disabled for ablation).
enum class NormVariant { LayerNorm, SpectralOnly };

/// Residual self-attention followed by a residual position-wise feed-forward.
class TransformerEncoderBlock {
 public:
  TransformerEncoderBlock() = default;
  TransformerEncoderBlock(
      ParameterStore& store,
      const std::string& name,
      const ArchitectureConfig& cfg,
      NormVariant variant,
      Rng& rng,
      double dropout,
      bool spectral = true);

  Tensor forward(const Tensor& x, const AttentionMask& mask, const ForwardContext& ctx) const;

 private:
  MultiHeadAttention attention_;
  FeedForward feedForward_;
  std::optional<LayerNorm> norm1_;
  std::optional<LayerNorm> norm2_;
};

/// Causal self-attention, cross-attention over a memory, feed-forward; layer
/// norm after every residual sublayer.
class TransformerDecoderBlock {
 public:
  TransformerDecoderBlock() = default;
  TransformerDecoderBlock(
      ParameterStore& store,
      const std::string& name,
      const ArchitectureConfig& cfg,
      Rng& rng);

  /// x: [B * T, d]; memory: [B * Tm, d].
  Tensor forward(
      const Tensor& x,
      const Tensor& memory,
      std::size_t batch,
      const ForwardContext& ctx) const;

 private:
  MultiHeadAttention selfAttention_;
  MultiHeadAttention crossAttention_;
  FeedForward feedForward_;
  LayerNorm norm1_;
  LayerNorm norm2_;
  LayerNorm norm3_;
};

/// Standard LSTM cell with gates packed as [input, forget, candidate, output].
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(
      ParameterStore& store,
      const std::string& name,
      std::size_t dIn,
      std::size_t dHidden,
      Rng& rng);

  /// x: [B, dIn], h and c: [B, dHidden]. Returns (h', c').
  std::pair<Tensor, Tensor> step(
      const Tensor& x,
      const Tensor& h,
      const Tensor& c,
      const ForwardContext& ctx) const;

  std::size_t hiddenSize() const {
    return hidden_;
  }

 private:
  Linear input_;
  Linear recurrent_;
  std::size_t hidden_ = 0;
};

} // namespace salsa
