#include "salsa/nn.h"

#include <cmath>

#include "salsa/error.h"
#include "salsa/ops.h"
#include "salsa/rng.h"

namespace salsa {

ArchitectureConfig ArchitectureConfig::desk() {
  return ArchitectureConfig{};
}

ArchitectureConfig ArchitectureConfig::paper() {
  ArchitectureConfig cfg;
  cfg.dModel = 304;
  cfg.nHeads = 8;
  cfg.nBlocksAe = 3;
  cfg.nBlocksGan = 3;
  cfg.dFf = 4 * 304;
  cfg.maxLen = 50;
  cfg.dCode = 128;
  cfg.dNoise = 100;
  cfg.dropout = 0.1;
  return cfg;
}

void ArchitectureConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v < 1) {
      throw ConfigError(std::string("architecture: ") + field + " must be >= 1");
    }
  };
  positive(dModel, "d_model");
  positive(nHeads, "n_heads");
  positive(nBlocksAe, "n_blocks_ae");
  positive(nBlocksGan, "n_blocks_gan");
  positive(dFf, "d_ff");
  positive(maxLen, "max_len");
  positive(dCode, "d_code");
  positive(dNoise, "d_noise");
  if (dModel % nHeads != 0) {
    throw ConfigError("architecture: d_model must be divisible by n_heads");
  }
  if (dModel % 2 != 0) {
    throw ConfigError("architecture: d_model must be even for positional encoding");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("architecture: dropout must be in [0, 1)");
  }
  if (!(layerNormEps > 0.0)) {
    throw ConfigError("architecture: layer_norm_eps must be positive");
  }
}

bool ForwardContext::updatesSpectralNorm() const {
  return training && gradEnabled();
}

Tensor positionalEncoding(std::size_t length, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("positionalEncoding: dimension must be even, got " + std::to_string(dim));
  }
  if (length == 0) {
    throw ConfigError("positionalEncoding: length must be positive");
  }
  std::vector<double> pe(length * dim);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle = static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe[pos * dim + 2 * i] = std::sin(angle);
      pe[pos * dim + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor::fromVector({length, dim}, std::move(pe));
}

Tensor tiledPositionalEncoding(std::size_t batch, std::size_t length, std::size_t dim) {
  const auto pe = positionalEncoding(length, dim);
  std::vector<double> out;
  out.reserve(batch * length * dim);
  for (std::size_t b = 0; b < batch; ++b) {
    out.insert(out.end(), pe.data().begin(), pe.data().end());
  }
  return Tensor::fromVector({batch * length, dim}, std::move(out));
}

Linear::Linear(
    ParameterStore& store,
    const std::string& name,
    std::size_t in,
    std::size_t out,
    Rng& rng,
    bool spectral,
    bool bias) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  weight_ = &store.add(name + ".weight", Tensor::randn({in, out}, rng, stddev));
  if (spectral) {
    weight_->specNorm = makeSpecNormState(weight_->value, rng);
  }
  if (bias) {
    bias_ = &store.add(name + ".bias", Tensor::zeros({out}));
  }
}

Tensor Linear::effectiveWeight(const ForwardContext& ctx) const {
  if (weight_->specNorm) {
    return spectralNormalize(weight_->value, *weight_->specNorm, ctx.updatesSpectralNorm());
  }
  return weight_->value;
}

Tensor Linear::forward(const Tensor& x, const ForwardContext& ctx) const {
  auto y = matmul(x, effectiveWeight(ctx));
  return bias_ ? add(y, bias_->value) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim, double eps)
    : eps_(eps) {
  gain_ = &store.add(name + ".gain", Tensor::full({dim}, 1.0));
  bias_ = &store.add(name + ".bias", Tensor::zeros({dim}));
}

Tensor LayerNorm::forward(const Tensor& x) const {
  return layerNorm(x, gain_->value, bias_->value, eps_);
}

Tensor scaledDotAttention(
    const Tensor& q,
    const Tensor& k,
    const Tensor& v,
    std::span<const std::uint8_t> mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0)) {
    throw DimensionError(
        "scaledDotAttention: incompatible q " + shapeString(q.shape()) + ", k " +
        shapeString(k.shape()) + ", v " + shapeString(v.shape()));
  }
  if (v.dim(1) != q.dim(1)) {
    throw DimensionError("scaledDotAttention: value width must equal key width");
  }
  AttentionSpec spec;
  spec.allowed = mask;
  return attention(q, k, v, spec);
}

MultiHeadAttention::MultiHeadAttention(
    ParameterStore& store,
    const std::string& name,
    std::size_t dModel,
    std::size_t heads,
    double dropout,
    Rng& rng,
    bool spectral)
    : query_(store, name + ".query", dModel, dModel, rng, spectral),
      key_(store, name + ".key", dModel, dModel, rng, spectral),
      value_(store, name + ".value", dModel, dModel, rng, spectral),
      output_(store, name + ".output", dModel, dModel, rng, spectral),
      heads_(heads),
      dropout_(dropout) {
  if (heads == 0 || dModel % heads != 0) {
    throw ConfigError("MultiHeadAttention: d_model must be divisible by heads");
  }
}

Tensor MultiHeadAttention::forward(
    const Tensor& xq,
    const Tensor& xkv,
    const AttentionMask& mask,
    const ForwardContext& ctx) const {
  AttentionSpec spec;
  spec.batch = mask.batch;
  spec.heads = heads_;
  spec.causal = mask.causal;
  spec.keyValid = mask.keyValid;
  spec.dropout = dropout_;
  spec.rng = ctx.rng;
  spec.training = ctx.training;
  auto context = attention(
      query_.forward(xq, ctx), key_.forward(xkv, ctx), value_.forward(xkv, ctx), spec);
  return output_.forward(context, ctx);
}

FeedForward::FeedForward(
    ParameterStore& store,
    const std::string& name,
    std::size_t dModel,
    std::size_t dFf,
    Rng& rng,
    bool spectral)
    : inner_(store, name + ".inner", dModel, dFf, rng, spectral),
      outer_(store, name + ".outer", dFf, dModel, rng, spectral) {}

Tensor FeedForward::forward(const Tensor& x, const ForwardContext& ctx) const {
  return outer_.forward(relu(inner_.forward(x, ctx)), ctx);
}

TransformerEncoderBlock::TransformerEncoderBlock(
    ParameterStore& store,
    const std::string& name,
    const ArchitectureConfig& cfg,
    NormVariant variant,
    Rng& rng,
    double dropout,
    bool spectral) {
  const bool sn = variant == NormVariant::SpectralOnly && spectral;
  attention_ = MultiHeadAttention(store, name + ".attn", cfg.dModel, cfg.nHeads, dropout, rng, sn);
  feedForward_ = FeedForward(store, name + ".ff", cfg.dModel, cfg.dFf, rng, sn);
  if (variant == NormVariant::LayerNorm) {
    norm1_ = LayerNorm(store, name + ".norm1", cfg.dModel, cfg.layerNormEps);
    norm2_ = LayerNorm(store, name + ".norm2", cfg.dModel, cfg.layerNormEps);
  }
}

Tensor TransformerEncoderBlock::forward(
    const Tensor& x,
    const AttentionMask& mask,
    const ForwardContext& ctx) const {
  auto h = add(x, attention_.forward(x, x, mask, ctx));
  if (norm1_) {
    h = norm1_->forward(h);
  }
  h = add(h, feedForward_.forward(h, ctx));
  if (norm2_) {
    h = norm2_->forward(h);
  }
  return h;
}

TransformerDecoderBlock::TransformerDecoderBlock(
    ParameterStore& store,
    const std::string& name,
    const ArchitectureConfig& cfg,
    Rng& rng)
    : selfAttention_(store, name + ".self", cfg.dModel, cfg.nHeads, cfg.dropout, rng, false),
      crossAttention_(store, name + ".cross", cfg.dModel, cfg.nHeads, cfg.dropout, rng, false),
      feedForward_(store, name + ".ff", cfg.dModel, cfg.dFf, rng, false),
      norm1_(store, name + ".norm1", cfg.dModel, cfg.layerNormEps),
      norm2_(store, name + ".norm2", cfg.dModel, cfg.layerNormEps),
      norm3_(store, name + ".norm3", cfg.dModel, cfg.layerNormEps) {}

Tensor TransformerDecoderBlock::forward(
    const Tensor& x,
    const Tensor& memory,
    std::size_t batch,
    const ForwardContext& ctx) const {
  AttentionMask causal{batch, true, {}};
  AttentionMask cross{batch, false, {}};
  auto h = norm1_.forward(add(x, selfAttention_.forward(x, x, causal, ctx)));
  h = norm2_.forward(add(h, crossAttention_.forward(h, memory, cross, ctx)));
  return norm3_.forward(add(h, feedForward_.forward(h, ctx)));
}

LstmCell::LstmCell(
    ParameterStore& store,
    const std::string& name,
    std::size_t dIn,
    std::size_t dHidden,
    Rng& rng)
    : input_(store, name + ".input", dIn, 4 * dHidden, rng, false, true),
      recurrent_(store, name + ".recurrent", dHidden, 4 * dHidden, rng, false, false),
      hidden_(dHidden) {}

std::pair<Tensor, Tensor> LstmCell::step(
    const Tensor& x,
    const Tensor& h,
    const Tensor& c,
    const ForwardContext& ctx) const {
  if (h.rank() != 2 || h.dim(1) != hidden_ || c.shape() != h.shape() || x.dim(0) != h.dim(0)) {
    throw DimensionError(
        "LstmCell: inconsistent x " + shapeString(x.shape()) + ", h " + shapeString(h.shape()) +
        ", c " + shapeString(c.shape()));
  }
  auto gates = add(input_.forward(x, ctx), recurrent_.forward(h, ctx));
  auto inputGate = sigmoid(sliceCols(gates, 0, hidden_));
  auto forgetGate = sigmoid(sliceCols(gates, hidden_, hidden_));
  auto candidate = tanh(sliceCols(gates, 2 * hidden_, hidden_));
  auto outputGate = sigmoid(sliceCols(gates, 3 * hidden_, hidden_));
  auto cNext = add(mul(forgetGate, c), mul(inputGate, candidate));
  auto hNext = mul(outputGate, tanh(cNext));
  return {hNext, cNext};
}

} // namespace salsa
