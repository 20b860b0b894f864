#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>

#include "../oracles/spectral.h"
#include "common.h"
#include "salsa/gradcheck.h"
#include "salsa/nn.h"
#include "salsa/ops.h"
#include "salsa/specnorm.h"

using namespace salsa;

namespace acceptance {

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradFloor = 1e-5;
constexpr double kGradSeconds = 120.0;

constexpr std::size_t kSpecMatrices = 20;
constexpr std::size_t kSpecMaxDim = 64;
constexpr int kSpecIterations = 50;
constexpr double kSpecAgreement = 1e-6;
constexpr double kSpecSeconds = 10.0;

constexpr std::size_t kMaskTrials = 100;

constexpr double kUnitNormTolerance = 1e-9;

ArchitectureConfig toyConfig() {
  ArchitectureConfig c;
  c.dModel = 16;
  c.nHeads = 4;
  c.maxLen = 6;
  c.dFf = 32;
  c.nBlocksAe = 1;
  c.nBlocksGan = 1;
  c.dCode = 8;
  c.dNoise = 5;
  c.vocabSize = 12;
  c.dropout = 0.1;
  return c;
}

// Projection onto fixed random weights, so every output entry matters.
Tensor project(const Tensor& y) {
  Rng rng(y.numel() * 7919 + 17);
  return sum(mul(y, Tensor::randn(y.shape(), rng, 1.0)));
}

Tensor leaf(Shape shape, Rng& rng, double stddev = 1.0) {
  return Tensor::randn(std::move(shape), rng, stddev, true);
}

Tensor positiveLeaf(Shape shape, Rng& rng) {
  auto t = Tensor::randn(std::move(shape), rng, 1.0, true);
  for (auto& v : t.mutableData()) {
    v = 0.5 + std::abs(v);
  }
  return t;
}

std::vector<Tensor> values(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  for (const auto* p : params) {
    out.push_back(p->value);
  }
  return out;
}

std::vector<Tensor> values(ParameterStore& store) {
  return values(store.all());
}

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Batch toyBatch(const ArchitectureConfig& cfg, Rng& rng, std::size_t count, bool full = false) {
  Batch out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = full ? cfg.maxLen : 1 + rng.uniformInt(cfg.maxLen);
    std::vector<int> ids;
    for (std::size_t t = 0; t < len; ++t) {
      ids.push_back(static_cast<int>(kReservedTokens + rng.uniformInt(cfg.vocabSize - kReservedTokens)));
    }
    out.push_back(TokenSequence::fromTokens(ids, cfg.maxLen));
  }
  return out;
}

struct GradSuite {
  std::vector<std::pair<std::string, double>> results;

  void run(const std::string& name, const std::function<Tensor()>& loss, std::vector<Tensor> leaves) {
    GradcheckOptions opts;
    opts.eps = kGradEps;
    opts.denominatorFloor = kGradFloor;
    const auto r = gradcheckParams(loss, std::move(leaves), opts);
    results.emplace_back(name, r.checked == 0 ? INFINITY : r.maxRelativeError);
    if (std::getenv("SALSA_GRAD_DEBUG")) {
      std::fprintf(stderr, "%s: err %.3e tensor %zu entry %zu analytic %.6e numeric %.6e skipped %zu\n",
          name.c_str(), r.maxRelativeError, r.worstTensor, r.worstEntry, r.worstAnalytic, r.worstNumeric, r.skipped);
    }
  }
};

bool bitEqual(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
      std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

std::string number(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

} // namespace

Outcome criterion1() {
  Stopwatch clock;
  Rng rng(101);
  GradSuite s;

  const auto x = leaf({3, 5}, rng);
  const auto y = leaf({3, 5}, rng);
  const auto row = leaf({5}, rng);
  const auto one = leaf({1}, rng);
  const auto pos = positiveLeaf({3, 5}, rng);
  const auto posRow = positiveLeaf({5}, rng);
  const auto posOne = positiveLeaf({1}, rng);
  const auto m = leaf({5, 4}, rng);

  const std::vector<std::pair<std::string, UnaryOp>> unary{
      {"exp", UnaryOp::Exp}, {"tanh", UnaryOp::Tanh}, {"sigmoid", UnaryOp::Sigmoid},
      {"relu", UnaryOp::Relu}, {"neg", UnaryOp::Neg}, {"softplus", UnaryOp::Softplus}};
  for (const auto& [name, op] : unary) {
    s.run(name, [&, op = op] { return project(elementwise(op, x)); }, {x});
  }
  s.run("log", [&] { return project(log(pos)); }, {pos});

  const std::vector<std::pair<std::string, BinaryOp>> binary{
      {"add", BinaryOp::Add}, {"sub", BinaryOp::Sub}, {"mul", BinaryOp::Mul}};
  for (const auto& [name, op] : binary) {
    s.run(name, [&, op = op] { return project(elementwise(op, x, y)); }, {x, y});
    s.run(name + " row", [&, op = op] { return project(elementwise(op, x, row)); }, {x, row});
    s.run(name + " scalar", [&, op = op] { return project(elementwise(op, x, one)); }, {x, one});
  }
  s.run("div", [&] { return project(div(x, pos)); }, {x, pos});
  s.run("div row", [&] { return project(div(x, posRow)); }, {x, posRow});
  s.run("div scalar", [&] { return project(div(x, posOne)); }, {x, posOne});
  s.run("scale", [&] { return project(scale(x, -1.7)); }, {x});
  s.run("matmul", [&] { return project(matmul(x, m)); }, {x, m});
  s.run("softmax rows", [&] { return project(softmax(x, 1)); }, {x});
  s.run("softmax cols", [&] { return project(softmax(x, 0)); }, {x});
  for (const auto op : {ReduceOp::Sum, ReduceOp::Mean, ReduceOp::Max}) {
    s.run("reduce axis 0", [&, op] { return project(reduce(op, x, 0)); }, {x});
    s.run("reduce axis 1", [&, op] { return project(reduce(op, x, 1)); }, {x});
    s.run("reduce all", [&, op] { return project(reduceAll(op, x)); }, {x});
  }
  const std::vector<int> ids{2, 0, 2, 1};
  s.run("gather", [&] { return project(gather(x, ids)); }, {x});
  s.run("reshape", [&] { return project(reshape(x, {5, 3})); }, {x});
  s.run("sliceCols", [&] { return project(sliceCols(x, 1, 3)); }, {x});
  s.run("concatRows", [&] { return project(concatRows({x, y, x})); }, {x, y});
  s.run("repeatRows", [&] { return project(repeatRows(x, 3)); }, {x});
  const auto grouped = leaf({6, 4}, rng);
  const std::vector<double> poolWeights{0.5, 0.5, 0.0, 0.2, 0.3, 0.5};
  s.run("poolRows", [&] { return project(poolRows(grouped, 3, poolWeights)); }, {grouped});
  s.run("dropout", [&] {
    Rng drop(9);
    return project(dropout(x, 0.3, drop, true));
  }, {x});
  const auto gain = leaf({5}, rng);
  const auto bias = leaf({5}, rng);
  s.run("layerNorm", [&] { return project(layerNorm(x, gain, bias, 1e-5)); }, {x, gain, bias});
  s.run("l2NormalizeRows", [&] { return project(l2NormalizeRows(x)); }, {x});

  const std::size_t B = 2, T = 6, d = 16;
  const auto q = leaf({B * T, d}, rng);
  const auto k = leaf({B * T, d}, rng);
  const auto v = leaf({B * T, d}, rng);
  const std::vector<std::uint8_t> keyValid{1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1};
  s.run("attention causal", [&] {
    AttentionSpec spec;
    spec.batch = B;
    spec.heads = 4;
    spec.causal = true;
    return project(attention(q, k, v, spec));
  }, {q, k, v});
  s.run("attention key mask", [&] {
    AttentionSpec spec;
    spec.batch = B;
    spec.heads = 4;
    spec.keyValid = keyValid;
    return project(attention(q, k, v, spec));
  }, {q, k, v});
  s.run("attention dropout", [&] {
    Rng drop(4);
    AttentionSpec spec;
    spec.batch = B;
    spec.heads = 4;
    spec.dropout = 0.2;
    spec.rng = &drop;
    spec.training = true;
    return project(attention(q, k, v, spec));
  }, {q, k, v});
  const auto logits = leaf({4, 7}, rng);
  const std::vector<int> targets{1, 6, 0, 3};
  const std::vector<double> ceWeights{1.0, 0.5, 0.0, 2.0};
  s.run("softmaxCrossEntropy", [&] { return softmaxCrossEntropy(logits, targets, ceWeights); }, {logits});
  const auto w = leaf({6, 4}, rng);
  auto sn = makeSpecNormState(w, rng);
  s.run("spectralNormalize", [&] { return project(spectralNormalize(w, sn, false)); }, {w});

  const auto cfg = toyConfig();
  const ForwardContext eval{false, nullptr};
  {
    ParameterStore store;
    TransformerEncoderBlock block(store, "enc", cfg, NormVariant::LayerNorm, rng, cfg.dropout);
    const auto in = leaf({B * T, d}, rng);
    s.run("encoder block", [&] {
      return project(block.forward(in, AttentionMask{B, false, keyValid}, eval));
    }, concat({in}, values(store)));
  }
  {
    ParameterStore store;
    TransformerDecoderBlock block(store, "dec", cfg, rng);
    const auto in = leaf({B * T, d}, rng);
    const auto memory = leaf({B, d}, rng);
    s.run("decoder block", [&] { return project(block.forward(in, memory, B, eval)); },
          concat({in, memory}, values(store)));
  }
  {
    ParameterStore store;
    TransformerEncoderBlock block(store, "gan", cfg, NormVariant::SpectralOnly, rng, 0.0, true);
    const auto in = leaf({B * T, d}, rng);
    s.run("spectral-only GAN block", [&] {
      return project(block.forward(in, AttentionMask{B, false, {}}, eval));
    }, concat({in}, values(store)));
  }
  {
    ParameterStore store;
    LstmCell cell(store, "lstm", 5, 4, rng);
    const auto in = leaf({3, 5}, rng);
    const auto h = leaf({3, 4}, rng);
    const auto c = leaf({3, 4}, rng);
    s.run("LSTM cell", [&] {
      auto [h2, c2] = cell.step(in, h, c, eval);
      return add(project(h2), project(c2));
    }, concat({in, h, c}, values(store)));
  }
  {
    SalsaModel model(cfg, Mode::Aae, 3);
    const auto batch = toyBatch(cfg, rng, 3);
    const auto losses = [&] {
      Rng prior(12);
      return aaeLosses(model, batch, prior, eval);
    };
    const auto ae = values(model.autoencoderParameters());
    const auto enc = values(model.encoderParameters());
    const auto disc = values(model.discriminatorParameters());
    s.run("AAE reconstruction", [&] { return losses().reconstruction; }, ae);
    s.run("AAE discriminator", [&] { return losses().discriminator; }, disc);
    s.run("AAE encoder adversarial", [&] { return losses().encoderAdversarial; }, concat(enc, disc));
  }
  {
    SalsaModel model(cfg, Mode::Arae, 4);
    const auto clean = toyBatch(cfg, rng, 3);
    Rng noiseRng(8);
    Batch noised;
    for (const auto& seq : clean) {
      noised.push_back(applyWordNoise(seq, 0.2, 3, noiseRng));
    }
    const auto noise = model.sampleNoise(3, noiseRng);
    const auto losses = [&] { return araeLosses(model, noised, clean, noise, eval); };
    const auto ae = values(model.autoencoderParameters());
    const auto enc = values(model.encoderParameters());
    const auto gen = values(model.generatorParameters());
    const auto disc = values(model.discriminatorParameters());
    s.run("ARAE reconstruction", [&] { return losses().reconstruction; }, ae);
    s.run("ARAE critic", [&] { return losses().critic; }, disc);
    s.run("ARAE generator", [&] { return losses().generator; }, concat(gen, disc));
    s.run("ARAE encoder adversarial", [&] { return losses().encoderAdversarial; }, concat(enc, disc));
  }

  double worst = 0.0;
  std::string worstName;
  std::string failed;
  for (const auto& [name, err] : s.results) {
    if (!(err < kGradTolerance)) {
      failed += " " + name + number("=%.2e", err);
    }
    if (!(err <= worst)) {
      worst = err;
      worstName = name;
    }
  }
  const double seconds = clock.seconds();
  Outcome out;
  out.pass = failed.empty() && seconds < kGradSeconds;
  out.detail = std::to_string(s.results.size()) + " checks, worst " + worstName + number(" %.2e", worst) +
      (failed.empty() ? "" : ", failing:" + failed);
  return out;
}

Outcome criterion2() {
  Stopwatch clock;
  Rng rng(202);
  double worstNorm = 0.0;
  double worstAgreement = 0.0;
  std::size_t bad = 0;
  std::size_t needed = 0;
  for (std::size_t i = 0; i < kSpecMatrices; ++i) {
    const auto rows = i == 0 ? kSpecMaxDim : 1 + rng.uniformInt(kSpecMaxDim);
    const auto cols = i == 0 ? kSpecMaxDim : 1 + rng.uniformInt(kSpecMaxDim);
    const auto w = Tensor::randn({rows, cols}, rng, 1.0);
    const auto stateRng = rng;
    auto state = makeSpecNormState(w, rng, kSpecIterations, 0);
    const auto normalized = spectralNormalize(w, state, true);
    const double truth = oracle::largestSingularValue(w.toVector(), rows, cols);
    const double normalizedNorm = oracle::largestSingularValue(normalized.toVector(), rows, cols);
    const double libraryNorm = exactSpectralNorm(normalized);
    const double agreement = std::abs(state.sigma - truth) / truth;
    worstNorm = std::max({worstNorm, std::abs(normalizedNorm - 1.0), std::abs(libraryNorm - 1.0)});
    worstAgreement = std::max(worstAgreement, agreement);
    const bool ok = normalizedNorm >= 0.999 && normalizedNorm <= 1.001 && libraryNorm >= 0.999 &&
        libraryNorm <= 1.001 && agreement <= kSpecAgreement;
    bad += ok ? 0 : 1;
    if (!ok) {
      // Same start vector, more steps: how many this matrix needs.
      for (int k = kSpecIterations; k <= 100 * kSpecIterations; k += kSpecIterations) {
        auto startRng = stateRng;
        auto longer = makeSpecNormState(w, startRng, k, 0);
        spectralNormalize(w, longer, true);
        if (std::abs(longer.sigma - truth) / truth <= kSpecAgreement) {
          needed = std::max<std::size_t>(needed, k);
          break;
        }
      }
    }
  }
  const double seconds = clock.seconds();
  Outcome out;
  out.pass = bad == 0 && seconds < kSpecSeconds;
  out.detail = std::to_string(bad) + " of " + std::to_string(kSpecMatrices) + " matrices off" +
      number(", worst |sigma(W/sigma) - 1| %.2e", worstNorm) +
      number(", worst power-iteration relative error %.2e", worstAgreement);
  if (bad > 0) {
    out.detail += ", 1e-6 needs up to " + std::to_string(needed) + " iterations";
  }
  return out;
}

Outcome criterion3() {
  auto cfg = ArchitectureConfig::desk();
  cfg.vocabSize = 40;
  SalsaModel model(cfg, Mode::Aae, 31);
  const ForwardContext eval{false, nullptr};
  Rng rng(303);
  const auto V = cfg.vocabSize;
  const auto T = cfg.maxLen;

  std::size_t decoderViolations = 0;
  for (std::size_t trial = 0; trial < kMaskTrials; ++trial) {
    const std::size_t B = 1 + rng.uniformInt(4);
    auto targets = toyBatch(cfg, rng, B, true);
    const auto codes = model.sampleCodes(B, rng);
    const auto t = rng.uniformInt(T - 1);
    const auto before = model.decodeTeacherForced(codes, targets, eval);
    for (auto& seq : targets) {
      for (std::size_t p = t + 1; p < T; ++p) {
        seq.ids[p] = static_cast<int>(kReservedTokens + rng.uniformInt(V - kReservedTokens));
      }
    }
    const auto after = model.decodeTeacherForced(codes, targets, eval);
    const auto a = before.data();
    const auto b = after.data();
    for (std::size_t i = 0; i < B; ++i) {
      const auto offset = (i * T) * V;
      const auto count = (t + 1) * V;
      if (std::memcmp(a.data() + offset, b.data() + offset, count * sizeof(double)) != 0) {
        ++decoderViolations;
      }
    }
  }

  std::size_t encoderViolations = 0;
  auto& padRow = model.parameters().get("emb.tokens").value;
  const auto original = padRow.toVector();
  for (std::size_t trial = 0; trial < kMaskTrials; ++trial) {
    const std::size_t B = 1 + rng.uniformInt(4);
    Batch batch;
    for (std::size_t i = 0; i < B; ++i) {
      const auto len = 1 + rng.uniformInt(T - 1);
      std::vector<int> ids;
      for (std::size_t p = 0; p < len; ++p) {
        ids.push_back(static_cast<int>(kReservedTokens + rng.uniformInt(V - kReservedTokens)));
      }
      batch.push_back(TokenSequence::fromTokens(ids, T));
    }
    const auto before = model.encode(batch, eval);
    auto emb = padRow.mutableData();
    for (std::size_t j = 0; j < cfg.dModel; ++j) {
      emb[kPadId * cfg.dModel + j] = 10.0 * rng.normal();
    }
    const auto perturbed = model.encode(batch, eval);
    std::copy(original.begin(), original.end(), emb.begin());
    std::size_t longest = 0;
    for (const auto& seq : batch) {
      longest = std::max(longest, seq.length);
    }
    const auto width = longest + rng.uniformInt(T - longest + 1);
    Batch narrower;
    for (const auto& seq : batch) {
      narrower.push_back(TokenSequence::fromTokens(seq.tokens(), width));
    }
    const auto repadded = model.encode(narrower, eval);
    encoderViolations += bitEqual(before, perturbed) ? 0 : 1;
    encoderViolations += bitEqual(before, repadded) ? 0 : 1;
  }

  Outcome out;
  out.pass = decoderViolations == 0 && encoderViolations == 0;
  out.detail = std::to_string(decoderViolations) + " decoder and " + std::to_string(encoderViolations) +
      " encoder violations over " + std::to_string(kMaskTrials) + " trials each";
  return out;
}

namespace {

// Closed form written out independently of the library.
std::size_t countedParameters(const ArchitectureConfig& c, Mode mode) {
  const auto d = c.dModel;
  const auto f = c.dFf;
  const auto linear = [](std::size_t in, std::size_t o) { return in * o + o; };
  const auto attention = 4 * linear(d, d);
  const auto ff = linear(d, f) + linear(f, d);
  const auto norm = 2 * d;
  std::size_t total = c.vocabSize * d;
  total += c.nBlocksAe * (attention + ff + 2 * norm) + linear(d, c.dCode);
  total += linear(c.dCode, d) + c.nBlocksAe * (2 * attention + ff + 3 * norm) + linear(d, c.vocabSize);
  total += linear(c.dCode, d) + c.nBlocksGan * (attention + ff) + linear(d, 1);
  if (mode == Mode::Arae) {
    total += linear(c.dNoise, d) + c.nBlocksGan * (attention + ff) + linear(d, c.dCode);
  }
  return total;
}

} // namespace

Outcome criterion4() {
  std::size_t failures = 0;
  std::string detail;
  const ForwardContext eval{false, nullptr};
  Rng rng(404);

  auto desk = ArchitectureConfig::desk();
  desk.vocabSize = 60;
  {
    SalsaModel model(desk, Mode::Aae, 41);
    double worst = 0.0;
    Rng drop(5);
    const ForwardContext train{true, &drop};
    for (int trial = 0; trial < 20; ++trial) {
      const auto batch = toyBatch(desk, rng, 1 + rng.uniformInt(8));
      for (const auto& codes : {model.encode(batch, eval), model.encode(batch, train),
                                model.samplePrior(batch.size(), rng), model.sampleCodes(batch.size(), rng)}) {
        for (const auto& code : codesFromTensor(codes)) {
          worst = std::max(worst, std::abs(code.norm() - 1.0));
        }
      }
    }
    if (!(worst <= kUnitNormTolerance)) {
      ++failures;
    }
    detail += number("worst |norm - 1| %.2e", worst);
  }

  std::size_t ganViolations = 0;
  std::size_t ganWeights = 0;
  for (const auto mode : {Mode::Aae, Mode::Arae}) {
    SalsaModel model(desk, mode, 42);
    for (const auto& p : model.parameters().entries()) {
      const bool gan = p.name.rfind("gen.", 0) == 0 || p.name.rfind("disc.", 0) == 0;
      if (!gan) {
        continue;
      }
      if (p.name.find("norm") != std::string::npos || p.name.find(".gain") != std::string::npos) {
        ++ganViolations;
      }
      if (p.value.rank() == 2) {
        ++ganWeights;
        ganViolations += p.specNorm ? 0 : 1;
      }
    }
  }
  failures += ganViolations > 0 ? 1 : 0;
  detail += ", " + std::to_string(ganViolations) + " GAN store violations over " + std::to_string(ganWeights) +
      " weights";

  auto paper = ArchitectureConfig::paper();
  paper.vocabSize = 8000;
  auto toy = toyConfig();
  std::size_t countMismatches = 0;
  for (const auto& arch : {desk, paper, toy}) {
    for (const auto mode : {Mode::Aae, Mode::Arae}) {
      SalsaModel model(arch, mode, 43);
      const auto expected = countedParameters(arch, mode);
      if (model.parameters().scalarCount() != expected || expectedParameterCount(arch, mode) != expected) {
        ++countMismatches;
      }
    }
  }
  failures += countMismatches > 0 ? 1 : 0;
  detail += ", " + std::to_string(countMismatches) + " of 6 parameter counts off";

  return {failures == 0, detail};
}

} // namespace acceptance
