#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "salsa/checkpoint.h"
#include "salsa/config.h"
#include "salsa/data.h"
#include "salsa/error.h"
#include "salsa/ops.h"
#include "salsa/optim.h"
#include "salsa/train.h"

using namespace salsa;

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore store;
  auto& p = store.add("w", Tensor::fromVector({2}, {1.0, -1.0}, true));
  Adam adam({&p}, AdamConfig{0.1});
  sum(mul(p.value, Tensor::fromVector({2}, {3.0, -0.5}))).backward();
  adam.step();
  EXPECT_NEAR(p.value.at(0), 0.9, 1e-7);
  EXPECT_NEAR(p.value.at(1), -0.9, 1e-7);
}

TEST(Adam, NonFiniteGradientLeavesParametersAlone) {
  ParameterStore store;
  auto& p = store.add("w", Tensor::fromVector({1}, {2.0}, true));
  Adam adam({&p}, AdamConfig{});
  p.value.mutableGrad()[0] = std::nan("");
  EXPECT_THROW(adam.step(), TrainingDivergence);
  EXPECT_EQ(p.value.at(0), 2.0);
}

TEST(Clip, RescalesToMaxNorm) {
  ParameterStore store;
  auto& p = store.add("w", Tensor::fromVector({2}, {0.0, 0.0}, true));
  p.value.mutableGrad()[0] = 3.0;
  p.value.mutableGrad()[1] = 4.0;
  EXPECT_DOUBLE_EQ(clipGradNorm({&p}, 1.0), 5.0);
  EXPECT_NEAR(p.value.grad()[0], 0.6, 1e-15);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  CheckpointFile file;
  file.texts.push_back({"note", "hello"});
  file.records.push_back({"w", {2, 2}, {1, 2, 3, 4}});
  const auto bytes = encodeCheckpoint(file);
  const auto back = decodeCheckpoint(bytes);
  EXPECT_EQ(back.text("note"), "hello");
  EXPECT_EQ(back.record("w").data, file.records[0].data);
  EXPECT_EQ(encodeCheckpoint(back), bytes);

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 1;
  EXPECT_THROW(decodeCheckpoint(flipped), IntegrityError);
  EXPECT_THROW(decodeCheckpoint(bytes.substr(0, bytes.size() - 3)), IntegrityError);
  EXPECT_THROW(decodeCheckpoint(bytes + "x"), IntegrityError);
}

TEST(Config, RejectsUnknownKeysAndBadModes) {
  EXPECT_THROW(parseRunConfig("colour = blue\n"), ConfigError);
  EXPECT_THROW(parseRunConfig("mode = ARAF\n"), ConfigError);
  EXPECT_THROW(parseRunConfig("just words\n"), ConfigError);
}

TEST(Config, PresetAndModeDefaults) {
  const auto paper = parseRunConfig("# comment\nmode = ARAE\n", "paper");
  EXPECT_EQ(paper.arch.dModel, 304u);
  EXPECT_EQ(paper.train.mode, Mode::Arae);
  EXPECT_EQ(paper.train.lambda, TrainConfig::defaults(Mode::Arae).lambda);
  EXPECT_EQ(parseRunConfig("lambda = 3\nmode = ARAE\n").train.lambda, 3.0);
}

TEST(Config, NumbersRoundTrip) {
  for (const double v : {0.1, 1e-300, 2.0 / 3.0, 12345.0}) {
    EXPECT_EQ(std::stod(formatNumber(v)), v);
  }
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  auto arch = ArchitectureConfig::desk();
  arch.vocabSize = 20;
  std::vector<TokenSequence> corpus;
  for (int i = 0; i < 8; ++i) {
    corpus.push_back(TokenSequence::fromTokens(std::vector<int>{4 + i, 5 + i, 6}, arch.maxLen));
  }
  auto cfg = TrainConfig::defaults(Mode::Arae);
  cfg.batchSize = 4;
  cfg.nCritic = 2;
  cfg.checkpointEvery = 0;
  const auto dir = std::filesystem::temp_directory_path() / "salsa-unit-resume";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto ckpt = (dir / "mid.ckpt").string();

  SalsaModel a(arch, cfg.mode, cfg.seed);
  Trainer full(a, cfg, corpus);
  full.runEpoch();
  full.save(ckpt);
  full.runEpoch();

  SalsaModel b(arch, cfg.mode, cfg.seed);
  Trainer resumed(b, cfg, corpus);
  resumed.load(ckpt);
  resumed.runEpoch();
  for (std::size_t i = 0; i < a.parameters().entries().size(); ++i) {
    EXPECT_EQ(a.parameters().entries()[i].value.toVector(), b.parameters().entries()[i].value.toVector());
  }
  std::filesystem::remove_all(dir);
}
