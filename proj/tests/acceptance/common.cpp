#include "common.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "salsa/error.h"

namespace fs = std::filesystem;
using namespace salsa;

namespace acceptance {

namespace {

constexpr std::size_t kBpeCorpus = 5000;
constexpr std::uint64_t kBpeSeed = 2024;
constexpr std::size_t kBpeVocab = 1000;

const BpeModel& sharedBpe() {
  static const BpeModel bpe = BpeModel::train(synthesizeCorpus(kBpeCorpus, kBpeSeed), kBpeVocab);
  return bpe;
}

} // namespace

std::vector<std::string> heldOut(const BpeModel& bpe, std::size_t count, std::uint64_t seed) {
  const auto arch = ArchitectureConfig::desk();
  auto kept = filterCorpus(synthesizeCorpus(count * 2 + 16, seed), bpe, arch.maxLen);
  if (kept.size() < count) {
    throw InputError("held-out corpus too small");
  }
  kept.resize(count);
  return kept;
}

DeskCorpus deskCorpus(std::size_t count, std::uint64_t seed) {
  DeskCorpus out;
  out.bpe = sharedBpe();
  out.sentences = heldOut(out.bpe, count, seed);
  out.sequences = encodeCorpus(out.sentences, out.bpe, ArchitectureConfig::desk().maxLen);
  return out;
}

TrainConfig overfitConfig(Mode mode) {
  auto cfg = TrainConfig::defaults(mode);
  cfg.batchSize = 16;
  cfg.seed = 11;
  cfg.checkpointEvery = 0;
  return cfg;
}

OverfitRun runOverfit(
    Mode mode,
    const DeskCorpus& corpus,
    std::size_t maxEpochs,
    double target,
    const std::string& dir,
    std::size_t saveEvery,
    const std::string& resumeFrom) {
  Stopwatch clock;
  auto arch = ArchitectureConfig::desk();
  arch.vocabSize = corpus.bpe.vocabSize();
  const auto cfg = overfitConfig(mode);
  SalsaModel model(arch, mode, cfg.seed);
  Trainer trainer(model, cfg, corpus.sequences);
  if (!resumeFrom.empty()) {
    trainer.load(resumeFrom);
  }
  if (!dir.empty()) {
    fs::create_directories(dir);
    trainer.setLogPath((fs::path(dir) / "train.csv").string());
  }
  OverfitRun run;
  const auto save = [&] {
    run.lastCheckpoint = (fs::path(dir) / Trainer::checkpointName(trainer.epoch())).string();
    trainer.save(run.lastCheckpoint);
  };
  try {
    while (trainer.epoch() < maxEpochs) {
      trainer.runEpoch();
      run.accuracy = reconstructionAccuracy(model, corpus.sequences);
      const bool done = run.accuracy >= target || trainer.epoch() == maxEpochs;
      if (!dir.empty() && ((saveEvery > 0 && trainer.epoch() % saveEvery == 0) || done)) {
        save();
      }
      if (done) {
        break;
      }
    }
  } catch (const TrainingDivergence&) {
    run.diverged = true;
  }
  run.epochs = trainer.epoch();
  run.log = trainer.log();
  run.seconds = clock.seconds();
  return run;
}

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scratchDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("salsa-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

} // namespace acceptance
