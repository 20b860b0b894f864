#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "common.h"
#include "salsa/lm.h"
#include "salsa/metrics.h"

using namespace salsa;

namespace acceptance {

namespace {

constexpr std::size_t kOverfitSentences = 64;
constexpr std::uint64_t kOverfitSeed = 5;
constexpr std::size_t kOverfitEpochs = 300;
constexpr double kOverfitAccuracy = 0.99;
constexpr double kOverfitSeconds = 600.0;

constexpr std::size_t kDirectionSentences = 5000;
constexpr std::uint64_t kDirectionSeed = 8;
constexpr std::size_t kDirectionEpochs = 30;
constexpr std::size_t kDirectionSamples = 500;
constexpr double kDirectionGain = 0.30;
constexpr double kDirectionSelfBleuMargin = 0.2;
constexpr double kDirectionSeconds = 3600.0;

constexpr std::size_t kReproSaveEvery = 10;

std::vector<Sentence> sampleSentences(const SalsaModel& model, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sentence> out;
  for (std::size_t done = 0; done < count; done += 100) {
    const auto codes = model.sampleCodes(std::min<std::size_t>(100, count - done), rng);
    for (const auto& seq : model.decodeSample(codes, SamplingStrategy::greedy(), model.config().maxLen, rng)) {
      out.push_back(seq.tokens());
    }
  }
  return out;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// The CSV log with its last column, wall time, removed.
std::string withoutWallTime(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    out += line.substr(0, line.rfind(',')) + "\n";
  }
  return out;
}

} // namespace

Outcome criterion5() {
  const auto corpus = deskCorpus(kOverfitSentences, kOverfitSeed);
  Outcome out{true, ""};
  for (const auto mode : {Mode::Aae, Mode::Arae}) {
    const auto run = runOverfit(mode, corpus, kOverfitEpochs, kOverfitAccuracy);
    bool finite = !run.diverged;
    for (const auto& row : run.log) {
      finite = finite && std::isfinite(row.value);
    }
    const bool ok = finite && run.accuracy >= kOverfitAccuracy && run.seconds < kOverfitSeconds;
    out.pass = out.pass && ok;
    out.detail += modeName(mode) + fmt(" acc %.4f at epoch %.0f in %.0fs", run.accuracy, run.epochs, run.seconds) +
        (finite ? "" : " non-finite") + "; ";
  }
  return out;
}

Outcome criterion8() {
  Stopwatch clock;
  const auto corpus = deskCorpus(kDirectionSentences, kDirectionSeed);
  auto arch = ArchitectureConfig::desk();
  arch.vocabSize = corpus.bpe.vocabSize();
  auto cfg = TrainConfig::defaults(Mode::Arae);
  cfg.epochs = kDirectionEpochs;
  cfg.checkpointEvery = 0;

  SalsaModel untrained(arch, Mode::Arae, cfg.seed);
  SalsaModel model(arch, Mode::Arae, cfg.seed);
  Trainer trainer(model, cfg, corpus.sequences);
  trainer.setEpochCallback([&](const EpochSummary& s) {
    std::fprintf(
        stderr,
        "  epoch %zu rec %.4f acc %.4f critic %.4f gen %.4f (%.0fs)\n",
        s.epoch,
        s.means.at("ae/rec"),
        s.means.at("ae/acc"),
        s.means.at("critic/critic"),
        s.means.at("gen/gen"),
        clock.seconds());
  });
  trainer.train();

  std::vector<Sentence> test;
  for (const auto& line : heldOut(corpus.bpe, kDirectionSamples, kDirectionSeed + 1)) {
    test.push_back(corpus.bpe.encode(line));
  }
  const auto before = sampleSentences(untrained, kDirectionSamples, 99);
  const auto after = sampleSentences(model, kDirectionSamples, 99);
  for (std::size_t i = 0; i < 5; ++i) {
    std::fprintf(stderr, "  sample: %s\n", corpus.bpe.decode(after[i]).c_str());
  }
  const LmConfig lm;
  const auto vocab = corpus.bpe.vocabSize();
  const double pplBefore = reversePerplexity(before, test, vocab, lm, 3);
  const double pplAfter = reversePerplexity(after, test, vocab, lm, 3);
  const double ceiling = selfBleu(std::vector<Sentence>(kDirectionSamples, after.front()), 2);
  const double diversity = selfBleu(after, 2);
  const double seconds = clock.seconds();

  Outcome out;
  out.pass = pplAfter <= (1.0 - kDirectionGain) * pplBefore &&
      diversity <= ceiling - kDirectionSelfBleuMargin && seconds < kDirectionSeconds;
  out.detail = fmt("reverse ppl %.1f vs untrained %.1f", pplAfter, pplBefore) +
      fmt(", Self-BLEU-2 %.4f vs ceiling %.4f", diversity, ceiling) + fmt(", %.0fs", seconds);
  return out;
}

Outcome criterion9() {
  namespace fs = std::filesystem;
  const auto corpus = deskCorpus(kOverfitSentences, kOverfitSeed);
  Outcome out{true, ""};
  for (const auto mode : {Mode::Aae, Mode::Arae}) {
    const auto name = modeName(mode);
    const auto a = scratchDir(name + "-a");
    const auto b = scratchDir(name + "-b");
    const auto c = scratchDir(name + "-c");
    const auto runA = runOverfit(mode, corpus, kOverfitEpochs, kOverfitAccuracy, a, kReproSaveEvery);
    const auto runB = runOverfit(mode, corpus, kOverfitEpochs, kOverfitAccuracy, b, kReproSaveEvery);

    std::size_t files = 0;
    std::size_t differing = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto file = entry.path().filename();
      if (file == "train.csv") {
        continue;
      }
      ++files;
      if (!fs::exists(fs::path(b) / file) || readFile(entry.path().string()) != readFile((fs::path(b) / file).string())) {
        ++differing;
      }
    }
    const auto logA = withoutWallTime(readFile((fs::path(a) / "train.csv").string()));
    const bool logsEqual = runA.epochs == runB.epochs && !logA.empty() &&
        logA == withoutWallTime(readFile((fs::path(b) / "train.csv").string()));

    const std::size_t resumeEpoch = (runA.epochs - 1) / kReproSaveEvery * kReproSaveEvery;
    bool resumed = false;
    if (resumeEpoch > 0) {
      const auto mid = Trainer::checkpointName(resumeEpoch);
      fs::copy_file(fs::path(a) / mid, fs::path(c) / mid);
      fs::copy_file(fs::path(a) / "train.csv", fs::path(c) / "train.csv");
      const auto runC = runOverfit(
          mode, corpus, kOverfitEpochs, kOverfitAccuracy, c, kReproSaveEvery, (fs::path(c) / mid).string());
      resumed = runC.epochs == runA.epochs &&
          withoutWallTime(readFile((fs::path(c) / "train.csv").string())) == logA &&
          readFile(runC.lastCheckpoint) == readFile(runA.lastCheckpoint);
    }
    const bool ok = files > 0 && differing == 0 && logsEqual && resumed;
    out.pass = out.pass && ok;
    out.detail += name + fmt(": %.0f checkpoints, %.0f differ", files, differing) +
        (logsEqual ? ", logs equal" : ", logs differ") +
        fmt(", resume from epoch %.0f of %.0f ", resumeEpoch, runA.epochs) + (resumed ? "reproduced" : "diverged") +
        "; ";
  }
  return out;
}

} // namespace acceptance
