#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "salsa/bpe.h"
#include "salsa/data.h"
#include "salsa/model.h"
#include "salsa/train.h"

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct DeskCorpus {
  salsa::BpeModel bpe;
  std::vector<std::string> sentences;
  std::vector<salsa::TokenSequence> sequences;
};

/// Synthetic sentences that fit the desk preset, tokenized by a BPE model
/// trained on a fixed 5000-sentence corpus. Takes the first `count` that fit.
DeskCorpus deskCorpus(std::size_t count, std::uint64_t seed);
/// Same BPE, sentences drawn from another seed (for held-out text).
std::vector<std::string> heldOut(const salsa::BpeModel& bpe, std::size_t count, std::uint64_t seed);

salsa::TrainConfig overfitConfig(salsa::Mode mode);

struct OverfitRun {
  std::size_t epochs = 0;
  double accuracy = 0.0;
  bool diverged = false;
  double seconds = 0.0;
  std::vector<salsa::LogRow> log;
  std::string lastCheckpoint;
};

/// Trains the desk preset on `corpus` until teacher-forced accuracy reaches
/// `target` or `maxEpochs` pass. With a directory, saves a checkpoint every
/// `saveEvery` epochs and after the last one, and writes the CSV log there.
/// A `resumeFrom` checkpoint is loaded before training continues.
OverfitRun runOverfit(
    salsa::Mode mode,
    const DeskCorpus& corpus,
    std::size_t maxEpochs,
    double target,
    const std::string& dir = "",
    std::size_t saveEvery = 0,
    const std::string& resumeFrom = "");

std::string readFile(const std::string& path);
std::string scratchDir(const std::string& name);

Outcome criterion1();
Outcome criterion2();
Outcome criterion3();
Outcome criterion4();
Outcome criterion5();
Outcome criterion6();
Outcome criterion7();
Outcome criterion8();
Outcome criterion9();

} // namespace acceptance
