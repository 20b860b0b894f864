#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "salsa/checkpoint.h"
#include "salsa/data.h"
#include "salsa/model.h"
#include "salsa/optim.h"
#include "salsa/rng.h"

namespace salsa {

struct TrainConfig {
  Mode mode = Mode::Aae;
  /// Weight of the encoder-adversarial cost.
  double lambda = 20.0;
  double lrAe = 1e-3;
  double lrGan = 1e-4;
  double beta1Ae = 0.9;
  double beta1Gan = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batchSize = 64;
  std::size_t epochs = 10;
  /// Critic steps per generator step (ARAE).
  std::size_t nCritic = 5;
  std::uint64_t seed = 7;
  /// Epochs between checkpoints; 0 disables them.
  std::size_t checkpointEvery = 1;
  /// Global gradient-norm clip for autoencoder phases.
  double clipNorm = 5.0;
  /// ARAE input noise.
  double wordDrop = 0.1;
  std::size_t maxShift = 3;

  /// Defaults for a mode: lambda 20 for AAE, 1 for ARAE.
  static TrainConfig defaults(Mode mode);
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LogRow {
  std::size_t step = 0;
  std::string phase;
  std::string loss;
  double value = 0.0;
  double wallTime = 0.0;
};

/// CSV header and row format of the training log.
std::string logHeader();
std::string formatLogRow(const LogRow& row);

struct EpochSummary {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  /// Mean of each logged quantity over the epoch, keyed by "phase/loss".
  std::map<std::string, double> means;
};

/// Runs the AAE or ARAE schedule over a padded corpus.
///
/// AAE, per batch: (1) encoder + decoder on the reconstruction cost;
/// (2) discriminator on prior samples against detached codes; (3) encoder on
/// lambda times the encoder-adversarial cost.
/// ARAE, per batch: (1) encoder + decoder reconstructing clean targets from
/// noised inputs; (2) nCritic critic steps, each with fresh generator noise,
/// against detached clean codes; (3) encoder on lambda * mean f(enc(x));
/// (4) generator on -mean f(G(z)).
///
/// Every phase owns a separate Adam instance, so a phase only ever updates
/// its own parameters.
class Trainer {
 public:
  Trainer(SalsaModel& model, TrainConfig cfg, std::vector<TokenSequence> corpus);

  /// Trains until `cfg.epochs` epochs are done, writing a checkpoint to
  /// checkpointDir (when set) every checkpointEvery epochs.
  void train();
  EpochSummary runEpoch();

  std::size_t epoch() const {
    return epoch_;
  }
  std::size_t step() const {
    return step_;
  }
  const TrainConfig& config() const {
    return cfg_;
  }
  SalsaModel& model() {
    return model_;
  }
  const std::vector<LogRow>& log() const {
    return log_;
  }

  /// Log rows are also appended to this CSV file. Rows past the current
  /// step are cut from it, here and on every restore.
  void setLogPath(const std::string& path);
  void setCheckpointDir(const std::string& dir) {
    checkpointDir_ = dir;
  }
  void setEpochCallback(std::function<void(const EpochSummary&)> fn) {
    onEpoch_ = std::move(fn);
  }
  /// Extra text sections stored in every checkpoint (e.g. the BPE model).
  void setAttachment(const std::string& name, std::string text) {
    attachments_[name] = std::move(text);
  }
  const std::map<std::string, std::string>& attachments() const {
    return attachments_;
  }

  CheckpointFile snapshot() const;
  void save(const std::string& path) const;
  /// Restores a snapshot taken from a trainer with identical configuration.
  void restore(const CheckpointFile& file);
  void load(const std::string& path);

  static std::string checkpointName(std::size_t epoch);
  /// Highest-epoch checkpoint in dir, or "" if none.
  static std::string latestCheckpoint(const std::string& dir);

 private:
  void aaeStep(const Batch& batch);
  void araeStep(const Batch& batch);
  void truncateLog() const;
  void record(const char* phase, const char* loss, double value);
  void requireFinite(const char* phase, const Tensor& loss);
  std::vector<Adam*> optimizers() const;

  SalsaModel& model_;
  TrainConfig cfg_;
  std::vector<TokenSequence> corpus_;

  Rng dataRng_;
  Rng noiseRng_;
  Rng dropoutRng_;

  std::unique_ptr<Adam> aeOpt_;
  std::unique_ptr<Adam> discOpt_;
  std::unique_ptr<Adam> encAdvOpt_;
  std::unique_ptr<Adam> genOpt_;

  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
  std::vector<LogRow> log_;
  std::string logPath_;
  std::string checkpointDir_;
  std::map<std::string, std::string> attachments_;
  std::function<void(const EpochSummary&)> onEpoch_;
  double startTime_ = 0.0;
};

/// Model parameters, spectral-norm states and configuration sections of a
/// snapshot; used by Trainer and for loading a model to sample from.
void storeModel(const SalsaModel& model, CheckpointFile& file);
/// DimensionError naming the parameter when shapes disagree.
void restoreModel(SalsaModel& model, const CheckpointFile& file);

struct LoadedModel {
  std::unique_ptr<SalsaModel> model;
  TrainConfig train;
  CheckpointFile file;
};
/// Rebuilds a model from the configuration stored in a checkpoint.
LoadedModel loadModel(const std::string& path);

} // namespace salsa
