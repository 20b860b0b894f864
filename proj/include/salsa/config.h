#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "salsa/nn.h"
#include "salsa/train.h"

namespace salsa {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// "key = value" lines; blank lines and lines starting with '#' are ignored.
/// Malformed lines and repeated keys are ConfigErrors naming the line.
KeyValues parseKeyValues(const std::string& text);
std::string formatKeyValues(const KeyValues& kv);
/// Shortest decimal text that parses back to the same double.
std::string formatNumber(double v);

void appendArchitecture(const ArchitectureConfig& cfg, KeyValues& out);
void appendTrainConfig(const TrainConfig& cfg, KeyValues& out);
/// Return false for keys they do not own; ConfigError for bad values.
bool applyArchitectureKey(ArchitectureConfig& cfg, const std::string& key, const std::string& value);
bool applyTrainKey(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Everything a CLI run needs: network sizes, schedule, and file paths.
struct RunConfig {
  std::string preset = "desk";
  ArchitectureConfig arch;
  TrainConfig train;

  std::string corpus;
  std::string bpe;
  std::string checkpointDir;
  std::string log;
  std::size_t bpeVocab = 1000;
  /// Longest kept sentence, in BPE tokens.
  std::size_t maxTokens = 20;

  /// "desk" or "paper". The paper preset pins d_model 304, 8 heads, T 50,
  /// 3 + 3 blocks, lambda 20, noise 100 and 50 max tokens.
  static RunConfig forPreset(const std::string& name);
  void validate() const;
};

/// The preset is `presetOverride` if given, else the file's "preset" key,
/// else desk; the remaining keys are applied on top. Unknown keys are
/// rejected. Setting `mode` without `lambda` picks the mode's default lambda.
RunConfig parseRunConfig(const std::string& text, const std::string& presetOverride = "");
RunConfig loadRunConfig(const std::string& path, const std::string& presetOverride = "");

} // namespace salsa
