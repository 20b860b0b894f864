#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace salsa {

class BpeModel;
class Rng;

inline constexpr int kPadId = 0;
inline constexpr int kStartId = 1;
inline constexpr int kEndId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kReservedTokens = 4;

/// Fixed-length token ids: `length` real tokens followed by padding.
struct TokenSequence {
  std::vector<int> ids;
  std::size_t length = 0;

  /// Pads `tokens` to `maxLen`. Empty or over-long input is an InputError.
  static TokenSequence fromTokens(std::span<const int> tokens, std::size_t maxLen);

  std::size_t maxLen() const {
    return ids.size();
  }
  std::vector<int> tokens() const;
  /// 1 for real tokens, 0 for padding.
  std::vector<std::uint8_t> mask() const;
  void validate(std::size_t vocabSize) const;

  bool operator==(const TokenSequence&) const = default;
};

using Batch = std::vector<TokenSequence>;

/// Keeps sentences whose BPE length (without start/end) is in [1, maxTokens].
std::vector<std::string> filterCorpus(
    const std::vector<std::string>& sentences,
    const BpeModel& bpe,
    std::size_t maxTokens);

/// Encodes and pads sentences; each must fit in maxLen tokens.
std::vector<TokenSequence> encodeCorpus(
    const std::vector<std::string>& sentences,
    const BpeModel& bpe,
    std::size_t maxLen);

/// Word dropout then bounded local shuffle. Each real token becomes unk with
/// probability pDrop; then position i is keyed by i + offset, offset uniform
/// in [-maxShift, maxShift], and tokens are stably sorted by (key, i). The
/// padding region is untouched.
TokenSequence applyWordNoise(
    const TokenSequence& seq,
    double pDrop,
    std::size_t maxShift,
    Rng& rng);

/// One epoch: a seeded shuffle of the corpus cut into batches of
/// `batchSize` (the last one may be smaller), sequences padded to maxLen.
std::vector<Batch> makeBatches(
    const std::vector<std::vector<int>>& corpus,
    std::size_t batchSize,
    std::size_t maxLen,
    Rng& rng);

/// Same, for already padded sequences.
std::vector<Batch> makeBatches(
    const std::vector<TokenSequence>& corpus,
    std::size_t batchSize,
    Rng& rng);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffledIndices(std::size_t n, Rng& rng);

/// Templated subject-verb-object sentences over a fixed lexicon of roughly
/// 500 words, for offline tests and demos.
std::vector<std::string> synthesizeCorpus(std::size_t count, std::uint64_t seed);

/// Lines of a UTF-8 file, trailing newline characters removed; blank lines dropped.
std::vector<std::string> readLines(const std::string& path);
void writeLines(const std::string& path, const std::vector<std::string>& lines);

} // namespace salsa
