#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace salsa {

/// Byte-pair encoder over Unicode code points. Each whitespace-separated word
/// is prefixed by the marker U+2581 and merges never cross word boundaries.
///
/// Ids 0-3 are reserved (pad, start, end, unk); base symbols follow in byte
/// order, then merged tokens in the order they were learned. A merge that
/// reproduces an existing token string reuses its id.
class BpeModel {
 public:
  static constexpr const char* kWordMarker = "\xe2\x96\x81";

  BpeModel() = default;

  /// Greedy merges of the most frequent adjacent pair until the vocabulary
  /// (reserved ids included) reaches targetVocab or no pair is left. Count
  /// ties go to the lexicographically smallest (left, right) pair.
  static BpeModel train(const std::vector<std::string>& corpus, std::size_t targetVocab);

  std::vector<int> encode(const std::string& text) const;
  /// Concatenates tokens, dropping reserved ids, and turns word markers back
  /// into single spaces.
  std::string decode(std::span<const int> ids) const;

  std::size_t vocabSize() const {
    return tokens_.size();
  }
  const std::string& token(int id) const;
  /// Id of a token string, or unk.
  int tokenId(const std::string& token) const;

  const std::vector<std::string>& baseSymbols() const {
    return base_;
  }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }

  std::string serialize() const;
  static BpeModel deserialize(const std::string& text);
  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

  bool operator==(const BpeModel& other) const {
    return base_ == other.base_ && merges_ == other.merges_;
  }

  /// Whitespace-normalized words, each with the word marker prepended.
  static std::vector<std::string> words(const std::string& text);
  /// UTF-8 code points of a string; invalid bytes are kept one by one.
  static std::vector<std::string> codePoints(const std::string& text);

 private:
  void build(std::vector<std::string> base, std::vector<std::pair<std::string, std::string>> merges);

  std::vector<std::string> base_;
  std::vector<std::pair<std::string, std::string>> merges_;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  struct MergeRule {
    std::size_t rank;
    int result;
  };
  std::unordered_map<std::uint64_t, MergeRule> rules_;
};

} // namespace salsa
