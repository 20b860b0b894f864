#include "salsa/data.h"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "salsa/bpe.h"
#include "salsa/error.h"
#include "salsa/rng.h"

namespace salsa {

TokenSequence TokenSequence::fromTokens(std::span<const int> tokens, std::size_t maxLen) {
  if (tokens.empty()) {
    throw InputError("TokenSequence: empty sentence");
  }
  if (tokens.size() > maxLen) {
    throw InputError(
        "TokenSequence: " + std::to_string(tokens.size()) + " tokens exceed length " +
        std::to_string(maxLen));
  }
  TokenSequence seq;
  seq.ids.assign(maxLen, kPadId);
  std::copy(tokens.begin(), tokens.end(), seq.ids.begin());
  seq.length = tokens.size();
  return seq;
}

std::vector<int> TokenSequence::tokens() const {
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(length)};
}

std::vector<std::uint8_t> TokenSequence::mask() const {
  std::vector<std::uint8_t> m(ids.size(), 0);
  std::fill_n(m.begin(), length, 1);
  return m;
}

void TokenSequence::validate(std::size_t vocabSize) const {
  if (length == 0 || length > ids.size()) {
    throw ContractError("TokenSequence: length " + std::to_string(length) + " out of range");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (i >= length && id != kPadId) {
      throw ContractError("TokenSequence: non-pad id in the padding region");
    }
    if (id < 0 || static_cast<std::size_t>(id) >= vocabSize) {
      throw IndexError(
          "TokenSequence: id " + std::to_string(id) + " outside vocabulary of " +
          std::to_string(vocabSize));
    }
  }
}

std::vector<std::string> filterCorpus(
    const std::vector<std::string>& sentences,
    const BpeModel& bpe,
    std::size_t maxTokens) {
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    const auto n = bpe.encode(s).size();
    if (n >= 1 && n <= maxTokens) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<TokenSequence> encodeCorpus(
    const std::vector<std::string>& sentences,
    const BpeModel& bpe,
    std::size_t maxLen) {
  std::vector<TokenSequence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    out.push_back(TokenSequence::fromTokens(bpe.encode(s), maxLen));
  }
  return out;
}

TokenSequence applyWordNoise(
    const TokenSequence& seq,
    double pDrop,
    std::size_t maxShift,
    Rng& rng) {
  if (!(pDrop >= 0.0 && pDrop <= 1.0)) {
    throw ContractError("applyWordNoise: p_drop must be in [0, 1]");
  }
  TokenSequence out = seq;
  const auto n = seq.length;
  for (std::size_t i = 0; i < n; ++i) {
    if (pDrop > 0.0 && rng.uniform() < pDrop) {
      out.ids[i] = kUnkId;
    }
  }
  if (maxShift == 0 || n < 2) {
    return out;
  }
  const auto k = static_cast<std::int64_t>(maxShift);
  std::vector<std::pair<std::int64_t, std::size_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = {static_cast<std::int64_t>(i) + rng.uniformRange(-k, k), i};
  }
  std::sort(keys.begin(), keys.end());
  std::vector<int> shuffled(n);
  for (std::size_t i = 0; i < n; ++i) {
    shuffled[i] = out.ids[keys[i].second];
  }
  std::copy(shuffled.begin(), shuffled.end(), out.ids.begin());
  return out;
}

std::vector<std::size_t> shuffledIndices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.uniformInt(i)]);
  }
  return idx;
}

std::vector<Batch> makeBatches(
    const std::vector<TokenSequence>& corpus,
    std::size_t batchSize,
    Rng& rng) {
  if (batchSize == 0) {
    throw ConfigError("makeBatches: batch_size must be >= 1");
  }
  const auto order = shuffledIndices(corpus.size(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batchSize) {
    Batch b;
    for (std::size_t i = start; i < std::min(order.size(), start + batchSize); ++i) {
      b.push_back(corpus[order[i]]);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<Batch> makeBatches(
    const std::vector<std::vector<int>>& corpus,
    std::size_t batchSize,
    std::size_t maxLen,
    Rng& rng) {
  std::vector<TokenSequence> padded;
  padded.reserve(corpus.size());
  for (const auto& ids : corpus) {
    padded.push_back(TokenSequence::fromTokens(ids, maxLen));
  }
  return makeBatches(padded, batchSize, rng);
}

std::vector<std::string> readLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") != std::string::npos) {
      lines.push_back(line);
    }
  }
  return lines;
}

void writeLines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path);
  }
  for (const auto& l : lines) {
    out << l << '\n';
  }
  if (!out) {
    throw InputError("failed writing " + path);
  }
}

} // namespace salsa
