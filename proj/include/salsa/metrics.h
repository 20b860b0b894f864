#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace salsa {

class BpeModel;

/// A tokenized sentence: BPE ids or word ids.
using Sentence = std::vector<int>;

inline constexpr std::size_t kMaxBleuOrder = 5;

/// n-gram counts of one sentence, orders 1..kMaxBleuOrder.
struct NGramCounts {
  std::array<std::map<std::vector<int>, std::size_t>, kMaxBleuOrder> orders;

  static NGramCounts of(const Sentence& s, std::size_t maxN = kMaxBleuOrder);
  const std::map<std::vector<int>, std::size_t>& order(std::size_t n) const {
    return orders.at(n - 1);
  }
};

/// Floor used in place of a zero n-gram precision.
inline constexpr double kBleuSmoothing = 1e-9;

/// Corpus BLEU-maxN of `hypotheses` against the whole reference set. Each
/// hypothesis n-gram count is clipped by its largest count in any single
/// reference; the effective reference length of a hypothesis is the closest
/// reference length, ties to the shorter one. Zero precisions become
/// kBleuSmoothing; the brevity penalty is exp(1 - r / c) when c < r.
double bleu(
    const std::vector<Sentence>& hypotheses,
    const std::vector<Sentence>& references,
    std::size_t maxN);

/// Mean over i of bleu({s_i}, S \ {s_i}, maxN).
double selfBleu(const std::vector<Sentence>& sentences, std::size_t maxN);

enum class BleuUnit { Bpe, Word };

/// Tokenizes for BLEU: BPE ids, or word ids from a dictionary shared by
/// every call on the same `dictionary`.
std::vector<Sentence> tokenizeForBleu(
    const std::vector<std::string>& text,
    BleuUnit unit,
    const BpeModel& bpe,
    std::map<std::string, int>& dictionary);

struct MetricReport {
  std::array<double, kMaxBleuOrder> bleu{};
  std::array<double, kMaxBleuOrder> selfBleu{};
  double perplexity = 0.0;
  double reversePerplexity = 0.0;

  /// "metric,value" rows: BLEU-1..5, Self BLEU-1..5, Perplexity, Reverse perplexity.
  std::string toCsv() const;
  /// The same rows as an aligned text table.
  std::string toTable(const std::string& title) const;
};

} // namespace salsa
