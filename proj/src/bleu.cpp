#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "salsa/bpe.h"
#include "salsa/error.h"
#include "salsa/metrics.h"

namespace salsa {

namespace {

void requireOrder(std::size_t maxN) {
  if (maxN < 1 || maxN > kMaxBleuOrder) {
    throw ConfigError("bleu: order must be in [1, 5]");
  }
}

std::size_t closestLength(const std::map<std::size_t, std::size_t>& lengths, std::size_t c) {
  std::size_t best = 0;
  std::size_t bestDiff = std::numeric_limits<std::size_t>::max();
  for (const auto& [len, n] : lengths) {
    if (n == 0) {
      continue;
    }
    const auto diff = len > c ? len - c : c - len;
    if (diff < bestDiff) {
      bestDiff = diff;
      best = len;
    }
  }
  return best;
}

double combine(
    const std::array<double, kMaxBleuOrder>& matched,
    const std::array<double, kMaxBleuOrder>& total,
    std::size_t maxN,
    double c,
    double r) {
  double logSum = 0.0;
  for (std::size_t n = 0; n < maxN; ++n) {
    const double p = matched[n] > 0.0 ? matched[n] / total[n] : kBleuSmoothing;
    logSum += std::log(p);
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(logSum / static_cast<double>(maxN));
}

// Largest and second-largest count of one n-gram over the reference set.
struct TopCounts {
  std::size_t first = 0;
  std::size_t firstOwner = std::numeric_limits<std::size_t>::max();
  std::size_t second = 0;

  void add(std::size_t count, std::size_t owner) {
    if (count > first) {
      second = first;
      first = count;
      firstOwner = owner;
    } else if (count > second) {
      second = count;
    }
  }
  std::size_t excluding(std::size_t owner) const {
    return owner == firstOwner ? second : first;
  }
};

} // namespace

NGramCounts NGramCounts::of(const Sentence& s, std::size_t maxN) {
  requireOrder(maxN);
  NGramCounts out;
  for (std::size_t n = 1; n <= maxN; ++n) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      ++out.orders[n - 1][std::vector<int>(s.begin() + i, s.begin() + i + n)];
    }
  }
  return out;
}

double bleu(
    const std::vector<Sentence>& hypotheses,
    const std::vector<Sentence>& references,
    std::size_t maxN) {
  requireOrder(maxN);
  if (hypotheses.empty()) {
    throw InputError("bleu: empty hypothesis set");
  }
  if (references.empty()) {
    throw InputError("bleu: empty reference set");
  }
  std::array<std::map<std::vector<int>, std::size_t>, kMaxBleuOrder> maxRef;
  std::map<std::size_t, std::size_t> refLengths;
  for (const auto& ref : references) {
    ++refLengths[ref.size()];
    const auto counts = NGramCounts::of(ref, maxN);
    for (std::size_t n = 0; n < maxN; ++n) {
      for (const auto& [gram, k] : counts.orders[n]) {
        auto& slot = maxRef[n][gram];
        slot = std::max(slot, k);
      }
    }
  }
  std::array<double, kMaxBleuOrder> matched{};
  std::array<double, kMaxBleuOrder> total{};
  double c = 0.0;
  double r = 0.0;
  for (const auto& hyp : hypotheses) {
    c += static_cast<double>(hyp.size());
    r += static_cast<double>(closestLength(refLengths, hyp.size()));
    const auto counts = NGramCounts::of(hyp, maxN);
    for (std::size_t n = 0; n < maxN; ++n) {
      for (const auto& [gram, k] : counts.orders[n]) {
        const auto it = maxRef[n].find(gram);
        matched[n] += static_cast<double>(std::min(k, it == maxRef[n].end() ? 0 : it->second));
        total[n] += static_cast<double>(k);
      }
    }
  }
  return combine(matched, total, maxN, c, r);
}

double selfBleu(const std::vector<Sentence>& sentences, std::size_t maxN) {
  requireOrder(maxN);
  if (sentences.size() < 2) {
    throw InputError("selfBleu: needs at least two sentences");
  }
  std::vector<NGramCounts> counts;
  counts.reserve(sentences.size());
  std::array<std::map<std::vector<int>, TopCounts>, kMaxBleuOrder> top;
  std::map<std::size_t, std::size_t> lengths;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    ++lengths[sentences[i].size()];
    counts.push_back(NGramCounts::of(sentences[i], maxN));
    for (std::size_t n = 0; n < maxN; ++n) {
      for (const auto& [gram, k] : counts.back().orders[n]) {
        top[n][gram].add(k, i);
      }
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto len = sentences[i].size();
    --lengths[len];
    const double r = static_cast<double>(closestLength(lengths, len));
    ++lengths[len];
    std::array<double, kMaxBleuOrder> matched{};
    std::array<double, kMaxBleuOrder> total{};
    for (std::size_t n = 0; n < maxN; ++n) {
      for (const auto& [gram, k] : counts[i].orders[n]) {
        matched[n] += static_cast<double>(std::min(k, top[n].at(gram).excluding(i)));
        total[n] += static_cast<double>(k);
      }
    }
    sum += combine(matched, total, maxN, static_cast<double>(len), r);
  }
  return sum / static_cast<double>(sentences.size());
}

std::vector<Sentence> tokenizeForBleu(
    const std::vector<std::string>& text,
    BleuUnit unit,
    const BpeModel& bpe,
    std::map<std::string, int>& dictionary) {
  std::vector<Sentence> out;
  out.reserve(text.size());
  for (const auto& line : text) {
    if (unit == BleuUnit::Bpe) {
      out.push_back(bpe.encode(line));
      continue;
    }
    Sentence s;
    for (const auto& w : BpeModel::words(line)) {
      const auto it = dictionary.emplace(w, static_cast<int>(dictionary.size())).first;
      s.push_back(it->second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace salsa
