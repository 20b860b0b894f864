#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

// Brute-force BLEU: every count is a fresh scan, no maps, no caching.
namespace oracle {

using Tokens = std::vector<int>;

inline bool sameGram(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    if (a[i + k] != b[j + k]) {
      return false;
    }
  }
  return true;
}

inline std::size_t occurrences(const Tokens& s, const Tokens& gramSource, std::size_t at, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t j = 0; j + n <= s.size(); ++j) {
    if (sameGram(s, j, gramSource, at, n)) {
      ++count;
    }
  }
  return count;
}

inline double naiveBleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, std::size_t maxN) {
  double matched[5] = {0, 0, 0, 0, 0};
  double total[5] = {0, 0, 0, 0, 0};
  double c = 0.0;
  double r = 0.0;
  for (const auto& h : hyps) {
    c += static_cast<double>(h.size());
    std::size_t bestLen = 0;
    std::size_t bestDiff = static_cast<std::size_t>(-1);
    for (const auto& ref : refs) {
      const std::size_t diff = ref.size() > h.size() ? ref.size() - h.size() : h.size() - ref.size();
      if (diff < bestDiff || (diff == bestDiff && ref.size() < bestLen)) {
        bestDiff = diff;
        bestLen = ref.size();
      }
    }
    r += static_cast<double>(bestLen);
    for (std::size_t n = 1; n <= maxN; ++n) {
      for (std::size_t i = 0; i + n <= h.size(); ++i) {
        total[n - 1] += 1.0;
        bool seenBefore = false;
        for (std::size_t j = 0; j < i; ++j) {
          if (sameGram(h, j, h, i, n)) {
            seenBefore = true;
          }
        }
        if (seenBefore) {
          continue;
        }
        const std::size_t own = occurrences(h, h, i, n);
        std::size_t best = 0;
        for (const auto& ref : refs) {
          best = std::max(best, occurrences(ref, h, i, n));
        }
        matched[n - 1] += static_cast<double>(std::min(own, best));
      }
    }
  }
  double logSum = 0.0;
  for (std::size_t n = 0; n < maxN; ++n) {
    logSum += std::log(matched[n] > 0.0 ? matched[n] / total[n] : 1e-9);
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(logSum / static_cast<double>(maxN));
}

inline double naiveSelfBleu(const std::vector<Tokens>& s, std::size_t maxN) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<Tokens> rest;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i) {
        rest.push_back(s[j]);
      }
    }
    sum += naiveBleu({s[i]}, rest, maxN);
  }
  return sum / static_cast<double>(s.size());
}

} // namespace oracle
