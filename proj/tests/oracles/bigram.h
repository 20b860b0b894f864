#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "salsa/data.h"
#include "salsa/lm.h"

namespace oracle {

/// Hand-specified p(next | previous) table; missing entries are an error.
class BigramScorer : public salsa::SequenceScorer {
 public:
  explicit BigramScorer(std::map<std::pair<int, int>, double> table) : table_(std::move(table)) {}

  std::vector<double> sentenceNll(const std::vector<salsa::Sentence>& sentences) const override {
    std::vector<double> out;
    for (const auto& s : sentences) {
      double nll = 0.0;
      int prev = salsa::kStartId;
      for (const int t : s) {
        nll -= std::log(table_.at({prev, t}));
        prev = t;
      }
      out.push_back(nll - std::log(table_.at({prev, salsa::kEndId})));
    }
    return out;
  }

 private:
  std::map<std::pair<int, int>, double> table_;
};

} // namespace oracle
