#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "salsa/metrics.h"

namespace salsa {

namespace {

std::vector<std::pair<std::string, double>> rows(const MetricReport& r) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t n = 0; n < kMaxBleuOrder; ++n) {
    out.emplace_back("BLEU-" + std::to_string(n + 1), r.bleu[n]);
  }
  for (std::size_t n = 0; n < kMaxBleuOrder; ++n) {
    out.emplace_back("Self BLEU-" + std::to_string(n + 1), r.selfBleu[n]);
  }
  out.emplace_back("Perplexity", r.perplexity);
  out.emplace_back("Reverse perplexity", r.reversePerplexity);
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

} // namespace

std::string MetricReport::toCsv() const {
  std::string out = "metric,value\n";
  for (const auto& [name, v] : rows(*this)) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += name + "," + buf + "\n";
  }
  return out;
}

std::string MetricReport::toTable(const std::string& title) const {
  const auto all = rows(*this);
  std::size_t nameWidth = 6;
  for (const auto& [name, v] : all) {
    nameWidth = std::max(nameWidth, name.size());
  }
  std::vector<std::string> values;
  std::size_t valueWidth = title.size();
  for (std::size_t i = 0; i < all.size(); ++i) {
    values.push_back(fixed(all[i].second, i < 2 * kMaxBleuOrder ? 3 : 1));
    valueWidth = std::max(valueWidth, values.back().size());
  }
  const auto pad = [](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w - s.size(), ' ');
    return right ? fill + s : s + fill;
  };
  std::string out = pad("Metric", nameWidth, false) + " | " + pad(title, valueWidth, true) + "\n";
  out += std::string(nameWidth, '-') + "-+-" + std::string(valueWidth, '-') + "\n";
  for (std::size_t i = 0; i < all.size(); ++i) {
    out += pad(all[i].first, nameWidth, false) + " | " + pad(values[i], valueWidth, true) + "\n";
  }
  return out;
}

} // namespace salsa
