#include "salsa/bpe.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "salsa/data.h"
#include "salsa/error.h"

namespace salsa {

namespace {

const char* const kHeader = "#salsa-bpe v1";
const char* const kReservedNames[] = {"<pad>", "<s>", "</s>", "<unk>"};

std::uint64_t pairKey(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
      static_cast<std::uint32_t>(b);
}

bool isSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

std::vector<std::string> BpeModel::codePoints(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
    } else if (c >= 0xE0) {
      len = c < 0xF0 ? 3 : 1;
    } else if (c >= 0xC0) {
      len = 2;
    }
    if (i + len > text.size()) {
      len = 1;
    }
    for (std::size_t j = 1; j < len; ++j) {
      if ((static_cast<unsigned char>(text[i + j]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> BpeModel::words(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && isSpace(text[i])) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() && !isSpace(text[j])) {
      ++j;
    }
    if (j > i) {
      out.push_back(kWordMarker + text.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

void BpeModel::build(
    std::vector<std::string> base,
    std::vector<std::pair<std::string, std::string>> merges) {
  base_ = std::move(base);
  merges_ = std::move(merges);
  tokens_.clear();
  ids_.clear();
  rules_.clear();
  auto intern = [this](const std::string& tok) {
    auto [it, inserted] = ids_.emplace(tok, static_cast<int>(tokens_.size()));
    if (inserted) {
      tokens_.push_back(tok);
    }
    return it->second;
  };
  for (const auto* name : kReservedNames) {
    tokens_.emplace_back(name);
  }
  for (const auto& sym : base_) {
    if (ids_.count(sym)) {
      throw InputError("bpe: duplicate base symbol '" + sym + "'");
    }
    intern(sym);
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [a, b] = merges_[r];
    const auto ia = ids_.find(a);
    const auto ib = ids_.find(b);
    if (ia == ids_.end() || ib == ids_.end()) {
      throw InputError("bpe: merge " + std::to_string(r) + " uses an unknown token");
    }
    const auto key = pairKey(ia->second, ib->second);
    const int result = intern(a + b);
    rules_.emplace(key, MergeRule{r, result});
  }
}

BpeModel BpeModel::train(const std::vector<std::string>& corpus, std::size_t targetVocab) {
  std::map<std::string, std::size_t> wordCounts;
  for (const auto& line : corpus) {
    for (auto& w : words(line)) {
      ++wordCounts[w];
    }
  }
  if (wordCounts.empty()) {
    throw InputError("bpe: empty corpus");
  }
  std::set<std::string> baseSet;
  std::vector<std::pair<std::vector<std::string>, std::size_t>> segmented;
  for (const auto& [w, n] : wordCounts) {
    auto cps = codePoints(w);
    baseSet.insert(cps.begin(), cps.end());
    segmented.emplace_back(std::move(cps), n);
  }
  std::vector<std::string> base(baseSet.begin(), baseSet.end());
  if (targetVocab < base.size() + kReservedTokens) {
    throw ConfigError(
        "bpe: vocabulary size " + std::to_string(targetVocab) + " is below the " +
        std::to_string(base.size() + kReservedTokens) + " base and reserved symbols");
  }

  std::set<std::string> vocab(base.begin(), base.end());
  std::vector<std::pair<std::string, std::string>> merges;
  while (vocab.size() + kReservedTokens < targetVocab) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairCounts;
    for (const auto& [syms, n] : segmented) {
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        pairCounts[{syms[i], syms[i + 1]}] += n;
      }
    }
    if (pairCounts.empty()) {
      break;
    }
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    auto best = pairCounts.begin();
    for (auto it = pairCounts.begin(); it != pairCounts.end(); ++it) {
      if (it->second > best->second) {
        best = it;
      }
    }
    const auto [a, b] = best->first;
    const auto merged = a + b;
    for (auto& [syms, n] : segmented) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms = std::move(next);
    }
    merges.emplace_back(a, b);
    vocab.insert(merged);
  }
  BpeModel model;
  model.build(std::move(base), std::move(merges));
  return model;
}

std::vector<int> BpeModel::encode(const std::string& text) const {
  std::vector<int> out;
  std::vector<int> syms;
  for (const auto& w : words(text)) {
    syms.clear();
    for (const auto& cp : codePoints(w)) {
      const auto it = ids_.find(cp);
      syms.push_back(it == ids_.end() ? kUnkId : it->second);
    }
    // Applying the lowest-ranked applicable merge above the last one applied
    // is the same as replaying the merge list in order.
    std::size_t floor = 0;
    bool any = true;
    while (any && syms.size() > 1) {
      any = false;
      std::size_t bestRank = std::numeric_limits<std::size_t>::max();
      int bestResult = -1;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const auto it = rules_.find(pairKey(syms[i], syms[i + 1]));
        if (it != rules_.end() && it->second.rank >= floor && it->second.rank < bestRank) {
          bestRank = it->second.rank;
          bestResult = it->second.result;
        }
      }
      if (bestResult < 0) {
        break;
      }
      const auto& [a, b] = merges_[bestRank];
      const int ia = ids_.at(a);
      const int ib = ids_.at(b);
      std::size_t j = 0;
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == ia && syms[i + 1] == ib) {
          syms[j++] = bestResult;
          ++i;
        } else {
          syms[j++] = syms[i];
        }
      }
      syms.resize(j);
      floor = bestRank + 1;
      any = true;
    }
    out.insert(out.end(), syms.begin(), syms.end());
  }
  return out;
}

std::string BpeModel::decode(std::span<const int> ids) const {
  std::string joined;
  for (int id : ids) {
    if (id < kReservedTokens || static_cast<std::size_t>(id) >= tokens_.size()) {
      continue;
    }
    joined += tokens_[id];
  }
  std::string out;
  const std::string marker = kWordMarker;
  std::size_t i = 0;
  while (i < joined.size()) {
    if (joined.compare(i, marker.size(), marker) == 0) {
      if (!out.empty()) {
        out += ' ';
      }
      i += marker.size();
    } else {
      out += joined[i++];
    }
  }
  return out;
}

const std::string& BpeModel::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("bpe: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

int BpeModel::tokenId(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

std::string BpeModel::serialize() const {
  std::ostringstream os;
  os << kHeader << '\n' << "base " << base_.size() << '\n';
  for (const auto& s : base_) {
    os << s << '\n';
  }
  os << "merges " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) {
    os << a << ' ' << b << '\n';
  }
  return os.str();
}

BpeModel BpeModel::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(is, line)) {
      throw InputError(std::string("bpe file: truncated before ") + what);
    }
    return line;
  };
  if (next("header") != kHeader) {
    throw InputError("bpe file: bad header");
  }
  auto count = [&](const std::string& prefix) {
    const auto l = next(prefix.c_str());
    if (l.rfind(prefix + " ", 0) != 0) {
      throw InputError("bpe file: expected '" + prefix + " <n>'");
    }
    try {
      return static_cast<std::size_t>(std::stoull(l.substr(prefix.size() + 1)));
    } catch (const std::logic_error&) {
      throw InputError("bpe file: bad count in '" + l + "'");
    }
  };
  std::vector<std::string> base(count("base"));
  for (auto& s : base) {
    s = next("base symbols");
    if (s.empty()) {
      throw InputError("bpe file: empty base symbol");
    }
  }
  std::vector<std::pair<std::string, std::string>> merges(count("merges"));
  for (auto& m : merges) {
    const auto l = next("merges");
    const auto sp = l.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= l.size() ||
        l.find(' ', sp + 1) != std::string::npos) {
      throw InputError("bpe file: bad merge line '" + l + "'");
    }
    m = {l.substr(0, sp), l.substr(sp + 1)};
  }
  BpeModel model;
  model.build(std::move(base), std::move(merges));
  return model;
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("bpe: cannot write " + path);
  }
  out << serialize();
  if (!out) {
    throw InputError("bpe: failed writing " + path);
  }
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("bpe: cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

} // namespace salsa
