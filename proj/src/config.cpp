#include "salsa/config.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "salsa/error.h"

namespace salsa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parseCount(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parseReal(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

bool parseFlag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") {
    return true;
  }
  if (value == "false" || value == "0") {
    return false;
  }
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string count(std::size_t v) {
  return std::to_string(v);
}

} // namespace

std::string formatNumber(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

KeyValues parseKeyValues(const std::string& text) {
  KeyValues out;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineNo) + ": expected key = value");
    }
    auto key = trim(t.substr(0, eq));
    auto value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineNo) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(lineNo) + ": duplicate key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::string formatKeyValues(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k + " = " + v + "\n";
  }
  return out;
}

void appendArchitecture(const ArchitectureConfig& c, KeyValues& out) {
  out.emplace_back("d_model", count(c.dModel));
  out.emplace_back("n_heads", count(c.nHeads));
  out.emplace_back("n_blocks_ae", count(c.nBlocksAe));
  out.emplace_back("n_blocks_gan", count(c.nBlocksGan));
  out.emplace_back("d_ff", count(c.dFf));
  out.emplace_back("max_len", count(c.maxLen));
  out.emplace_back("d_code", count(c.dCode));
  out.emplace_back("d_noise", count(c.dNoise));
  out.emplace_back("vocab_size", count(c.vocabSize));
  out.emplace_back("dropout", formatNumber(c.dropout));
  out.emplace_back("layer_norm_eps", formatNumber(c.layerNormEps));
  out.emplace_back("gan_spectral_norm", c.ganSpectralNorm ? "true" : "false");
}

void appendTrainConfig(const TrainConfig& c, KeyValues& out) {
  out.emplace_back("mode", modeName(c.mode));
  out.emplace_back("lambda", formatNumber(c.lambda));
  out.emplace_back("lr_ae", formatNumber(c.lrAe));
  out.emplace_back("lr_gan", formatNumber(c.lrGan));
  out.emplace_back("beta1_ae", formatNumber(c.beta1Ae));
  out.emplace_back("beta1_gan", formatNumber(c.beta1Gan));
  out.emplace_back("beta2", formatNumber(c.beta2));
  out.emplace_back("eps", formatNumber(c.eps));
  out.emplace_back("batch_size", count(c.batchSize));
  out.emplace_back("epochs", count(c.epochs));
  out.emplace_back("n_critic", count(c.nCritic));
  out.emplace_back("seed", std::to_string(c.seed));
  out.emplace_back("checkpoint_every", count(c.checkpointEvery));
  out.emplace_back("clip_norm", formatNumber(c.clipNorm));
  out.emplace_back("word_drop", formatNumber(c.wordDrop));
  out.emplace_back("max_shift", count(c.maxShift));
}

bool applyArchitectureKey(ArchitectureConfig& c, const std::string& key, const std::string& v) {
  if (key == "d_model") {
    c.dModel = parseCount(key, v);
  } else if (key == "n_heads") {
    c.nHeads = parseCount(key, v);
  } else if (key == "n_blocks_ae") {
    c.nBlocksAe = parseCount(key, v);
  } else if (key == "n_blocks_gan") {
    c.nBlocksGan = parseCount(key, v);
  } else if (key == "d_ff") {
    c.dFf = parseCount(key, v);
  } else if (key == "max_len") {
    c.maxLen = parseCount(key, v);
  } else if (key == "d_code") {
    c.dCode = parseCount(key, v);
  } else if (key == "d_noise") {
    c.dNoise = parseCount(key, v);
  } else if (key == "vocab_size") {
    c.vocabSize = parseCount(key, v);
  } else if (key == "dropout") {
    c.dropout = parseReal(key, v);
  } else if (key == "layer_norm_eps") {
    c.layerNormEps = parseReal(key, v);
  } else if (key == "gan_spectral_norm") {
    c.ganSpectralNorm = parseFlag(key, v);
  } else {
    return false;
  }
  return true;
}

bool applyTrainKey(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "mode") {
    try {
      c.mode = parseMode(v);
    } catch (const ConfigError&) {
      throw ConfigError("mode: expected AAE or ARAE, got '" + v + "'");
    }
  } else if (key == "lambda") {
    c.lambda = parseReal(key, v);
  } else if (key == "lr_ae") {
    c.lrAe = parseReal(key, v);
  } else if (key == "lr_gan") {
    c.lrGan = parseReal(key, v);
  } else if (key == "beta1_ae") {
    c.beta1Ae = parseReal(key, v);
  } else if (key == "beta1_gan") {
    c.beta1Gan = parseReal(key, v);
  } else if (key == "beta2") {
    c.beta2 = parseReal(key, v);
  } else if (key == "eps") {
    c.eps = parseReal(key, v);
  } else if (key == "batch_size") {
    c.batchSize = parseCount(key, v);
  } else if (key == "epochs") {
    c.epochs = parseCount(key, v);
  } else if (key == "n_critic") {
    c.nCritic = parseCount(key, v);
  } else if (key == "seed") {
    c.seed = parseCount(key, v);
  } else if (key == "checkpoint_every") {
    c.checkpointEvery = parseCount(key, v);
  } else if (key == "clip_norm") {
    c.clipNorm = parseReal(key, v);
  } else if (key == "word_drop") {
    c.wordDrop = parseReal(key, v);
  } else if (key == "max_shift") {
    c.maxShift = parseCount(key, v);
  } else {
    return false;
  }
  return true;
}

RunConfig RunConfig::forPreset(const std::string& name) {
  RunConfig rc;
  rc.preset = name;
  if (name == "desk") {
    rc.arch = ArchitectureConfig::desk();
  } else if (name == "paper") {
    rc.arch = ArchitectureConfig::paper();
    rc.maxTokens = 50;
    rc.bpeVocab = 8000;
  } else {
    throw ConfigError("preset: expected desk or paper, got '" + name + "'");
  }
  rc.train = TrainConfig::defaults(Mode::Aae);
  return rc;
}

void RunConfig::validate() const {
  arch.validate();
  train.validate();
  if (maxTokens < 1 || maxTokens > arch.maxLen) {
    throw ConfigError("max_tokens: must be in [1, max_len]");
  }
  if (bpeVocab <= static_cast<std::size_t>(kReservedTokens)) {
    throw ConfigError("bpe_vocab: must exceed the reserved tokens");
  }
}

RunConfig parseRunConfig(const std::string& text, const std::string& presetOverride) {
  const auto kv = parseKeyValues(text);
  std::string preset = presetOverride;
  for (const auto& [k, v] : kv) {
    if (k == "preset" && preset.empty()) {
      preset = v;
    }
  }
  auto rc = RunConfig::forPreset(preset.empty() ? "desk" : preset);
  bool lambdaSet = false;
  for (const auto& [k, v] : kv) {
    if (k == "preset") {
      continue;
    }
    if (k == "lambda") {
      lambdaSet = true;
    }
    if (applyArchitectureKey(rc.arch, k, v) || applyTrainKey(rc.train, k, v)) {
      continue;
    }
    if (k == "corpus") {
      rc.corpus = v;
    } else if (k == "bpe") {
      rc.bpe = v;
    } else if (k == "checkpoint_dir") {
      rc.checkpointDir = v;
    } else if (k == "log") {
      rc.log = v;
    } else if (k == "bpe_vocab") {
      rc.bpeVocab = parseCount(k, v);
    } else if (k == "max_tokens") {
      rc.maxTokens = parseCount(k, v);
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  if (!lambdaSet) {
    rc.train.lambda = TrainConfig::defaults(rc.train.mode).lambda;
  }
  rc.validate();
  return rc;
}

RunConfig loadRunConfig(const std::string& path, const std::string& presetOverride) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parseRunConfig(ss.str(), presetOverride);
}

} // namespace salsa
