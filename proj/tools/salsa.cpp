#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "salsa/bpe.h"
#include "salsa/config.h"
#include "salsa/data.h"
#include "salsa/error.h"
#include "salsa/lm.h"
#include "salsa/metrics.h"
#include "salsa/model.h"
#include "salsa/train.h"

namespace fs = std::filesystem;
using namespace salsa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void writeText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot write " + path);
  }
  out << text;
}

BpeModel bpeFor(const RunConfig& rc, const std::vector<std::string>& corpus) {
  if (!rc.bpe.empty() && fs::exists(rc.bpe)) {
    return BpeModel::load(rc.bpe);
  }
  auto bpe = BpeModel::train(corpus, rc.bpeVocab);
  if (!rc.bpe.empty()) {
    bpe.save(rc.bpe);
  }
  return bpe;
}

int cmdSynth(std::size_t n, std::uint64_t seed, const std::string& out) {
  writeLines(out, synthesizeCorpus(n, seed));
  return kExitOk;
}

int cmdBpe(const std::string& corpusPath, std::size_t vocab, const std::string& out) {
  BpeModel::train(readLines(corpusPath), vocab).save(out);
  return kExitOk;
}

int cmdTrain(
    const std::string& configPath,
    const std::string& preset,
    std::optional<std::uint64_t> seed,
    bool resume) {
  auto rc = loadRunConfig(configPath, preset);
  if (seed) {
    rc.train.seed = *seed;
  }
  if (rc.corpus.empty()) {
    throw ConfigError("corpus: required");
  }
  if (rc.checkpointDir.empty()) {
    throw ConfigError("checkpoint_dir: required");
  }
  const auto lines = readLines(rc.corpus);
  const auto bpe = bpeFor(rc, lines);
  if (rc.arch.vocabSize == 0) {
    rc.arch.vocabSize = bpe.vocabSize();
  } else if (rc.arch.vocabSize != bpe.vocabSize()) {
    throw ConfigError(
        "vocab_size: " + std::to_string(rc.arch.vocabSize) + " does not match the BPE model (" +
        std::to_string(bpe.vocabSize()) + ")");
  }
  const auto kept = filterCorpus(lines, bpe, rc.maxTokens);
  if (kept.empty()) {
    throw InputError("corpus: no sentence fits in max_tokens");
  }
  std::cout << "corpus: " << kept.size() << " of " << lines.size() << " sentences kept, vocab "
            << bpe.vocabSize() << "\n";

  fs::create_directories(rc.checkpointDir);
  SalsaModel model(rc.arch, rc.train.mode, rc.train.seed);
  Trainer trainer(model, rc.train, encodeCorpus(kept, bpe, rc.arch.maxLen));
  trainer.setAttachment("bpe", bpe.serialize());
  trainer.setCheckpointDir(rc.checkpointDir);
  if (resume) {
    const auto latest = Trainer::latestCheckpoint(rc.checkpointDir);
    if (latest.empty()) {
      throw InputError("--resume: no checkpoint in " + rc.checkpointDir);
    }
    trainer.load(latest);
    std::cout << "resumed from " << latest << " at epoch " << trainer.epoch() << "\n";
  }
  trainer.setLogPath(rc.log.empty() ? (fs::path(rc.checkpointDir) / "train.csv").string() : rc.log);
  trainer.setEpochCallback([](const EpochSummary& s) {
    std::printf("epoch %zu (%zu steps)", s.epoch, s.steps);
    for (const auto& [key, v] : s.means) {
      std::printf("  %s %.4f", key.c_str(), v);
    }
    std::printf("\n");
    std::fflush(stdout);
  });
  trainer.train();
  return kExitOk;
}

int cmdGenerate(
    const std::string& checkpoint,
    std::size_t n,
    const std::string& strategyText,
    std::uint64_t seed,
    const std::string& out) {
  const auto strategy = SamplingStrategy::parse(strategyText);
  const auto loaded = loadModel(checkpoint);
  if (!loaded.file.hasText("attach.bpe")) {
    throw InputError(checkpoint + ": no BPE model stored");
  }
  const auto bpe = BpeModel::deserialize(loaded.file.text("attach.bpe"));
  const auto& model = *loaded.model;
  Rng rng(seed);
  std::vector<std::string> lines;
  lines.reserve(n);
  constexpr std::size_t kChunk = 64;
  for (std::size_t done = 0; done < n; done += kChunk) {
    const auto count = std::min(kChunk, n - done);
    const auto codes = model.sampleCodes(count, rng);
    for (const auto& seq : model.decodeSample(codes, strategy, model.config().maxLen, rng)) {
      lines.push_back(bpe.decode(seq.tokens()));
    }
  }
  writeLines(out, lines);
  return kExitOk;
}

int cmdEvaluate(
    const std::string& generatedPath,
    const std::string& referencePath,
    const std::string& testPath,
    const std::string& bpePath,
    const std::string& out,
    const std::string& unitText,
    std::uint64_t seed) {
  if (unitText != "bpe" && unitText != "word") {
    throw ConfigError("--unit: expected bpe or word");
  }
  const auto unit = unitText == "bpe" ? BleuUnit::Bpe : BleuUnit::Word;
  const auto bpe = BpeModel::load(bpePath);
  const auto generatedText = readLines(generatedPath);
  const auto referenceText = readLines(referencePath);
  const auto testText = readLines(testPath);
  if (generatedText.empty()) {
    throw InputError(generatedPath + ": no sentences");
  }

  MetricReport report;
  std::map<std::string, int> dictionary;
  const auto hyp = tokenizeForBleu(generatedText, unit, bpe, dictionary);
  const auto ref = tokenizeForBleu(referenceText, unit, bpe, dictionary);
  for (std::size_t n = 1; n <= kMaxBleuOrder; ++n) {
    report.bleu[n - 1] = bleu(hyp, ref, n);
    report.selfBleu[n - 1] = hyp.size() >= 2 ? selfBleu(hyp, n) : 0.0;
  }

  const auto encodeAll = [&](const std::vector<std::string>& text) {
    std::vector<Sentence> outIds;
    for (const auto& s : text) {
      outIds.push_back(bpe.encode(s));
    }
    return outIds;
  };
  const auto generated = encodeAll(generatedText);
  const LmConfig lm;
  report.perplexity = forwardPerplexity(encodeAll(referenceText), generated, bpe.vocabSize(), lm, seed);
  report.reversePerplexity = reversePerplexity(generated, encodeAll(testText), bpe.vocabSize(), lm, seed);

  writeText(out + ".csv", report.toCsv());
  const auto table = report.toTable(fs::path(generatedPath).filename().string());
  writeText(out + ".txt", table);
  std::cout << table;
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial latent-code text generation"};
  app.require_subcommand(1);

  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::string out;

  auto* synth = app.add_subcommand("synth", "Write a synthetic-grammar corpus");
  synth->add_option("--n", n, "Number of sentences")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", out, "Output file")->required();

  std::string corpus;
  std::size_t vocab = 0;
  auto* bpe = app.add_subcommand("bpe", "Train a byte-pair tokenizer");
  bpe->add_option("--corpus", corpus, "Training corpus")->required()->check(CLI::ExistingFile);
  bpe->add_option("--vocab", vocab, "Target vocabulary size")->required();
  bpe->add_option("--out", out, "Output file")->required();

  std::string config;
  std::string preset;
  std::optional<std::uint64_t> trainSeed;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config, "Run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--preset", preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--seed", trainSeed, "Override the configured seed");
  train->add_flag("--resume", resume, "Continue from the latest checkpoint");

  std::string checkpoint;
  std::string strategy = "greedy";
  auto* generate = app.add_subcommand("generate", "Sample sentences from a checkpoint");
  generate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  generate->add_option("--n", n, "Number of sentences")->required();
  generate->add_option("--strategy", strategy, "greedy or temp=<tau>");
  generate->add_option("--seed", seed, "Random seed");
  generate->add_option("--out", out, "Output file")->required();

  std::string generated;
  std::string reference;
  std::string test;
  std::string bpePath;
  std::string unit = "bpe";
  auto* evaluate = app.add_subcommand("evaluate", "Score generated sentences");
  evaluate->add_option("--generated", generated, "Generated sentences")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--reference", reference, "Reference corpus")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--test", test, "Test corpus")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--bpe", bpePath, "BPE model")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--unit", unit, "BLEU unit: bpe or word");
  evaluate->add_option("--seed", seed, "Language model seed");
  evaluate->add_option("--out", out, "Output prefix for .csv and .txt")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) {
      return cmdSynth(n, seed, out);
    }
    if (*bpe) {
      return cmdBpe(corpus, vocab, out);
    }
    if (*train) {
      return cmdTrain(config, preset, trainSeed, resume);
    }
    if (*generate) {
      return cmdGenerate(checkpoint, n, strategy, seed, out);
    }
    if (*evaluate) {
      return cmdEvaluate(generated, reference, test, bpePath, out, unit, seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingDivergence& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DegenerateMatrixError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
