#include "salsa/train.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "salsa/config.h"
#include "salsa/error.h"
#include "salsa/ops.h"

namespace salsa {

namespace {

double nowSeconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

AdamConfig aeAdam(const TrainConfig& c) {
  return {c.lrAe, c.beta1Ae, c.beta2, c.eps};
}

AdamConfig ganAdam(const TrainConfig& c) {
  return {c.lrGan, c.beta1Gan, c.beta2, c.eps};
}

std::string metaValue(const KeyValues& kv, const std::string& key) {
  for (const auto& [k, v] : kv) {
    if (k == key) {
      return v;
    }
  }
  throw IntegrityError("checkpoint: metadata lacks '" + key + "'");
}

std::size_t metaCount(const KeyValues& kv, const std::string& key) {
  try {
    return static_cast<std::size_t>(std::stoull(metaValue(kv, key)));
  } catch (const std::logic_error&) {
    throw IntegrityError("checkpoint: bad metadata value for '" + key + "'");
  }
}

} // namespace

TrainConfig TrainConfig::defaults(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.lambda = mode == Mode::Aae ? 20.0 : 1.0;
  return c;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda: must be >= 0");
  }
  if (!(lrAe > 0.0) || !(lrGan > 0.0)) {
    throw ConfigError("lr_ae, lr_gan: learning rates must be positive");
  }
  if (!(beta1Ae >= 0.0 && beta1Ae < 1.0) || !(beta1Gan >= 0.0 && beta1Gan < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1_ae, beta1_gan, beta2: must be in [0, 1)");
  }
  if (!(eps > 0.0)) {
    throw ConfigError("eps: must be positive");
  }
  if (batchSize < 1) {
    throw ConfigError("batch_size: must be >= 1");
  }
  if (nCritic < 1) {
    throw ConfigError("n_critic: must be >= 1");
  }
  if (!(clipNorm > 0.0)) {
    throw ConfigError("clip_norm: must be positive");
  }
  if (!(wordDrop >= 0.0 && wordDrop < 1.0)) {
    throw ConfigError("word_drop: must be in [0, 1)");
  }
}

std::string logHeader() {
  return "step,phase,loss,value,wall_time";
}

std::string formatLogRow(const LogRow& row) {
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.3f", row.wallTime);
  return std::to_string(row.step) + "," + row.phase + "," + row.loss + "," +
      formatNumber(row.value) + "," + wall;
}

Trainer::Trainer(SalsaModel& model, TrainConfig cfg, std::vector<TokenSequence> corpus)
    : model_(model),
      cfg_(cfg),
      corpus_(std::move(corpus)),
      dataRng_(Rng(cfg.seed).derive(1)),
      noiseRng_(Rng(cfg.seed).derive(2)),
      dropoutRng_(Rng(cfg.seed).derive(3)),
      startTime_(nowSeconds()) {
  cfg_.validate();
  if (cfg_.mode != model_.mode()) {
    throw ConfigError("trainer: config mode " + modeName(cfg_.mode) + " but model mode " +
                      modeName(model_.mode()));
  }
  if (corpus_.empty()) {
    throw InputError("trainer: empty corpus");
  }
  for (const auto& seq : corpus_) {
    if (seq.maxLen() != model_.config().maxLen) {
      throw DimensionError("trainer: corpus sequences must be padded to max_len");
    }
    seq.validate(model_.config().vocabSize);
  }
  aeOpt_ = std::make_unique<Adam>(model_.autoencoderParameters(), aeAdam(cfg_));
  discOpt_ = std::make_unique<Adam>(model_.discriminatorParameters(), ganAdam(cfg_));
  encAdvOpt_ = std::make_unique<Adam>(model_.encoderParameters(), ganAdam(cfg_));
  if (cfg_.mode == Mode::Arae) {
    genOpt_ = std::make_unique<Adam>(model_.generatorParameters(), ganAdam(cfg_));
  }
}

std::vector<Adam*> Trainer::optimizers() const {
  std::vector<Adam*> out = {aeOpt_.get(), discOpt_.get(), encAdvOpt_.get()};
  if (genOpt_) {
    out.push_back(genOpt_.get());
  }
  return out;
}

void Trainer::truncateLog() const {
  if (logPath_.empty()) {
    return;
  }
  std::ifstream in(logPath_, std::ios::binary);
  std::vector<std::string> kept{logHeader()};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (std::exchange(header, false)) {
      continue;
    }
    std::size_t rowStep = 0;
    try {
      rowStep = static_cast<std::size_t>(std::stoull(line.substr(0, line.find(','))));
    } catch (const std::logic_error&) {
      continue;
    }
    if (rowStep <= step_) {
      kept.push_back(line);
    }
  }
  in.close();
  std::ofstream out(logPath_, std::ios::binary | std::ios::trunc);
  for (const auto& l : kept) {
    out << l << '\n';
  }
}

void Trainer::setLogPath(const std::string& path) {
  logPath_ = path;
  truncateLog();
}

void Trainer::record(const char* phase, const char* loss, double value) {
  LogRow row{step_, phase, loss, value, nowSeconds() - startTime_};
  if (!logPath_.empty()) {
    std::ofstream out(logPath_, std::ios::binary | std::ios::app);
    out << formatLogRow(row) << '\n';
  }
  log_.push_back(std::move(row));
}

void Trainer::requireFinite(const char* phase, const Tensor& loss) {
  if (!std::isfinite(loss.item())) {
    throw TrainingDivergence(
        std::string("non-finite ") + phase + " loss at step " + std::to_string(step_));
  }
}

void Trainer::aaeStep(const Batch& batch) {
  const ForwardContext ctx{true, &dropoutRng_};
  auto& store = model_.parameters();

  store.zeroGrad();
  auto rec = reconstructionLoss(model_, batch, batch, ctx);
  requireFinite("reconstruction", rec.loss);
  rec.loss.backward();
  clipGradNorm(aeOpt_->parameters(), cfg_.clipNorm);
  aeOpt_->step();
  record("ae", "rec", rec.loss.item());
  record("ae", "acc", rec.accuracy);

  store.zeroGrad();
  Tensor codes;
  {
    NoGradGuard noGrad;
    codes = model_.encode(batch, ctx);
  }
  const auto prior = model_.samplePrior(batch.size(), noiseRng_);
  auto disc = aaeDiscriminatorLoss(model_, prior, codes, ctx);
  requireFinite("discriminator", disc);
  disc.backward();
  discOpt_->step();
  record("disc", "disc", disc.item());

  store.zeroGrad();
  auto adv = aaeEncoderAdversarialLoss(model_, model_.encode(batch, ctx), ctx);
  requireFinite("encoder adversarial", adv);
  scale(adv, cfg_.lambda).backward();
  encAdvOpt_->step();
  record("enc_adv", "enc_adv", adv.item());
}

void Trainer::araeStep(const Batch& batch) {
  const ForwardContext ctx{true, &dropoutRng_};
  auto& store = model_.parameters();
  const auto B = batch.size();

  Batch noised;
  noised.reserve(B);
  for (const auto& seq : batch) {
    noised.push_back(applyWordNoise(seq, cfg_.wordDrop, cfg_.maxShift, noiseRng_));
  }
  store.zeroGrad();
  auto rec = reconstructionLoss(model_, noised, batch, ctx);
  requireFinite("reconstruction", rec.loss);
  rec.loss.backward();
  clipGradNorm(aeOpt_->parameters(), cfg_.clipNorm);
  aeOpt_->step();
  record("ae", "rec", rec.loss.item());
  record("ae", "acc", rec.accuracy);

  Tensor real;
  {
    NoGradGuard noGrad;
    real = model_.encode(batch, ctx);
  }
  for (std::size_t k = 0; k < cfg_.nCritic; ++k) {
    store.zeroGrad();
    Tensor fake;
    {
      NoGradGuard noGrad;
      fake = model_.generateCodes(model_.sampleNoise(B, noiseRng_), ctx);
    }
    auto critic = araeCriticLoss(model_, fake, real, ctx);
    requireFinite("critic", critic);
    critic.backward();
    discOpt_->step();
    record("critic", "critic", critic.item());
  }

  store.zeroGrad();
  auto adv = mean(model_.discriminate(model_.encode(batch, ctx), ctx));
  requireFinite("encoder adversarial", adv);
  scale(adv, cfg_.lambda).backward();
  encAdvOpt_->step();
  record("enc_adv", "enc_adv", adv.item());

  store.zeroGrad();
  auto gen = araeGeneratorLoss(model_, model_.sampleNoise(B, noiseRng_), ctx);
  requireFinite("generator", gen);
  gen.backward();
  genOpt_->step();
  record("gen", "gen", gen.item());
}

EpochSummary Trainer::runEpoch() {
  const auto batches = makeBatches(corpus_, cfg_.batchSize, dataRng_);
  const auto firstRow = log_.size();
  for (const auto& batch : batches) {
    ++step_;
    try {
      if (cfg_.mode == Mode::Aae) {
        aaeStep(batch);
      } else {
        araeStep(batch);
      }
    } catch (const TrainingDivergence&) {
      if (!checkpointDir_.empty()) {
        save((std::filesystem::path(checkpointDir_) / "diagnostic.salsa").string());
      }
      throw;
    }
  }
  ++epoch_;
  EpochSummary summary;
  summary.epoch = epoch_;
  summary.steps = batches.size();
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = firstRow; i < log_.size(); ++i) {
    const auto key = log_[i].phase + "/" + log_[i].loss;
    summary.means[key] += log_[i].value;
    ++counts[key];
  }
  for (auto& [key, total] : summary.means) {
    total /= static_cast<double>(counts[key]);
  }
  if (onEpoch_) {
    onEpoch_(summary);
  }
  return summary;
}

void Trainer::train() {
  while (epoch_ < cfg_.epochs) {
    runEpoch();
    if (!checkpointDir_.empty() && cfg_.checkpointEvery > 0 && epoch_ % cfg_.checkpointEvery == 0) {
      std::filesystem::create_directories(checkpointDir_);
      save((std::filesystem::path(checkpointDir_) / checkpointName(epoch_)).string());
    }
  }
}

void storeModel(const SalsaModel& model, CheckpointFile& file) {
  KeyValues arch;
  appendArchitecture(model.config(), arch);
  file.texts.emplace_back("arch", formatKeyValues(arch));
  for (const auto& p : model.parameters().entries()) {
    file.records.push_back({p.name, p.value.shape(), p.value.toVector()});
    if (p.specNorm) {
      const auto& sn = *p.specNorm;
      file.records.push_back({p.name + "#u", {sn.u.size()}, sn.u});
      file.records.push_back(
          {p.name + "#sigma", {2}, {sn.sigma, static_cast<double>(sn.updates)}});
    }
  }
}

void restoreModel(SalsaModel& model, const CheckpointFile& file) {
  for (auto& p : model.parameters().entries()) {
    if (!file.hasRecord(p.name)) {
      throw DimensionError("checkpoint: no tensor for parameter '" + p.name + "'");
    }
    const auto& r = file.record(p.name);
    if (r.shape != p.value.shape()) {
      throw DimensionError(
          "checkpoint: parameter '" + p.name + "' has shape " + shapeString(r.shape) +
          " but the model expects " + shapeString(p.value.shape()));
    }
    std::copy(r.data.begin(), r.data.end(), p.value.mutableData().begin());
    if (p.specNorm) {
      const auto& u = file.record(p.name + "#u");
      if (u.data.size() != p.specNorm->u.size()) {
        throw DimensionError("checkpoint: spectral-norm state of '" + p.name + "' has wrong size");
      }
      p.specNorm->u = u.data;
      const auto& s = file.record(p.name + "#sigma");
      p.specNorm->sigma = s.data.at(0);
      p.specNorm->updates = static_cast<std::size_t>(s.data.at(1));
    }
  }
}

CheckpointFile Trainer::snapshot() const {
  CheckpointFile file;
  KeyValues meta;
  meta.emplace_back("epoch", std::to_string(epoch_));
  meta.emplace_back("step", std::to_string(step_));
  const char* names[] = {"ae", "disc", "enc_adv", "gen"};
  const auto opts = optimizers();
  for (std::size_t i = 0; i < opts.size(); ++i) {
    meta.emplace_back(std::string("adam.") + names[i] + ".steps", std::to_string(opts[i]->steps()));
  }
  file.texts.emplace_back("meta", formatKeyValues(meta));
  KeyValues train;
  appendTrainConfig(cfg_, train);
  file.texts.emplace_back("train", formatKeyValues(train));
  file.texts.emplace_back("rng.data", dataRng_.state());
  file.texts.emplace_back("rng.noise", noiseRng_.state());
  file.texts.emplace_back("rng.dropout", dropoutRng_.state());
  for (const auto& [name, text] : attachments_) {
    file.texts.emplace_back("attach." + name, text);
  }
  storeModel(model_, file);
  for (std::size_t i = 0; i < opts.size(); ++i) {
    const auto& params = opts[i]->parameters();
    const auto& moments = opts[i]->moments();
    for (std::size_t j = 0; j < params.size(); ++j) {
      const auto base = std::string("adam.") + names[i] + "/" + params[j]->name;
      file.records.push_back({base + "#m", params[j]->value.shape(), moments[j].m});
      file.records.push_back({base + "#v", params[j]->value.shape(), moments[j].v});
    }
  }
  return file;
}

void Trainer::save(const std::string& path) const {
  writeCheckpoint(path, snapshot());
}

void Trainer::restore(const CheckpointFile& file) {
  TrainConfig stored;
  for (const auto& [k, v] : parseKeyValues(file.text("train"))) {
    applyTrainKey(stored, k, v);
  }
  if (stored.mode != cfg_.mode) {
    throw ConfigError("checkpoint: trained in " + modeName(stored.mode) + " mode, trainer is " +
                      modeName(cfg_.mode));
  }
  restoreModel(model_, file);
  const auto meta = parseKeyValues(file.text("meta"));
  const char* names[] = {"ae", "disc", "enc_adv", "gen"};
  const auto opts = optimizers();
  for (std::size_t i = 0; i < opts.size(); ++i) {
    const auto& params = opts[i]->parameters();
    std::vector<Adam::Moments> moments(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
      const auto base = std::string("adam.") + names[i] + "/" + params[j]->name;
      moments[j].m = file.record(base + "#m").data;
      moments[j].v = file.record(base + "#v").data;
    }
    opts[i]->restore(metaCount(meta, std::string("adam.") + names[i] + ".steps"), std::move(moments));
  }
  epoch_ = metaCount(meta, "epoch");
  step_ = metaCount(meta, "step");
  dataRng_.setState(file.text("rng.data"));
  noiseRng_.setState(file.text("rng.noise"));
  dropoutRng_.setState(file.text("rng.dropout"));
  for (const auto& [name, text] : file.texts) {
    if (name.rfind("attach.", 0) == 0) {
      attachments_[name.substr(7)] = text;
    }
  }
  log_.clear();
  truncateLog();
}

void Trainer::load(const std::string& path) {
  restore(readCheckpoint(path));
}

std::string Trainer::checkpointName(std::size_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "ckpt-epoch-%06zu.salsa", epoch);
  return buf;
}

std::string Trainer::latestCheckpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  std::string best;
  if (!fs::is_directory(dir, ec)) {
    return best;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("ckpt-epoch-", 0) == 0 && name.size() == checkpointName(0).size() &&
        name.ends_with(".salsa") && (best.empty() || name > fs::path(best).filename().string())) {
      best = entry.path().string();
    }
  }
  return best;
}

LoadedModel loadModel(const std::string& path) {
  LoadedModel out;
  out.file = readCheckpoint(path);
  ArchitectureConfig arch;
  for (const auto& [k, v] : parseKeyValues(out.file.text("arch"))) {
    if (!applyArchitectureKey(arch, k, v)) {
      throw IntegrityError("checkpoint: unknown architecture key '" + k + "'");
    }
  }
  for (const auto& [k, v] : parseKeyValues(out.file.text("train"))) {
    if (!applyTrainKey(out.train, k, v)) {
      throw IntegrityError("checkpoint: unknown training key '" + k + "'");
    }
  }
  out.model = std::make_unique<SalsaModel>(arch, out.train.mode, out.train.seed);
  restoreModel(*out.model, out.file);
  return out;
}

} // namespace salsa
