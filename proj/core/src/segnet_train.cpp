#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::segnet {

using json = nlohmann::json;

// Train config ----------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr >= 0) || !(weight_decay >= 0) || !(clip_norm > 0) || batch_size < 1 || epochs < 1) {
    throw Error(Errc::InvalidConfig, "training hyper-parameters out of range");
  }
  if (!(loss.label_smoothing >= 0 && loss.label_smoothing < 1) || !(loss.dice_weight >= 0) || !(loss.dice_delta > 0)) {
    throw Error(Errc::InvalidConfig, "loss settings out of range");
  }
}

namespace {

std::string_view dice_mode_name(DiceMode m) {
  switch (m) {
    case DiceMode::None: return "none";
    case DiceMode::Present: return "present";
    case DiceMode::FullBatch: return "full_batch";
  }
  return "?";
}

DiceMode parse_dice_mode(std::string_view s) {
  if (s == "none") return DiceMode::None;
  if (s == "present") return DiceMode::Present;
  if (s == "full_batch") return DiceMode::FullBatch;
  throw Error(Errc::InvalidConfig, "unknown dice mode '" + std::string(s) + "'");
}

}  // namespace

std::string TrainConfig::to_json() const {
  json j{{"lr", lr},
         {"weight_decay", weight_decay},
         {"beta1", beta1},
         {"beta2", beta2},
         {"adam_eps", adam_eps},
         {"clip_norm", clip_norm},
         {"batch_size", batch_size},
         {"epochs", epochs},
         {"label_smoothing", loss.label_smoothing},
         {"dice_weight", loss.dice_weight},
         {"dice_delta", loss.dice_delta},
         {"dice", dice_mode_name(loss.dice)},
         {"seed", seed},
         {"shuffle", shuffle},
         {"augment", augment},
         {"aug_noise_sigma", augmentation.noise_sigma},
         {"aug_rotate", augmentation.rotate},
         {"aug_max_drop", augmentation.max_drop},
         {"feature_mask", feature_mask},
         {"tir_fraction", tir.fraction},
         {"tir_floor", tir.floor}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(std::string_view bytes) {
  TrainConfig c;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.loss.label_smoothing = j.value("label_smoothing", c.loss.label_smoothing);
    c.loss.dice_weight = j.value("dice_weight", c.loss.dice_weight);
    c.loss.dice_delta = j.value("dice_delta", c.loss.dice_delta);
    if (j.contains("dice")) c.loss.dice = parse_dice_mode(j.at("dice").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.shuffle = j.value("shuffle", c.shuffle);
    c.augment = j.value("augment", c.augment);
    c.augmentation.noise_sigma = j.value("aug_noise_sigma", c.augmentation.noise_sigma);
    c.augmentation.rotate = j.value("aug_rotate", c.augmentation.rotate);
    c.augmentation.max_drop = j.value("aug_max_drop", c.augmentation.max_drop);
    c.feature_mask = j.value("feature_mask", c.feature_mask);
    c.tir.fraction = j.value("tir_fraction", c.tir.fraction);
    c.tir.floor = j.value("tir_floor", c.tir.floor);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::digest() const { return short_digest(to_json()); }

// History ---------------------------------------------------------------------

bool EpochRecord::same_metrics(const EpochRecord& o) const {
  return epoch == o.epoch && loss == o.loss && miou == o.miou && tiou == o.tiou && acc == o.acc && tir == o.tir;
}

std::string history_to_jsonl(std::span<const EpochRecord> history) {
  std::string out;
  for (const auto& r : history) {
    json j{{"epoch", r.epoch}, {"loss", r.loss}, {"miou", r.miou}, {"tiou", r.tiou},
           {"acc", r.acc},     {"tir", r.tir},   {"wall_ms", r.wall_ms}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<EpochRecord> history_from_jsonl(std::string_view text) {
  std::vector<EpochRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("epoch").get<int>(), j.at("loss").get<double>(), j.at("miou").get<double>(),
                     j.at("tiou").get<double>(), j.at("acc").get<double>(), j.at("tir").get<double>(),
                     j.value("wall_ms", 0.0)});
    } catch (const json::exception& e) {
      throw Error(Errc::CorruptArtifact, std::string("history line: ") + e.what());
    }
  }
  return out;
}

// Training --------------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n)));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {tr, val};
}

TrainResult train(SegModel model, std::span<const synth::LabeledCloud> train_set,
                  std::span<const synth::LabeledCloud> val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() < 5) throw Error(Errc::InvalidConfig, "training needs at least five clouds");
  const std::size_t expected_dim = cfg.feature_mask.empty() ? synth::kFeatureDim : cfg.feature_mask.size();
  if (static_cast<std::size_t>(model.config().in_dim) != expected_dim) {
    throw Error(Errc::ShapeMismatch, "model input width does not match the feature mask");
  }
  std::mt19937_64 rng(cfg.seed);
  const std::size_t P = model.parameter_count();
  std::vector<double> m(P, 0.0), v(P, 0.0);
  std::uint64_t step = 0;

  TrainResult result{{}, 0, model, model};
  bool have_best = false;
  EpochRecord best;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<synth::LabeledCloud> augmented;
      std::vector<const synth::LabeledCloud*> ptrs;
      augmented.reserve(end - start);
      for (std::size_t t = start; t < end; ++t) {
        const auto& cloud = train_set[order[t]];
        if (cfg.augment) {
          augmented.push_back(synth::augment(cloud, rng(), cfg.augmentation));
          ptrs.push_back(&augmented.back());
        } else {
          ptrs.push_back(&cloud);
        }
      }
      const Batch batch = Batch::from_clouds(ptrs, cfg.feature_mask);
      const std::uint64_t dropout_seed = rng();
      Gradients g = loss_gradients(model, batch, cfg.loss, true, dropout_seed);
      if (!std::isfinite(g.loss.total)) {
        std::string ids;
        for (const auto* c : ptrs) ids += (ids.empty() ? "" : ",") + c->case_id;
        throw Error(Errc::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                             std::to_string(batches) + " [" + ids + "]");
      }
      update_running_stats(model, g.output);

      double norm2 = 0.0;
      for (double x : g.grad) norm2 += x * x;
      const double norm = std::sqrt(norm2);
      const double scale = norm > cfg.clip_norm ? cfg.clip_norm / (norm + 1e-6) : 1.0;

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto params = model.params();
      for (std::size_t i = 0; i < P; ++i) {
        const double gi = g.grad[i] * scale;
        m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * params[i]);
      }
      model.round_to_float();
      loss_sum += g.loss.total;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches);
    if (!val_set.empty()) {
      const auto report = evaluate(model, val_set, cfg.feature_mask, cfg.tir);
      rec.miou = report.miou;
      rec.tiou = report.tiou;
      rec.acc = report.acc;
      rec.tir = report.tir;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (!have_best || rec.tir > best.tir || (rec.tir == best.tir && rec.miou > best.miou)) {
      have_best = true;
      best = rec;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    if (on_epoch) on_epoch(rec);
  }
  result.final_model = std::move(model);
  return result;
}

// Inference -------------------------------------------------------------------

Prediction predict(const SegModel& model, const synth::LabeledCloud& cloud, const std::vector<int>& feature_mask) {
  const synth::LabeledCloud* ptr = &cloud;
  const Batch batch = Batch::from_clouds(std::span<const synth::LabeledCloud* const>(&ptr, 1), feature_mask);
  const auto logits = forward(model, batch, false);
  const auto C = static_cast<std::size_t>(model.config().num_classes);
  const auto probs = softmax(logits, C);
  Prediction p;
  p.labels.resize(cloud.size());
  p.confidence.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double* pi = probs.data() + i * C;
    const auto best = static_cast<std::size_t>(std::max_element(pi, pi + C) - pi);
    p.labels[i] = static_cast<std::uint8_t>(best);
    p.confidence[i] = pi[best];
  }
  return p;
}

metrics::MetricReport evaluate(const SegModel& model, std::span<const synth::LabeledCloud> clouds,
                               const std::vector<int>& feature_mask, const metrics::TirConfig& tir) {
  std::vector<std::vector<std::uint8_t>> preds, gts;
  for (const auto& c : clouds) {
    preds.push_back(predict(model, c, feature_mask).labels);
    gts.push_back(c.labels);
  }
  return metrics::segmentation_metrics(preds, gts, metrics::Averaging::Pooled, tir);
}

// Checkpoints -----------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'O', 'A', 'C', 'K'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::TruncatedFile, "checkpoint ends early");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_block(std::string& out, const TensorSpec& spec, std::span<const double> store) {
  put_string(out, spec.name);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.shape.size()));
  for (auto d : spec.shape) put<std::uint64_t>(out, d);
  for (std::size_t i = 0; i < spec.size; ++i) put<float>(out, static_cast<float>(store[spec.offset + i]));
}

}  // namespace

std::string save_checkpoint(const SegModel& model, std::string_view train_digest) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, model.config().architecture_hash());
  put<std::uint64_t>(out, model.parameter_count());
  put_string(out, train_digest);
  put_string(out, model.config().to_json());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.param_specs().size() + model.buffer_specs().size()));
  for (const auto& s : model.param_specs()) put_block(out, s, model.params());
  for (const auto& s : model.buffer_specs()) put_block(out, s, model.buffers());
  return out;
}

LoadedCheckpoint load_checkpoint(std::string_view bytes, const ModelConfig* expected) {
  if (bytes.size() < 4) throw Error(Errc::TruncatedFile, "checkpoint shorter than its magic");
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) throw Error(Errc::CorruptArtifact, "not a checkpoint file");
  Reader r(bytes.substr(4));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(Errc::VersionMismatch, "checkpoint format " + std::to_string(version) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  }
  const std::string arch = r.get_string();
  const auto count = r.get<std::uint64_t>();
  std::string digest = r.get_string();
  const ModelConfig cfg = ModelConfig::from_json(r.get_string());
  if (cfg.architecture_hash() != arch) throw Error(Errc::HashMismatch, "architecture hash does not match stored config");
  if (expected && expected->architecture_hash() != arch) {
    throw Error(Errc::HashMismatch, "checkpoint architecture " + arch + " differs from configured " +
                                        expected->architecture_hash());
  }
  SegModel model(cfg);
  if (count != model.parameter_count()) throw Error(Errc::HashMismatch, "parameter count differs from architecture");
  const auto blocks = r.get<std::uint32_t>();
  std::size_t seen = 0;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const std::string name = r.get_string();
    const auto ndim = r.get<std::uint32_t>();
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    const TensorSpec* spec = nullptr;
    std::span<double> store;
    for (const auto& s : model.param_specs()) {
      if (s.name == name) spec = &s, store = model.params();
    }
    for (const auto& s : model.buffer_specs()) {
      if (s.name == name) spec = &s, store = model.buffers();
    }
    if (!spec) throw Error(Errc::HashMismatch, "unknown tensor " + name);
    if (spec->shape != shape) throw Error(Errc::ShapeMismatch, "tensor " + name + " has an unexpected shape");
    for (std::size_t i = 0; i < spec->size; ++i) store[spec->offset + i] = static_cast<double>(r.get<float>());
    ++seen;
  }
  if (seen != model.param_specs().size() + model.buffer_specs().size()) {
    throw Error(Errc::TruncatedFile, "checkpoint is missing tensors");
  }
  if (!r.done()) throw Error(Errc::CorruptArtifact, "trailing bytes after the last tensor");
  return {std::move(model), std::move(digest)};
}

}  // namespace orthoai::segnet
