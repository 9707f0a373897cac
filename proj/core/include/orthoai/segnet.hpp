#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthoai/cloud.hpp"
#include "orthoai/metrics.hpp"

namespace orthoai::segnet {

struct ModelConfig {
  int in_dim = 6;
  std::vector<int> edge_channels{32, 32, 64, 64};
  int fuse_dim = 32;
  std::vector<int> head_hidden{128, 64};
  int num_classes = 33;
  int k = 3;
  double dropout = 0.3;
  double leaky_slope = 0.2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  bool global_pool = true;  // fuse + global max pool, broadcast into the head
  bool multiscale = true;   // concatenate every EdgeConv output; else only the last

  void validate() const;
  int stack_dim() const;       // per-point channels entering the fuse/head
  int head_input_dim() const;  // stack_dim + fuse_dim when pooling
  std::string to_json() const;
  static ModelConfig from_json(std::string_view bytes);
  /// Digest of the architecture-defining fields.
  std::string architecture_hash() const;
};

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Offsets of every layer's tensors inside the flat parameter/buffer stores.
struct EdgeLayout {
  std::size_t in = 0, out = 0;
  std::size_t weight = 0, bias = 0, gamma = 0, beta = 0;  // parameters
  std::size_t running_mean = 0, running_var = 0;          // buffers
};
struct FuseLayout {
  std::size_t in = 0, out = 0;
  std::size_t weight = 0, gamma = 0, beta = 0;
  std::size_t running_mean = 0, running_var = 0;
};
struct DenseLayout {
  std::size_t in = 0, out = 0;
  std::size_t weight = 0, bias = 0;
};

class SegModel {
 public:
  explicit SegModel(ModelConfig cfg = {}, std::uint64_t init_seed = 0);

  const ModelConfig& config() const { return cfg_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> buffers() { return buffers_; }
  std::span<const double> buffers() const { return buffers_; }

  const std::vector<TensorSpec>& param_specs() const { return param_specs_; }
  const std::vector<TensorSpec>& buffer_specs() const { return buffer_specs_; }
  std::span<double> param(std::string_view name);
  std::span<const double> param(std::string_view name) const;

  const std::vector<EdgeLayout>& edge_layers() const { return edges_; }
  const std::optional<FuseLayout>& fuse_layer() const { return fuse_; }
  const std::vector<DenseLayout>& head_layers() const { return head_; }

  /// Round parameters and buffers to the nearest float32 so checkpoints are exact.
  void round_to_float();

 private:
  std::size_t add_param(std::string name, std::vector<std::size_t> shape);
  std::size_t add_buffer(std::string name, std::vector<std::size_t> shape);

  ModelConfig cfg_;
  std::vector<double> params_;
  std::vector<double> buffers_;
  std::vector<TensorSpec> param_specs_;
  std::vector<TensorSpec> buffer_specs_;
  std::vector<EdgeLayout> edges_;
  std::optional<FuseLayout> fuse_;
  std::vector<DenseLayout> head_;
};

/// B clouds of N points each; features row-major B x N x in_dim.
struct Batch {
  std::size_t batch = 0;
  std::size_t points = 0;
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<std::uint8_t> labels;  // B x N, may be empty for inference

  static Batch from_clouds(std::span<const synth::LabeledCloud* const> clouds,
                           const std::vector<int>& feature_mask = {});
};

/// Keeps the listed feature columns (all six when empty).
std::vector<int> feature_columns(std::string_view variant);

struct ForwardCache;  // opaque; holds activations for the backward pass

struct ForwardOutput {
  std::vector<double> logits;  // B x N x C
  std::vector<double> batch_mean;  // per BN channel, concatenated over blocks (train mode)
  std::vector<double> batch_var;   // unbiased, for running-stat updates
};

class Forward {
 public:
  Forward();
  ~Forward();
  Forward(Forward&&) noexcept;
  Forward& operator=(Forward&&) noexcept;

  /// train=true: batch statistics and dropout (masks derived from dropout_seed).
  ForwardOutput run(const SegModel& model, const Batch& batch, bool train, std::uint64_t dropout_seed);

  /// Gradient of a scalar w.r.t. every parameter, given d(scalar)/d(logits) of
  /// the last run. Neighbour selection is treated as constant.
  std::vector<double> backward(const SegModel& model, std::span<const double> dlogits);

 private:
  std::unique_ptr<ForwardCache> cache_;
};

/// Convenience forward without gradient bookkeeping.
std::vector<double> forward(const SegModel& model, const Batch& batch, bool train = false,
                            std::uint64_t dropout_seed = 0);

/// Folds the batch statistics of a train-mode forward into the running stats.
void update_running_stats(SegModel& model, const ForwardOutput& out);

// Loss ------------------------------------------------------------------------

enum class DiceMode { None, Present, FullBatch };

struct LossConfig {
  double label_smoothing = 0.05;
  double dice_weight = 0.5;
  double dice_delta = 1e-6;
  DiceMode dice = DiceMode::Present;

  static LossConfig variant(std::string_view name);  // ce, ce+fd, ce+bd, ce_ls+bd
};

struct LossValue {
  double total = 0.0;
  double ce = 0.0;
  double dice = 0.0;
  std::vector<int> dice_classes;  // classes entering the Dice average
  std::vector<double> dlogits;    // filled when requested
};

LossValue composite_loss(std::span<const double> logits, std::span<const std::uint8_t> labels,
                         std::size_t num_classes, const LossConfig& cfg, bool with_gradient = false);

/// d(Dice term)/d(probabilities), B*N x C, before the softmax Jacobian.
std::vector<double> dice_probability_gradient(std::span<const double> probs, std::span<const std::uint8_t> labels,
                                              std::size_t num_classes, const LossConfig& cfg);

std::vector<double> softmax(std::span<const double> logits, std::size_t num_classes);

struct Gradients {
  LossValue loss;
  std::vector<double> grad;  // congruent with model.params()
  ForwardOutput output;
};

Gradients loss_gradients(const SegModel& model, const Batch& batch, const LossConfig& cfg, bool train = true,
                         std::uint64_t dropout_seed = 0);

// Training --------------------------------------------------------------------

struct TrainConfig {
  double lr = 5e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  int batch_size = 4;
  int epochs = 10;
  LossConfig loss;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool augment = true;
  // noise + point-count variation; full-circle axial rotation is opt-in since
  // synthetic arches share one pose and rotation hides left/right identity
  synth::AugmentConfig augmentation{.noise_sigma = 0.05, .rotate = false, .fixed_angle = std::nullopt, .max_drop = 0.2};
  std::vector<int> feature_mask;  // empty = all six features
  metrics::TirConfig tir;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(std::string_view bytes);
  std::string digest() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double miou = 0.0;
  double tiou = 0.0;
  double acc = 0.0;
  double tir = 0.0;
  double wall_ms = 0.0;

  /// Equality over everything except wall time.
  bool same_metrics(const EpochRecord& o) const;
};

std::string history_to_jsonl(std::span<const EpochRecord> history);
std::vector<EpochRecord> history_from_jsonl(std::string_view text);

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  SegModel best_model;
  SegModel final_model;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Deterministic 80/20 split of n items.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                            std::uint64_t seed);

TrainResult train(SegModel model, std::span<const synth::LabeledCloud> train_set,
                  std::span<const synth::LabeledCloud> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Inference -------------------------------------------------------------------

struct Prediction {
  std::vector<std::uint8_t> labels;
  std::vector<double> confidence;  // softmax probability of the predicted class
};

Prediction predict(const SegModel& model, const synth::LabeledCloud& cloud, const std::vector<int>& feature_mask = {});

metrics::MetricReport evaluate(const SegModel& model, std::span<const synth::LabeledCloud> clouds,
                               const std::vector<int>& feature_mask = {}, const metrics::TirConfig& tir = {});

// Checkpoints -----------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string save_checkpoint(const SegModel& model, std::string_view train_digest = "");

struct LoadedCheckpoint {
  SegModel model;
  std::string train_digest;
};

/// Validates version, size and architecture hash. When `expected` is given the
/// stored architecture must match it (HashMismatch otherwise).
LoadedCheckpoint load_checkpoint(std::string_view bytes, const ModelConfig* expected = nullptr);

}  // namespace orthoai::segnet
