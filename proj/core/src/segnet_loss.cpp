#include <algorithm>
#include <cmath>

#include "orthoai/errors.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::segnet {

LossConfig LossConfig::variant(std::string_view name) {
  LossConfig c;
  if (name == "ce") {
    c.label_smoothing = 0.0;
    c.dice = DiceMode::None;
    c.dice_weight = 0.0;
  } else if (name == "ce+fd") {
    c.label_smoothing = 0.0;
    c.dice = DiceMode::FullBatch;
  } else if (name == "ce+bd") {
    c.label_smoothing = 0.0;
    c.dice = DiceMode::Present;
  } else if (name == "ce_ls+bd" || name == "full") {
    // defaults
  } else {
    throw Error(Errc::InvalidConfig, "unknown loss variant '" + std::string(name) + "'");
  }
  return c;
}

std::vector<double> softmax(std::span<const double> logits, std::size_t num_classes) {
  std::vector<double> p(logits.size());
  const std::size_t rows = logits.size() / num_classes;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* z = logits.data() + i * num_classes;
    double* pi = p.data() + i * num_classes;
    const double zmax = *std::max_element(z, z + num_classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) sum += (pi[c] = std::exp(z[c] - zmax));
    for (std::size_t c = 0; c < num_classes; ++c) pi[c] /= sum;
  }
  return p;
}

namespace {

std::vector<int> dice_class_set(std::span<const std::uint8_t> labels, std::size_t num_classes, DiceMode mode) {
  std::vector<int> out;
  if (mode == DiceMode::None) return out;
  std::vector<bool> present(num_classes, false);
  for (auto l : labels) present[l] = true;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (mode == DiceMode::FullBatch || present[c]) out.push_back(static_cast<int>(c));
  }
  return out;
}

struct DiceSums {
  std::vector<double> inter, pred, truth;
};

DiceSums dice_sums(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t C) {
  DiceSums s{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* p = probs.data() + i * C;
    for (std::size_t c = 0; c < C; ++c) s.pred[c] += p[c];
    s.inter[labels[i]] += p[labels[i]];
    s.truth[labels[i]] += 1.0;
  }
  return s;
}

}  // namespace

std::vector<double> dice_probability_gradient(std::span<const double> probs, std::span<const std::uint8_t> labels,
                                              std::size_t C, const LossConfig& cfg) {
  std::vector<double> g(probs.size(), 0.0);
  const auto classes = dice_class_set(labels, C, cfg.dice);
  if (classes.empty()) return g;
  const DiceSums s = dice_sums(probs, labels, C);
  const double inv = 1.0 / static_cast<double>(classes.size());
  for (int c : classes) {
    const auto cc = static_cast<std::size_t>(c);
    const double num = 2.0 * s.inter[cc] + cfg.dice_delta;
    const double den = s.pred[cc] + s.truth[cc] + cfg.dice_delta;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double y = labels[i] == c ? 1.0 : 0.0;
      g[i * C + cc] = -inv * (2.0 * y * den - num) / (den * den);
    }
  }
  return g;
}

LossValue composite_loss(std::span<const double> logits, std::span<const std::uint8_t> labels, std::size_t C,
                         const LossConfig& cfg, bool with_gradient) {
  const std::size_t M = labels.size();
  if (M == 0) throw Error(Errc::EmptyBatch, "loss over an empty batch");
  if (logits.size() != M * C) throw Error(Errc::ShapeMismatch, "logits and labels disagree in length");
  for (auto l : labels) {
    if (l >= C) throw Error(Errc::ShapeMismatch, "label outside the class range");
  }
  const double eps = cfg.label_smoothing;
  const double off = eps / static_cast<double>(C);
  const double on = 1.0 - eps + off;
  const auto probs = softmax(logits, C);

  LossValue out;
  double ce = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double* z = logits.data() + i * C;
    const double zmax = *std::max_element(z, z + C);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(z[c] - zmax);
    const double lse = zmax + std::log(sum);
    double dotz = 0.0;
    for (std::size_t c = 0; c < C; ++c) dotz += (c == labels[i] ? on : off) * z[c];
    ce += lse - dotz;
  }
  out.ce = ce / static_cast<double>(M);

  out.dice_classes = dice_class_set(labels, C, cfg.dice);
  if (!out.dice_classes.empty()) {
    const DiceSums s = dice_sums(probs, labels, C);
    double acc = 0.0;
    for (int c : out.dice_classes) {
      const auto cc = static_cast<std::size_t>(c);
      acc += 1.0 - (2.0 * s.inter[cc] + cfg.dice_delta) / (s.pred[cc] + s.truth[cc] + cfg.dice_delta);
    }
    out.dice = acc / static_cast<double>(out.dice_classes.size());
  }
  const double lambda = cfg.dice == DiceMode::None ? 0.0 : cfg.dice_weight;
  out.total = out.ce + lambda * out.dice;

  if (with_gradient) {
    out.dlogits.assign(M * C, 0.0);
    const double invM = 1.0 / static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        out.dlogits[i * C + c] = (probs[i * C + c] - (c == labels[i] ? on : off)) * invM;
      }
    }
    if (lambda != 0.0 && !out.dice_classes.empty()) {
      const auto gp = dice_probability_gradient(probs, labels, C, cfg);
      for (std::size_t i = 0; i < M; ++i) {
        const double* p = probs.data() + i * C;
        const double* g = gp.data() + i * C;
        double pg = 0.0;
        for (std::size_t c = 0; c < C; ++c) pg += p[c] * g[c];
        for (std::size_t c = 0; c < C; ++c) out.dlogits[i * C + c] += lambda * p[c] * (g[c] - pg);
      }
    }
  }
  return out;
}

Gradients loss_gradients(const SegModel& model, const Batch& batch, const LossConfig& cfg, bool train,
                         std::uint64_t dropout_seed) {
  if (batch.labels.size() != batch.batch * batch.points) throw Error(Errc::ShapeMismatch, "batch carries no labels");
  Forward f;
  Gradients g;
  g.output = f.run(model, batch, train, dropout_seed);
  g.loss = composite_loss(g.output.logits, batch.labels, static_cast<std::size_t>(model.config().num_classes), cfg, true);
  g.grad = f.backward(model, g.loss.dlogits);
  return g;
}

}  // namespace orthoai::segnet
