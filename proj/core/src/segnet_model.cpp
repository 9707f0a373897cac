#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::segnet {

using json = nlohmann::json;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

// Config ----------------------------------------------------------------------

void ModelConfig::validate() const {
  if (in_dim < 1 || edge_channels.empty() || fuse_dim < 1 || num_classes < 2 || k < 1) {
    throw Error(Errc::InvalidConfig, "model dimensions must be positive");
  }
  for (int c : edge_channels) {
    if (c < 1) throw Error(Errc::InvalidConfig, "edge channels must be positive");
  }
  for (int c : head_hidden) {
    if (c < 1) throw Error(Errc::InvalidConfig, "head widths must be positive");
  }
  if (!(dropout >= 0 && dropout < 1)) throw Error(Errc::InvalidConfig, "dropout must lie in [0, 1)");
  if (!(bn_momentum > 0 && bn_momentum <= 1) || !(bn_eps > 0)) throw Error(Errc::InvalidConfig, "bad batch-norm settings");
}

int ModelConfig::stack_dim() const {
  if (!multiscale) return edge_channels.back();
  int s = 0;
  for (int c : edge_channels) s += c;
  return s;
}

int ModelConfig::head_input_dim() const { return stack_dim() + (global_pool ? fuse_dim : 0); }

std::string ModelConfig::to_json() const {
  json j{{"in_dim", in_dim},           {"edge_channels", edge_channels}, {"fuse_dim", fuse_dim},
         {"head_hidden", head_hidden}, {"num_classes", num_classes},     {"k", k},
         {"dropout", dropout},         {"leaky_slope", leaky_slope},     {"bn_momentum", bn_momentum},
         {"bn_eps", bn_eps},           {"global_pool", global_pool},     {"multiscale", multiscale}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view bytes) {
  ModelConfig c;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    c.in_dim = j.value("in_dim", c.in_dim);
    c.edge_channels = j.value("edge_channels", c.edge_channels);
    c.fuse_dim = j.value("fuse_dim", c.fuse_dim);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.k = j.value("k", c.k);
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.bn_eps = j.value("bn_eps", c.bn_eps);
    c.global_pool = j.value("global_pool", c.global_pool);
    c.multiscale = j.value("multiscale", c.multiscale);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ModelConfig::architecture_hash() const { return short_digest(to_json()); }

// Model -----------------------------------------------------------------------

std::size_t SegModel::add_param(std::string name, std::vector<std::size_t> shape) {
  std::size_t size = 1;
  for (auto d : shape) size *= d;
  const std::size_t offset = params_.size();
  params_.resize(offset + size, 0.0);
  param_specs_.push_back({std::move(name), std::move(shape), offset, size});
  return offset;
}

std::size_t SegModel::add_buffer(std::string name, std::vector<std::size_t> shape) {
  std::size_t size = 1;
  for (auto d : shape) size *= d;
  const std::size_t offset = buffers_.size();
  buffers_.resize(offset + size, 0.0);
  buffer_specs_.push_back({std::move(name), std::move(shape), offset, size});
  return offset;
}

SegModel::SegModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t in = static_cast<std::size_t>(cfg_.in_dim);
  for (std::size_t l = 0; l < cfg_.edge_channels.size(); ++l) {
    const auto out = static_cast<std::size_t>(cfg_.edge_channels[l]);
    const std::string p = "edge" + std::to_string(l);
    EdgeLayout e;
    e.in = in;
    e.out = out;
    e.weight = add_param(p + ".weight", {out, 2 * in});
    e.bias = add_param(p + ".bias", {out});
    e.gamma = add_param(p + ".bn.gamma", {out});
    e.beta = add_param(p + ".bn.beta", {out});
    e.running_mean = add_buffer(p + ".bn.running_mean", {out});
    e.running_var = add_buffer(p + ".bn.running_var", {out});
    edges_.push_back(e);
    in = out;
  }
  const auto stack = static_cast<std::size_t>(cfg_.stack_dim());
  if (cfg_.global_pool) {
    FuseLayout f;
    f.in = stack;
    f.out = static_cast<std::size_t>(cfg_.fuse_dim);
    f.weight = add_param("fuse.weight", {f.out, f.in});
    f.gamma = add_param("fuse.bn.gamma", {f.out});
    f.beta = add_param("fuse.bn.beta", {f.out});
    f.running_mean = add_buffer("fuse.bn.running_mean", {f.out});
    f.running_var = add_buffer("fuse.bn.running_var", {f.out});
    fuse_ = f;
  }
  std::vector<std::size_t> widths{static_cast<std::size_t>(cfg_.head_input_dim())};
  for (int h : cfg_.head_hidden) widths.push_back(static_cast<std::size_t>(h));
  widths.push_back(static_cast<std::size_t>(cfg_.num_classes));
  for (std::size_t h = 0; h + 1 < widths.size(); ++h) {
    DenseLayout d;
    d.in = widths[h];
    d.out = widths[h + 1];
    d.weight = add_param("head" + std::to_string(h) + ".weight", {d.out, d.in});
    d.bias = add_param("head" + std::to_string(h) + ".bias", {d.out});
    head_.push_back(d);
  }

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, unit BN scale
  std::mt19937_64 rng(init_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](std::size_t offset, std::size_t size, double bound) {
    for (std::size_t i = 0; i < size; ++i) params_[offset + i] = bound * unit(rng);
  };
  for (const auto& e : edges_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(2 * e.in));
    fill(e.weight, e.out * 2 * e.in, bound);
    fill(e.bias, e.out, bound);
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(e.gamma), e.out, 1.0);
    std::fill_n(buffers_.begin() + static_cast<std::ptrdiff_t>(e.running_var), e.out, 1.0);
  }
  if (fuse_) {
    fill(fuse_->weight, fuse_->out * fuse_->in, 1.0 / std::sqrt(static_cast<double>(fuse_->in)));
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(fuse_->gamma), fuse_->out, 1.0);
    std::fill_n(buffers_.begin() + static_cast<std::ptrdiff_t>(fuse_->running_var), fuse_->out, 1.0);
  }
  for (const auto& d : head_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d.in));
    fill(d.weight, d.out * d.in, bound);
    fill(d.bias, d.out, bound);
  }
  round_to_float();
}

std::span<double> SegModel::param(std::string_view name) {
  for (const auto& s : param_specs_) {
    if (s.name == name) return std::span<double>(params_).subspan(s.offset, s.size);
  }
  throw Error(Errc::NotFound, "no parameter named " + std::string(name));
}

std::span<const double> SegModel::param(std::string_view name) const {
  return const_cast<SegModel*>(this)->param(name);
}

void SegModel::round_to_float() {
  for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
  for (auto& b : buffers_) b = static_cast<double>(static_cast<float>(b));
}

// Batches ---------------------------------------------------------------------

std::vector<int> feature_columns(std::string_view variant) {
  if (variant.empty() || variant == "full") return {0, 1, 2, 3, 4, 5};
  if (variant == "-dist") return {0, 1, 2, 4, 5};
  if (variant == "-height") return {0, 1, 2, 3, 5};
  if (variant == "-radial") return {0, 1, 2, 3, 4};
  if (variant == "xyz") return {0, 1, 2};
  throw Error(Errc::InvalidConfig, "unknown feature variant '" + std::string(variant) + "'");
}

Batch Batch::from_clouds(std::span<const synth::LabeledCloud* const> clouds, const std::vector<int>& feature_mask) {
  if (clouds.empty()) throw Error(Errc::EmptyBatch, "batch has no clouds");
  const std::vector<int> cols = feature_mask.empty() ? feature_columns("full") : feature_mask;
  Batch b;
  b.batch = clouds.size();
  b.points = clouds.front()->size();
  b.dim = cols.size();
  b.features.reserve(b.batch * b.points * b.dim);
  b.labels.reserve(b.batch * b.points);
  for (const auto* c : clouds) {
    c->validate();
    if (c->size() != b.points) throw Error(Errc::ShapeMismatch, "clouds in a batch must have equal size");
    for (std::size_t i = 0; i < c->size(); ++i) {
      for (int col : cols) b.features.push_back(c->feature(i, static_cast<std::size_t>(col)));
    }
    b.labels.insert(b.labels.end(), c->labels.begin(), c->labels.end());
  }
  return b;
}

// Forward / backward ----------------------------------------------------------

namespace {

inline double leaky(double x, double slope) { return x > 0 ? x : slope * x; }
inline double leaky_grad(double x, double slope) { return x > 0 ? 1.0 : slope; }

void check_finite(std::span<const double> v, const std::string& layer) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteActivation, "non-finite activation in " + layer);
  }
}

}  // namespace

struct EdgeCache {
  std::vector<double> x_in;           // B*N x in
  std::vector<std::int32_t> nbr;      // B*N x k, sample-local indices
  std::vector<double> u, v;           // B*N x out
  std::vector<double> mean, invstd;   // out
  std::vector<std::int32_t> arg;      // B*N x out, neighbour slot of the max
  std::vector<double> out;            // B*N x out
};

struct FuseCache {
  std::vector<double> z;              // B*N x out, pre-normalization
  std::vector<double> mean, invstd;
  std::vector<std::int32_t> arg;      // B x out, point of the max
  std::vector<double> pooled;         // B x out
};

struct ForwardCache {
  bool train = false;
  std::size_t batch = 0, points = 0, k = 0;
  std::vector<EdgeCache> edges;
  std::vector<double> stack;          // B*N x stack
  std::optional<FuseCache> fuse;
  std::vector<std::vector<double>> head_in;   // input of each head layer
  std::vector<std::vector<double>> head_pre;  // pre-activation of each hidden layer
  std::vector<std::vector<double>> masks;     // dropout scale per hidden unit (empty = none)
};

Forward::Forward() = default;
Forward::~Forward() = default;
Forward::Forward(Forward&&) noexcept = default;
Forward& Forward::operator=(Forward&&) noexcept = default;

ForwardOutput Forward::run(const SegModel& model, const Batch& batch, bool train, std::uint64_t dropout_seed) {
  const ModelConfig& cfg = model.config();
  const std::size_t B = batch.batch, N = batch.points, K = static_cast<std::size_t>(cfg.k);
  if (B == 0 || N == 0) throw Error(Errc::EmptyBatch, "empty batch");
  if (batch.dim != static_cast<std::size_t>(cfg.in_dim) || batch.features.size() != B * N * batch.dim) {
    throw Error(Errc::ShapeMismatch, "batch feature width " + std::to_string(batch.dim) + " does not match model input " +
                                         std::to_string(cfg.in_dim));
  }
  if (N <= K) throw Error(Errc::TooFewPoints, "clouds need more than k points");
  check_finite(batch.features, "input");

  cache_ = std::make_unique<ForwardCache>();
  ForwardCache& cache = *cache_;
  cache.train = train;
  cache.batch = B;
  cache.points = N;
  cache.k = K;
  const double slope = cfg.leaky_slope;
  const auto params = model.params();
  const auto buffers = model.buffers();
  ForwardOutput result;

  // EdgeConv stack
  std::vector<double> x = batch.features;
  for (std::size_t l = 0; l < model.edge_layers().size(); ++l) {
    const EdgeLayout& L = model.edge_layers()[l];
    EdgeCache ec;
    ec.x_in = std::move(x);
    ec.nbr.resize(B * N * K);
    for (std::size_t b = 0; b < B; ++b) {
      const auto table = geometry::knn(std::span<const double>(ec.x_in).subspan(b * N * L.in, N * L.in), L.in, K);
      std::copy(table.index.begin(), table.index.end(), ec.nbr.begin() + static_cast<std::ptrdiff_t>(b * N * K));
    }
    // h_ij = W [x_i ; x_j - x_i] + b = (Wa - Wb) x_i + Wb x_j + b
    const CMap W(params.data() + L.weight, static_cast<Eigen::Index>(L.out), static_cast<Eigen::Index>(2 * L.in));
    const RowMat Wa = W.leftCols(static_cast<Eigen::Index>(L.in));
    const RowMat Wb = W.rightCols(static_cast<Eigen::Index>(L.in));
    const CMap X(ec.x_in.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(L.in));
    ec.u.resize(B * N * L.out);
    ec.v.resize(B * N * L.out);
    MMap U(ec.u.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(L.out));
    MMap V(ec.v.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(L.out));
    U.noalias() = X * (Wa - Wb).transpose();
    V.noalias() = X * Wb.transpose();
    const Eigen::Map<const Eigen::RowVectorXd> bias(params.data() + L.bias, static_cast<Eigen::Index>(L.out));
    U.rowwise() += bias;

    ec.mean.assign(L.out, 0.0);
    ec.invstd.assign(L.out, 0.0);
    std::vector<double> var(L.out, 0.0);
    if (train) {
      const double M = static_cast<double>(B * N * K);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < N; ++i) {
          const double* ui = ec.u.data() + (b * N + i) * L.out;
          for (std::size_t s = 0; s < K; ++s) {
            const double* vj = ec.v.data() + (b * N + static_cast<std::size_t>(ec.nbr[(b * N + i) * K + s])) * L.out;
            for (std::size_t c = 0; c < L.out; ++c) ec.mean[c] += ui[c] + vj[c];
          }
        }
      }
      for (auto& m : ec.mean) m /= M;
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < N; ++i) {
          const double* ui = ec.u.data() + (b * N + i) * L.out;
          for (std::size_t s = 0; s < K; ++s) {
            const double* vj = ec.v.data() + (b * N + static_cast<std::size_t>(ec.nbr[(b * N + i) * K + s])) * L.out;
            for (std::size_t c = 0; c < L.out; ++c) {
              const double d = ui[c] + vj[c] - ec.mean[c];
              var[c] += d * d;
            }
          }
        }
      }
      for (std::size_t c = 0; c < L.out; ++c) {
        ec.invstd[c] = 1.0 / std::sqrt(var[c] / M + cfg.bn_eps);
        result.batch_mean.push_back(ec.mean[c]);
        result.batch_var.push_back(M > 1 ? var[c] / (M - 1) : 0.0);
      }
    } else {
      for (std::size_t c = 0; c < L.out; ++c) {
        ec.mean[c] = buffers[L.running_mean + c];
        ec.invstd[c] = 1.0 / std::sqrt(buffers[L.running_var + c] + cfg.bn_eps);
      }
    }

    const double* gamma = params.data() + L.gamma;
    const double* beta = params.data() + L.beta;
    ec.out.assign(B * N * L.out, -std::numeric_limits<double>::infinity());
    ec.arg.assign(B * N * L.out, 0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < N; ++i) {
        const std::size_t row = b * N + i;
        const double* ui = ec.u.data() + row * L.out;
        double* oi = ec.out.data() + row * L.out;
        std::int32_t* ai = ec.arg.data() + row * L.out;
        for (std::size_t s = 0; s < K; ++s) {
          const double* vj = ec.v.data() + (b * N + static_cast<std::size_t>(ec.nbr[row * K + s])) * L.out;
          for (std::size_t c = 0; c < L.out; ++c) {
            const double y = gamma[c] * (ui[c] + vj[c] - ec.mean[c]) * ec.invstd[c] + beta[c];
            const double z = leaky(y, slope);
            if (z > oi[c]) {
              oi[c] = z;
              ai[c] = static_cast<std::int32_t>(s);
            }
          }
        }
      }
    }
    check_finite(ec.out, "edge" + std::to_string(l));
    x = ec.out;
    cache.edges.push_back(std::move(ec));
  }

  // multi-scale stack
  const auto S = static_cast<std::size_t>(cfg.stack_dim());
  if (cfg.multiscale) {
    cache.stack.resize(B * N * S);
    for (std::size_t row = 0; row < B * N; ++row) {
      std::size_t col = 0;
      for (const auto& ec : cache.edges) {
        const std::size_t w = ec.out.size() / (B * N);
        std::copy_n(ec.out.data() + row * w, w, cache.stack.data() + row * S + col);
        col += w;
      }
    }
  } else {
    cache.stack = cache.edges.back().out;
  }

  // fuse + global max pool
  std::size_t head_in_dim = S;
  if (model.fuse_layer()) {
    const FuseLayout& F = *model.fuse_layer();
    FuseCache fc;
    fc.z.resize(B * N * F.out);
    const CMap Wf(params.data() + F.weight, static_cast<Eigen::Index>(F.out), static_cast<Eigen::Index>(F.in));
    const CMap Smat(cache.stack.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(S));
    MMap Z(fc.z.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(F.out));
    Z.noalias() = Smat * Wf.transpose();
    fc.mean.assign(F.out, 0.0);
    fc.invstd.assign(F.out, 0.0);
    if (train) {
      const double M = static_cast<double>(B * N);
      std::vector<double> var(F.out, 0.0);
      for (std::size_t row = 0; row < B * N; ++row) {
        for (std::size_t c = 0; c < F.out; ++c) fc.mean[c] += fc.z[row * F.out + c];
      }
      for (auto& m : fc.mean) m /= M;
      for (std::size_t row = 0; row < B * N; ++row) {
        for (std::size_t c = 0; c < F.out; ++c) {
          const double d = fc.z[row * F.out + c] - fc.mean[c];
          var[c] += d * d;
        }
      }
      for (std::size_t c = 0; c < F.out; ++c) {
        fc.invstd[c] = 1.0 / std::sqrt(var[c] / M + cfg.bn_eps);
        result.batch_mean.push_back(fc.mean[c]);
        result.batch_var.push_back(M > 1 ? var[c] / (M - 1) : 0.0);
      }
    } else {
      for (std::size_t c = 0; c < F.out; ++c) {
        fc.mean[c] = buffers[F.running_mean + c];
        fc.invstd[c] = 1.0 / std::sqrt(buffers[F.running_var + c] + cfg.bn_eps);
      }
    }
    const double* gamma = params.data() + F.gamma;
    const double* beta = params.data() + F.beta;
    fc.pooled.assign(B * F.out, -std::numeric_limits<double>::infinity());
    fc.arg.assign(B * F.out, 0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t c = 0; c < F.out; ++c) {
          const double y = gamma[c] * (fc.z[(b * N + i) * F.out + c] - fc.mean[c]) * fc.invstd[c] + beta[c];
          const double a = leaky(y, slope);
          if (a > fc.pooled[b * F.out + c]) {
            fc.pooled[b * F.out + c] = a;
            fc.arg[b * F.out + c] = static_cast<std::int32_t>(i);
          }
        }
      }
    }
    check_finite(fc.pooled, "fuse");
    head_in_dim = S + F.out;
    cache.fuse = std::move(fc);
  }

  // head
  std::vector<double> h(B * N * head_in_dim);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t row = b * N + i;
      std::copy_n(cache.stack.data() + row * S, S, h.data() + row * head_in_dim);
      if (cache.fuse) {
        const std::size_t fo = head_in_dim - S;
        std::copy_n(cache.fuse->pooled.data() + b * fo, fo, h.data() + row * head_in_dim + S);
      }
    }
  }
  std::mt19937_64 drop_rng(dropout_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& head = model.head_layers();
  for (std::size_t layer = 0; layer < head.size(); ++layer) {
    const DenseLayout& D = head[layer];
    const CMap W(params.data() + D.weight, static_cast<Eigen::Index>(D.out), static_cast<Eigen::Index>(D.in));
    const Eigen::Map<const Eigen::RowVectorXd> bias(params.data() + D.bias, static_cast<Eigen::Index>(D.out));
    std::vector<double> a(B * N * D.out);
    {
      const CMap H(h.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(D.in));
      MMap A(a.data(), static_cast<Eigen::Index>(B * N), static_cast<Eigen::Index>(D.out));
      A.noalias() = H * W.transpose();
      A.rowwise() += bias;
    }
    cache.head_in.push_back(std::move(h));
    if (layer + 1 == head.size()) {
      check_finite(a, "head" + std::to_string(layer));
      result.logits = std::move(a);
      break;
    }
    std::vector<double> next(a.size());
    std::vector<double> mask;
    if (train && cfg.dropout > 0) {
      mask.resize(a.size());
      const double keep = 1.0 - cfg.dropout;
      for (auto& m : mask) m = unit(drop_rng) < keep ? 1.0 / keep : 0.0;
    }
    for (std::size_t t = 0; t < a.size(); ++t) {
      next[t] = leaky(a[t], slope) * (mask.empty() ? 1.0 : mask[t]);
    }
    check_finite(next, "head" + std::to_string(layer));
    cache.head_pre.push_back(std::move(a));
    cache.masks.push_back(std::move(mask));
    h = std::move(next);
  }
  return result;
}

std::vector<double> Forward::backward(const SegModel& model, std::span<const double> dlogits) {
  if (!cache_) throw Error(Errc::InvalidConfig, "backward called before forward");
  const ForwardCache& cache = *cache_;
  const ModelConfig& cfg = model.config();
  const std::size_t B = cache.batch, N = cache.points, K = cache.k, BN = B * N;
  const double slope = cfg.leaky_slope;
  const auto params = model.params();
  std::vector<double> grad(model.parameter_count(), 0.0);
  const auto& head = model.head_layers();
  if (dlogits.size() != BN * head.back().out) throw Error(Errc::ShapeMismatch, "logit gradient has the wrong size");

  // head
  std::vector<double> da(dlogits.begin(), dlogits.end());
  std::vector<double> dh;
  for (std::size_t layer = head.size(); layer-- > 0;) {
    const DenseLayout& D = head[layer];
    const CMap H(cache.head_in[layer].data(), static_cast<Eigen::Index>(BN), static_cast<Eigen::Index>(D.in));
    const CMap dA(da.data(), static_cast<Eigen::Index>(BN), static_cast<Eigen::Index>(D.out));
    const CMap W(params.data() + D.weight, static_cast<Eigen::Index>(D.out), static_cast<Eigen::Index>(D.in));
    MMap gW(grad.data() + D.weight, static_cast<Eigen::Index>(D.out), static_cast<Eigen::Index>(D.in));
    Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + D.bias, static_cast<Eigen::Index>(D.out));
    gW.noalias() += dA.transpose() * H;
    gb += dA.colwise().sum();
    dh.assign(BN * D.in, 0.0);
    MMap dH(dh.data(), static_cast<Eigen::Index>(BN), static_cast<Eigen::Index>(D.in));
    dH.noalias() = dA * W;
    if (layer == 0) break;
    // through dropout and LeakyReLU of the previous hidden layer
    const auto& pre = cache.head_pre[layer - 1];
    const auto& mask = cache.masks[layer - 1];
    da.assign(pre.size(), 0.0);
    for (std::size_t t = 0; t < pre.size(); ++t) {
      da[t] = dh[t] * (mask.empty() ? 1.0 : mask[t]) * leaky_grad(pre[t], slope);
    }
  }

  // split head input into the per-point stack and the broadcast global vector
  const auto S = static_cast<std::size_t>(cfg.stack_dim());
  const std::size_t hin = head.front().in;
  std::vector<double> dstack(BN * S);
  for (std::size_t row = 0; row < BN; ++row) std::copy_n(dh.data() + row * hin, S, dstack.data() + row * S);

  if (model.fuse_layer()) {
    const FuseLayout& F = *model.fuse_layer();
    const FuseCache& fc = *cache.fuse;
    const double* gamma = params.data() + F.gamma;
    const double* beta = params.data() + F.beta;
    // gradient reaches one point per (sample, channel)
    std::vector<double> dxhat(BN * F.out, 0.0);
    std::vector<double> dgamma(F.out, 0.0), dbeta(F.out, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < F.out; ++c) {
        double dg = 0.0;
        for (std::size_t i = 0; i < N; ++i) dg += dh[(b * N + i) * hin + S + c];
        const auto i = static_cast<std::size_t>(fc.arg[b * F.out + c]);
        const std::size_t idx = (b * N + i) * F.out + c;
        const double xhat = (fc.z[idx] - fc.mean[c]) * fc.invstd[c];
        const double dy = dg * leaky_grad(gamma[c] * xhat + beta[c], slope);
        dgamma[c] += dy * xhat;
        dbeta[c] += dy;
        dxhat[idx] += dy * gamma[c];
      }
    }
    std::vector<double> dz(BN * F.out, 0.0);
    if (cache.train) {
      const double M = static_cast<double>(BN);
      for (std::size_t c = 0; c < F.out; ++c) {
        const double s1 = gamma[c] * dbeta[c];
        const double s2 = gamma[c] * dgamma[c];
        for (std::size_t row = 0; row < BN; ++row) {
          const std::size_t idx = row * F.out + c;
          const double xhat = (fc.z[idx] - fc.mean[c]) * fc.invstd[c];
          dz[idx] = fc.invstd[c] / M * (M * dxhat[idx] - s1 - xhat * s2);
        }
      }
    } else {
      for (std::size_t idx = 0; idx < dz.size(); ++idx) dz[idx] = dxhat[idx] * fc.invstd[idx % F.out];
    }
    for (std::size_t c = 0; c < F.out; ++c) {
      grad[F.gamma + c] += dgamma[c];
      grad[F.beta + c] += dbeta[c];
    }
    const CMap dZ(dz.data(), static_cast<Eigen::Index>(BN), static_cast<Eigen::Index>(F.out));
    const CMap Smat(cache.stack.data(), static_cast<Eigen::Index>(BN), static_cast<Eigen::Index>(S));
    const CMap Wf(params.data() + F.weight, static_cast<Eigen::Index>(F.out), static_cast<Eigen::Index>(F.in));
    MMap gW(grad.data() + F.weight, static_cast<Eigen::Index>(F.out), static_cast<Eigen::Index>(F.in));
    gW.noalias() += dZ.transpose() * Smat;
    MMap dS(dstack.data(), static_cast<Eigen::Index>(BN), static_cast<Eigen::Index>(S));
    dS.noalias() += dZ * Wf;
  }

  // EdgeConv stack, last to first
  const auto& edges = model.edge_layers();
  std::vector<std::vector<double>> dout(edges.size());
  if (cfg.multiscale) {
    std::size_t col = 0;
    for (std::size_t l = 0; l < edges.size(); ++l) {
      const std::size_t w = edges[l].out;
      dout[l].resize(BN * w);
      for (std::size_t row = 0; row < BN; ++row) {
        std::copy_n(dstack.data() + row * S + col, w, dout[l].data() + row * w);
      }
      col += w;
    }
  } else {
    for (std::size_t l = 0; l + 1 < edges.size(); ++l) dout[l].assign(BN * edges[l].out, 0.0);
    dout.back() = std::move(dstack);
  }

  for (std::size_t l = edges.size(); l-- > 0;) {
    const EdgeLayout& L = edges[l];
    const EdgeCache& ec = cache.edges[l];
    const double* gamma = params.data() + L.gamma;
    const double* beta = params.data() + L.beta;
    const auto& dO = dout[l];
    std::vector<double> dy(BN * L.out, 0.0);
    std::vector<double> dgamma(L.out, 0.0), dbeta(L.out, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < N; ++i) {
        const std::size_t row = b * N + i;
        for (std::size_t c = 0; c < L.out; ++c) {
          const auto s = static_cast<std::size_t>(ec.arg[row * L.out + c]);
          const std::size_t j = b * N + static_cast<std::size_t>(ec.nbr[row * K + s]);
          const double xhat = (ec.u[row * L.out + c] + ec.v[j * L.out + c] - ec.mean[c]) * ec.invstd[c];
          const double g = dO[row * L.out + c] * leaky_grad(gamma[c] * xhat + beta[c], slope);
          dy[row * L.out + c] = g;
          dgamma[c] += g * xhat;
          dbeta[c] += g;
        }
      }
    }
    for (std::size_t c = 0; c < L.out; ++c) {
      grad[L.gamma + c] += dgamma[c];
      grad[L.beta + c] += dbeta[c];
    }
    std::vector<double> du(BN * L.out, 0.0), dv(BN * L.out, 0.0);
    if (cache.train) {
      const double M = static_cast<double>(BN * K);
      std::vector<double> s1(L.out), s2(L.out);
      for (std::size_t c = 0; c < L.out; ++c) {
        s1[c] = gamma[c] * dbeta[c];
        s2[c] = gamma[c] * dgamma[c];
      }
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < N; ++i) {
          const std::size_t row = b * N + i;
          for (std::size_t s = 0; s < K; ++s) {
            const std::size_t j = b * N + static_cast<std::size_t>(ec.nbr[row * K + s]);
            for (std::size_t c = 0; c < L.out; ++c) {
              const double xhat = (ec.u[row * L.out + c] + ec.v[j * L.out + c] - ec.mean[c]) * ec.invstd[c];
              const double dxhat =
                  static_cast<std::size_t>(ec.arg[row * L.out + c]) == s ? gamma[c] * dy[row * L.out + c] : 0.0;
              const double g = ec.invstd[c] / M * (M * dxhat - s1[c] - xhat * s2[c]);
              du[row * L.out + c] += g;
              dv[j * L.out + c] += g;
            }
          }
        }
      }
    } else {
      for (std::size_t row = 0; row < BN; ++row) {
        const std::size_t b = row / N;
        for (std::size_t c = 0; c < L.out; ++c) {
          const auto s = static_cast<std::size_t>(ec.arg[row * L.out + c]);
          const std::size_t j = b * N + static_cast<std::size_t>(ec.nbr[row * K + s]);
          const double g = gamma[c] * dy[row * L.out + c] * ec.invstd[c];
          du[row * L.out + c] += g;
          dv[j * L.out + c] += g;
        }
      }
    }
    const auto Lin = static_cast<Eigen::Index>(L.in);
    const auto Lout = static_cast<Eigen::Index>(L.out);
    const CMap X(ec.x_in.data(), static_cast<Eigen::Index>(BN), Lin);
    const CMap dU(du.data(), static_cast<Eigen::Index>(BN), Lout);
    const CMap dV(dv.data(), static_cast<Eigen::Index>(BN), Lout);
    const CMap W(params.data() + L.weight, Lout, 2 * Lin);
    const RowMat Wa = W.leftCols(Lin);
    const RowMat Wb = W.rightCols(Lin);
    const RowMat dA = dU.transpose() * X;
    const RowMat dWbv = dV.transpose() * X;
    MMap gW(grad.data() + L.weight, Lout, 2 * Lin);
    gW.leftCols(Lin) += dA;
    gW.rightCols(Lin) += dWbv - dA;
    Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + L.bias, Lout);
    gb += dU.colwise().sum();
    if (l > 0) {
      std::vector<double> dx(BN * L.in, 0.0);
      MMap dX(dx.data(), static_cast<Eigen::Index>(BN), Lin);
      dX.noalias() = dU * (Wa - Wb) + dV * Wb;
      for (std::size_t t = 0; t < dx.size(); ++t) dout[l - 1][t] += dx[t];
    }
  }
  return grad;
}

std::vector<double> forward(const SegModel& model, const Batch& batch, bool train, std::uint64_t dropout_seed) {
  Forward f;
  return f.run(model, batch, train, dropout_seed).logits;
}

void update_running_stats(SegModel& model, const ForwardOutput& out) {
  const double m = model.config().bn_momentum;
  auto buffers = model.buffers();
  std::size_t offset = 0;
  auto fold = [&](std::size_t mean_at, std::size_t var_at, std::size_t width) {
    for (std::size_t c = 0; c < width; ++c) {
      buffers[mean_at + c] = (1 - m) * buffers[mean_at + c] + m * out.batch_mean[offset + c];
      buffers[var_at + c] = (1 - m) * buffers[var_at + c] + m * out.batch_var[offset + c];
    }
    offset += width;
  };
  std::size_t expected = 0;
  for (const auto& e : model.edge_layers()) expected += e.out;
  if (model.fuse_layer()) expected += model.fuse_layer()->out;
  if (out.batch_mean.size() != expected || out.batch_var.size() != expected) {
    throw Error(Errc::ShapeMismatch, "forward output carries no batch statistics");
  }
  for (const auto& e : model.edge_layers()) fold(e.running_mean, e.running_var, e.out);
  if (model.fuse_layer()) fold(model.fuse_layer()->running_mean, model.fuse_layer()->running_var, model.fuse_layer()->out);
  for (auto& b : buffers) b = static_cast<double>(static_cast<float>(b));
}

}  // namespace orthoai::segnet
