#include "orthoai/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"

namespace orthoai::ablation {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Applies one grid value to copies of the model and train configs.
void apply(const std::string& axis, const std::string& value, segnet::ModelConfig& model, segnet::TrainConfig& train) {
  if (axis == "k") {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || k < 1) throw Error(Errc::InvalidConfig, "k must be a positive integer, got '" + value + "'");
    model.k = k;
  } else if (axis == "features") {
    train.feature_mask = segnet::feature_columns(value);
    model.in_dim = static_cast<int>(train.feature_mask.size());
  } else if (axis == "loss") {
    train.loss = segnet::LossConfig::variant(value);
  } else {
    throw Error(Errc::InvalidConfig, "unknown grid axis '" + axis + "' (expected k, features or loss)");
  }
}

}  // namespace

Grid parse_grid(std::string_view spec) {
  const std::string s(spec);
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw Error(Errc::InvalidConfig, "grid '" + s + "' must look like axis=v1,v2,...");
  Grid g;
  g.axis = trim(s.substr(0, eq));
  std::stringstream ss(s.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) {
    v = trim(v);
    if (!v.empty()) g.values.push_back(v);
  }
  if (g.values.empty()) throw Error(Errc::InvalidConfig, "grid '" + s + "' lists no values");
  // validate every value up front so a typo fails before any training
  for (const auto& value : g.values) {
    segnet::ModelConfig m;
    segnet::TrainConfig t;
    apply(g.axis, value, m, t);
    m.validate();
  }
  return g;
}

std::vector<synth::LabeledCloud> make_dataset(const Setup& setup) {
  if (setup.cases < 2) throw Error(Errc::InvalidConfig, "ablation needs at least two cases");
  auto synth_cfg = setup.synth;
  synth_cfg.fps_points = setup.points;
  synth_cfg.target_points_raw = std::max(synth_cfg.target_points_raw, 3 * setup.points);
  std::vector<synth::LabeledCloud> out;
  out.reserve(static_cast<std::size_t>(setup.cases));
  for (int i = 0; i < setup.cases; ++i) {
    const auto seed = setup.seed + static_cast<std::uint64_t>(i);
    out.push_back(synth::synthesize_cloud(cases::generate_synthetic_case(seed, setup.generator), synth_cfg, seed));
  }
  return out;
}

std::vector<Row> run_grid(const Grid& grid, const Setup& setup, std::span<const synth::LabeledCloud> data,
                          const Progress& progress) {
  const auto [tr, va] = segnet::split_indices(data.size(), setup.val_fraction, setup.seed);
  std::vector<synth::LabeledCloud> train_set, val_set;
  for (auto i : tr) train_set.push_back(data[i]);
  for (auto i : va) val_set.push_back(data[i]);

  std::vector<Row> rows;
  for (const auto& value : grid.values) {
    auto model_cfg = setup.model;
    auto train_cfg = setup.train;
    train_cfg.epochs = setup.epochs;
    train_cfg.seed = setup.seed;
    apply(grid.axis, value, model_cfg, train_cfg);
    const std::string label = grid.axis + "=" + value;
    auto result = segnet::train(segnet::SegModel(model_cfg, setup.seed), train_set, val_set, train_cfg,
                                [&](const segnet::EpochRecord& e) {
                                  if (progress) progress(label, e);
                                });
    const auto& best = result.history.at(static_cast<std::size_t>(result.best_epoch - 1));
    Row r;
    r.axis = grid.axis;
    r.value = value;
    r.parameters = result.best_model.parameter_count();
    r.best_epoch = result.best_epoch;
    r.final_loss = result.history.back().loss;
    r.miou = best.miou;
    r.tiou = best.tiou;
    r.acc = best.acc;
    r.tir = best.tir;
    rows.push_back(r);
  }
  return rows;
}

std::string rows_to_json(std::span<const Row> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"axis", r.axis},
                 {"value", r.value},
                 {"parameters", r.parameters},
                 {"best_epoch", r.best_epoch},
                 {"final_loss", r.final_loss},
                 {"miou", r.miou},
                 {"tiou", r.tiou},
                 {"acc", r.acc},
                 {"tir", r.tir}});
  }
  return j.dump(1);
}

std::string rows_to_markdown(std::span<const Row> rows) {
  std::ostringstream out;
  out << "| variant | params | mIoU (%) | tIoU (%) | Acc (%) | TIR (%) | best epoch |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s=%s | %zu | %.2f | %.2f | %.2f | %.2f | %d |\n", r.axis.c_str(), r.value.c_str(),
                  r.parameters, 100 * r.miou, 100 * r.tiou, 100 * r.acc, 100 * r.tir, r.best_epoch);
    out << buf;
  }
  return out.str();
}

}  // namespace orthoai::ablation
