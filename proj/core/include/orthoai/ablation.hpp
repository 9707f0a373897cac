#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/cloud.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::ablation {

/// A declarative grid such as "k=3,5,10,20", "features=full,-dist,-height,-radial"
/// or "loss=ce,ce+fd,ce+bd,ce_ls+bd".
struct Grid {
  std::string axis;  // k | features | loss
  std::vector<std::string> values;
};

/// InvalidConfig on an unknown axis, an empty value list or an invalid value.
Grid parse_grid(std::string_view spec);

struct Setup {
  int cases = 100;
  int points = 1000;
  int epochs = 10;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  cases::GeneratorConfig generator;
  synth::SynthConfig synth;
  segnet::ModelConfig model;
  segnet::TrainConfig train;
};

struct Row {
  std::string axis;
  std::string value;
  std::size_t parameters = 0;
  int best_epoch = 0;
  double final_loss = 0.0;
  double miou = 0.0;
  double tiou = 0.0;
  double acc = 0.0;
  double tir = 0.0;

  friend bool operator==(const Row&, const Row&) = default;
};

/// Synthetic cases and clouds for a setup: case i uses seed + i.
std::vector<synth::LabeledCloud> make_dataset(const Setup& setup);

using Progress = std::function<void(const std::string& variant, const segnet::EpochRecord&)>;

/// Train one model per grid value on the same split and report validation
/// metrics of the best epoch. Deterministic for a fixed setup.
std::vector<Row> run_grid(const Grid& grid, const Setup& setup, std::span<const synth::LabeledCloud> data,
                          const Progress& progress = {});

std::string rows_to_json(std::span<const Row> rows);
/// Markdown table: variant | params | mIoU | tIoU | Acc | TIR | best epoch.
std::string rows_to_markdown(std::span<const Row> rows);

}  // namespace orthoai::ablation
