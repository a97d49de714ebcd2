#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/checkpoint.hpp"
#include "trm/data/dataset.hpp"
#include "trm/data/sudoku.hpp"
#include "trm/eval.hpp"

namespace trm {

// ------------------------------------------------------------------ datasets

struct GenDataOptions {
  data::Task task = data::Task::sudoku;
  std::uint64_t seed = 0;
  int count = 0;       // train instances
  int test_count = 0;  // test instances, disjoint from train
  // Copies per train instance, original included (1 = none). Sudoku uses
  // rule-preserving shuffles, maze the dihedral group, arc color/dihedral/translation.
  int augment = 1;
  int test_augment = 1;
  // sudoku
  int size = 4;
  int min_clues = 4;
  int max_clues = 8;
  data::SudokuDifficulty difficulty = data::SudokuDifficulty::any;
  // maze
  int height = 12;
  int width = 12;
  int min_path_len = 44;
  // arc
  std::filesystem::path arc_path;
  bool permute_background = false;
};

nlohmann::json to_json(const GenDataOptions& o);

struct GeneratedData {
  data::TokenDataset train;
  data::TokenDataset test;
  data::Manifest manifest;
};

GeneratedData generate_dataset(const GenDataOptions& opts);
// Writes train.jsonl, test.jsonl and manifest.json. Refuses to overwrite unless `force`.
void write_dataset(const std::filesystem::path& dir, const GeneratedData& d, bool force);

// ------------------------------------------------------------------ runs

enum class DType { f32, f64 };
std::string to_string(DType d);
DType parse_dtype(const std::string& s);

// Everything that determines a training run besides the data.
struct RunConfig {
  NetConfig net;
  RecursionSchedule schedule;
  TrainConfig train;
  DType dtype = DType::f32;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
// Small-model settings that train 4x4 Sudoku in minutes on one core.
RunConfig desk_preset();
// Copies task-determined fields (L, V, puzzle-id rows) from the manifest;
// throws data::DataError when the config already pins conflicting values.
void bind_to_data(RunConfig& c, const data::Manifest& m, bool strict);

CheckpointConfig checkpoint_config(const RunConfig& c);
RunConfig run_config(const CheckpointConfig& c, DType dtype);

struct TrainResult {
  std::int64_t steps = 0;
  std::vector<StepMetrics> metrics;
  std::filesystem::path final_checkpoint;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  // Called with each step's metrics after they are logged.
  std::function<void(const StepMetrics&)> on_step;
};

// Trains, writing config.json, metrics.jsonl, checkpoints/step_<k>.ckpt and final.ckpt.
// On a non-finite loss writes diagnostic.ckpt and rethrows NonFiniteLoss.
TrainResult train_run(const RunConfig& cfg, const data::TokenDataset& train, const TrainOptions& opts);

struct EvalRunOptions {
  bool use_ema = true;
  std::optional<int> n_sup;  // defaults to the checkpoint schedule
  int batch_size = 256;
};

// Evaluates a checkpoint file of either precision. Adds config_hash and seed to the report JSON.
nlohmann::json eval_checkpoint(const std::filesystem::path& ckpt, const data::TokenDataset& data,
                               const EvalRunOptions& opts, std::string* csv = nullptr);

// ------------------------------------------------------------------ ablation

struct AblationCell {
  Variant variant = Variant::trm;
  int n = 6;
  int T = 3;
  int layers = 2;
};

AblationCell parse_cell(const std::string& spec);  // "variant:n:T:layers"
std::string cell_name(const AblationCell& c);

struct AblationRow {
  AblationCell cell;
  std::int64_t depth = 0;
  std::int64_t params = 0;
  int nfp = 1;
  std::optional<double> test_exact_match;
  std::string status;  // "ok" or the reason the cell was skipped
  std::vector<double> loss_curve;
};

struct AblationOptions {
  RunConfig base;
  std::filesystem::path out_dir;
  double memory_budget_gb = 4.0;
  // Reference batch and width used for the memory verdict; the run's own when unset.
  std::optional<std::int64_t> memory_batch;
  std::optional<NetConfig> memory_net;
};

std::vector<AblationRow> ablate(const std::vector<AblationCell>& cells, const data::TokenDataset& train,
                                const data::TokenDataset& test, const AblationOptions& opts);
std::string ablation_markdown(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);
// Static SVG line chart of one or more loss curves.
std::string loss_svg(const std::vector<std::pair<std::string, std::vector<double>>>& curves, const std::string& title);

// Resolves a relative output path against $TRM_OUTPUT_ROOT when it is set.
std::filesystem::path output_path(const std::filesystem::path& p);

}  // namespace trm
