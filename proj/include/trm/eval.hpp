#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/data/dataset.hpp"
#include "trm/recursion.hpp"

namespace trm {

// Fraction of samples whose unmasked positions all agree.
double exact_match(std::span<const std::int32_t> pred, std::span<const std::int32_t> target,
                   std::span<const std::uint8_t> mask, std::int64_t batch);

// Distinct grids with their vote counts, most frequent first, ties by the
// lexicographically smaller grid.
std::vector<std::pair<data::Grid, std::int64_t>> ranked_votes(const std::vector<data::Grid>& candidates);
// Most frequent grid. Throws std::invalid_argument on an empty list.
data::Grid majority_vote(const std::vector<data::Grid>& candidates);

// A test input scores when any of its first `attempts` distinct ranked
// candidates equals the target; the result is the mean over inputs.
double arc_score(const std::vector<std::vector<data::Grid>>& ranked_candidates, const std::vector<data::Grid>& targets,
                 int attempts = 2);

struct SampleOutcome {
  std::int64_t index = 0;
  std::int64_t puzzle_id = 0;
  std::int64_t augmentation_id = 0;
  bool correct = false;
  double cell_accuracy = 0.0;
};

struct EvalReport {
  std::string task;
  std::int64_t samples = 0;
  double exact_match = 0.0;
  double per_cell_accuracy = 0.0;
  // Fraction of samples with every cell right; equals exact_match by definition.
  double fully_correct = 0.0;
  double mean_sup_steps = 0.0;
  int n_sup = 0;
  // Voting over augmentations (arc): mean share of the winning grid, and the 2-attempt score.
  std::optional<double> vote_agreement;
  std::optional<double> arc_score;
  std::optional<double> arc_score_top1;
  std::int64_t voted_inputs = 0;
  std::map<std::string, double> per_task;
  CallCounters counters;
  std::string weights_hash;
  std::vector<SampleOutcome> outcomes;
};

nlohmann::json to_json(const EvalReport& r);
// One line per sample: index,puzzle_id,augmentation_id,correct,cell_accuracy
std::string outcomes_csv(const EvalReport& r);

struct EvalOptions {
  int n_sup = 16;  // supervision steps run on every sample, no early halting
  int batch_size = 256;
};

// Final-step predictions, one token vector per example.
template <class T>
std::vector<std::vector<std::int32_t>> predict(const Model<T>& model, const data::TokenDataset& data,
                                               const RecursionSchedule& schedule, const EvalOptions& opts,
                                               CallCounters* counters = nullptr);

// Runs all supervision steps, decodes after the last one and aggregates.
// ARC datasets are additionally voted per test input across augmentations.
template <class T>
EvalReport eval_run(const Model<T>& model, const data::TokenDataset& data, const RecursionSchedule& schedule,
                    const EvalOptions& opts);

}  // namespace trm
