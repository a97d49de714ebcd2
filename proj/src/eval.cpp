#include "trm/eval.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "trm/data/arc.hpp"
#include "trm/losses.hpp"

namespace trm {

double exact_match(std::span<const std::int32_t> pred, std::span<const std::int32_t> target,
                   std::span<const std::uint8_t> mask, std::int64_t batch) {
  const auto flags = exact_match_flags(pred, target, mask, batch);
  double sum = 0.0;
  for (double f : flags) sum += f;
  return sum / static_cast<double>(batch);
}

std::vector<std::pair<data::Grid, std::int64_t>> ranked_votes(const std::vector<data::Grid>& candidates) {
  std::map<data::Grid, std::int64_t> counts;
  for (const auto& g : candidates) ++counts[g];
  std::vector<std::pair<data::Grid, std::int64_t>> ranked(counts.begin(), counts.end());
  // map order is lexicographic, so a stable sort by count keeps the tie rule
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

data::Grid majority_vote(const std::vector<data::Grid>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("majority_vote: no candidates");
  return ranked_votes(candidates).front().first;
}

double arc_score(const std::vector<std::vector<data::Grid>>& ranked_candidates, const std::vector<data::Grid>& targets,
                 int attempts) {
  if (ranked_candidates.size() != targets.size()) throw std::invalid_argument("arc_score: size mismatch");
  if (targets.empty()) return 0.0;
  double solved = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::vector<data::Grid> distinct;
    for (const auto& g : ranked_candidates[i]) {
      if (static_cast<int>(distinct.size()) >= attempts) break;
      if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
    }
    if (std::find(distinct.begin(), distinct.end(), targets[i]) != distinct.end()) solved += 1.0;
  }
  return solved / static_cast<double>(targets.size());
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"task", r.task},
                      {"samples", r.samples},
                      {"exact_match", r.exact_match},
                      {"per_cell_accuracy", r.per_cell_accuracy},
                      {"fully_correct", r.fully_correct},
                      {"mean_sup_steps", r.mean_sup_steps},
                      {"n_sup", r.n_sup},
                      {"per_task", r.per_task},
                      {"counters", r.counters},
                      {"weights_hash", r.weights_hash}};
  j["vote_agreement"] = r.vote_agreement ? nlohmann::json(*r.vote_agreement) : nlohmann::json();
  j["arc_score"] = r.arc_score ? nlohmann::json(*r.arc_score) : nlohmann::json();
  j["arc_score_top1"] = r.arc_score_top1 ? nlohmann::json(*r.arc_score_top1) : nlohmann::json();
  j["voted_inputs"] = r.voted_inputs;
  return j;
}

std::string outcomes_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "index,puzzle_id,augmentation_id,correct,cell_accuracy\n";
  os.precision(17);
  for (const auto& o : r.outcomes) {
    os << o.index << ',' << o.puzzle_id << ',' << o.augmentation_id << ',' << (o.correct ? 1 : 0) << ','
       << o.cell_accuracy << '\n';
  }
  return os.str();
}

template <class T>
std::vector<std::vector<std::int32_t>> predict(const Model<T>& model, const data::TokenDataset& data,
                                               const RecursionSchedule& schedule, const EvalOptions& opts,
                                               CallCounters* counters) {
  if (data.seq_len != model.config().seq_len || data.vocab_size != model.config().vocab_size) {
    throw std::invalid_argument("dataset (L=" + std::to_string(data.seq_len) + ", V=" + std::to_string(data.vocab_size) +
                                ") does not match the model (L=" + std::to_string(model.config().seq_len) +
                                ", V=" + std::to_string(model.config().vocab_size) + ")");
  }
  if (opts.n_sup < 1 || opts.batch_size < 1) throw std::invalid_argument("eval: n_sup and batch_size must be positive");
  NoGradGuard no_grad;
  CallCounters local;
  const std::int64_t L = data.seq_len;
  std::vector<std::vector<std::int32_t>> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(opts.batch_size)) {
    const std::size_t stop = std::min(data.size(), start + static_cast<std::size_t>(opts.batch_size));
    const auto B = static_cast<std::int64_t>(stop - start);
    std::vector<std::int32_t> tokens(static_cast<std::size_t>(B * L));
    std::vector<std::int32_t> ids(static_cast<std::size_t>(B));
    for (std::size_t i = start; i < stop; ++i) {
      const auto& ex = data.examples[i];
      std::copy(ex.input.begin(), ex.input.end(), tokens.begin() + static_cast<std::int64_t>(i - start) * L);
      ids[i - start] = ex.embedding_id;
    }
    const Var<T> x = model.embed_input(tokens, ids);
    LatentState<T> state = initial_state(model, schedule, B);
    StepOutput<T> step;
    for (int s = 0; s < opts.n_sup; ++s) {
      step = supervision_step(model, x, state, schedule, local);
      state = std::move(step.carry);
    }
    const auto pred = decode(step.logits.value());
    for (std::int64_t b = 0; b < B; ++b) out.emplace_back(pred.begin() + b * L, pred.begin() + (b + 1) * L);
  }
  if (counters) *counters += local;
  return out;
}

template <class T>
EvalReport eval_run(const Model<T>& model, const data::TokenDataset& data, const RecursionSchedule& schedule,
                    const EvalOptions& opts) {
  EvalReport r;
  r.task = data::to_string(data.task);
  r.n_sup = opts.n_sup;
  r.samples = static_cast<std::int64_t>(data.size());
  r.weights_hash = model.params().values_hash();
  const auto preds = predict(model, data, schedule, opts, &r.counters);
  double cells_right = 0.0, cells = 0.0, exact = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data.examples[i];
    std::int64_t right = 0, total = 0;
    for (std::size_t l = 0; l < ex.target.size(); ++l) {
      if (!ex.mask[l]) continue;
      ++total;
      if (preds[i][l] == ex.target[l]) ++right;
    }
    SampleOutcome o;
    o.index = static_cast<std::int64_t>(i);
    o.puzzle_id = ex.puzzle_id;
    o.augmentation_id = ex.augmentation_id;
    o.correct = right == total;
    o.cell_accuracy = total ? static_cast<double>(right) / static_cast<double>(total) : 1.0;
    cells_right += static_cast<double>(right);
    cells += static_cast<double>(total);
    exact += o.correct ? 1.0 : 0.0;
    r.outcomes.push_back(o);
  }
  const double n = std::max<double>(1.0, static_cast<double>(data.size()));
  r.exact_match = data.empty() ? 0.0 : exact / n;
  r.per_cell_accuracy = cells > 0 ? cells_right / cells : 0.0;
  r.fully_correct = data.empty() ? 0.0
                                 : static_cast<double>(std::count_if(r.outcomes.begin(), r.outcomes.end(),
                                                                     [](const SampleOutcome& o) { return o.cell_accuracy == 1.0; })) /
                                       n;
  r.mean_sup_steps = static_cast<double>(opts.n_sup);
  r.per_task[r.task] = r.exact_match;

  if (data.task == data::Task::arc && !data.empty()) {
    // Map every prediction back to the original frame and vote per test input.
    std::map<std::int64_t, std::vector<data::Grid>> candidates;
    std::map<std::int64_t, data::Grid> targets;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& ex = data.examples[i];
      const auto t = ex.augmentation.is_null() ? data::ArcTransform::identity() : ex.augmentation.get<data::ArcTransform>();
      const auto grid = data::decode_arc_prediction(preds[i], data::kArcCanvas, data::kArcCanvas);
      candidates[ex.puzzle_id].push_back(grid.cells.empty() ? grid : t.invert(grid));
      if (!targets.count(ex.puzzle_id)) {
        targets[ex.puzzle_id] = t.invert(data::decode_arc_prediction(ex.target, data::kArcCanvas, data::kArcCanvas));
      }
    }
    std::vector<std::vector<data::Grid>> ranked;
    std::vector<data::Grid> truth;
    double agreement = 0.0;
    for (const auto& [id, grids] : candidates) {
      const auto votes = ranked_votes(grids);
      agreement += static_cast<double>(votes.front().second) / static_cast<double>(grids.size());
      std::vector<data::Grid> order;
      for (const auto& [g, count] : votes) order.push_back(g);
      ranked.push_back(std::move(order));
      truth.push_back(targets.at(id));
    }
    r.voted_inputs = static_cast<std::int64_t>(truth.size());
    r.vote_agreement = agreement / static_cast<double>(truth.size());
    r.arc_score = arc_score(ranked, truth, 2);
    r.arc_score_top1 = arc_score(ranked, truth, 1);
    r.per_task["arc_2_attempts"] = *r.arc_score;
  }
  if (model.params().values_hash() != r.weights_hash) throw std::logic_error("evaluation modified the model");
  return r;
}

template std::vector<std::vector<std::int32_t>> predict(const Model<float>&, const data::TokenDataset&,
                                                        const RecursionSchedule&, const EvalOptions&, CallCounters*);
template std::vector<std::vector<std::int32_t>> predict(const Model<double>&, const data::TokenDataset&,
                                                        const RecursionSchedule&, const EvalOptions&, CallCounters*);
template EvalReport eval_run(const Model<float>&, const data::TokenDataset&, const RecursionSchedule&,
                             const EvalOptions&);
template EvalReport eval_run(const Model<double>&, const data::TokenDataset&, const RecursionSchedule&,
                             const EvalOptions&);

}  // namespace trm
