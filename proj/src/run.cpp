#include "trm/run.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "trm/data/arc.hpp"
#include "trm/data/dihedral.hpp"
#include "trm/data/maze.hpp"

namespace trm {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xbf58476d1ce4e5b9ULL) ^ (c * 0x94d049bb133111ebULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

data::TokenDataset empty_split(data::Task task, int seq_len, int vocab) {
  data::TokenDataset ds;
  ds.task = task;
  ds.seq_len = seq_len;
  ds.vocab_size = vocab;
  return ds;
}

// Adds `copies` variants of each instance, skipping variants whose key is in `blocked`.
void add_augmented(data::TokenDataset& ds, const std::vector<data::PuzzleInstance>& base, int copies,
                   const std::function<data::PuzzleInstance(const data::PuzzleInstance&, int, int)>& make,
                   std::set<std::string>& seen, const std::set<std::string>& blocked) {
  for (const auto& p : base) {
    const auto layout = data::task_layout(p.task, p.target.height, p.target.width);
    for (int a = 0; a < copies; ++a) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        data::PuzzleInstance q = a == 0 ? p : make(p, a, attempt);
        q.augmentation_id = a;
        auto e = data::encode_instance(q, 0, layout);
        const auto key = data::example_key(e);
        if (blocked.count(key) || (a > 0 && seen.count(key))) continue;
        seen.insert(key);
        ds.examples.push_back(std::move(e));
        break;
      }
    }
  }
}

}  // namespace

nlohmann::json to_json(const GenDataOptions& o) {
  nlohmann::json j = {{"task", data::to_string(o.task)}, {"seed", o.seed},
                      {"count", o.count},                {"test_count", o.test_count},
                      {"augment", o.augment},            {"test_augment", o.test_augment}};
  switch (o.task) {
    case data::Task::sudoku:
      j.update({{"size", o.size},
                {"min_clues", o.min_clues},
                {"max_clues", o.max_clues},
                {"difficulty", o.difficulty == data::SudokuDifficulty::hard ? "hard" : "any"}});
      break;
    case data::Task::maze:
      j.update({{"height", o.height}, {"width", o.width}, {"min_path_len", o.min_path_len}});
      break;
    case data::Task::arc:
      j.update({{"arc_path", o.arc_path.filename().string()}, {"permute_background", o.permute_background}});
      break;
  }
  return j;
}

GeneratedData generate_dataset(const GenDataOptions& o) {
  if (o.count < 0 || o.test_count < 0) throw std::invalid_argument("counts must be >= 0");
  if (o.augment < 1 || o.test_augment < 1) throw std::invalid_argument("augment counts must be >= 1");
  GeneratedData g;
  switch (o.task) {
    case data::Task::sudoku: {
      data::SudokuGenOptions so;
      so.size = o.size;
      so.count = o.count + o.test_count;
      so.min_clues = o.min_clues;
      so.max_clues = o.max_clues;
      so.difficulty = o.difficulty;
      const auto all = data::sudoku_generate(so, o.seed);
      const int L = o.size * o.size;
      g.train = empty_split(o.task, L, data::sudoku_vocab(o.size));
      g.test = g.train;
      const std::vector<data::PuzzleInstance> train(all.begin(), all.begin() + o.count);
      const std::vector<data::PuzzleInstance> test(all.begin() + o.count, all.end());
      auto shuffle = [&](const data::PuzzleInstance& p, int a, int attempt) {
        return data::sudoku_augment(p, mix_seed(o.seed, static_cast<std::uint64_t>(p.puzzle_id), a, attempt));
      };
      std::set<std::string> seen_test, seen_train;
      add_augmented(g.test, test, o.test_augment, shuffle, seen_test, {});
      add_augmented(g.train, train, o.augment, shuffle, seen_train, seen_test);
      break;
    }
    case data::Task::maze: {
      const bool square = o.height == o.width;
      const std::vector<int> allowed = square ? std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7} : std::vector<int>{0, 2, 4, 6};
      if (o.augment > static_cast<int>(allowed.size()) || o.test_augment > static_cast<int>(allowed.size())) {
        throw std::invalid_argument("maze augment is limited to " + std::to_string(allowed.size()) +
                                    " symmetries for this shape");
      }
      data::MazeGenOptions mo;
      mo.height = o.height;
      mo.width = o.width;
      mo.min_path_len = o.min_path_len;
      mo.count = o.count + o.test_count;
      const auto all = data::maze_generate(mo, o.seed);
      g.train = empty_split(o.task, o.height * o.width, data::maze_tokens::kVocab);
      g.test = g.train;
      const std::vector<data::PuzzleInstance> train(all.begin(), all.begin() + o.count);
      const std::vector<data::PuzzleInstance> test(all.begin() + o.count, all.end());
      // Each instance uses a seeded ordering of the symmetries so copies differ.
      auto sym = [&](const data::PuzzleInstance& p, int a, int attempt) {
        std::vector<int> ks(allowed.begin() + 1, allowed.end());
        std::mt19937_64 rng(mix_seed(o.seed, static_cast<std::uint64_t>(p.puzzle_id), 0, 0));
        std::shuffle(ks.begin(), ks.end(), rng);
        const int k = ks[static_cast<std::size_t>(a - 1 + attempt) % ks.size()];
        data::PuzzleInstance q = p;
        q.input = data::dihedral_transform(p.input, k, true);
        q.target = data::dihedral_transform(p.target, k, true);
        return q;
      };
      std::set<std::string> seen_test, seen_train;
      add_augmented(g.test, test, o.test_augment, sym, seen_test, {});
      add_augmented(g.train, train, o.augment, sym, seen_train, seen_test);
      break;
    }
    case data::Task::arc: {
      if (o.arc_path.empty()) throw std::invalid_argument("arc data needs an input path");
      const auto tasks = data::arc_load(o.arc_path);
      auto splits = data::arc_build_dataset(tasks, o.augment, o.seed, o.permute_background);
      g.train = std::move(splits.train);
      g.test = std::move(splits.test);
      break;
    }
  }
  auto& m = g.manifest;
  m.task = o.task;
  m.seq_len = g.train.seq_len;
  m.vocab_size = g.train.vocab_size;
  m.n_puzzle_ids = g.train.n_puzzle_ids;
  m.seed = o.seed;
  m.params = to_json(o);
  m.config_hash = fnv1a_hex(m.params.dump());
  m.counts = {{"train", g.train.size()}, {"test", g.test.size()}};
  m.hashes = {{"train", data::split_hash(g.train)}, {"test", data::split_hash(g.test)}};
  return g;
}

void write_dataset(const fs::path& dir, const GeneratedData& d, bool force) {
  for (const char* name : {"manifest.json", "train.jsonl", "test.jsonl"}) {
    if (fs::exists(dir / name) && !force) {
      throw std::invalid_argument((dir / name).string() + " already exists (use --force to overwrite)");
    }
  }
  fs::create_directories(dir);
  data::write_jsonl(dir / "train.jsonl", d.train);
  data::write_jsonl(dir / "test.jsonl", d.test);
  data::write_manifest(dir, d.manifest);
}

// ------------------------------------------------------------------ run config

std::string to_string(DType d) { return d == DType::f64 ? "float64" : "float32"; }

DType parse_dtype(const std::string& s) {
  if (s == "float32" || s == "f32") return DType::f32;
  if (s == "float64" || s == "f64") return DType::f64;
  throw std::invalid_argument("unknown dtype '" + s + "' (expected float32|float64)");
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"net", c.net}, {"schedule", c.schedule}, {"train", c.train}, {"dtype", to_string(c.dtype)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("net")) c.net = j["net"].get<NetConfig>();
  if (j.contains("schedule")) c.schedule = j["schedule"].get<RecursionSchedule>();
  if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
  if (j.contains("dtype")) c.dtype = parse_dtype(j["dtype"].get<std::string>());
  return c;
}

RunConfig desk_preset() {
  RunConfig c;
  c.net.hidden = 64;
  c.net.n_heads = 4;
  c.net.arch = Arch::mixer;
  c.net.ffn_multiple = 8;
  c.schedule = {Variant::trm, 6, 3, 16};
  c.train.batch_size = 64;
  c.train.lr = 1e-3;
  c.train.embedding_lr = 1e-2;
  c.train.warmup_steps = 100;
  c.train.weight_decay = 0.1;
  c.train.ema_decay = 0.99;
  c.train.max_steps = 1000;
  return c;
}

void bind_to_data(RunConfig& c, const data::Manifest& m, bool strict) {
  if (strict) {
    if (c.net.seq_len != m.seq_len) {
      throw data::DataError("config seq_len " + std::to_string(c.net.seq_len) + " does not match dataset " +
                            std::to_string(m.seq_len));
    }
    if (c.net.vocab_size != m.vocab_size) {
      throw data::DataError("config vocab_size " + std::to_string(c.net.vocab_size) + " does not match dataset " +
                            std::to_string(m.vocab_size));
    }
    if (c.net.n_puzzle_ids < m.n_puzzle_ids) throw data::DataError("config has fewer puzzle-id rows than the dataset");
    return;
  }
  c.net.seq_len = m.seq_len;
  c.net.vocab_size = m.vocab_size;
  c.net.n_puzzle_ids = m.n_puzzle_ids;
}

CheckpointConfig checkpoint_config(const RunConfig& c) { return {c.net, c.schedule, c.train, c.schedule.variant}; }

RunConfig run_config(const CheckpointConfig& c, DType dtype) { return {c.net, c.schedule, c.train, dtype}; }

fs::path output_path(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("TRM_OUTPUT_ROOT"); root && *root) return fs::path(root) / p;
  return p;
}

// ------------------------------------------------------------------ training

namespace {

// Fields that may change between a run and its resumption.
nlohmann::json resumable_view(const CheckpointConfig& c) {
  auto j = to_json(c);
  j["train"].erase("max_steps");
  j["train"].erase("checkpoint_every");
  j["train"].erase("log_wall_time");
  return j;
}

template <class T>
TrainResult train_impl(const RunConfig& cfg, const data::TokenDataset& train, const TrainOptions& opts) {
  cfg.net.validate();
  cfg.schedule.validate();
  cfg.train.validate();
  const CheckpointConfig ck = checkpoint_config(cfg);
  const std::string data_hash = data::split_hash(train);
  fs::create_directories(opts.out_dir / "checkpoints");
  Model<T> model(cfg.net, cfg.schedule.variant, cfg.train.seed);
  Trainer<T> trainer(model, cfg.schedule, cfg.train, train);
  TrainResult result;

  std::vector<std::string> kept_lines;
  if (opts.resume) {
    const auto saved = load_checkpoint<T>(*opts.resume);
    if (resumable_view(saved.config) != resumable_view(ck)) {
      throw data::DataError("checkpoint " + opts.resume->string() + " was written with a different configuration");
    }
    if (saved.extra.value("train_hash", "") != data_hash) {
      throw data::DataError("checkpoint " + opts.resume->string() + " was trained on a different dataset");
    }
    restore_trainer(trainer, saved);
    std::ifstream old(opts.out_dir / "metrics.jsonl");
    std::string line;
    while (std::getline(old, line)) {
      if (!line.empty() && nlohmann::json::parse(line).at("step").get<std::int64_t>() <= saved.step) {
        kept_lines.push_back(line);
      }
    }
  }
  {
    std::ofstream conf(opts.out_dir / "config.json", std::ios::binary);
    auto j = to_json(cfg);
    j["config_hash"] = config_hash(ck);
    j["train_hash"] = data_hash;
    conf << j.dump(2) << '\n';
  }
  std::ofstream metrics(opts.out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  for (const auto& l : kept_lines) metrics << l << '\n';
  const nlohmann::json extra = {{"train_hash", data_hash}};
  try {
    trainer.run([&](const StepMetrics& m) {
      metrics << to_json(m).dump() << '\n';
      metrics.flush();
      result.metrics.push_back(m);
      if (cfg.train.checkpoint_every > 0 && m.step % cfg.train.checkpoint_every == 0) {
        save_checkpoint(opts.out_dir / "checkpoints" / ("step_" + std::to_string(m.step) + ".ckpt"),
                        snapshot(trainer, ck, extra));
      }
      if (opts.on_step) opts.on_step(m);
    });
  } catch (const NonFiniteLoss&) {
    save_checkpoint(opts.out_dir / "diagnostic.ckpt", snapshot(trainer, ck, extra));
    throw;
  }
  result.steps = trainer.steps_done();
  result.final_checkpoint = opts.out_dir / "final.ckpt";
  save_checkpoint(result.final_checkpoint, snapshot(trainer, ck, extra));
  return result;
}

template <class T>
nlohmann::json eval_impl(const Checkpoint<T>& ck, const data::TokenDataset& data, const EvalRunOptions& opts,
                         std::string* csv) {
  if (data.seq_len != ck.config.net.seq_len || data.vocab_size != ck.config.net.vocab_size) {
    throw data::DataError("dataset (L=" + std::to_string(data.seq_len) + ", V=" + std::to_string(data.vocab_size) +
                          ") is incompatible with the checkpoint (L=" + std::to_string(ck.config.net.seq_len) +
                          ", V=" + std::to_string(ck.config.net.vocab_size) + ")");
  }
  for (const auto& e : data.examples) {
    if (e.embedding_id >= ck.config.net.n_puzzle_ids) throw data::DataError("dataset uses puzzle ids unknown to the checkpoint");
  }
  const Model<T> model = ck.make_model(opts.use_ema && !ck.ema.empty());
  EvalOptions eo;
  eo.n_sup = opts.n_sup.value_or(ck.config.schedule.n_sup);
  eo.batch_size = opts.batch_size;
  const auto report = eval_run(model, data, ck.config.schedule, eo);
  auto j = to_json(report);
  j["config_hash"] = config_hash(ck.config);
  j["seed"] = ck.config.train.seed;
  j["checkpoint_step"] = ck.step;
  j["weights"] = opts.use_ema && !ck.ema.empty() ? "ema" : "raw";
  j["dataset_hash"] = data::split_hash(data);
  if (csv) *csv = outcomes_csv(report);
  return j;
}

}  // namespace

TrainResult train_run(const RunConfig& cfg, const data::TokenDataset& train, const TrainOptions& opts) {
  if (cfg.dtype == DType::f64) return train_impl<double>(cfg, train, opts);
  return train_impl<float>(cfg, train, opts);
}

nlohmann::json eval_checkpoint(const fs::path& ckpt, const data::TokenDataset& data, const EvalRunOptions& opts,
                               std::string* csv) {
  const auto header = read_checkpoint_header(ckpt);
  if (header.value("dtype", "") == "float64") return eval_impl(load_checkpoint<double>(ckpt), data, opts, csv);
  return eval_impl(load_checkpoint<float>(ckpt), data, opts, csv);
}

// ------------------------------------------------------------------ ablation

AblationCell parse_cell(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 4) throw std::invalid_argument("cell '" + spec + "' must be variant:n:T:layers");
  AblationCell c;
  try {
    c.variant = parse_variant(parts[0]);
    c.n = std::stoi(parts[1]);
    c.T = std::stoi(parts[2]);
    c.layers = std::stoi(parts[3]);
  } catch (const std::logic_error& e) {
    throw std::invalid_argument("cell '" + spec + "': " + e.what());
  }
  return c;
}

std::string cell_name(const AblationCell& c) {
  return to_string(c.variant) + "_n" + std::to_string(c.n) + "_T" + std::to_string(c.T) + "_L" + std::to_string(c.layers);
}

std::vector<AblationRow> ablate(const std::vector<AblationCell>& cells, const data::TokenDataset& train,
                                const data::TokenDataset& test, const AblationOptions& opts) {
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    RunConfig cfg = opts.base;
    cfg.schedule.variant = cell.variant;
    cfg.schedule.n = cell.n;
    cfg.schedule.T = cell.T;
    cfg.net.n_layers = cell.layers;
    AblationRow row;
    row.cell = cell;
    row.depth = effective_depth(cell.T, cell.n, cell.layers);
    row.params = param_count(cfg.net, cell.variant);
    row.nfp = cell.variant == Variant::hrm ? 2 : 1;
    NetConfig mem_net = opts.memory_net.value_or(cfg.net);
    mem_net.n_layers = cell.layers;
    const auto verdict = check_memory(mem_net, cfg.schedule, opts.memory_batch.value_or(cfg.train.batch_size),
                                      cfg.dtype == DType::f64 ? 8 : 4,
                                      static_cast<std::int64_t>(opts.memory_budget_gb * (1ull << 30)));
    if (!verdict.fits) {
      std::ostringstream reason;
      reason << std::fixed << std::setprecision(1) << "OOM: estimated "
             << static_cast<double>(verdict.estimated_bytes) / (1ull << 30) << " GiB > " << opts.memory_budget_gb
             << " GiB";
      row.status = reason.str();
      rows.push_back(row);
      continue;
    }
    TrainOptions to;
    to.out_dir = opts.out_dir / cell_name(cell);
    const auto result = train_run(cfg, train, to);
    for (const auto& m : result.metrics) row.loss_curve.push_back(m.loss_answer);
    if (!test.empty()) {
      const auto report = eval_checkpoint(result.final_checkpoint, test, {});
      row.test_exact_match = report.at("exact_match").get<double>();
    }
    row.status = "ok";
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "| variant | n | T | layers | depth | test exact-match | params | NFP | status |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << to_string(r.cell.variant) << " | " << r.cell.n << " | " << r.cell.T << " | " << r.cell.layers << " | "
       << r.depth << " | ";
    if (r.test_exact_match) {
      os << std::fixed << std::setprecision(2) << 100.0 * *r.test_exact_match << "%";
    } else {
      os << "-";
    }
    os << " | " << r.params << " | " << r.nfp << " | " << r.status << " |\n";
  }
  return os.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,n,T,layers,depth,test_exact_match,params,nfp,status\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << to_string(r.cell.variant) << ',' << r.cell.n << ',' << r.cell.T << ',' << r.cell.layers << ',' << r.depth
       << ',';
    if (r.test_exact_match) os << *r.test_exact_match;
    os << ',' << r.params << ',' << r.nfp << ",\"" << r.status << "\"\n";
  }
  return os.str();
}

std::string loss_svg(const std::vector<std::pair<std::string, std::vector<double>>>& curves, const std::string& title) {
  constexpr double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 40;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double lo = 0.0, hi = 1e-9;
  std::size_t longest = 1;
  for (const auto& [name, ys] : curves) {
    for (double y : ys) hi = std::max(hi, y);
    longest = std::max(longest, ys.size());
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
     << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
     << hi << "</text>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << H - bottom << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
     << lo << "</text>\n";
  os << "<text x=\"" << W - right << "\" y=\"" << H - bottom + 16
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">step " << longest << "</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& [name, ys] = curves[c];
    const char* color = palette[c % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double x = left + (W - left - right) * (longest > 1 ? static_cast<double>(i) / static_cast<double>(longest - 1) : 0.0);
      const double y = H - bottom - (H - top - bottom) * (ys[i] - lo) / (hi - lo);
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - right - 4 << "\" y=\"" << top + 14 * (c + 1) << "\" text-anchor=\"end\" fill=\"" << color
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace trm
