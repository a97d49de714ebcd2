// trm: data generation, training, evaluation and ablation sweeps.
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "trm/run.hpp"

namespace fs = std::filesystem;
using namespace trm;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

// Flags shared by train and ablate. Unset flags leave the config untouched.
struct ConfigFlags {
  std::string config_file;
  bool desk = false;
  std::optional<std::string> variant, arch, dtype;
  std::optional<int> n, T, n_sup, layers, hidden, heads, ffn_multiple, batch, warmup;
  std::optional<double> expansion, lr, embedding_lr, weight_decay, ema_decay;
  std::optional<std::int64_t> steps, checkpoint_every;
  bool no_ema = false, no_halting = false, no_wall_time = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run config; flags override it")->check(CLI::ExistingFile);
    app->add_flag("--desk", desk, "start from the small single-core preset");
    app->add_option("--variant", variant, "trm|hrm|single_z|multi_z");
    app->add_option("--arch", arch, "attention|mixer");
    app->add_option("--dtype", dtype, "float32|float64");
    app->add_option("--n", n, "latent updates per cycle");
    app->add_option("--T", T, "cycles per supervision step");
    app->add_option("--n-sup", n_sup, "maximum supervision steps");
    app->add_option("--layers", layers, "blocks per network");
    app->add_option("--hidden", hidden, "model width");
    app->add_option("--heads", heads, "attention heads");
    app->add_option("--expansion", expansion, "MLP expansion");
    app->add_option("--ffn-multiple", ffn_multiple, "round the MLP width up to this multiple");
    app->add_option("--batch", batch, "pool size");
    app->add_option("--lr", lr, "peak learning rate");
    app->add_option("--embedding-lr", embedding_lr, "learning rate of puzzle-id embeddings");
    app->add_option("--warmup", warmup, "linear warmup steps");
    app->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    app->add_option("--ema-decay", ema_decay, "EMA decay");
    app->add_option("--steps", steps, "optimization steps");
    app->add_option("--checkpoint-every", checkpoint_every, "checkpoint cadence in steps (0 = final only)");
    app->add_flag("--no-ema", no_ema, "evaluate and save raw weights only");
    app->add_flag("--no-halting", no_halting, "run every sample for all supervision steps");
    app->add_flag("--no-wall-time", no_wall_time, "omit wall_ms from the metrics stream");
  }

  RunConfig build(std::uint64_t seed) const {
    RunConfig c = desk ? desk_preset() : RunConfig{};
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(config_file + ": " + e.what());
      }
      const RunConfig from_file = run_config_from_json(j);
      if (j.contains("net")) c.net = from_file.net;
      if (j.contains("schedule")) c.schedule = from_file.schedule;
      if (j.contains("train")) c.train = from_file.train;
      if (j.contains("dtype")) c.dtype = from_file.dtype;
    }
    if (variant) c.schedule.variant = parse_variant(*variant);
    if (arch) c.net.arch = parse_arch(*arch);
    if (dtype) c.dtype = parse_dtype(*dtype);
    if (n) c.schedule.n = *n;
    if (T) c.schedule.T = *T;
    if (n_sup) c.schedule.n_sup = *n_sup;
    if (layers) c.net.n_layers = *layers;
    if (hidden) c.net.hidden = *hidden;
    if (heads) c.net.n_heads = *heads;
    if (expansion) c.net.expansion = *expansion;
    if (ffn_multiple) c.net.ffn_multiple = *ffn_multiple;
    if (batch) c.train.batch_size = *batch;
    if (lr) c.train.lr = *lr;
    if (embedding_lr) c.train.embedding_lr = *embedding_lr;
    if (warmup) c.train.warmup_steps = *warmup;
    if (weight_decay) c.train.weight_decay = *weight_decay;
    if (ema_decay) c.train.ema_decay = *ema_decay;
    if (steps) c.train.max_steps = *steps;
    if (checkpoint_every) c.train.checkpoint_every = *checkpoint_every;
    if (no_ema) c.train.use_ema = false;
    if (no_halting) c.train.halting = false;
    if (no_wall_time) c.train.log_wall_time = false;
    c.train.seed = seed;
    return c;
  }
  bool pins_task_shape() const { return !config_file.empty(); }
};

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// Config files may pin seq_len/vocab; otherwise they follow the dataset.
void bind(RunConfig& cfg, const data::Manifest& m, const ConfigFlags& flags) {
  bool strict = false;
  if (flags.pins_task_shape()) {
    std::ifstream in(flags.config_file);
    const auto j = nlohmann::json::parse(in);
    strict = j.contains("net") && (j["net"].contains("seq_len") || j["net"].contains("vocab_size"));
  }
  bind_to_data(cfg, m, strict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiny recursive reasoning models: data, training, evaluation and ablations"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a dataset (train.jsonl, test.jsonl, manifest.json)");
  GenDataOptions g;
  std::string task_name, difficulty = "any", gen_out;
  bool force = false;
  gen->add_option("task", task_name, "sudoku|maze|arc")->required();
  gen->add_option("--out", gen_out, "output directory (relative paths live under $TRM_OUTPUT_ROOT)");
  gen->add_option("--count", g.count, "train instances");
  gen->add_option("--test-count", g.test_count, "test instances");
  gen->add_option("--augment", g.augment, "copies per train instance, original included");
  gen->add_option("--test-augment", g.test_augment, "copies per test instance, original included");
  gen->add_option("--size", g.size, "sudoku side (4 or 9)");
  gen->add_option("--min-clues", g.min_clues, "sudoku minimum clues");
  gen->add_option("--max-clues", g.max_clues, "sudoku maximum clues");
  gen->add_option("--difficulty", difficulty, "sudoku tier: any|hard");
  gen->add_option("--height", g.height, "maze rows");
  gen->add_option("--width", g.width, "maze columns");
  gen->add_option("--min-path-len", g.min_path_len, "maze minimum shortest-path length");
  gen->add_option("--arc-path", g.arc_path, "ARC task file or directory");
  gen->add_flag("--permute-background", g.permute_background, "let ARC color permutations move color 0");
  gen->add_flag("--force", force, "overwrite existing files");
  gen->add_option("--seed", seed, "random seed");

  // train
  auto* train = app.add_subcommand("train", "train a model on a generated dataset");
  ConfigFlags train_flags;
  train_flags.attach(train);
  std::string train_data, train_out, resume;
  bool quiet = false;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run directory");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_flag("--quiet", quiet, "no progress on stderr");
  train->add_option("--seed", seed, "random seed");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out, eval_csv;
  EvalRunOptions eval_opts;
  bool eval_no_ema = false;
  std::optional<int> eval_nsup;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "split name");
  eval->add_option("--out", eval_out, "report JSON path (stdout when omitted)");
  eval->add_option("--csv", eval_csv, "per-sample CSV path");
  eval->add_flag("--no-ema", eval_no_ema, "use raw weights instead of the EMA shadow");
  eval->add_option("--n-sup", eval_nsup, "supervision steps at test time");
  eval->add_option("--batch", eval_opts.batch_size, "evaluation batch");
  eval->add_option("--seed", seed, "recorded for provenance; evaluation is deterministic");

  // ablate
  auto* abl = app.add_subcommand("ablate", "train and evaluate a grid of recursion settings");
  ConfigFlags abl_flags;
  abl_flags.attach(abl);
  std::string abl_data, abl_out = "ablation", grid_file;
  std::vector<std::string> cells;
  double budget_gb = 4.0;
  std::optional<std::int64_t> mem_batch;
  abl->add_option("--data", abl_data, "dataset directory")->required();
  abl->add_option("--out", abl_out, "output directory");
  abl->add_option("--cell", cells, "variant:n:T:layers (repeatable)");
  abl->add_option("--grid", grid_file, "JSON list of cells [{variant,n,T,layers}]")->check(CLI::ExistingFile);
  abl->add_option("--memory-budget-gb", budget_gb, "skip cells whose tape estimate exceeds this");
  abl->add_option("--memory-batch", mem_batch, "batch used for the memory estimate");
  abl->add_option("--seed", seed, "random seed");

  // inspect-checkpoint
  auto* inspect = app.add_subcommand("inspect-checkpoint", "print a checkpoint's header");
  std::string inspect_path;
  bool inspect_arrays = false;
  inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();
  inspect->add_flag("--arrays", inspect_arrays, "list every stored array");
  inspect->add_option("--seed", seed, "accepted for uniformity; unused");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      g.task = data::parse_task(task_name);
      g.seed = seed;
      if (difficulty != "any" && difficulty != "hard") throw std::invalid_argument("--difficulty must be any|hard");
      g.difficulty = difficulty == "hard" ? data::SudokuDifficulty::hard : data::SudokuDifficulty::any;
      const fs::path out = output_path(gen_out.empty() ? fs::path("data") / task_name : fs::path(gen_out));
      const auto d = generate_dataset(g);
      write_dataset(out, d, force);
      std::cout << nlohmann::json({{"out", out.string()}, {"counts", d.manifest.counts}, {"hashes", d.manifest.hashes}})
                       .dump()
                << '\n';
    } else if (train->parsed()) {
      RunConfig cfg = train_flags.build(seed);
      const fs::path data_dir = output_path(train_data);
      const auto manifest = data::read_manifest(data_dir);
      bind(cfg, manifest, train_flags);
      cfg.net.validate();
      cfg.schedule.validate();
      cfg.train.validate();
      const auto ds = data::load_split(data_dir, "train");
      TrainOptions to;
      to.out_dir = output_path(train_out.empty() ? fs::path("runs") / ("seed" + std::to_string(seed)) : fs::path(train_out));
      if (!resume.empty()) to.resume = output_path(resume);
      if (!quiet) {
        to.on_step = [](const StepMetrics& m) {
          if (m.step % 50 == 0) {
            std::cerr << "step " << m.step << " loss " << m.loss_answer << " train_em " << m.train_exact_match
                      << " sup " << m.mean_sup_steps << '\n';
          }
        };
      }
      const auto result = train_run(cfg, ds, to);
      std::cout << nlohmann::json({{"steps", result.steps}, {"checkpoint", result.final_checkpoint.string()}}).dump()
                << '\n';
    } else if (eval->parsed()) {
      eval_opts.use_ema = !eval_no_ema;
      eval_opts.n_sup = eval_nsup;
      const auto ds = data::load_split(output_path(eval_data), eval_split);
      std::string csv;
      auto report = eval_checkpoint(output_path(eval_ckpt), ds, eval_opts, eval_csv.empty() ? nullptr : &csv);
      report["eval_seed"] = seed;
      if (eval_out.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        write_text(output_path(eval_out), report.dump(2) + "\n");
      }
      if (!eval_csv.empty()) write_text(output_path(eval_csv), csv);
    } else if (abl->parsed()) {
      std::vector<AblationCell> grid;
      for (const auto& c : cells) grid.push_back(parse_cell(c));
      if (!grid_file.empty()) {
        std::ifstream in(grid_file);
        for (const auto& c : nlohmann::json::parse(in)) {
          grid.push_back({parse_variant(c.at("variant").get<std::string>()), c.at("n").get<int>(), c.at("T").get<int>(),
                          c.value("layers", 2)});
        }
      }
      AblationOptions ao;
      ao.base = abl_flags.build(seed);
      ao.out_dir = output_path(abl_out);
      ao.memory_budget_gb = budget_gb;
      ao.memory_batch = mem_batch;
      const fs::path data_dir = output_path(abl_data);
      std::vector<AblationRow> rows;
      if (!grid.empty()) {
        bind(ao.base, data::read_manifest(data_dir), abl_flags);
        const auto tr = data::load_split(data_dir, "train");
        const auto te = data::load_split(data_dir, "test");
        rows = ablate(grid, tr, te, ao);
      }
      fs::create_directories(ao.out_dir);
      write_text(ao.out_dir / "table.md", ablation_markdown(rows));
      write_text(ao.out_dir / "table.csv", ablation_csv(rows));
      std::vector<std::pair<std::string, std::vector<double>>> all;
      for (const auto& r : rows) {
        if (r.loss_curve.empty()) continue;
        write_text(ao.out_dir / ("loss_" + cell_name(r.cell) + ".svg"),
                   loss_svg({{cell_name(r.cell), r.loss_curve}}, "answer loss: " + cell_name(r.cell)));
        all.emplace_back(cell_name(r.cell), r.loss_curve);
      }
      if (!all.empty()) write_text(ao.out_dir / "loss_all.svg", loss_svg(all, "answer loss"));
      std::cout << ablation_markdown(rows);
    } else if (inspect->parsed()) {
      auto h = read_checkpoint_header(output_path(inspect_path));
      const auto cfg = checkpoint_config_from_json(h.at("config"));
      nlohmann::json summary = {{"dtype", h["dtype"]},
                                {"step", h["step"]},
                                {"seed", h["seed"]},
                                {"config_hash", h["config_hash"]},
                                {"variant", to_string(cfg.variant)},
                                {"param_count", param_count(cfg.net, cfg.variant)},
                                {"effective_depth", effective_depth(cfg.schedule.T, std::max(cfg.schedule.n, 1),
                                                                    cfg.net.n_layers)},
                                {"has_ema", h["has_ema"]},
                                {"has_training_state", h.contains("pool")},
                                {"config", h["config"]}};
      if (inspect_arrays) {
        summary["arrays"] = nlohmann::json::array();
        for (const auto& a : h["arrays"]) summary["arrays"].push_back({{"name", a["name"]}, {"shape", a["shape"]}});
      }
      std::cout << summary.dump(2) << '\n';
    }
  } catch (const data::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kData;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "training aborted: " << e.what() << " (diagnostic.ckpt written)\n";
    return kRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
