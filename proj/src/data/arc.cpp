#include "trm/data/arc.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <tuple>

#include "trm/data/dihedral.hpp"

namespace trm::data {

namespace {

Grid parse_grid(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw DataError(where + ": grid must be a non-empty array of rows");
  const int h = static_cast<int>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw DataError(where + ": grid rows must be non-empty arrays");
  const int w = static_cast<int>(j[0].size());
  if (h > kArcCanvas || w > kArcCanvas) {
    throw DataError(where + ": grid " + std::to_string(h) + "x" + std::to_string(w) + " exceeds 30x30");
  }
  Grid g(h, w);
  for (int r = 0; r < h; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != w) throw DataError(where + ": ragged grid row " + std::to_string(r));
    for (int c = 0; c < w; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number_integer()) throw DataError(where + ": non-integer cell at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      const auto color = v.get<std::int64_t>();
      if (color < 0 || color > 9) {
        throw DataError(where + ": color " + std::to_string(color) + " at (" + std::to_string(r) + "," +
                        std::to_string(c) + ") is outside 0..9");
      }
      g.at(r, c) = static_cast<int>(color);
    }
  }
  return g;
}

std::vector<ArcPair> parse_pairs(const nlohmann::json& j, const std::string& where, bool output_required) {
  if (!j.is_array()) throw DataError(where + " must be an array");
  std::vector<ArcPair> pairs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!j[i].is_object() || !j[i].contains("input")) throw DataError(at + ": missing \"input\"");
    ArcPair p;
    p.input = parse_grid(j[i]["input"], at + ".input");
    if (j[i].contains("output")) {
      p.output = parse_grid(j[i]["output"], at + ".output");
    } else if (output_required) {
      throw DataError(at + ": missing \"output\"");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

nlohmann::ordered_json grid_json(const Grid& g) {
  auto rows = nlohmann::ordered_json::array();
  for (int r = 0; r < g.height; ++r) {
    auto row = nlohmann::ordered_json::array();
    for (int c = 0; c < g.width; ++c) row.push_back(g.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::ordered_json pairs_json(const std::vector<ArcPair>& pairs) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    nlohmann::ordered_json item;
    item["input"] = grid_json(p.input);
    if (p.output) item["output"] = grid_json(*p.output);
    out.push_back(std::move(item));
  }
  return out;
}

template <class F>
void for_each_grid(const ArcTask& task, F&& f) {
  for (const auto* pairs : {&task.train, &task.test}) {
    for (const auto& p : *pairs) {
      f(p.input);
      if (p.output) f(*p.output);
    }
  }
}

Grid recolor(const Grid& g, const std::array<int, 10>& map) {
  Grid out = g;
  for (auto& v : out.cells) v = map[static_cast<std::size_t>(v)];
  return out;
}

}  // namespace

ArcTask arc_parse(const nlohmann::json& j, const std::string& id) {
  const std::string where = id.empty() ? "task" : id;
  if (!j.is_object() || !j.contains("train") || !j.contains("test")) {
    throw DataError(where + ": expected an object with \"train\" and \"test\"");
  }
  ArcTask t;
  t.id = id;
  t.train = parse_pairs(j["train"], where + ".train", true);
  t.test = parse_pairs(j["test"], where + ".test", false);
  return t;
}

std::vector<ArcTask> arc_load(const std::filesystem::path& path) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(p.string() + ": malformed JSON: " + ex.what());
    }
  };
  std::vector<ArcTask> tasks;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) tasks.push_back(arc_parse(read(f), f.stem().string()));
    return tasks;
  }
  const auto j = read(path);
  if (j.is_object() && j.contains("train")) {
    tasks.push_back(arc_parse(j, path.stem().string()));
    return tasks;
  }
  if (!j.is_object()) throw DataError(path.string() + ": expected a task object or an id-to-task map");
  for (const auto& [id, task] : j.items()) tasks.push_back(arc_parse(task, id));
  return tasks;
}

std::string arc_serialize(const ArcTask& task) {
  nlohmann::ordered_json j;
  j["train"] = pairs_json(task.train);
  j["test"] = pairs_json(task.test);
  return j.dump();
}

Grid ArcTransform::apply(const Grid& g) const { return dihedral_transform(recolor(g, colors), dihedral); }

Grid ArcTransform::invert(const Grid& g) const {
  std::array<int, 10> inverse{};
  for (int c = 0; c < 10; ++c) inverse[static_cast<std::size_t>(colors[static_cast<std::size_t>(c)])] = c;
  return recolor(dihedral_transform(g, dihedral_inverse(dihedral)), inverse);
}

void to_json(nlohmann::json& j, const ArcTransform& t) {
  j = {{"colors", t.colors}, {"dihedral", t.dihedral}, {"offset_row", t.offset_row}, {"offset_col", t.offset_col}};
}

void from_json(const nlohmann::json& j, ArcTransform& t) {
  t.colors = j.at("colors").get<std::array<int, 10>>();
  t.dihedral = j.at("dihedral").get<int>();
  t.offset_row = j.at("offset_row").get<int>();
  t.offset_col = j.at("offset_col").get<int>();
}

ArcTask arc_apply(const ArcTask& task, const ArcTransform& t) {
  ArcTask out = task;
  for (auto* pairs : {&out.train, &out.test}) {
    for (auto& p : *pairs) {
      p.input = t.apply(p.input);
      if (p.output) p.output = t.apply(*p.output);
    }
  }
  return out;
}

ArcTransform arc_random_transform(const ArcTask& task, std::mt19937_64& rng, bool permute_background) {
  ArcTransform t;
  std::shuffle(t.colors.begin() + (permute_background ? 0 : 1), t.colors.end(), rng);
  t.dihedral = std::uniform_int_distribution<int>(0, 7)(rng);
  int max_h = 0, max_w = 0;
  for_each_grid(task, [&](const Grid& g) {
    const bool swap = t.dihedral % 2 == 1;
    max_h = std::max(max_h, swap ? g.width : g.height);
    max_w = std::max(max_w, swap ? g.height : g.width);
  });
  t.offset_row = std::uniform_int_distribution<int>(0, kArcCanvas - max_h)(rng);
  t.offset_col = std::uniform_int_distribution<int>(0, kArcCanvas - max_w)(rng);
  return t;
}

std::vector<ArcTransform> arc_augment(const ArcTask& task, int count, std::uint64_t seed, bool permute_background) {
  if (count < 0) throw std::invalid_argument("arc_augment: count must be >= 0");
  std::vector<ArcTransform> out;
  if (count == 0) return out;
  out.push_back(ArcTransform::identity());
  std::mt19937_64 rng(seed);
  std::set<std::tuple<std::array<int, 10>, int, int, int>> seen{{out[0].colors, 0, 0, 0}};
  const long budget = 100L * count + 1000;
  for (long tries = 0; static_cast<int>(out.size()) < count && tries < budget; ++tries) {
    auto t = arc_random_transform(task, rng, permute_background);
    if (seen.insert({t.colors, t.dihedral, t.offset_row, t.offset_col}).second) out.push_back(t);
  }
  if (static_cast<int>(out.size()) < count) throw std::runtime_error("arc_augment: could not find enough distinct transforms");
  return out;
}

ArcSplits arc_build_dataset(const std::vector<ArcTask>& tasks, int augmentations, std::uint64_t seed,
                            bool permute_background) {
  ArcSplits s;
  for (auto* ds : {&s.train, &s.test}) {
    ds->task = Task::arc;
    ds->seq_len = kArcCanvas * kArcCanvas;
    ds->vocab_size = kArcVocab;
  }
  std::int32_t embedding = 0;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const auto transforms = arc_augment(tasks[ti], augmentations, seed + ti, permute_background);
    for (std::size_t ai = 0; ai < transforms.size(); ++ai) {
      const auto& t = transforms[ai];
      const CanvasLayout layout{kArcCanvas, kArcCanvas, t.offset_row, t.offset_col};
      auto add = [&](TokenDataset& ds, const ArcPair& pair, std::int64_t puzzle_id) {
        PuzzleInstance p;
        p.task = Task::arc;
        p.input = t.apply(pair.input);
        p.target = t.apply(*pair.output);
        p.puzzle_id = puzzle_id;
        p.augmentation_id = static_cast<std::int64_t>(ai);
        Example e = encode_instance(p, embedding, layout);
        e.augmentation = t;
        ds.examples.push_back(std::move(e));
      };
      for (std::size_t pi = 0; pi < tasks[ti].train.size(); ++pi) add(s.train, tasks[ti].train[pi], arc_puzzle_id(ti, 500 + pi));
      for (std::size_t pi = 0; pi < tasks[ti].test.size(); ++pi) {
        if (tasks[ti].test[pi].output) add(s.test, tasks[ti].test[pi], arc_puzzle_id(ti, pi));
      }
      ++embedding;
    }
  }
  s.train.n_puzzle_ids = s.test.n_puzzle_ids = std::max<std::int32_t>(embedding, 1);
  return s;
}

}  // namespace trm::data
