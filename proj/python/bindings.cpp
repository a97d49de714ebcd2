// Python module: JSON strings cross the boundary, the package wrapper turns them into dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "trm/data/dataset.hpp"
#include "trm/model.hpp"
#include "trm/recursion.hpp"
#include "trm/run.hpp"
#include "trm/train.hpp"

namespace py = pybind11;
using namespace trm;

namespace {

RunConfig config_from(const std::string& text) {
  return text.empty() ? desk_preset() : run_config_from_json(nlohmann::json::parse(text));
}

std::string gen_data(const std::string& task, const std::filesystem::path& out, int count, int test_count, int augment,
                     int test_augment, int size, std::uint64_t seed, bool force) {
  GenDataOptions o;
  o.task = data::parse_task(task);
  o.count = count;
  o.test_count = test_count;
  o.augment = augment;
  o.test_augment = test_augment;
  o.size = size;
  o.seed = seed;
  const auto d = generate_dataset(o);
  write_dataset(out, d, force);
  nlohmann::json j = d.manifest;
  return j.dump();
}

std::string train(const std::string& config, const std::filesystem::path& data_dir, const std::filesystem::path& out) {
  RunConfig c = config_from(config);
  bind_to_data(c, data::read_manifest(data_dir), false);
  TrainOptions to;
  to.out_dir = out;
  py::gil_scoped_release release;
  const auto r = train_run(c, data::load_split(data_dir, "train"), to);
  nlohmann::json j{{"steps", r.steps}, {"final_checkpoint", r.final_checkpoint.string()}};
  return j.dump();
}

std::string evaluate(const std::filesystem::path& ckpt, const std::filesystem::path& data_dir, const std::string& split,
                     bool use_ema) {
  EvalRunOptions o;
  o.use_ema = use_ema;
  const auto ds = data::load_split(data_dir, split);
  py::gil_scoped_release release;
  return eval_checkpoint(ckpt, ds, o).dump();
}

}  // namespace

PYBIND11_MODULE(_trm, m) {
  m.doc() = "Recursive reasoning models: data generation, training and evaluation";

  py::register_exception<data::DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NonFiniteLoss>(m, "NonFiniteLoss", PyExc_ArithmeticError);

  m.def("desk_preset", [] { return to_json(desk_preset()).dump(); });
  m.def(
      "param_count",
      [](const std::string& config) {
        const auto c = config_from(config);
        return param_count(c.net, c.schedule.variant);
      },
      py::arg("config") = "");
  m.def("effective_depth", &effective_depth, py::arg("T"), py::arg("n"), py::arg("n_layers"));
  m.def("gen_data", &gen_data, py::arg("task"), py::arg("out"), py::arg("count"), py::arg("test_count") = 0,
        py::arg("augment") = 1, py::arg("test_augment") = 1, py::arg("size") = 4, py::arg("seed") = 0,
        py::arg("force") = false);
  m.def("train", &train, py::arg("config"), py::arg("data_dir"), py::arg("out"));
  m.def("evaluate", &evaluate, py::arg("checkpoint"), py::arg("data_dir"), py::arg("split") = "test",
        py::arg("use_ema") = true);
}
