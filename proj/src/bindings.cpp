#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "hmoe/config.hpp"
#include "hmoe/data.hpp"
#include "hmoe/errors.hpp"
#include "hmoe/experiment.hpp"
#include "hmoe/gating.hpp"
#include "hmoe/metrics.hpp"
#include "hmoe/model.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

hmoe::Tensor tensor_from_array(const DoubleArray& arr) {
  if (arr.ndim() != 2) throw hmoe::DimensionError("expected a 2-D array");
  const int rows = static_cast<int>(arr.shape(0));
  const int cols = static_cast<int>(arr.shape(1));
  std::vector<double> values(arr.data(), arr.data() + static_cast<size_t>(rows) * cols);
  return hmoe::Tensor({rows, cols}, std::move(values));
}

py::array_t<double> array_from_tensor(const hmoe::Tensor& t) {
  if (t.rank() == 1) {
    py::array_t<double> out(t.size());
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
  }
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

py::dict dataset_to_dict(const hmoe::Dataset& ds) {
  py::dict out;
  out["x"] = array_from_tensor(ds.x);
  if (ds.task == hmoe::TaskKind::Regression) {
    py::array_t<double> y(static_cast<py::ssize_t>(ds.size()));
    std::copy(ds.y_reg.begin(), ds.y_reg.end(), y.mutable_data());
    out["y"] = y;
  } else {
    out["y"] = py::cast(ds.y_cls);
  }
  out["d"] = py::cast(ds.domain);
  return out;
}

hmoe::KvMap kv_from_dict(const py::dict& config) {
  hmoe::KvMap kv;
  for (const auto& item : config)
    kv[py::str(item.first).cast<std::string>()] = py::str(item.second).cast<std::string>();
  return kv;
}

py::object json_loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

// Frozen model handle for inference from python.
class PyModel {
 public:
  explicit PyModel(const std::string& path) : model_(hmoe::HmoeModel::load(path)) {}

  py::dict predict(const DoubleArray& x, const std::string& mode_name) {
    const hmoe::Tensor input = tensor_from_array(x);
    const hmoe::InferenceMode mode = hmoe::mode_from_string(mode_name);
    const hmoe::Prediction pred = mode == hmoe::InferenceMode::Mix
                                      ? hmoe::predict_mix(model_, input)
                                      : hmoe::predict_ood(model_, input);
    py::dict out;
    out["mode"] = hmoe::to_string(pred.mode);
    out["output"] = array_from_tensor(pred.output);
    if (pred.mode == hmoe::InferenceMode::Mix) {
      out["gate_p"] = array_from_tensor(pred.gate_p);
      out["gate_d"] = array_from_tensor(pred.gate_d);
    }
    return out;
  }

  void save(const std::string& path) const { model_.save(path); }

  int num_experts() const { return model_.spec().num_experts; }
  int embed_dim() const { return model_.spec().embed_dim; }
  int input_dim() const { return model_.spec().input_dim; }
  std::string task() const { return hmoe::to_string(model_.spec().task); }
  py::array_t<double> embeddings() { return array_from_tensor(model_.embeddings().vectors); }

 private:
  hmoe::HmoeModel model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hypernetwork mixture-of-experts: gating, datasets, metrics, training";

  py::register_exception<hmoe::Error>(m, "HmoeError");

  m.def("gamma_en", &hmoe::gamma_en, py::arg("pct_tr"),
        "Entropy-weight schedule: min(2 * pct, 1).");
  m.def("lambda_grl", &hmoe::lambda_grl, py::arg("pct_tr"),
        "Gradient-reversal schedule: 2 / (1 + exp(-10 * pct)) - 1.");

  m.def(
      "gate_values",
      [](const DoubleArray& v, const DoubleArray& e, double eps) {
        hmoe::Tape tape;
        const hmoe::GateDistribution g = hmoe::gate_values(
            tape, tape.constant(tensor_from_array(v)), tape.constant(tensor_from_array(e)), eps);
        py::dict out;
        out["p"] = array_from_tensor(g.p.tensor());
        out["d"] = array_from_tensor(g.d);
        out["s"] = array_from_tensor(g.s.tensor());
        return out;
      },
      py::arg("v"), py::arg("embeddings"), py::arg("eps") = 1e-8,
      "Distance-based gate probabilities, distances and scores.");

  m.def(
      "entropy_of",
      [](const DoubleArray& p) {
        hmoe::Tape tape;
        return hmoe::mean_row_entropy(tape.constant(tensor_from_array(p))).scalar();
      },
      py::arg("p"), "Mean Shannon entropy (nats) of probability rows.");

  m.def(
      "kl_balance_of",
      [](const DoubleArray& p) {
        hmoe::Tape tape;
        return hmoe::kl_balance_uniform(tape.constant(tensor_from_array(p))).scalar();
      },
      py::arg("p"), "KL divergence of the column-mass distribution from uniform.");

  m.def(
      "assign_cluster",
      [](const DoubleArray& p) { return hmoe::assign_cluster(tensor_from_array(p)); },
      py::arg("p"), "Argmax cluster per row, ties toward the lowest index.");

  m.def(
      "gen_toy_regression",
      [](std::uint64_t seed) { return dataset_to_dict(hmoe::gen_toy_regression(seed)); },
      py::arg("seed") = 0,
      "Sine regression points on three intervals (10/20/30 per interval).");

  m.def(
      "gen_synthetic_domains",
      [](int domains, int classes, int n_per, double separation, int dim, std::uint64_t seed) {
        return dataset_to_dict(hmoe::gen_synthetic_domains(
            hmoe::SyntheticSpec{domains, classes, n_per, separation, dim}, seed));
      },
      py::arg("domains") = 3, py::arg("classes") = 3, py::arg("n_per") = 100,
      py::arg("separation") = 10.0, py::arg("dim") = 16, py::arg("seed") = 0,
      "Gaussian class blobs replicated across affine-transformed domains.");

  m.def(
      "silhouette",
      [](const DoubleArray& points, const std::vector<int>& labels) {
        return hmoe::silhouette(tensor_from_array(points), labels);
      },
      py::arg("points"), py::arg("labels"),
      "Mean silhouette coefficient under Euclidean distance.");

  m.def("cluster_purity", &hmoe::cluster_purity, py::arg("predicted"), py::arg("truth"));
  m.def("accuracy", &hmoe::accuracy, py::arg("predicted"), py::arg("truth"));

  m.def(
      "train",
      [](const py::dict& config) {
        return json_loads(hmoe::cmd_train(hmoe::resolve_config(kv_from_dict(config))));
      },
      py::arg("config"),
      "Run a full experiment; writes artifacts to config['out_dir'] and returns the summary.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& data, const std::string& mode,
         const std::string& out_dir) {
        return json_loads(hmoe::cmd_eval(checkpoint, data, mode, out_dir));
      },
      py::arg("checkpoint"), py::arg("data"), py::arg("mode") = "MIX",
      py::arg("out_dir") = "eval_out", "Evaluate a checkpoint on a dataset CSV.");

  m.def(
      "gendata",
      [](const py::dict& config, const std::string& out_path) {
        hmoe::cmd_gendata(hmoe::resolve_config(kv_from_dict(config)), out_path);
      },
      py::arg("config"), py::arg("out_path"), "Write a dataset CSV.");

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
      .def("predict", &PyModel::predict, py::arg("x"), py::arg("mode") = "MIX")
      .def("save", &PyModel::save, py::arg("path"))
      .def("embeddings", &PyModel::embeddings)
      .def_property_readonly("num_experts", &PyModel::num_experts)
      .def_property_readonly("embed_dim", &PyModel::embed_dim)
      .def_property_readonly("input_dim", &PyModel::input_dim)
      .def_property_readonly("task", &PyModel::task);

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
