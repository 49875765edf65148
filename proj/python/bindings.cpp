#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "modfnn/dataset_io.hpp"
#include "modfnn/error.hpp"
#include "modfnn/evaluation.hpp"
#include "modfnn/voting.hpp"

namespace py = pybind11;
using namespace modfnn;

namespace {

RgbImage image_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionError("expected an (H, W, 3) uint8 array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> px(a.data(), a.data() + a.size());
  return RgbImage(h, w, std::move(px));
}

py::array_t<std::uint8_t> image_to_array(const RgbImage& img) {
  py::array_t<std::uint8_t> out({img.height(), img.width(), 3});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Modular featured FNN classifier";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<PartialModelError>(m, "PartialModelError", base.ptr());

  py::class_<FeatureSpec>(m, "FeatureSpec")
      .def(py::init<std::string, std::string, std::string, std::string>(), py::arg("name"),
           py::arg("r"), py::arg("g"), py::arg("b"))
      .def_readonly("name", &FeatureSpec::name)
      .def_readonly("wr", &FeatureSpec::wr)
      .def_readonly("wg", &FeatureSpec::wg)
      .def_readonly("wb", &FeatureSpec::wb)
      .def_property_readonly("weight_sum", &FeatureSpec::weight_sum)
      .def("__repr__", [](const FeatureSpec& f) { return "<FeatureSpec " + f.name + ">"; });
  m.def("feature_catalog", &feature_catalog, py::return_value_policy::copy);
  m.def("feature_by_name", &feature_by_name, py::return_value_policy::copy);
  m.def("export_catalog", &export_catalog);

  m.def("transform_image",
        [](const FeatureSpec& spec, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
          return transform_image(spec, image_from_array(a));
        },
        py::arg("spec"), py::arg("image"));
  m.def("feature_vector_length", &feature_vector_length);

  py::class_<ModuleLabel>(m, "ModuleLabel")
      .def_readonly("module", &ModuleLabel::module)
      .def_readonly("local", &ModuleLabel::local)
      .def("__iter__", [](const ModuleLabel& ml) {
        return py::iter(py::make_tuple(ml.module, ml.local));
      });
  m.def("module_of_label", &module_of_label, py::arg("label"), py::arg("k"), py::arg("label_count"));
  m.def("global_label",
        [](int module, int local, int k, int label_count) {
          return global_label(ModuleLabel{module, local}, k, label_count);
        },
        py::arg("module"), py::arg("local"), py::arg("k"), py::arg("label_count"));

  py::class_<FnnArch>(m, "FnnArch")
      .def(py::init<std::vector<int>>(), py::arg("sizes"))
      .def_readonly("sizes", &FnnArch::sizes)
      .def_static("parse", &FnnArch::parse)
      .def("__str__", &FnnArch::to_string)
      .def(py::self == py::self);
  m.def("preset_arch", &preset_arch, py::arg("tag"), py::arg("input_size"), py::arg("output_size"));
  m.def("count_params", &count_params, py::arg("n"), py::arg("k"), py::arg("r"), py::arg("arch"));
  m.def("count_neurons", &count_neurons, py::arg("n"), py::arg("k"), py::arg("r"), py::arg("arch"));

  py::class_<DenseLayer>(m, "DenseLayer")
      .def_readwrite("weights", &DenseLayer::weights)
      .def_readwrite("bias", &DenseLayer::bias);
  py::class_<FnnParams>(m, "FnnParams")
      .def_readonly("arch", &FnnParams::arch)
      .def_readwrite("layers", &FnnParams::layers)
      .def_readonly("decimals", &FnnParams::decimals)
      .def("parameter_count", &FnnParams::parameter_count);
  m.def("init_params", &init_params, py::arg("arch"), py::arg("seed"));
  m.def("forward", &forward, py::arg("params"), py::arg("x"));
  m.def("quantize_params", &quantize_params, py::arg("params"), py::arg("decimals"));

  py::class_<Candidate>(m, "Candidate")
      .def_readonly("label", &Candidate::label)
      .def_readonly("loss", &Candidate::loss);
  m.def("predict_top",
        [](const FnnParams& p, const Eigen::VectorXd& x, int k) { return predict_top(p, x, k).candidates; },
        py::arg("params"), py::arg("x"), py::arg("m"));

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def_readonly("label_count", &LabeledDataset::label_count)
      .def("__len__", [](const LabeledDataset& ds) { return ds.items.size(); })
      .def_property_readonly("ids",
                             [](const LabeledDataset& ds) {
                               std::vector<std::string> ids;
                               for (const auto& it : ds.items) ids.push_back(it.id);
                               return ids;
                             })
      .def_property_readonly("labels",
                             [](const LabeledDataset& ds) {
                               std::vector<int> labels;
                               for (const auto& it : ds.items) labels.push_back(it.label);
                               return labels;
                             })
      .def("image", [](const LabeledDataset& ds, std::size_t i) { return image_to_array(ds.items.at(i).image); });
  m.def("make_synthetic_dataset",
        [](int label_count, int count, int size, int noise, std::uint64_t seed, int jitter) {
          SyntheticSpec spec{label_count, count, size, size, noise, jitter, seed};
          return make_synthetic_dataset(spec);
        },
        py::arg("label_count") = 4, py::arg("count") = 200, py::arg("size") = 64, py::arg("noise") = 48,
        py::arg("seed") = 1, py::arg("jitter") = 0);
  m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("label_count") = 0);

  py::class_<CellIndex>(m, "CellIndex")
      .def(py::init([](int i, int j, int s) { return CellIndex{i, j, s}; }), py::arg("feature"),
           py::arg("module"), py::arg("submodule"))
      .def_readonly("feature", &CellIndex::feature)
      .def_readonly("module", &CellIndex::module)
      .def_readonly("submodule", &CellIndex::submodule);
  py::class_<FeaturedBatch>(m, "FeaturedBatch")
      .def_readonly("cell", &FeaturedBatch::cell)
      .def_readonly("inputs", &FeaturedBatch::inputs)
      .def_readonly("labels", &FeaturedBatch::labels)
      .def_readonly("ids", &FeaturedBatch::ids);
  py::class_<FeaturedBatchSet>(m, "FeaturedBatchSet")
      .def_readonly("k", &FeaturedBatchSet::k)
      .def_readonly("r", &FeaturedBatchSet::r)
      .def_readonly("label_count", &FeaturedBatchSet::label_count)
      .def_readonly("cells", &FeaturedBatchSet::cells)
      .def("at", &FeaturedBatchSet::at, py::return_value_policy::reference_internal);
  m.def(
      "build_featured_batches",
      [](const LabeledDataset& ds, std::vector<std::string> names, int k, int r, int workers) {
        std::vector<FeatureSpec> specs;
        for (const auto& n : names) specs.push_back(feature_by_name(n));
        return build_featured_batches(ds, specs, k, r, workers);
      },
      py::arg("dataset"), py::arg("features"), py::arg("k"), py::arg("r"), py::arg("workers") = 1);

  py::class_<Conflict>(m, "Conflict")
      .def_readonly("first_id", &Conflict::first_id)
      .def_readonly("second_id", &Conflict::second_id)
      .def_readonly("first_label", &Conflict::first_label)
      .def_readonly("second_label", &Conflict::second_label)
      .def_readonly("digest", &Conflict::digest);
  m.def("scan_double_labels",
        [](const FeaturedBatch& fb, int decimals) { return scan_double_labels(fb, decimals).conflicts; },
        py::arg("batch"), py::arg("decimals") = 4);

  py::enum_<TrainingMode>(m, "TrainingMode")
      .value("S", TrainingMode::S)
      .value("SPrime", TrainingMode::SPrime)
      .value("T", TrainingMode::T);
  py::enum_<CellStatus>(m, "CellStatus")
      .value("Trained", CellStatus::Trained)
      .value("ErrorFree", CellStatus::ErrorFree)
      .value("Inconsistent", CellStatus::Inconsistent)
      .value("Stalled", CellStatus::Stalled)
      .value("Failed", CellStatus::Failed);

  py::class_<SgdConfig>(m, "SgdConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &SgdConfig::learning_rate)
      .def_readwrite("decay", &SgdConfig::decay)
      .def_readwrite("decay_interval", &SgdConfig::decay_interval)
      .def_readwrite("batch_size", &SgdConfig::batch_size)
      .def_readwrite("max_epochs", &SgdConfig::max_epochs)
      .def_readwrite("threshold", &SgdConfig::threshold);
  py::class_<GdtConfig>(m, "GdtConfig")
      .def(py::init<>())
      .def_readwrite("lambda_step", &GdtConfig::lambda_step)
      .def_readwrite("inner_steps", &GdtConfig::inner_steps)
      .def_readwrite("learning_rate", &GdtConfig::learning_rate)
      .def_readwrite("amplification", &GdtConfig::amplification)
      .def_readwrite("patience", &GdtConfig::patience)
      .def_readwrite("max_tunnels", &GdtConfig::max_tunnels)
      .def_readwrite("max_stages", &GdtConfig::max_stages)
      .def_readwrite("max_seconds", &GdtConfig::max_seconds);
  py::class_<TrainingPlan>(m, "TrainingPlan")
      .def(py::init<>())
      .def_readwrite("mode", &TrainingPlan::mode)
      .def_readwrite("arch_tag", &TrainingPlan::arch_tag)
      .def_readwrite("hidden", &TrainingPlan::hidden)
      .def_readwrite("sgd", &TrainingPlan::sgd)
      .def_readwrite("gdt", &TrainingPlan::gdt)
      .def_readwrite("decimals", &TrainingPlan::decimals)
      .def_readwrite("seed", &TrainingPlan::seed)
      .def_readwrite("workers", &TrainingPlan::workers);

  py::class_<CellModel>(m, "CellModel")
      .def_readonly("index", &CellModel::index)
      .def_readonly("params", &CellModel::params)
      .def_readonly("status", &CellModel::status)
      .def_readonly("accuracy", &CellModel::accuracy)
      .def_readonly("errors", &CellModel::errors)
      .def_readonly("message", &CellModel::message)
      .def_readonly("accuracy_trace", &CellModel::accuracy_trace)
      .def_readonly("error_trace", &CellModel::error_trace);
  py::class_<ProtoModel>(m, "ProtoModel")
      .def_readonly("arch", &ProtoModel::arch)
      .def_readonly("k", &ProtoModel::k)
      .def_readonly("r", &ProtoModel::r)
      .def_readonly("label_count", &ProtoModel::label_count)
      .def_readonly("cells", &ProtoModel::cells)
      .def("complete", &ProtoModel::complete)
      .def("tag", &ProtoModel::tag);
  m.def("train_proto_model",
        py::overload_cast<const FeaturedBatchSet&, const TrainingPlan&>(&train_proto_model),
        py::arg("batches"), py::arg("plan"), py::call_guard<py::gil_scoped_release>());
  m.def("save_proto_model", &save_proto_model, py::arg("model"), py::arg("dir"));
  m.def("load_proto_model", &load_proto_model, py::arg("dir"));

  py::class_<VoteOutcome>(m, "VoteOutcome")
      .def_readonly("label", &VoteOutcome::label)
      .def_readonly("module", &VoteOutcome::module)
      .def_readonly("submodule", &VoteOutcome::submodule)
      .def_readonly("votes", &VoteOutcome::votes)
      .def_readonly("feature_count", &VoteOutcome::feature_count)
      .def_readonly("super_majority", &VoteOutcome::super_majority)
      .def_readonly("tie_break_used", &VoteOutcome::tie_break_used);
  m.def(
      "classify",
      [](const ProtoModel& proto, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
         int p, int m) { return classify(FeaturedModel(proto, p), image_from_array(a), m); },
      py::arg("model"), py::arg("image"), py::arg("p"), py::arg("m") = 1);

  py::class_<ModelEvaluation>(m, "ModelEvaluation")
      .def_readonly("accuracy", &ModelEvaluation::accuracy)
      .def_readonly("top1", &ModelEvaluation::top1)
      .def_readonly("outcomes", &ModelEvaluation::outcomes)
      .def_readonly("truth", &ModelEvaluation::truth);
  m.def(
      "model_evaluation",
      [](const ProtoModel& proto, const LabeledDataset& ds, int p, int m, int workers) {
        return model_evaluation(FeaturedModel(proto, p), ds, m, workers);
      },
      py::arg("model"), py::arg("dataset"), py::arg("p"), py::arg("m") = 1, py::arg("workers") = 1);

  m.def(
      "confusion_matrix",
      [](std::vector<int> predicted, std::vector<int> truth, int label_count) {
        const ConfusionMatrix cm = confusion_matrix(predicted, truth, label_count);
        py::array_t<std::uint64_t> out({label_count, label_count});
        auto v = out.mutable_unchecked<2>();
        for (int t = 0; t < label_count; ++t)
          for (int q = 0; q < label_count; ++q) v(t, q) = cm.at(t, q);
        return out;
      },
      py::arg("predicted"), py::arg("truth"), py::arg("label_count"));
}
