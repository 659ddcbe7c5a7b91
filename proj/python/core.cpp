#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "dpacheck/checker.hpp"
#include "dpacheck/classifiers.hpp"
#include "dpacheck/corpus.hpp"
#include "dpacheck/embedding.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/eval.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/pipeline.hpp"
#include "dpacheck/preprocess.hpp"

namespace py = pybind11;
using namespace dpacheck;

namespace {

// Python-side dicts come from the JSON renderings so both surfaces agree.
py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

preprocess::AliasTable aliases_from(const std::optional<std::string>& path) {
  return path ? preprocess::load_alias_table(*path) : preprocess::AliasTable{};
}

class Store {
 public:
  explicit Store(const std::string& path)
      : store_(std::make_shared<embedding::EmbeddingStore>(embedding::load_store(path))) {}

  std::size_t dim() const { return store_->dim(); }
  const std::string& model_id() const { return store_->model_id(); }
  std::size_t size() const { return store_->entries().size(); }
  std::vector<float> lookup(const std::string& text) const { return store_->lookup(text); }
  std::shared_ptr<const embedding::EmbeddingStore> shared() const { return store_; }

 private:
  std::shared_ptr<embedding::EmbeddingStore> store_;
};

// Loads the models and resources once for checking many DPAs.
class Checker {
 public:
  Checker(const std::string& catalog, const std::string& model, const Store& store,
          const std::optional<std::string>& aliases, const std::string& task)
      : catalog_(corpus::load_catalog(catalog)),
        models_(classifiers::load_models(model)),
        chosen_(pipeline::select_models(models_, pipeline::parse_formulation(task))),
        features_(std::make_shared<embedding::StoreProvider>(store.shared()), aliases_from(aliases)) {
    options_.audit = {std::string(checker::tool_version()), file_digest(model), catalog_.digest()};
  }

  py::object check_text(const std::string& text, const std::string& dpa_id) {
    return check(pipeline::dpa_from_text(dpa_id, text));
  }

  py::object check_sentences(const std::vector<std::string>& sentences, const std::string& dpa_id) {
    corpus::Dpa dpa{dpa_id, {}};
    for (std::size_t i = 0; i < sentences.size(); ++i) dpa.sentences.push_back({dpa_id, i, sentences[i], {}});
    return check(dpa);
  }

  std::string render(const std::string& text, const std::string& dpa_id) {
    return checker::render_report(report(pipeline::dpa_from_text(dpa_id, text)), checker::ReportFormat::kHuman);
  }

 private:
  checker::CompletenessReport report(const corpus::Dpa& dpa) {
    return pipeline::check_dpa(chosen_, dpa, catalog_, features_, options_);
  }
  py::object check(const corpus::Dpa& dpa) {
    return from_json(nlohmann::json::parse(checker::render_report(report(dpa), checker::ReportFormat::kMachine)));
  }

  corpus::ProvisionCatalog catalog_;
  std::vector<classifiers::ClassifierModel> models_;
  std::vector<const classifiers::ClassifierModel*> chosen_;
  pipeline::Featurizer features_;
  pipeline::CheckOptions options_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "DPA completeness checking";
  m.attr("__version__") = std::string(checker::tool_version());

  // Parse and validation errors derive from DataError and map with it.
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ServiceError>(m, "ServiceError", PyExc_RuntimeError);

  m.def("f_beta", &eval::f_beta, py::arg("precision"), py::arg("recall"), py::arg("beta") = 2.0);
  m.def(
      "cohen_kappa",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) { return eval::cohen_kappa(a, b); },
      py::arg("a"), py::arg("b"));
  m.def("kappa_band", &eval::kappa_band);

  m.def("tokenize", [](const std::string& text) { return preprocess::token_texts(preprocess::tokenize(text)); });
  m.def("split_sentences", [](const std::string& text) { return preprocess::split_sentences(text); });
  m.def(
      "normalize",
      [](const std::string& text, const std::optional<std::string>& aliases) {
        return preprocess::normalize(text, aliases_from(aliases)).text;
      },
      py::arg("text"), py::arg("aliases") = py::none());

  m.def("validate_store", [](const std::string& path) {
    const auto r = embedding::validate_store(path);
    nlohmann::json j = {{"valid", r.valid},       {"message", r.message},
                        {"dim", r.dim},           {"count", r.count},
                        {"model_id", r.model_id}, {"token_sequences", r.token_sequences},
                        {"vocabulary_size", r.vocabulary_size}};
    j["error_offset"] = r.error_offset ? nlohmann::json(*r.error_offset) : nlohmann::json();
    return from_json(j);
  });
  m.def(
      "cosine",
      [](const std::vector<double>& a, const std::vector<double>& b) { return embedding::cosine(a, b); });

  py::class_<Store>(m, "Store")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def_property_readonly("dim", &Store::dim)
      .def_property_readonly("model_id", &Store::model_id)
      .def("__len__", &Store::size)
      .def("lookup", &Store::lookup, py::arg("text"));

  py::class_<Checker>(m, "Checker")
      .def(py::init<const std::string&, const std::string&, const Store&, const std::optional<std::string>&,
                    const std::string&>(),
           py::arg("catalog"), py::arg("model"), py::arg("store"), py::arg("aliases") = py::none(),
           py::arg("task") = "multiclass")
      .def("check_text", &Checker::check_text, py::arg("text"), py::arg("dpa_id") = "DPA")
      .def("check_sentences", &Checker::check_sentences, py::arg("sentences"), py::arg("dpa_id") = "DPA")
      .def("render", &Checker::render, py::arg("text"), py::arg("dpa_id") = "DPA");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "dpacheck");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in process; returns (exit code, stdout, stderr).");
}
