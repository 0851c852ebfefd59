#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fullmatch/commands.hpp"
#include "fullmatch/gradcheck.hpp"
#include "fullmatch/trainer.hpp"

namespace py = pybind11;
using namespace fullmatch;

namespace {

using MaskArray = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MaskArray to_array(const Mask& m) {
  MaskArray out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = m(i, c);
  }
  return out;
}

Mask from_array(const MaskArray& a) {
  Mask m(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(c), a(i, c));
  }
  return m;
}

ProbabilityBatch weak_batch(const Matrix& q) { return ProbabilityBatch::weak(q); }
ProbabilityBatch strong_batch(const Matrix& p) { return ProbabilityBatch::strong(p); }

py::dict record_to_dict(const MetricsRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["test_accuracy"] = r.test_accuracy;
  d["pseudo_label_ratio"] = r.pseudo_label_ratio;
  d["mean_npl_per_sample"] = r.mean_npl_per_sample;
  d["npl_accuracy"] = r.npl_accuracy;
  d["k_value"] = r.k_value;
  d["topk_accuracy"] = r.topk_accuracy;
  d["entropy_histogram"] = r.entropy_histogram;
  d["low_entropy_fraction"] = r.low_entropy_fraction;
  d["l_s"] = r.l_s;
  d["l_us"] = r.l_us;
  d["l_eml"] = r.l_eml;
  d["l_anl"] = r.l_anl;
  d["l_sum"] = r.l_sum;
  d["step_time"] = r.step_time;
  return d;
}

EmlVariant variant_of(const std::string& s) { return parse_eml_variant(s); }

}  // namespace

PYBIND11_MODULE(_fullmatch, m) {
  m.doc() = "FullMatch semi-supervised learning core";
  m.attr("__version__") = version_string();

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrainingAborted>(m, "TrainingAborted", PyExc_RuntimeError);

  m.def("softmax", [](const std::vector<double>& z) { return softmax(z); }, py::arg("logits"));
  m.def("softmax_rows", &softmax_rows, py::arg("logits"));
  m.def("entropy", [](const std::vector<double>& p) { return entropy(p); }, py::arg("probs"));
  m.def("rank_classes", [](const std::vector<double>& q) { return rank_classes(q); }, py::arg("probs"));
  m.def("compute_temp_labels", [](const Matrix& q) { return compute_temp_labels(weak_batch(q)); }, py::arg("weak"));
  m.def(
      "compute_adaptive_k",
      [](const Matrix& p, const std::vector<std::size_t>& temp) { return compute_adaptive_k(strong_batch(p), temp); },
      py::arg("strong"), py::arg("temp_labels"));

  py::class_<SelectionState>(m, "SelectionState")
      .def_readonly("batch_size", &SelectionState::batch_size)
      .def_readonly("num_classes", &SelectionState::num_classes)
      .def_readonly("k", &SelectionState::k)
      .def_property_readonly("has_pseudo_label",
                             [](const SelectionState& s) {
                               std::vector<bool> v(s.has_pseudo_label.begin(), s.has_pseudo_label.end());
                               return v;
                             })
      .def_readonly("target_class", &SelectionState::target_class)
      .def_property_readonly("positive_mask", [](const SelectionState& s) { return to_array(s.positive_mask); })
      .def_property_readonly("u_mask", [](const SelectionState& s) { return to_array(s.u_mask); })
      .def_property_readonly("negative_mask", [](const SelectionState& s) { return to_array(s.negative_mask); })
      .def("num_pseudo_labeled", &SelectionState::num_pseudo_labeled)
      .def("restrict_negatives",
           [](SelectionState& s, const std::string& scope) { restrict_negatives(s, parse_negative_scope(scope)); },
           py::arg("scope"))
      .def_static(
          "from_masks",
          [](std::size_t k, const std::vector<std::optional<std::size_t>>& target, const MaskArray& u,
             const MaskArray& negative) {
            SelectionState s;
            s.batch_size = target.size();
            s.num_classes = static_cast<std::size_t>(u.cols());
            s.k = k;
            s.target_class = target;
            s.positive_mask = Mask(s.batch_size, s.num_classes);
            for (std::size_t i = 0; i < target.size(); ++i) {
              s.has_pseudo_label.push_back(target[i].has_value());
              if (target[i]) s.positive_mask.set(i, *target[i], true);
            }
            s.u_mask = from_array(u);
            s.negative_mask = from_array(negative);
            return s;
          },
          py::arg("k"), py::arg("target_class"), py::arg("u_mask"), py::arg("negative_mask"),
          "Hand-built state for experiments with the losses.");

  m.def(
      "build_selection_state",
      [](const Matrix& q, const Matrix& p, double tau, bool adaptive_k) {
        return build_selection_state(weak_batch(q), strong_batch(p), tau, {.adaptive_k = adaptive_k});
      },
      py::arg("weak"), py::arg("strong"), py::arg("tau") = 0.95, py::arg("adaptive_k") = true);

  m.def(
      "supervised_loss",
      [](const Matrix& p, const std::vector<std::size_t>& y) { return supervised_loss(ProbabilityBatch(p), y); },
      py::arg("probs"), py::arg("labels"));
  m.def(
      "unsupervised_loss", [](const Matrix& p, const SelectionState& s) { return unsupervised_loss(strong_batch(p), s); },
      py::arg("strong"), py::arg("state"));
  m.def(
      "eml_loss",
      [](const Matrix& p, const SelectionState& s, const std::string& v) {
        return eml_loss(strong_batch(p), s, variant_of(v));
      },
      py::arg("strong"), py::arg("state"), py::arg("variant") = "bce");
  m.def(
      "eml_loss_grad",
      [](const Matrix& p, const SelectionState& s, const std::string& v) {
        return eml_loss_grad(strong_batch(p), s, variant_of(v));
      },
      py::arg("strong"), py::arg("state"), py::arg("variant") = "bce");
  m.def(
      "eml_targets",
      [](const std::vector<double>& p, std::size_t t, const std::vector<std::size_t>& nt) {
        return eml_targets(p, t, nt);
      },
      py::arg("probs"), py::arg("target"), py::arg("nontarget"));
  m.def(
      "eml_target_class_gradient",
      [](const std::vector<double>& p, std::size_t t, const std::vector<std::size_t>& nt, std::size_t B,
         std::size_t C) { return eml_target_class_gradient(p, t, nt, B, C); },
      py::arg("probs"), py::arg("target"), py::arg("nontarget"), py::arg("batch_size"), py::arg("num_classes"));
  m.def(
      "anl_loss", [](const Matrix& p, const SelectionState& s) { return anl_loss(strong_batch(p), s); },
      py::arg("strong"), py::arg("state"));
  m.def(
      "anl_loss_grad", [](const Matrix& p, const SelectionState& s) { return anl_loss_grad(strong_batch(p), s); },
      py::arg("strong"), py::arg("state"));
  m.def(
      "total_loss",
      [](double l_s, double l_us, double l_anl, double l_eml, double alpha, double beta) {
        return total_loss(l_s, l_us, l_anl, l_eml, alpha, beta).l_sum;
      },
      py::arg("l_s"), py::arg("l_us"), py::arg("l_anl"), py::arg("l_eml"), py::arg("alpha") = 1.0,
      py::arg("beta") = 1.0);
  m.def("softmax_backward", &softmax_backward, py::arg("probs"), py::arg("grad_probs"));
  m.def("cosine_lr", &cosine_lr, py::arg("t"), py::arg("total"), py::arg("lr0"));

  m.def(
      "pseudo_label_ratio", [](const Matrix& q, double tau) { return pseudo_label_ratio(ProbabilityBatch(q), tau); },
      py::arg("probs"), py::arg("tau") = 0.95);
  m.def(
      "topk_accuracy",
      [](const Matrix& p, const std::vector<std::size_t>& y, std::size_t k) {
        return topk_accuracy(ProbabilityBatch(p), y, k);
      },
      py::arg("probs"), py::arg("labels"), py::arg("k"));

  m.def("default_config_text", [] { return to_text(ExperimentConfig{}); });
  m.def(
      "normalize_config", [](const std::string& text) { return to_text(parse_config(text)); }, py::arg("text"),
      "Parse and validate a config, returning its canonical text.");
  m.def(
      "generate_dataset",
      [](const std::string& config_text) {
        const auto c = parse_config(config_text);
        const auto ds = split(generate(c.data, c.seed), c.labels_per_class, c.test_fraction, c.seed);
        std::vector<std::string> tags;
        for (auto t : ds.tags) tags.push_back(to_string(t));
        return py::make_tuple(ds.features, ds.labels, tags);
      },
      py::arg("config_text") = "", "Features, labels and split tags of the configured dataset.");
  m.def(
      "train",
      [](const std::string& config_text) {
        const auto c = parse_config(config_text);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(c);
        }
        py::list log;
        for (const auto& rec : r.log) log.append(record_to_dict(rec));
        return log;
      },
      py::arg("config_text") = "", "Train one configuration and return its metrics log.");
  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t instances) {
        const auto report = run_gradient_checks(seed, instances);
        py::dict out;
        for (const auto& e : report.entries) out[py::str(e.name)] = py::make_tuple(e.max_error, e.tolerance);
        return out;
      },
      py::arg("seed") = 0, py::arg("instances") = 100,
      "Finite-difference suite; maps each check to (max relative error, tolerance).");
}
