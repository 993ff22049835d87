#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "opdist/bounds.hpp"
#include "opdist/cli.hpp"
#include "opdist/dataset_ops.hpp"
#include "opdist/errors.hpp"
#include "opdist/evaluation.hpp"
#include "opdist/metrics.hpp"
#include "opdist/mock_server.hpp"
#include "opdist/prompting.hpp"
#include "opdist/survey.hpp"

namespace py = pybind11;
using namespace opdist;

namespace {

Distribution as_dist(const Question& q, std::vector<double> probs) { return {q.id, std::move(probs)}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Opinion-distribution toolkit: survey distributions, metrics, bounds and evaluation";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<LoadError>(m, "LoadError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NoDataError>(m, "NoDataError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  py::register_exception<DegenerateGapError>(m, "DegenerateGapError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::enum_<PromptStyle>(m, "PromptStyle")
      .value("QA", PromptStyle::QA)
      .value("BIO", PromptStyle::BIO)
      .value("PORTRAY", PromptStyle::PORTRAY);

  py::class_<AnswerOption>(m, "AnswerOption")
      .def_readonly("letter", &AnswerOption::letter)
      .def_readonly("text", &AnswerOption::text)
      .def_readonly("ordinal", &AnswerOption::ordinal)
      .def_readonly("is_refusal", &AnswerOption::is_refusal);

  py::class_<Question>(m, "Question")
      .def_readonly("id", &Question::id)
      .def_readonly("wave", &Question::wave)
      .def_readonly("text", &Question::text)
      .def_readonly("options", &Question::options)
      .def("letters", &Question::letters)
      .def("__repr__", [](const Question& q) { return "<Question " + q.id + ">"; });

  py::class_<Subpopulation>(m, "Subpopulation")
      .def_readonly("trait", &Subpopulation::trait)
      .def_readonly("group", &Subpopulation::group)
      .def_property_readonly("label", &Subpopulation::label)
      .def("steering", &Subpopulation::steering, py::arg("style"));

  py::class_<SurveyDataset>(m, "SurveyDataset")
      .def_property_readonly("questions", &SurveyDataset::questions)
      .def_property_readonly("subpopulations", &SurveyDataset::subpopulations)
      .def_property_readonly("source_family", &SurveyDataset::source_family)
      .def_property_readonly("respondent_count", [](const SurveyDataset& d) { return d.respondents().size(); })
      .def("question", &SurveyDataset::question, py::return_value_policy::reference_internal)
      .def("members", [](const SurveyDataset& d, const std::string& label) { return members(d, GroupKey::parse(label)); })
      .def("distribution", [](const SurveyDataset& d, const std::string& label, const std::string& qid) {
        return weighted_distribution(d, GroupKey::parse(label), d.question(qid)).probs;
      });

  m.def("load_dataset", &load_dataset, py::arg("root"));

  m.def(
      "wasserstein",
      [](const Question& q, std::vector<double> p, std::vector<double> r, bool normalize) {
        return wasserstein(as_dist(q, std::move(p)), as_dist(q, std::move(r)), q, {.normalize_wd = normalize});
      },
      py::arg("question"), py::arg("p"), py::arg("q"), py::arg("normalize") = true);
  m.def("wasserstein_ordinal", [](std::vector<double> p, std::vector<double> q) { return wasserstein_ordinal(p, q); });
  m.def(
      "kl_forward",
      [](std::vector<double> p, std::vector<double> q, double eps) { return kl_forward(p, q, eps); },
      py::arg("p_human"), py::arg("p_model"), py::arg("epsilon") = 1e-10);
  m.def("quantize_counts", [](std::vector<double> p, std::int64_t n) { return quantize_counts(p, n); });
  m.def("relative_improvement", &relative_improvement, py::arg("lower"), py::arg("zero_shot"), py::arg("ours"));

  m.def(
      "upper_bound",
      [](const SurveyDataset& d, const std::string& label) { return upper_bound(d, GroupKey::parse(label), d.questions()); },
      py::arg("dataset"), py::arg("group"));
  m.def(
      "bootstrap_lower_bound",
      [](const SurveyDataset& d, const std::string& label, std::int64_t replicates, std::uint64_t seed, unsigned threads) {
        BootstrapReport r;
        {
          py::gil_scoped_release release;
          r = bootstrap_lower_bound(d, GroupKey::parse(label), d.questions(), {replicates, seed, threads});
        }
        return py::make_tuple(r.mean_wd, r.ci_low, r.ci_high);
      },
      py::arg("dataset"), py::arg("group"), py::arg("replicates") = 1000, py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "evaluate",
      [](const SurveyDataset& d, std::vector<std::string> labels, py::function predictor, std::string method,
         unsigned workers) {
        std::vector<GroupKey> groups;
        for (const auto& l : labels) groups.push_back(GroupKey::parse(l));
        const Predictor call = [&predictor](const Subpopulation& s, const Question& q) {
          py::gil_scoped_acquire acquire;
          return as_dist(q, predictor(s.label(), q).cast<std::vector<double>>());
        };
        EvalResult result;
        {
          py::gil_scoped_release release;
          result = evaluate(d, groups, d.questions(), call, method, {}, {workers});
        }
        py::list rows;
        for (const auto& r : result.records) {
          rows.append(py::dict(py::arg("group") = r.group.label(), py::arg("question_id") = r.question_id,
                               py::arg("wave") = r.wave, py::arg("wd") = r.wd, py::arg("kl") = r.kl));
        }
        return rows;
      },
      py::arg("dataset"), py::arg("groups"), py::arg("predictor"), py::arg("method") = "python", py::arg("workers") = 1);

  m.def(
      "fit_scaling",
      [](std::vector<std::pair<double, double>> points) {
        const auto fit = fit_scaling(std::move(points));
        return py::make_tuple(fit.slope, fit.intercept);
      },
      py::arg("points"));

  m.def("build_prompt", &build_prompt, py::arg("group"), py::arg("question"), py::arg("style"));
  m.def("parse_verbalized_distribution",
        [](const std::string& text, const Question& q) { return parse_verbalized_distribution(text, q).probs; });

  py::class_<MockServer>(m, "MockServer")
      .def(py::init<>())
      .def("start", &MockServer::start, py::arg("port") = 0)
      .def("stop", &MockServer::stop)
      .def_property_readonly("base_url", &MockServer::base_url)
      .def_property_readonly("request_count", &MockServer::request_count);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
