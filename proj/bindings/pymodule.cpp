#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stagedcausal/causal.hpp"
#include "stagedcausal/inference.hpp"
#include "stagedcausal/io.hpp"
#include "stagedcausal/learning.hpp"
#include "stagedcausal/simulation.hpp"

namespace py = pybind11;
using namespace stagedcausal;

PYBIND11_MODULE(_stagedcausal, m) {
    m.doc() = "Staged event trees for treatment effect estimation";

    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_RuntimeError);

    py::class_<Variable>(m, "Variable")
        .def(py::init<std::string, std::vector<std::string>>(), py::arg("name"),
             py::arg("levels"))
        .def_readonly("name", &Variable::name)
        .def_readonly("levels", &Variable::levels)
        .def("arity", &Variable::arity)
        .def("__repr__", [](const Variable& v) {
            return "Variable('" + v.name + "', " + std::to_string(v.arity()) + " levels)";
        });

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<std::vector<Variable>, std::vector<std::vector<int>>>(),
             py::arg("schema"), py::arg("rows"))
        .def_property_readonly("schema", &Dataset::schema)
        .def_property_readonly("rows", &Dataset::rows)
        .def("__len__", &Dataset::size);

    py::class_<EventTree>(m, "EventTree")
        .def_property_readonly("num_variables", &EventTree::num_variables)
        .def_property_readonly("variables", &EventTree::variables)
        .def("context_ranks", &EventTree::context_ranks, py::arg("var"))
        .def("rank_of",
             [](const EventTree& t, int var, const std::vector<int>& prefix) {
                 return t.rank_of(var, prefix);
             })
        .def("prefix_of", &EventTree::prefix_of, py::arg("var"), py::arg("rank"));

    py::class_<Staging>(m, "Staging")
        .def("stage_of", &Staging::stage_of, py::arg("var"), py::arg("rank"))
        .def("groups", &Staging::groups, py::arg("var"))
        .def("num_stages", [](const Staging& s) { return s.num_stages(); });

    py::class_<StagedTreeModel>(m, "StagedTreeModel")
        .def_property_readonly("tree", &StagedTreeModel::tree)
        .def_property_readonly("staging", &StagedTreeModel::staging)
        .def("context_distribution", &StagedTreeModel::context_distribution,
             py::arg("var"), py::arg("rank"))
        .def("stage_distribution", &StagedTreeModel::stage_distribution, py::arg("var"),
             py::arg("stage"))
        .def("has_undefined", &StagedTreeModel::has_undefined)
        .def("to_json", [](const StagedTreeModel& model) { return model_to_json(model); })
        .def_static("from_json",
                    [](const std::string& text) { return model_from_json(text); });

    py::class_<ScoredStaging>(m, "ScoredStaging")
        .def_readonly("staging", &ScoredStaging::staging)
        .def_readonly("log_likelihood", &ScoredStaging::log_likelihood)
        .def_readonly("n_free_params", &ScoredStaging::n_free_params)
        .def_readonly("bic", &ScoredStaging::bic)
        .def_readonly("notes", &ScoredStaging::notes);

    py::class_<CausalFrame>(m, "CausalFrame")
        .def(py::init([](int treatment, int outcome, int treated_level,
                         int positive_outcome_level) {
                 CausalFrame f;
                 f.treatment = treatment;
                 f.outcome = outcome;
                 f.treated_level = treated_level;
                 f.positive_outcome_level = positive_outcome_level;
                 return f;
             }),
             py::arg("treatment"), py::arg("outcome"), py::arg("treated_level") = 1,
             py::arg("positive_outcome_level") = 1)
        .def_readwrite("treatment", &CausalFrame::treatment)
        .def_readwrite("outcome", &CausalFrame::outcome);

    py::class_<StratumEffect>(m, "StratumEffect")
        .def_readonly("id", &StratumEffect::id)
        .def_readonly("weight", &StratumEffect::weight)
        .def_readonly("effect", &StratumEffect::effect)
        .def_readonly("n_treated", &StratumEffect::n_treated)
        .def_readonly("n_control", &StratumEffect::n_control)
        .def_readonly("excluded", &StratumEffect::excluded);

    py::class_<AteEstimate>(m, "AteEstimate")
        .def_readonly("ate", &AteEstimate::ate)
        .def_readonly("per_stratum", &AteEstimate::per_stratum)
        .def_readonly("ci_lower", &AteEstimate::ci_lower)
        .def_readonly("ci_upper", &AteEstimate::ci_upper)
        .def_readonly("ci_level", &AteEstimate::ci_level)
        .def_readonly("n_bootstrap", &AteEstimate::n_bootstrap)
        .def_readonly("replicates", &AteEstimate::replicates)
        .def_readonly("diagnostics", &AteEstimate::diagnostics)
        .def_readonly("flagged", &AteEstimate::flagged);

    py::class_<DistributionTable>(m, "DistributionTable")
        .def_readonly("scope", &DistributionTable::scope)
        .def_readonly("probs", &DistributionTable::probs);

    m.def("build_event_tree", &build_event_tree, py::arg("schema"));
    m.def("saturated_staging", &saturated_staging, py::arg("tree"));
    m.def("independence_staging", &independence_staging, py::arg("tree"));
    m.def("prune_unobserved", &prune_unobserved, py::arg("tree"), py::arg("data"));
    m.def("fit_mle", &fit_mle, py::arg("tree"), py::arg("staging"), py::arg("data"),
          py::arg("alpha") = 0.0);

    m.def(
        "joint_prob",
        [](const StagedTreeModel& model, const std::vector<int>& x) {
            return joint_prob(model, x);
        },
        py::arg("model"), py::arg("x"));
    m.def("marginal", &marginal, py::arg("model"), py::arg("scope"));
    m.def("conditional", &conditional, py::arg("model"), py::arg("target"),
          py::arg("given"));
    m.def(
        "intervene",
        [](const StagedTreeModel& model, const std::map<int, int>& assignments) {
            return intervene(model, InterventionSpec{assignments});
        },
        py::arg("model"), py::arg("assignments"));
    m.def("sample", &sample, py::arg("model"), py::arg("n"), py::arg("seed"),
          py::arg("allow_undefined") = false);

    m.def("log_likelihood", &log_likelihood, py::arg("tree"), py::arg("staging"),
          py::arg("data"));
    m.def("bic_score", &bic_score, py::arg("tree"), py::arg("staging"), py::arg("data"));
    m.def("learn_bhc", &learn_bhc, py::arg("tree"), py::arg("data"),
          py::arg("init") = std::nullopt);
    m.def("learn_hclust", &learn_hclust, py::arg("tree"), py::arg("data"));

    m.def("randomize_treatment", &randomize_treatment, py::arg("model"), py::arg("frame"),
          py::arg("assignment") = std::nullopt);
    m.def("ate_randomized", &ate_randomized, py::arg("model"), py::arg("frame"));
    m.def("ps_stratify", &ps_stratify, py::arg("model"), py::arg("frame"), py::arg("data"));
    m.def("ate_ps_stratified", &ate_ps_stratified, py::arg("ps_model"), py::arg("data"),
          py::arg("frame"));
    m.def(
        "cate",
        [](const StagedTreeModel& model, const CausalFrame& frame,
           const std::vector<int>& z) { return cate(model, frame, z); },
        py::arg("model"), py::arg("frame"), py::arg("z"));
    m.def(
        "bootstrap_ate",
        [](const Dataset& data, const CausalFrame& frame, const std::string& learner,
           const std::string& estimator, int n_replicates, std::uint64_t seed,
           double ci_level, double alpha) {
            BootstrapConfig config;
            if (learner == "bhc") config.learner = BootstrapConfig::Learner::Bhc;
            else if (learner == "hclust") config.learner = BootstrapConfig::Learner::Hclust;
            else throw DataError("unknown learner '" + learner + "'");
            if (estimator == "randomized")
                config.estimator = BootstrapConfig::Estimator::Randomized;
            else if (estimator == "ps_stratified")
                config.estimator = BootstrapConfig::Estimator::PsStratified;
            else throw DataError("unknown estimator '" + estimator + "'");
            config.n_replicates = n_replicates;
            config.seed = seed;
            config.ci_level = ci_level;
            config.alpha = alpha;
            return bootstrap_ate(data, frame, config);
        },
        py::arg("data"), py::arg("frame"), py::arg("learner") = "hclust",
        py::arg("estimator") = "randomized", py::arg("n_replicates") = 200,
        py::arg("seed") = 1, py::arg("ci_level") = 0.95, py::arg("alpha") = 0.0);

    m.def("baseline_full_stratification", &baseline_full_stratification, py::arg("data"),
          py::arg("frame"));
    m.def("baseline_outcome_regression", &baseline_outcome_regression, py::arg("data"),
          py::arg("frame"));
    m.def("baseline_ipw", &baseline_ipw, py::arg("data"), py::arg("frame"));
    m.def(
        "baseline_aipw",
        [](const Dataset& data, const CausalFrame& frame, bool constant_propensity,
           bool constant_outcome) {
            return baseline_aipw(data, frame, {constant_propensity, constant_outcome});
        },
        py::arg("data"), py::arg("frame"), py::arg("constant_propensity") = false,
        py::arg("constant_outcome") = false);

    m.def(
        "random_staged_tree",
        [](int p, double join_prob, const std::string& dist, std::uint64_t seed) {
            return random_staged_tree(
                p, join_prob, dist == "unif" ? ParamDist::Unif : ParamDist::Exp, seed);
        },
        py::arg("p"), py::arg("join_prob"), py::arg("dist") = "exp", py::arg("seed") = 1);
    m.def("true_ate", &true_ate, py::arg("model"), py::arg("frame"));

    m.def("read_csv_file", &read_csv_file, py::arg("path"),
          py::arg("schema") = std::nullopt);
    m.def("reorder_dataset", &reorder_dataset, py::arg("data"), py::arg("order"));
    m.def(
        "export_dot",
        [](const StagedTreeModel& model, bool show_probs, bool highlight_positivity) {
            return export_dot(model, {show_probs, highlight_positivity});
        },
        py::arg("model"), py::arg("show_probs") = false,
        py::arg("highlight_positivity") = false);
    m.def("write_model", &write_model, py::arg("path"), py::arg("model"));
    m.def("read_model", &read_model, py::arg("path"));
}
