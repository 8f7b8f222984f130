#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stagedcausal/causal.hpp"
#include "stagedcausal/inference.hpp"
#include "stagedcausal/io.hpp"
#include "stagedcausal/learning.hpp"
#include "stagedcausal/simulation.hpp"

namespace sc = stagedcausal;
using nlohmann::json;

namespace {

struct DataFlags {
    std::string data_path;
    std::string order;
    std::string schema_path;
};

void add_data_flags(CLI::App* cmd, DataFlags& flags) {
    cmd->add_option("--data", flags.data_path, "input CSV with header row")->required();
    cmd->add_option("--order", flags.order,
                    "comma-separated causal variable order (levels inferred from data)");
    cmd->add_option("--schema", flags.schema_path,
                    "schema JSON fixing variable order and levels");
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream ss(s);
    while (std::getline(ss, part, ',')) parts.push_back(part);
    return parts;
}

/// Loads the dataset in the explicit causal order. Column order in the CSV is
/// never trusted as the causal order, so --order or --schema is mandatory.
sc::Dataset load_dataset(const DataFlags& flags) {
    if (flags.order.empty() && flags.schema_path.empty())
        throw sc::DataError("the causal variable order must be given via --order or --schema");
    std::optional<std::vector<sc::Variable>> schema;
    std::vector<std::string> order;
    if (!flags.schema_path.empty()) {
        std::ifstream in(flags.schema_path);
        if (!in) throw sc::DataError("cannot open '" + flags.schema_path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        schema = sc::schema_from_json(ss.str());
        for (const auto& v : *schema) order.push_back(v.name);
    }
    if (!flags.order.empty()) order = split_commas(flags.order);
    return sc::reorder_dataset(sc::read_csv_file(flags.data_path, schema), order);
}

int variable_index(const sc::EventTree& tree, const std::string& name) {
    for (int i = 0; i < tree.num_variables(); ++i)
        if (tree.variable(i).name == name) return i;
    throw sc::DataError("no variable named '" + name + "'");
}

sc::CausalFrame make_frame(const sc::EventTree& tree, const std::string& treatment,
                           const std::string& outcome) {
    sc::CausalFrame frame;
    frame.treatment = variable_index(tree, treatment);
    frame.outcome = variable_index(tree, outcome);
    frame.validate(tree);
    return frame;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sc::DataError("cannot write '" + path + "'");
    out << text;
}

json estimate_to_json(const sc::AteEstimate& est) {
    json j;
    j["ate"] = est.ate;
    if (est.ci_lower && est.ci_upper) {
        j["ci"] = {{"lower", *est.ci_lower},
                   {"upper", *est.ci_upper},
                   {"level", est.ci_level},
                   {"n_bootstrap", est.n_bootstrap}};
    }
    if (!est.per_stratum.empty()) {
        json strata = json::array();
        for (const auto& s : est.per_stratum)
            strata.push_back({{"id", s.id},
                              {"weight", s.weight},
                              {"effect", s.effect},
                              {"n_treated", s.n_treated},
                              {"n_control", s.n_control},
                              {"excluded", s.excluded}});
        j["per_stratum"] = std::move(strata);
    }
    j["diagnostics"] = est.diagnostics;
    j["flagged"] = est.flagged;
    return j;
}

sc::ScoredStaging learn_staging(const sc::EventTree& tree, const sc::Dataset& data,
                                const std::string& learner) {
    if (learner == "bhc") return sc::learn_bhc(tree, data);
    if (learner == "hclust") return sc::learn_hclust(tree, data);
    if (learner == "saturated") return sc::bic_score(tree, sc::saturated_staging(tree), data);
    throw sc::DataError("unknown learner '" + learner + "'");
}

sc::StagedTreeModel load_model(const std::string& path) { return sc::read_model(path); }

int run(int argc, char** argv) {
    CLI::App app{"Staged event tree causal estimation"};
    app.require_subcommand(1);

    DataFlags data_flags;
    std::string out_path, replicates_path;
    std::string model_path;
    double alpha = 0.0;
    std::uint64_t seed = 1;

    // ------------------------------------------------------------------ fit
    auto* fit = app.add_subcommand("fit", "fit a staged tree with a fixed staging");
    DataFlags fit_data;
    add_data_flags(fit, fit_data);
    std::string fit_staging = "saturated";
    bool fit_prune = false;
    double fit_alpha = 0.0;
    std::string fit_out;
    fit->add_option("--staging", fit_staging, "saturated | independence")
        ->check(CLI::IsMember({"saturated", "independence"}));
    fit->add_flag("--prune", fit_prune, "drop contexts with no supporting rows");
    fit->add_option("--alpha", fit_alpha, "Dirichlet smoothing pseudo-count");
    fit->add_option("--out", fit_out, "model JSON path (stdout when omitted)");
    fit->callback([&] {
        const sc::Dataset data = load_dataset(fit_data);
        sc::EventTree tree = sc::build_event_tree(data.schema());
        if (fit_prune) tree = sc::prune_unobserved(tree, data);
        const sc::Staging staging = fit_staging == "saturated"
                                        ? sc::saturated_staging(tree)
                                        : sc::independence_staging(tree);
        const auto model = sc::fit_mle(tree, staging, data, fit_alpha);
        write_text(fit_out, sc::model_to_json(model) + "\n");
        if (!fit_out.empty())
            std::cout << "fitted " << fit_staging << " staging on " << data.size()
                      << " rows -> " << fit_out << "\n";
    });

    // ---------------------------------------------------------------- learn
    auto* learn = app.add_subcommand("learn", "learn the stage structure from data");
    DataFlags learn_data;
    add_data_flags(learn, learn_data);
    std::string learn_learner = "bhc";
    bool learn_prune = true;
    double learn_alpha = 0.0;
    std::string learn_out;
    learn->add_option("--learner", learn_learner, "bhc | hclust")
        ->check(CLI::IsMember({"bhc", "hclust"}));
    learn->add_flag("--no-prune{false}", learn_prune, "keep unobserved contexts");
    learn->add_option("--alpha", learn_alpha, "smoothing for the final fit");
    learn->add_option("--out", learn_out, "model JSON path (stdout when omitted)");
    learn->callback([&] {
        const sc::Dataset data = load_dataset(learn_data);
        sc::EventTree tree = sc::build_event_tree(data.schema());
        if (learn_prune) tree = sc::prune_unobserved(tree, data);
        const auto scored = learn_staging(tree, data, learn_learner);
        const auto model = sc::fit_mle(tree, scored.staging, data, learn_alpha);
        write_text(learn_out, sc::model_to_json(model) + "\n");
        std::cerr << learn_learner << ": log-likelihood " << scored.log_likelihood
                  << ", free parameters " << scored.n_free_params << ", BIC " << scored.bic
                  << "\n";
        for (const auto& note : scored.notes) std::cerr << "note: " << note << "\n";
    });

    // ------------------------------------------------------------------ ate
    auto* ate = app.add_subcommand("ate", "estimate the average treatment effect");
    DataFlags ate_data;
    add_data_flags(ate, ate_data);
    std::string ate_treatment, ate_outcome;
    std::string ate_learner = "hclust";
    std::string ate_estimator = "randomized";
    int ate_bootstrap = 0;
    ate->add_option("--treatment", ate_treatment, "treatment variable name")->required();
    ate->add_option("--outcome", ate_outcome, "outcome variable name")->required();
    ate->add_option("--learner", ate_learner, "bhc | hclust | saturated")
        ->check(CLI::IsMember({"bhc", "hclust", "saturated"}));
    ate->add_option("--estimator", ate_estimator, "randomized | ps-stratified")
        ->check(CLI::IsMember({"randomized", "ps-stratified"}));
    ate->add_option("--bootstrap", ate_bootstrap, "bootstrap replicates (0 = point estimate)");
    ate->add_option("--seed", seed, "bootstrap seed");
    ate->add_option("--alpha", alpha, "smoothing for fits");
    ate->add_option("--out", out_path, "JSON report path (stdout when omitted)");
    ate->add_option("--replicates-out", replicates_path, "CSV of bootstrap replicates");
    ate->callback([&] {
        const sc::Dataset data = load_dataset(ate_data);
        sc::EventTree tree = sc::build_event_tree(data.schema());
        const sc::CausalFrame frame = make_frame(tree, ate_treatment, ate_outcome);
        sc::AteEstimate est;
        if (ate_bootstrap > 0) {
            sc::BootstrapConfig config;
            config.learner = ate_learner == "bhc" ? sc::BootstrapConfig::Learner::Bhc
                                                  : sc::BootstrapConfig::Learner::Hclust;
            config.estimator = ate_estimator == "randomized"
                                   ? sc::BootstrapConfig::Estimator::Randomized
                                   : sc::BootstrapConfig::Estimator::PsStratified;
            config.n_replicates = ate_bootstrap;
            config.seed = seed;
            config.alpha = alpha;
            est = sc::bootstrap_ate(data, frame, config);
        } else {
            tree = sc::prune_unobserved(tree, data);
            const auto scored = learn_staging(tree, data, ate_learner);
            const auto model = sc::fit_mle(tree, scored.staging, data, alpha);
            if (ate_estimator == "randomized") {
                est = sc::ate_randomized(sc::randomize_treatment(model, frame), frame);
            } else {
                const auto ps = sc::ps_stratify(model, frame, data);
                est = sc::ate_ps_stratified(ps, data, frame);
            }
        }
        json report = estimate_to_json(est);
        report["estimator"] = ate_estimator;
        report["learner"] = ate_learner;
        write_text(out_path, report.dump(2) + "\n");
        if (!replicates_path.empty()) {
            std::ofstream rout(replicates_path, std::ios::binary);
            if (!rout) throw sc::DataError("cannot write '" + replicates_path + "'");
            sc::write_replicates_csv(rout, est.replicates);
        }
    });

    // ------------------------------------------------------------ bootstrap
    auto* boot = app.add_subcommand("bootstrap", "bootstrap ATE with confidence interval");
    DataFlags boot_data;
    add_data_flags(boot, boot_data);
    std::string boot_treatment, boot_outcome;
    std::string boot_learner = "hclust";
    std::string boot_estimator = "ps-stratified";
    int boot_b = 200;
    double boot_ci = 0.95;
    boot->add_option("--treatment", boot_treatment, "treatment variable name")->required();
    boot->add_option("--outcome", boot_outcome, "outcome variable name")->required();
    boot->add_option("--learner", boot_learner, "bhc | hclust")
        ->check(CLI::IsMember({"bhc", "hclust"}));
    boot->add_option("--estimator", boot_estimator, "randomized | ps-stratified")
        ->check(CLI::IsMember({"randomized", "ps-stratified"}));
    boot->add_option("--bootstrap", boot_b, "number of replicates");
    boot->add_option("--ci-level", boot_ci, "confidence level");
    boot->add_option("--seed", seed, "bootstrap seed");
    boot->add_option("--alpha", alpha, "smoothing for fits");
    boot->add_option("--out", out_path, "JSON report path (stdout when omitted)");
    boot->add_option("--replicates-out", replicates_path, "CSV of bootstrap replicates");
    boot->callback([&] {
        const sc::Dataset data = load_dataset(boot_data);
        const sc::EventTree tree = sc::build_event_tree(data.schema());
        const sc::CausalFrame frame = make_frame(tree, boot_treatment, boot_outcome);
        sc::BootstrapConfig config;
        config.learner = boot_learner == "bhc" ? sc::BootstrapConfig::Learner::Bhc
                                               : sc::BootstrapConfig::Learner::Hclust;
        config.estimator = boot_estimator == "randomized"
                               ? sc::BootstrapConfig::Estimator::Randomized
                               : sc::BootstrapConfig::Estimator::PsStratified;
        config.n_replicates = boot_b;
        config.seed = seed;
        config.ci_level = boot_ci;
        config.alpha = alpha;
        const auto est = sc::bootstrap_ate(data, frame, config);
        json report = estimate_to_json(est);
        report["estimator"] = boot_estimator;
        report["learner"] = boot_learner;
        write_text(out_path, report.dump(2) + "\n");
        if (!replicates_path.empty()) {
            std::ofstream rout(replicates_path, std::ios::binary);
            if (!rout) throw sc::DataError("cannot write '" + replicates_path + "'");
            sc::write_replicates_csv(rout, est.replicates);
        }
    });

    // ----------------------------------------------------------------- cate
    auto* cate_cmd = app.add_subcommand("cate", "context-specific treatment effect");
    std::string cate_model, cate_treatment, cate_outcome, cate_z;
    cate_cmd->add_option("--model", cate_model, "model JSON")->required();
    cate_cmd->add_option("--treatment", cate_treatment, "treatment variable name")->required();
    cate_cmd->add_option("--outcome", cate_outcome, "outcome variable name")->required();
    cate_cmd->add_option("--z", cate_z, "comma-separated covariate level labels")->required();
    cate_cmd->add_option("--out", out_path, "JSON output path (stdout when omitted)");
    cate_cmd->callback([&] {
        const auto model = load_model(cate_model);
        const sc::CausalFrame frame =
            make_frame(model.tree(), cate_treatment, cate_outcome);
        const auto labels = split_commas(cate_z);
        if (static_cast<int>(labels.size()) != frame.treatment)
            throw sc::DataError("--z must give one label per covariate (" +
                                std::to_string(frame.treatment) + " expected)");
        std::vector<int> z;
        for (std::size_t j = 0; j < labels.size(); ++j)
            z.push_back(model.tree().variable(static_cast<int>(j)).level_code(labels[j]));
        json report;
        report["cate"] = sc::cate(model, frame, z);
        report["z"] = labels;
        write_text(out_path, report.dump(2) + "\n");
    });

    // ------------------------------------------------------------ positivity
    auto* pos = app.add_subcommand("positivity", "treatment overlap diagnostics");
    DataFlags pos_data;
    add_data_flags(pos, pos_data);
    std::string pos_treatment, pos_outcome, pos_model;
    pos->add_option("--treatment", pos_treatment, "treatment variable name")->required();
    pos->add_option("--outcome", pos_outcome, "outcome variable name")->required();
    pos->add_option("--model", pos_model, "optional model JSON supplying a staging");
    pos->add_option("--out", out_path, "JSON report path (stdout when omitted)");
    pos->callback([&] {
        const sc::Dataset data = load_dataset(pos_data);
        const sc::EventTree tree = sc::build_event_tree(data.schema());
        const sc::CausalFrame frame = make_frame(tree, pos_treatment, pos_outcome);
        std::optional<sc::Staging> staging;
        if (!pos_model.empty()) staging = load_model(pos_model).staging();
        const auto report = sc::positivity_report(data, frame, staging);
        auto entries_json = [](const std::vector<sc::PositivityEntry>& entries) {
            json arr = json::array();
            for (const auto& e : entries) {
                const char* flag = e.flag == sc::PositivityEntry::Flag::Ok ? "ok"
                                   : e.flag == sc::PositivityEntry::Flag::OneSidedTreated
                                       ? "one_sided_treated"
                                   : e.flag == sc::PositivityEntry::Flag::OneSidedControl
                                       ? "one_sided_control"
                                       : "unobserved";
                arr.push_back({{"label", e.label},
                               {"n_treated", e.n_treated},
                               {"n_control", e.n_control},
                               {"flag", flag}});
            }
            return arr;
        };
        json j;
        j["contexts"] = entries_json(report.contexts);
        if (staging) j["strata"] = entries_json(report.strata);
        j["any_flagged"] = report.any_flagged;
        write_text(out_path, j.dump(2) + "\n");
    });

    // ------------------------------------------------------------- simulate
    auto* sim = app.add_subcommand("simulate", "estimator comparison experiment");
    std::string sim_generator = "sevt";
    std::vector<double> sim_join{0.0, 0.5, 0.8};
    std::vector<std::string> sim_dist{"exp", "unif"};
    std::vector<std::uint64_t> sim_n{100, 500, 1000, 10000};
    std::vector<std::string> sim_estimators;
    int sim_p = 8, sim_reps = 20;
    double sim_edge = 0.3;
    sim->add_option("--generator", sim_generator, "sevt | dag")
        ->check(CLI::IsMember({"sevt", "dag"}));
    sim->add_option("--join", sim_join, "stage-join probabilities (sevt)");
    sim->add_option("--edge-prob", sim_edge, "edge probability (dag)");
    sim->add_option("--dist", sim_dist, "parameter distributions: exp unif");
    sim->add_option("--p", sim_p, "total binary variables");
    sim->add_option("--n", sim_n, "sample sizes");
    sim->add_option("--reps", sim_reps, "repetitions per cell");
    sim->add_option("--estimators", sim_estimators,
                    "subset of bhc hclust full oracle q.model ipw aipw");
    sim->add_option("--seed", seed, "experiment seed");
    sim->add_option("--out", out_path, "long-format results CSV")->required();
    sim->callback([&] {
        sc::SimConfig config;
        config.generator =
            sim_generator == "dag" ? sc::GeneratorKind::Dag : sc::GeneratorKind::Sevt;
        config.p = sim_p;
        config.join_probs = sim_join;
        config.dag_edge_prob = sim_edge;
        config.param_dists.clear();
        for (const auto& d : sim_dist) {
            if (d == "exp") config.param_dists.push_back(sc::ParamDist::Exp);
            else if (d == "unif") config.param_dists.push_back(sc::ParamDist::Unif);
            else throw sc::DataError("unknown parameter distribution '" + d + "'");
        }
        config.sample_sizes = sim_n;
        config.repetitions = sim_reps;
        config.seed = seed;
        if (!sim_estimators.empty()) config.estimators = sim_estimators;
        const auto results = sc::run_experiment(config);
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw sc::DataError("cannot write '" + out_path + "'");
        sc::write_records_csv(out, results.records);
        std::cout << "wrote " << results.records.size() << " records -> " << out_path
                  << "\n";
        for (const auto& row : results.summary)
            std::cout << row.generator << " pi=" << row.join_prob << " " << row.param_dist
                      << " n=" << row.n << " " << row.estimator
                      << " median|err|=" << row.median_abs_error << "\n";
    });

    // ------------------------------------------------------------ export-dot
    auto* dot = app.add_subcommand("export-dot", "render a model as Graphviz DOT");
    std::string dot_model;
    bool dot_probs = false, dot_highlight = false;
    dot->add_option("--model", dot_model, "model JSON")->required();
    dot->add_flag("--probs", dot_probs, "annotate edges with probabilities");
    dot->add_flag("--highlight", dot_highlight, "red-border undefined stages");
    dot->add_option("--out", out_path, "DOT output path (stdout when omitted)");
    dot->callback([&] {
        const auto model = load_model(dot_model);
        write_text(out_path, sc::export_dot(model, {.show_probs = dot_probs,
                                                    .highlight_positivity = dot_highlight}));
    });

    // ------------------------------------------------------------- intervene
    auto* iv = app.add_subcommand("intervene", "apply a structural do-intervention");
    std::vector<std::string> iv_do;
    iv->add_option("--model", model_path, "model JSON")->required();
    iv->add_option("--do", iv_do, "VAR=LEVEL assignments (repeatable)")->required();
    iv->add_option("--out", out_path, "model JSON path (stdout when omitted)");
    iv->callback([&] {
        const auto model = load_model(model_path);
        sc::InterventionSpec spec;
        for (const auto& assignment : iv_do) {
            const auto eq = assignment.find('=');
            if (eq == std::string::npos)
                throw sc::DataError("--do expects VAR=LEVEL, got '" + assignment + "'");
            const int var = variable_index(model.tree(), assignment.substr(0, eq));
            spec.assignments[var] =
                model.tree().variable(var).level_code(assignment.substr(eq + 1));
        }
        write_text(out_path, sc::model_to_json(sc::intervene(model, spec)) + "\n");
    });

    // ---------------------------------------------------------------- sample
    auto* smp = app.add_subcommand("sample", "draw rows from a model");
    std::uint64_t smp_n = 0;
    bool smp_allow_undefined = false;
    smp->add_option("--model", model_path, "model JSON")->required();
    smp->add_option("--n", smp_n, "number of rows")->required();
    smp->add_option("--seed", seed, "sampling seed");
    smp->add_flag("--allow-undefined", smp_allow_undefined,
                  "sample even when some stages are undefined");
    smp->add_option("--out", out_path, "CSV output path (stdout when omitted)");
    smp->callback([&] {
        const auto model = load_model(model_path);
        const sc::Dataset data = sc::sample(model, smp_n, seed, smp_allow_undefined);
        std::ostringstream out;
        sc::write_csv(out, data);
        write_text(out_path, out.str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const sc::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sc::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sc::ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
